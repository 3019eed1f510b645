#pragma once

#include <cstddef>
#include <vector>

#include "augcn/autodiff.hpp"
#include "augcn/tensor.hpp"

namespace augcn {

/// Weights of the two graph-convolution layers. The layers carry no bias
/// terms; dropout is applied to the pre-activation, then ReLU.
struct GcnParams {
    Var w0;  // d0 x d1
    Var w1;  // d1 x d2
    double dropout_rate = 0.0;

    static GcnParams init(std::size_t d0, std::size_t d1, std::size_t d2, double dropout_rate,
                          ParameterStore& store, SeededRng& rng);
    static GcnParams bind(double dropout_rate, const ParameterStore& store);
};

/// Fully connected detection head over the flattened node features.
struct FcnParams {
    Var w;  // (R*d2) x C
    Var b;  // C

    static FcnParams init(std::size_t flat, std::size_t classes, ParameterStore& store,
                          SeededRng& rng);
    static FcnParams bind(const ParameterStore& store);
};

/// Per-AU probabilities for one sample.
struct Prediction {
    std::vector<double> yhat;
};

/// One graph convolution: ReLU(dropout(G x Z x W)). `z` holds `batch`
/// stacked R x d_in blocks; with batch = 1 this is the single-sample layer.
Var gcn_layer(const Tensor& g, const Var& z, const Var& w, double rate, bool train,
              SeededRng& rng, std::size_t batch = 1);

/// Two graph convolutions, row-major flatten, and the sigmoid FCN head.
/// Input z0 is (batch*R) x d0; the result is batch x C probabilities.
Var gcn_forward(const Tensor& g, const Var& z0, const GcnParams& gcn, const FcnParams& fcn,
                bool train, SeededRng& rng, std::size_t batch = 1);

/// Single-sample convenience wrapper returning the probability vector.
Prediction predict(const Tensor& g, const Tensor& z0, const GcnParams& gcn,
                   const FcnParams& fcn);

}  // namespace augcn
