#pragma once

#include <vector>

#include "augcn/autodiff.hpp"
#include "augcn/tensor.hpp"

namespace augcn {

/// Inverse-occurrence class weights, normalized so they sum to C.
struct ClassWeights {
    Tensor w;      // C positive weights
    Tensor rates;  // the occurrence rates they came from
};

/// w_i = (1/r_i) * C / sum_j (1/r_j). Every rate must be positive; when
/// `au_ids` is given, errors name the offending AU.
ClassWeights class_weights(const std::vector<double>& rates,
                           const std::vector<int>* au_ids = nullptr);

/// Imbalance-weighted multi-label cross entropy,
///   -(1/C) sum_i w_i [y_i log p_i + (1-y_i) log(1-p_i)],
/// averaged over rows when given a batch. Probabilities are clamped to
/// [1e-7, 1-1e-7]. Accepts shape {C} or {rows, C}.
Var weighted_softmax_loss(const Tensor& y, const Var& yhat, const ClassWeights& w);
double weighted_softmax_loss(const Tensor& y, const Tensor& yhat, const ClassWeights& w);

/// Weighted soft-Dice loss,
///   (1/C) sum_i w_i (1 - (2 y_i p_i + eps) / (y_i^2 + p_i^2 + eps)),
/// averaged over rows when given a batch. eps must be positive.
Var dice_loss(const Tensor& y, const Var& yhat, const ClassWeights& w, double eps);
double dice_loss(const Tensor& y, const Tensor& yhat, const ClassWeights& w, double eps);

/// L_au: softmax term plus lambda2 times the Dice term.
Var au_loss(const Var& softmax_term, const Var& dice_term, double lambda2);
double au_loss(double softmax_term, double dice_term, double lambda2);

}  // namespace augcn
