#include "augcn/gcn.hpp"

#include <stdexcept>

namespace augcn {

GcnParams GcnParams::init(std::size_t d0, std::size_t d1, std::size_t d2, double dropout_rate,
                          ParameterStore& store, SeededRng& rng) {
    GcnParams p;
    p.w0 = store.create("gcn/w0", {d0, d1}, rng);
    p.w1 = store.create("gcn/w1", {d1, d2}, rng);
    p.dropout_rate = dropout_rate;
    return p;
}

GcnParams GcnParams::bind(double dropout_rate, const ParameterStore& store) {
    GcnParams p;
    p.w0 = store.get("gcn/w0");
    p.w1 = store.get("gcn/w1");
    p.dropout_rate = dropout_rate;
    return p;
}

FcnParams FcnParams::init(std::size_t flat, std::size_t classes, ParameterStore& store,
                          SeededRng& rng) {
    FcnParams p;
    p.w = store.create("fcn/w", {flat, classes}, rng);
    p.b = store.create_zeros("fcn/b", {classes});
    return p;
}

FcnParams FcnParams::bind(const ParameterStore& store) {
    FcnParams p;
    p.w = store.get("fcn/w");
    p.b = store.get("fcn/b");
    return p;
}

Var gcn_layer(const Tensor& g, const Var& z, const Var& w, double rate, bool train,
              SeededRng& rng, std::size_t batch) {
    Var pre = matmul(graph_matmul(g, z, batch), w);
    return relu(dropout(pre, rate, train, rng));
}

Var gcn_forward(const Tensor& g, const Var& z0, const GcnParams& gcn, const FcnParams& fcn,
                bool train, SeededRng& rng, std::size_t batch) {
    const std::size_t r = g.dim(0);
    Var z1 = gcn_layer(g, z0, gcn.w0, gcn.dropout_rate, train, rng, batch);
    Var z2 = gcn_layer(g, z1, gcn.w1, gcn.dropout_rate, train, rng, batch);
    // Row-major flatten by node then feature: each sample's R x d2 block is
    // already contiguous, so this is a pure reshape.
    const std::size_t d2 = z2->value.dim(1);
    if (fcn.w->value.dim(0) != r * d2) {
        throw std::invalid_argument("fcn input width " + std::to_string(fcn.w->value.dim(0)) +
                                    " != R*d2 = " + std::to_string(r * d2));
    }
    Var flat = reshape(z2, {batch, r * d2});
    return sigmoid(add_rowvec(matmul(flat, fcn.w), fcn.b));
}

Prediction predict(const Tensor& g, const Tensor& z0, const GcnParams& gcn,
                   const FcnParams& fcn) {
    SeededRng unused(0);
    Var out = gcn_forward(g, constant(z0), gcn, fcn, /*train=*/false, unused);
    return Prediction{out->value.raw()};
}

}  // namespace augcn
