#include "augcn/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace augcn {

namespace {

// Views a {C} vector as a 1 x C matrix; passes {rows, C} through.
Tensor as_rows(const Tensor& t) {
    if (t.rank() == 1) return Tensor({1, t.size()}, t.raw());
    if (t.rank() == 2) return t;
    throw std::invalid_argument("expected a vector or matrix, got " + t.shape_str());
}

Var as_rows(const Var& v) {
    if (v->value.rank() == 1) return reshape(v, {1, v->value.size()});
    return v;
}

}  // namespace

ClassWeights class_weights(const std::vector<double>& rates, const std::vector<int>* au_ids) {
    if (rates.empty()) throw std::invalid_argument("class_weights: no rates");
    const std::size_t c = rates.size();
    double inv_sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        if (rates[i] <= 0.0) {
            std::string who = au_ids ? "AU " + std::to_string((*au_ids)[i])
                                     : "class " + std::to_string(i);
            throw std::runtime_error("occurrence rate of " + who +
                                     " is not positive; cannot weight a class that never occurs");
        }
        inv_sum += 1.0 / rates[i];
    }
    ClassWeights out;
    out.rates = Tensor({c}, rates);
    out.w = Tensor({c});
    for (std::size_t i = 0; i < c; ++i) {
        out.w[i] = (1.0 / rates[i]) * static_cast<double>(c) / inv_sum;
    }
    return out;
}

Var weighted_softmax_loss(const Tensor& y, const Var& yhat, const ClassWeights& w) {
    return bce_mean(as_rows(yhat), as_rows(y), w.w);
}

double weighted_softmax_loss(const Tensor& y, const Tensor& yhat, const ClassWeights& w) {
    return weighted_softmax_loss(y, constant(yhat), w)->value.item();
}

Var dice_loss(const Tensor& y, const Var& yhat_in, const ClassWeights& w, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("dice_loss: eps must be positive");
    Var yhat = as_rows(yhat_in);
    Tensor targets = as_rows(y);
    if (!yhat->value.same_shape(targets)) {
        throw std::invalid_argument("dice_loss: predictions " + yhat->value.shape_str() +
                                    " vs targets " + Tensor::shape_str(targets.shape()));
    }
    const std::size_t rows = targets.dim(0), c = targets.dim(1);
    if (w.w.size() != c) {
        throw std::invalid_argument("dice_loss: weight length " + std::to_string(w.w.size()) +
                                    " != classes " + std::to_string(c));
    }
    const double norm = 1.0 / static_cast<double>(rows * c);
    double loss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double yy = targets.at(i, j);
            const double p = yhat->value.at(i, j);
            loss += w.w[j] * (1.0 - (2.0 * yy * p + eps) / (yy * yy + p * p + eps));
        }
    }
    Tensor weights = w.w;
    return make_op(Tensor::scalar(loss * norm), {yhat},
                   [targets, weights, eps, rows, c, norm](Node& n) {
                       Node& yhat = *n.parents[0];
                       const double up = n.grad[0];
                       for (std::size_t i = 0; i < rows; ++i) {
                           for (std::size_t j = 0; j < c; ++j) {
                               const double yy = targets.at(i, j);
                               const double p = yhat.value.at(i, j);
                               const double den = yy * yy + p * p + eps;
                               const double d =
                                   (2.0 * yy * den - (2.0 * yy * p + eps) * 2.0 * p) /
                                   (den * den);
                               yhat.grad.at(i, j) -= up * norm * weights[j] * d;
                           }
                       }
                   });
}

double dice_loss(const Tensor& y, const Tensor& yhat, const ClassWeights& w, double eps) {
    return dice_loss(y, constant(yhat), w, eps)->value.item();
}

Var au_loss(const Var& softmax_term, const Var& dice_term, double lambda2) {
    if (lambda2 < 0.0) throw std::invalid_argument("lambda2 must be nonnegative");
    return add(softmax_term, scale(dice_term, lambda2));
}

double au_loss(double softmax_term, double dice_term, double lambda2) {
    if (lambda2 < 0.0) throw std::invalid_argument("lambda2 must be nonnegative");
    return softmax_term + lambda2 * dice_term;
}

}  // namespace augcn
