#include "augcn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

namespace augcn {

namespace {

void require_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(who) + ": expected a rank-2 tensor, got " +
                                    t.shape_str());
    }
}

// out += a * b, all rank-2, shapes already validated
void mm_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = pa[i * k + l];
            if (av == 0.0) continue;
            const double* brow = pb + l * n;
            double* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out += a * b^T
void mm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            const double* ra = a.data() + i * k;
            const double* rb = b.data() + j * k;
            for (std::size_t l = 0; l < k; ++l) s += ra[l] * rb[l];
            out.at(i, j) += s;
        }
    }
}

// out += a^T * b
void mm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    for (std::size_t l = 0; l < k; ++l) {
        const double* ra = a.data() + l * m;
        const double* rb = b.data() + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ra[i];
            if (av == 0.0) continue;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * rb[j];
        }
    }
}

}  // namespace

Var constant(Tensor v) { return std::make_shared<Node>(std::move(v), false); }

Var parameter(Tensor v) { return std::make_shared<Node>(std::move(v), true); }

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    bool req = false;
    for (const Var& p : parents) req = req || p->requires_grad;
    Var n = std::make_shared<Node>(std::move(value), req);
    n->parents = std::move(parents);
    if (req) n->backprop = std::move(backprop);
    return n;
}

Var matmul(const Var& a, const Var& b) {
    require_rank2(a->value, "matmul");
    require_rank2(b->value, "matmul");
    if (a->value.dim(1) != b->value.dim(0)) {
        throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                    a->value.shape_str() + " x " + b->value.shape_str());
    }
    Tensor out({a->value.dim(0), b->value.dim(1)});
    mm_acc(a->value, b->value, out);
    return make_op(std::move(out), {a, b}, [](Node& n) {
        Node& a = *n.parents[0];
        Node& b = *n.parents[1];
        if (a.requires_grad) mm_nt_acc(n.grad, b.value, a.grad);  // dA = dC B^T
        if (b.requires_grad) mm_tn_acc(a.value, n.grad, b.grad);  // dB = A^T dC
    });
}

Var add(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) {
        throw std::invalid_argument("add: shapes differ, " + a->value.shape_str() + " vs " +
                                    b->value.shape_str());
    }
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        for (int k = 0; k < 2; ++k) {
            Node& p = *n.parents[k];
            if (!p.requires_grad) continue;
            for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
        }
    });
}

Var add_rowvec(const Var& m, const Var& row) {
    require_rank2(m->value, "add_rowvec");
    const std::size_t c = m->value.dim(1);
    if (row->value.size() != c) {
        throw std::invalid_argument("add_rowvec: row length " +
                                    std::to_string(row->value.size()) +
                                    " does not match matrix " + m->value.shape_str());
    }
    Tensor out = m->value;
    const std::size_t r = out.dim(0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += row->value[j];
    return make_op(std::move(out), {m, row}, [r, c](Node& n) {
        Node& m = *n.parents[0];
        Node& v = *n.parents[1];
        if (m.requires_grad) {
            for (std::size_t i = 0; i < n.grad.size(); ++i) m.grad[i] += n.grad[i];
        }
        if (v.requires_grad) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) v.grad[j] += n.grad[i * c + j];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) {
        throw std::invalid_argument("sub: shapes differ, " + a->value.shape_str() + " vs " +
                                    b->value.shape_str());
    }
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        Node& a = *n.parents[0];
        Node& b = *n.parents[1];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            if (a.requires_grad) a.grad[i] += n.grad[i];
            if (b.requires_grad) b.grad[i] -= n.grad[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a->value;
    for (double& x : out.raw()) x *= s;
    return make_op(std::move(out), {a}, [s](Node& n) {
        Node& a = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += s * n.grad[i];
    });
}

Var relu(const Var& x) {
    Tensor out = x->value;
    for (double& v : out.raw()) v = v > 0.0 ? v : 0.0;
    return make_op(std::move(out), {x}, [](Node& n) {
        Node& x = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            if (x.value[i] > 0.0) x.grad[i] += n.grad[i];
        }
    });
}

Var sigmoid(const Var& x) {
    Tensor out = x->value;
    for (double& v : out.raw()) {
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    return make_op(std::move(out), {x}, [](Node& n) {
        Node& x = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            double y = n.value[i];
            x.grad[i] += n.grad[i] * y * (1.0 - y);
        }
    });
}

Var abs(const Var& x) {
    Tensor out = x->value;
    for (double& v : out.raw()) v = std::fabs(v);
    return make_op(std::move(out), {x}, [](Node& n) {
        Node& x = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            double v = x.value[i];
            if (v > 0.0)
                x.grad[i] += n.grad[i];
            else if (v < 0.0)
                x.grad[i] -= n.grad[i];
        }
    });
}

Var sum(const Var& x) {
    double s = 0.0;
    for (double v : x->value.raw()) s += v;
    return make_op(Tensor::scalar(s), {x}, [](Node& n) {
        Node& x = *n.parents[0];
        for (std::size_t i = 0; i < x.grad.size(); ++i) x.grad[i] += n.grad[0];
    });
}

Var mean(const Var& x) {
    if (x->value.size() == 0) throw std::invalid_argument("mean of an empty tensor");
    double s = 0.0;
    for (double v : x->value.raw()) s += v;
    const double inv = 1.0 / static_cast<double>(x->value.size());
    return make_op(Tensor::scalar(s * inv), {x}, [inv](Node& n) {
        Node& x = *n.parents[0];
        for (std::size_t i = 0; i < x.grad.size(); ++i) x.grad[i] += inv * n.grad[0];
    });
}

Var reshape(const Var& x, std::vector<std::size_t> shape) {
    Tensor out(std::move(shape), x->value.raw());
    return make_op(std::move(out), {x}, [](Node& n) {
        Node& x = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) x.grad[i] += n.grad[i];
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: no rows");
    const std::size_t d = rows[0]->value.size();
    for (const Var& r : rows) {
        if (r->value.size() != d) {
            throw std::invalid_argument("stack_rows: row lengths differ (" +
                                        std::to_string(d) + " vs " +
                                        std::to_string(r->value.size()) + ")");
        }
    }
    Tensor out({rows.size(), d});
    for (std::size_t k = 0; k < rows.size(); ++k)
        std::copy_n(rows[k]->value.data(), d, out.data() + k * d);
    std::vector<Var> parents(rows.begin(), rows.end());
    return make_op(std::move(out), std::move(parents), [d](Node& n) {
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
            Node& p = *n.parents[k];
            if (!p.requires_grad) continue;
            for (std::size_t i = 0; i < d; ++i) p.grad[i] += n.grad[k * d + i];
        }
    });
}

Var stack_roi_rows(const std::vector<Var>& mats, std::size_t batch) {
    if (mats.empty()) throw std::invalid_argument("stack_roi_rows: no inputs");
    const std::size_t d = mats[0]->value.dim(1);
    const std::size_t num = mats.size();
    for (const Var& m : mats) {
        require_rank2(m->value, "stack_roi_rows");
        if (m->value.dim(0) != batch || m->value.dim(1) != d) {
            throw std::invalid_argument("stack_roi_rows: expected every input to be " +
                                        Tensor::shape_str({batch, d}) + ", got " +
                                        m->value.shape_str());
        }
    }
    Tensor out({batch * num, d});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t r = 0; r < num; ++r)
            std::copy_n(mats[r]->value.data() + b * d, d, out.data() + (b * num + r) * d);
    std::vector<Var> parents(mats.begin(), mats.end());
    return make_op(std::move(out), std::move(parents), [batch, num, d](Node& n) {
        for (std::size_t r = 0; r < num; ++r) {
            Node& p = *n.parents[r];
            if (!p.requires_grad) continue;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* g = n.grad.data() + (b * num + r) * d;
                double* pg = p.grad.data() + b * d;
                for (std::size_t i = 0; i < d; ++i) pg[i] += g[i];
            }
        }
    });
}

Var graph_matmul(const Tensor& g, const Var& z, std::size_t batch) {
    require_rank2(g, "graph_matmul");
    require_rank2(z->value, "graph_matmul");
    const std::size_t r = g.dim(0);
    if (g.dim(1) != r) {
        throw std::invalid_argument("graph_matmul: adjacency must be square, got " +
                                    g.shape_str());
    }
    if (z->value.dim(0) != batch * r) {
        throw std::invalid_argument("graph_matmul: feature rows " +
                                    std::to_string(z->value.dim(0)) + " != batch " +
                                    std::to_string(batch) + " x nodes " + std::to_string(r));
    }
    const std::size_t d = z->value.dim(1);
    Tensor out({batch * r, d});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* zb = z->value.data() + b * r * d;
        double* ob = out.data() + b * r * d;
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < r; ++j) {
                const double gv = g[i * r + j];
                if (gv == 0.0) continue;
                const double* zrow = zb + j * d;
                double* orow = ob + i * d;
                for (std::size_t c = 0; c < d; ++c) orow[c] += gv * zrow[c];
            }
        }
    }
    return make_op(std::move(out), {z}, [g, batch, r, d](Node& n) {
        Node& z = *n.parents[0];
        // dZ = G^T dOut, per block
        for (std::size_t b = 0; b < batch; ++b) {
            const double* gb = n.grad.data() + b * r * d;
            double* zg = z.grad.data() + b * r * d;
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < r; ++j) {
                    const double gv = g[i * r + j];
                    if (gv == 0.0) continue;
                    const double* grow = gb + i * d;
                    double* zrow = zg + j * d;
                    for (std::size_t c = 0; c < d; ++c) zrow[c] += gv * grow[c];
                }
            }
        }
    });
}

Var dropout(const Var& x, double rate, bool train, SeededRng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw std::invalid_argument("dropout: rate must be in [0, 1), got " +
                                    std::to_string(rate));
    }
    if (!train || rate == 0.0) {
        // Identity; no rng draws are consumed.
        return make_op(x->value, {x}, [](Node& n) {
            Node& x = *n.parents[0];
            for (std::size_t i = 0; i < n.grad.size(); ++i) x.grad[i] += n.grad[i];
        });
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor mask(x->value.shape());
    for (double& m : mask.raw()) m = rng.uniform() < rate ? 0.0 : keep_scale;
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return make_op(std::move(out), {x}, [mask = std::move(mask)](Node& n) {
        Node& x = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) x.grad[i] += mask[i] * n.grad[i];
    });
}

Var bce_mean(const Var& probs, const Tensor& targets, const Tensor& col_weights,
             double delta) {
    require_rank2(probs->value, "bce_mean");
    if (!probs->value.same_shape(targets)) {
        throw std::invalid_argument("bce_mean: probabilities " + probs->value.shape_str() +
                                    " vs targets " + Tensor::shape_str(targets.shape()));
    }
    const std::size_t rows = probs->value.dim(0), c = probs->value.dim(1);
    if (!col_weights.empty() && col_weights.size() != c) {
        throw std::invalid_argument("bce_mean: weight length " +
                                    std::to_string(col_weights.size()) + " != classes " +
                                    std::to_string(c));
    }
    const double norm = 1.0 / static_cast<double>(rows * c);
    double loss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double w = col_weights.empty() ? 1.0 : col_weights[j];
            const double y = targets.at(i, j);
            const double p = std::clamp(probs->value.at(i, j), delta, 1.0 - delta);
            loss -= w * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        }
    }
    return make_op(Tensor::scalar(loss * norm), {probs},
                   [targets, col_weights, delta, rows, c, norm](Node& n) {
                       Node& probs = *n.parents[0];
                       const double up = n.grad[0];
                       for (std::size_t i = 0; i < rows; ++i) {
                           for (std::size_t j = 0; j < c; ++j) {
                               const double raw = probs.value.at(i, j);
                               if (raw < delta || raw > 1.0 - delta) continue;
                               const double w = col_weights.empty() ? 1.0 : col_weights[j];
                               const double y = targets.at(i, j);
                               probs.grad.at(i, j) -=
                                   up * norm * w * (y / raw - (1.0 - y) / (1.0 - raw));
                           }
                       }
                   });
}

void backward(const Var& root) {
    if (!root) throw std::invalid_argument("backward: null root");
    if (root->value.size() != 1) {
        throw std::invalid_argument("backward: root must be a scalar, got " +
                                    root->value.shape_str());
    }
    // Iterative post-order DFS; the reversed order is a valid topological
    // order for the gradient sweep.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->requires_grad && n->backprop) n->backprop(*n);
    }
}

Var ParameterStore::insert(const std::string& name, Tensor value) {
    auto [it, ok] = entries_.emplace(name, nullptr);
    if (!ok) throw std::invalid_argument("parameter '" + name + "' already exists");
    it->second = parameter(std::move(value));
    return it->second;
}

Var ParameterStore::create(const std::string& name, std::vector<std::size_t> shape,
                           SeededRng& rng) {
    if (shape.size() != 2) {
        throw std::invalid_argument("ParameterStore::create expects a rank-2 shape for '" +
                                    name + "'");
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
    Tensor t(shape);
    for (double& v : t.raw()) v = rng.uniform(-limit, limit);
    return insert(name, std::move(t));
}

Var ParameterStore::create_zeros(const std::string& name, std::vector<std::size_t> shape) {
    return insert(name, Tensor(std::move(shape)));
}

Var ParameterStore::adopt(const std::string& name, Tensor value) {
    return insert(name, std::move(value));
}

Var ParameterStore::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return it->second;
}

bool ParameterStore::contains(const std::string& name) const {
    return entries_.count(name) != 0;
}

void ParameterStore::zero_grad() {
    for (auto& [name, p] : entries_) p->zero_grad();
}

std::vector<Var> ParameterStore::values() const {
    std::vector<Var> out;
    out.reserve(entries_.size());
    for (const auto& [name, p] : entries_) out.push_back(p);
    return out;
}

double grad_check(const std::function<Var()>& loss_fn, const std::vector<Var>& params,
                  double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
    auto eval = [&]() {
        Var v = loss_fn();
        return v->value.item();
    };
    const double f0 = eval();
    const double f1 = eval();
    if (std::memcmp(&f0, &f1, sizeof(double)) != 0) {
        throw std::runtime_error(
            "grad_check: loss function is not deterministic (two forward passes disagree)");
    }

    for (const Var& p : params) p->zero_grad();
    backward(loss_fn());
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const Var& p : params) analytic.push_back(p->grad);

    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& value = params[pi]->value;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double orig = value[i];
            value[i] = orig + eps;
            const double fp = eval();
            value[i] = orig - eps;
            const double fm = eval();
            value[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double rel = std::fabs(a - numeric) /
                               std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace augcn
