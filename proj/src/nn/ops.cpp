#include "saw/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "saw/errors.hpp"

namespace saw::nn {

namespace {

Tape& tape_of(Var a) {
    if (a.tape == nullptr) throw InputError("variable is not attached to a tape");
    return *a.tape;
}

void same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw InputError("variables belong to different tapes");
}

void require_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

// Adds `g` into the gradient buffer of `id` if it requires grad.
void accumulate(Tape& tape, std::size_t id, const Tensor& g) {
    if (!tape.requires_grad(id)) return;
    Tensor& dst = tape.grad_buffer(id);
    const auto src = g.data();
    auto out = dst.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += src[i];
}

template <typename F>
Var unary_elementwise(Var a, F&& f, Tape::BackwardFn&& bw) {
    const Tensor& x = a.value();
    Tensor y = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return tape_of(a).record(std::move(y), a.requires_grad(), std::move(bw));
}

}  // namespace

Var matmul(Var a, Var b) {
    same_tape(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_rank2(A, "matmul");
    require_rank2(B, "matmul");
    if (A.cols() != B.rows()) {
        throw ShapeError("matmul: shapes " + shape_str(A.shape()) + " and " + shape_str(B.shape()) +
                         " are incompatible");
    }
    Tensor C({A.rows(), B.cols()});
    C.mat().noalias() = A.mat() * B.mat();
    const std::size_t ia = a.id, ib = b.id;
    return tape_of(a).record(std::move(C), a.requires_grad() || b.requires_grad(), [ia, ib](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ia)) t.grad_buffer(ia).mat().noalias() += g.mat() * t.value(ib).mat().transpose();
        if (t.requires_grad(ib)) t.grad_buffer(ib).mat().noalias() += t.value(ia).mat().transpose() * g.mat();
    });
}

Var add(Var a, Var b) {
    same_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    Tensor c = a.value();
    const auto bv = b.value().data();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return tape_of(a).record(std::move(c), a.requires_grad() || b.requires_grad(), [ia, ib](Tape& t, std::size_t self) {
        accumulate(t, ia, t.grad(self));
        accumulate(t, ib, t.grad(self));
    });
}

Var sub(Var a, Var b) {
    same_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    Tensor c = a.value();
    const auto bv = b.value().data();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return tape_of(a).record(std::move(c), a.requires_grad() || b.requires_grad(), [ia, ib](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        accumulate(t, ia, g);
        if (t.requires_grad(ib)) {
            auto dst = t.grad_buffer(ib).data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    same_tape(a, b);
    require_same_shape(a.value(), b.value(), "mul");
    Tensor c = a.value();
    const auto bv = b.value().data();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return tape_of(a).record(std::move(c), a.requires_grad() || b.requires_grad(), [ia, ib](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ia)) {
            auto dst = t.grad_buffer(ia).data();
            const auto other = t.value(ib).data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * other[i];
        }
        if (t.requires_grad(ib)) {
            auto dst = t.grad_buffer(ib).data();
            const auto other = t.value(ia).data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * other[i];
        }
    });
}

Var scale(Var a, double c) {
    const std::size_t ia = a.id;
    return unary_elementwise(a, [c](double x) { return c * x; }, [ia, c](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        auto dst = t.grad_buffer(ia).data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += c * g[i];
    });
}

Var add_row(Var a, Var bias) {
    same_tape(a, bias);
    const Tensor& A = a.value();
    const Tensor& b = bias.value();
    require_rank2(A, "add_row");
    if (b.rank() != 2 || b.rows() != 1 || b.cols() != A.cols()) {
        throw ShapeError("add_row: shapes " + shape_str(A.shape()) + " and " + shape_str(b.shape()) +
                         " are incompatible (bias must be 1 x cols)");
    }
    Tensor c = A;
    c.mat().rowwise() += b.mat().row(0);
    const std::size_t ia = a.id, ib = bias.id;
    return tape_of(a).record(std::move(c), a.requires_grad() || bias.requires_grad(),
                             [ia, ib](Tape& t, std::size_t self) {
                                 const Tensor& g = t.grad(self);
                                 accumulate(t, ia, g);
                                 if (t.requires_grad(ib)) t.grad_buffer(ib).mat().row(0) += g.mat().colwise().sum();
                             });
}

Var linear(Var x, Var weight, Var bias) { return add_row(matmul(x, weight), bias); }

Var relu(Var a) {
    const std::size_t ia = a.id;
    return unary_elementwise(a, [](double x) { return x > 0.0 ? x : 0.0; }, [ia](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const auto x = t.value(ia).data();
        auto dst = t.grad_buffer(ia).data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (x[i] > 0.0) dst[i] += g[i];
        }
    });
}

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var gelu(Var a) {
    const std::size_t ia = a.id;
    return unary_elementwise(
        a, [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); },
        [ia](Tape& t, std::size_t self) {
            const Tensor& g = t.grad(self);
            const auto xs = t.value(ia).data();
            auto dst = t.grad_buffer(ia).data();
            for (std::size_t i = 0; i < dst.size(); ++i) {
                const double x = xs[i];
                const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
                const double d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
                dst[i] += g[i] * d;
            }
        });
}

Var sigmoid(Var a) {
    const std::size_t ia = a.id;
    return unary_elementwise(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [ia](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const auto y = t.value(self).data();
        auto dst = t.grad_buffer(ia).data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var softmax(Var a, int axis) {
    const Tensor& x = a.value();
    require_rank2(x, "softmax");
    if (axis != 0 && axis != 1) throw InputError("softmax: axis must be 0 or 1");
    RowMatrix y = x.mat();
    if (axis == 0) y.transposeInPlace();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
    }
    if (axis == 0) y.transposeInPlace();
    Tensor out(x.shape());
    out.mat() = y;
    const std::size_t ia = a.id;
    return tape_of(a).record(std::move(out), a.requires_grad(), [ia, axis](Tape& t, std::size_t self) {
        const auto Y = t.value(self).mat();
        const auto G = t.grad(self).mat();
        auto dst = t.grad_buffer(ia).mat();
        const RowMatrix gy = G.cwiseProduct(Y);
        if (axis == 1) {
            const Eigen::VectorXd s = gy.rowwise().sum();
            dst.array() += Y.array() * (G.colwise() - s).array();
        } else {
            const Eigen::RowVectorXd s = gy.colwise().sum();
            dst.array() += Y.array() * (G.rowwise() - s).array();
        }
    });
}

namespace {

struct LayerNormCache {
    Tensor normalized;            // (x - mu) / sigma
    std::vector<double> inv_std;  // per row
};

LayerNormCache normalize_rows(const Tensor& x, double eps) {
    require_rank2(x, "layer_norm");
    LayerNormCache c{Tensor(x.shape()), std::vector<double>(x.rows())};
    const std::size_t n = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += x.at(r, j);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (x.at(r, j) - mu) * (x.at(r, j) - mu);
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        c.inv_std[r] = inv;
        for (std::size_t j = 0; j < n; ++j) c.normalized.at(r, j) = (x.at(r, j) - mu) * inv;
    }
    return c;
}

// dx for y = normalize(x) given dy.
void layer_norm_backward(const LayerNormCache& c, const Tensor& dy, Tensor& dx) {
    const std::size_t n = dy.cols();
    for (std::size_t r = 0; r < dy.rows(); ++r) {
        double mean_g = 0.0, mean_gy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mean_g += dy.at(r, j);
            mean_gy += dy.at(r, j) * c.normalized.at(r, j);
        }
        mean_g /= static_cast<double>(n);
        mean_gy /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
            dx.at(r, j) += c.inv_std[r] * (dy.at(r, j) - mean_g - c.normalized.at(r, j) * mean_gy);
        }
    }
}

}  // namespace

Var layer_norm(Var x, double eps) {
    auto cache = std::make_shared<LayerNormCache>(normalize_rows(x.value(), eps));
    Tensor y = cache->normalized;
    const std::size_t ix = x.id;
    return tape_of(x).record(std::move(y), x.requires_grad(), [ix, cache](Tape& t, std::size_t self) {
        layer_norm_backward(*cache, t.grad(self), t.grad_buffer(ix));
    });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    same_tape(x, gamma);
    same_tape(x, beta);
    const Tensor& X = x.value();
    const Tensor& G = gamma.value();
    const Tensor& B = beta.value();
    auto cache = std::make_shared<LayerNormCache>(normalize_rows(X, eps));
    const Shape row_shape{1, X.cols()};
    if (G.shape() != row_shape || B.shape() != row_shape) {
        throw ShapeError("layer_norm: gamma/beta shapes " + shape_str(G.shape()) + " and " + shape_str(B.shape()) +
                         " must be " + shape_str(row_shape));
    }
    Tensor y = cache->normalized;
    y.mat().array().rowwise() *= G.mat().row(0).array();
    y.mat().rowwise() += B.mat().row(0);
    const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
    const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    return tape_of(x).record(std::move(y), rg, [ix, ig, ib, cache](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ig)) {
            t.grad_buffer(ig).mat().row(0) += g.mat().cwiseProduct(cache->normalized.mat()).colwise().sum();
        }
        if (t.requires_grad(ib)) t.grad_buffer(ib).mat().row(0) += g.mat().colwise().sum();
        if (t.requires_grad(ix)) {
            Tensor dy = g;
            dy.mat().array().rowwise() *= t.value(ig).mat().row(0).array();
            layer_norm_backward(*cache, dy, t.grad_buffer(ix));
        }
    });
}

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw InputError("concat: no inputs");
    if (axis != 0 && axis != 1) throw InputError("concat: axis must be 0 or 1");
    Tape& tape = tape_of(parts[0]);
    std::size_t rows = 0, cols = 0;
    bool rg = false;
    for (const Var& p : parts) {
        same_tape(parts[0], p);
        const Tensor& v = p.value();
        require_rank2(v, "concat");
        const Tensor& first = parts[0].value();
        if (axis == 0 && v.cols() != first.cols()) {
            throw ShapeError("concat(axis 0): shapes " + shape_str(first.shape()) + " and " + shape_str(v.shape()) +
                             " differ in columns");
        }
        if (axis == 1 && v.rows() != first.rows()) {
            throw ShapeError("concat(axis 1): shapes " + shape_str(first.shape()) + " and " + shape_str(v.shape()) +
                             " differ in rows");
        }
        rows = axis == 0 ? rows + v.rows() : v.rows();
        cols = axis == 1 ? cols + v.cols() : v.cols();
        rg = rg || p.requires_grad();
    }
    Tensor out({rows, cols});
    std::vector<std::size_t> ids;
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.value();
        if (axis == 0) {
            out.mat().middleRows(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(v.rows())) = v.mat();
        } else {
            out.mat().middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(v.cols())) = v.mat();
        }
        ids.push_back(p.id);
        offsets.push_back(off);
        off += axis == 0 ? v.rows() : v.cols();
    }
    return tape.record(std::move(out), rg, [ids, offsets, axis](Tape& t, std::size_t self) {
        const auto g = t.grad(self).mat();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!t.requires_grad(ids[i])) continue;
            auto dst = t.grad_buffer(ids[i]).mat();
            const auto o = static_cast<Eigen::Index>(offsets[i]);
            if (axis == 0) {
                dst += g.middleRows(o, dst.rows());
            } else {
                dst += g.middleCols(o, dst.cols());
            }
        }
    });
}

Var slice(Var a, int axis, std::size_t start, std::size_t len) {
    const Tensor& x = a.value();
    require_rank2(x, "slice");
    if (axis != 0 && axis != 1) throw InputError("slice: axis must be 0 or 1");
    const std::size_t extent = axis == 0 ? x.rows() : x.cols();
    if (len == 0 || start > extent || len > extent - start) {
        throw BoundsError("slice: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                          ") out of range for axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
    }
    const auto s = static_cast<Eigen::Index>(start);
    const auto l = static_cast<Eigen::Index>(len);
    Tensor out(axis == 0 ? Shape{len, x.cols()} : Shape{x.rows(), len});
    out.mat() = axis == 0 ? RowMatrix(x.mat().middleRows(s, l)) : RowMatrix(x.mat().middleCols(s, l));
    const std::size_t ia = a.id;
    return tape_of(a).record(std::move(out), a.requires_grad(), [ia, axis, s, l](Tape& t, std::size_t self) {
        auto dst = t.grad_buffer(ia).mat();
        if (axis == 0) {
            dst.middleRows(s, l) += t.grad(self).mat();
        } else {
            dst.middleCols(s, l) += t.grad(self).mat();
        }
    });
}

Var gather_rows(Var a, const std::vector<std::size_t>& idx) {
    const Tensor& x = a.value();
    require_rank2(x, "gather_rows");
    Tensor out({idx.size(), x.cols()});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= x.rows()) {
            throw BoundsError("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                              shape_str(x.shape()));
        }
        out.mat().row(static_cast<Eigen::Index>(i)) = x.mat().row(static_cast<Eigen::Index>(idx[i]));
    }
    const std::size_t ia = a.id;
    return tape_of(a).record(std::move(out), a.requires_grad(), [ia, idx](Tape& t, std::size_t self) {
        auto dst = t.grad_buffer(ia).mat();
        const auto g = t.grad(self).mat();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            dst.row(static_cast<Eigen::Index>(idx[i])) += g.row(static_cast<Eigen::Index>(i));
        }
    });
}

Var sum(Var a) {
    const Tensor& x = a.value();
    double s = 0.0;
    for (double v : x.data()) s += v;
    const std::size_t ia = a.id;
    return tape_of(a).record(Tensor({1, 1}, {s}), a.requires_grad(), [ia](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (double& d : t.grad_buffer(ia).data()) d += g;
    });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var bce_with_logits(Var logits, const std::vector<double>& targets, double clamp) {
    const Tensor& z = logits.value();
    if (z.size() != targets.size()) {
        throw ShapeError("bce_with_logits: " + std::to_string(z.size()) + " logits vs " +
                         std::to_string(targets.size()) + " targets");
    }
    if (z.size() == 0) throw ShapeError("bce_with_logits: empty batch");
    const double n = static_cast<double>(z.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(targets[i])) throw InputError("bce_with_logits: non-finite target");
        const double x = std::clamp(z[i], -clamp, clamp);
        const double y = targets[i];
        loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    const std::size_t il = logits.id;
    return tape_of(logits).record(
        Tensor({1, 1}, {loss / n}), logits.requires_grad(), [il, targets, clamp, n](Tape& t, std::size_t self) {
            const double g = t.grad(self)[0];
            const auto z = t.value(il).data();
            auto dst = t.grad_buffer(il).data();
            for (std::size_t i = 0; i < dst.size(); ++i) {
                if (z[i] < -clamp || z[i] > clamp) continue;
                const double p = 1.0 / (1.0 + std::exp(-z[i]));
                dst[i] += g * (p - targets[i]) / n;
            }
        });
}

Var mse(Var pred, const Tensor& target) {
    require_same_shape(pred.value(), target, "mse");
    if (!target.all_finite()) throw InputError("mse: non-finite target");
    const Tensor& p = pred.value();
    const double n = static_cast<double>(p.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) loss += (p[i] - target[i]) * (p[i] - target[i]);
    const std::size_t ip = pred.id;
    return tape_of(pred).record(Tensor({1, 1}, {loss / n}), pred.requires_grad(), [ip, target, n](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const auto p = t.value(ip).data();
        auto dst = t.grad_buffer(ip).data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g * 2.0 * (p[i] - target[i]) / n;
    });
}

}  // namespace saw::nn
