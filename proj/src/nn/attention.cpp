#include <cmath>
#include <memory>

#include "saw/errors.hpp"
#include "saw/nn/ops.hpp"

namespace saw::nn {

Var attention(Var q, Var k, Var v, std::size_t n_heads, std::size_t batch) {
    if (q.tape != k.tape || q.tape != v.tape) throw InputError("attention: variables belong to different tapes");
    const Tensor& Q = q.value();
    const Tensor& K = k.value();
    const Tensor& V = v.value();
    const std::size_t d = Q.cols();
    if (K.cols() != d || V.cols() != d) {
        throw ShapeError("attention: model dims differ, q " + shape_str(Q.shape()) + ", k " + shape_str(K.shape()) +
                         ", v " + shape_str(V.shape()));
    }
    if (K.rows() != V.rows()) {
        throw ShapeError("attention: k " + shape_str(K.shape()) + " and v " + shape_str(V.shape()) +
                         " have different row counts");
    }
    if (n_heads == 0 || d % n_heads != 0) {
        throw ShapeError("attention: model dim " + std::to_string(d) + " not divisible by " +
                         std::to_string(n_heads) + " heads");
    }
    if (batch == 0 || Q.rows() % batch != 0 || K.rows() % batch != 0) {
        throw ShapeError("attention: row counts " + std::to_string(Q.rows()) + "/" + std::to_string(K.rows()) +
                         " not divisible by batch " + std::to_string(batch));
    }
    const auto tq = static_cast<Eigen::Index>(Q.rows() / batch);
    const auto tk = static_cast<Eigen::Index>(K.rows() / batch);
    const auto dh = static_cast<Eigen::Index>(d / n_heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    // Attention weights per (item, head), kept for backward.
    auto probs = std::make_shared<std::vector<RowMatrix>>(batch * n_heads);
    Tensor out(Q.shape());
    auto O = out.mat();
    const auto Qm = Q.mat();
    const auto Km = K.mat();
    const auto Vm = V.mat();
    for (std::size_t b = 0; b < batch; ++b) {
        const auto rq = static_cast<Eigen::Index>(b) * tq;
        const auto rk = static_cast<Eigen::Index>(b) * tk;
        for (std::size_t h = 0; h < n_heads; ++h) {
            const auto c = static_cast<Eigen::Index>(h) * dh;
            RowMatrix& P = (*probs)[b * n_heads + h];
            P.noalias() = scale * Qm.block(rq, c, tq, dh) * Km.block(rk, c, tk, dh).transpose();
            for (Eigen::Index r = 0; r < P.rows(); ++r) {
                auto row = P.row(r);
                row.array() -= row.maxCoeff();
                row = row.array().exp().matrix();
                row /= row.sum();
            }
            O.block(rq, c, tq, dh).noalias() = P * Vm.block(rk, c, tk, dh);
        }
    }

    const std::size_t iq = q.id, ik = k.id, iv = v.id;
    const bool rg = q.requires_grad() || k.requires_grad() || v.requires_grad();
    return q.tape->record(std::move(out), rg, [=](Tape& t, std::size_t self) {
        const auto G = t.grad(self).mat();
        const auto Qv = t.value(iq).mat();
        const auto Kv = t.value(ik).mat();
        const auto Vv = t.value(iv).mat();
        const bool gq = t.requires_grad(iq), gk = t.requires_grad(ik), gv = t.requires_grad(iv);
        RowMatrix dP, dS;
        for (std::size_t b = 0; b < batch; ++b) {
            const auto rq = static_cast<Eigen::Index>(b) * tq;
            const auto rk = static_cast<Eigen::Index>(b) * tk;
            for (std::size_t h = 0; h < n_heads; ++h) {
                const auto c = static_cast<Eigen::Index>(h) * dh;
                const RowMatrix& P = (*probs)[b * n_heads + h];
                const auto Gh = G.block(rq, c, tq, dh);
                if (gv) t.grad_buffer(iv).mat().block(rk, c, tk, dh).noalias() += P.transpose() * Gh;
                if (!gq && !gk) continue;
                dP.noalias() = Gh * Vv.block(rk, c, tk, dh).transpose();
                const Eigen::VectorXd rowdot = dP.cwiseProduct(P).rowwise().sum();
                dS = P.cwiseProduct(dP.colwise() - rowdot);
                if (gq) t.grad_buffer(iq).mat().block(rq, c, tq, dh).noalias() += scale * dS * Kv.block(rk, c, tk, dh);
                if (gk) {
                    t.grad_buffer(ik).mat().block(rk, c, tk, dh).noalias() +=
                        scale * dS.transpose() * Qv.block(rq, c, tq, dh);
                }
            }
        }
    });
}

}  // namespace saw::nn
