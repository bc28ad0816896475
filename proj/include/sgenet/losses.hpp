#pragma once

#include "sgenet/ctc.hpp"
#include "sgenet/ops.hpp"

namespace sgenet {

// Mean of squared element differences (image reconstruction supervision).
template <class S>
nn::Value<S> reconstruction_loss(const nn::Value<S>& sr, const nn::Value<S>& hr) {
    check_same_shape(sr.val().shape, hr.val().shape, "reconstruction_loss");
    const int64_t n = sr.val().numel();
    Tensor<S> out({1});
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = double(sr.val().data[i]) - double(hr.val().data[i]);
        acc += d * d;
    }
    out.data[0] = static_cast<S>(acc / n);
    auto a = sr.node(), b = hr.node();
    return nn::make_op<S>(std::move(out), {sr, hr}, [a, b, n](nn::Node<S>& self) {
        const S g = self.grad.data[0] * S(2) / S(n);
        for (int64_t i = 0; i < n; ++i) {
            const S d = a->value.data[i] - b->value.data[i];
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad.data[i] += g * d;
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad.data[i] -= g * d;
            }
        }
    });
}

// Mean absolute element difference (position supervision over attention maps).
template <class S>
nn::Value<S> position_loss(const nn::Value<S>& a_hr, const nn::Value<S>& a_sr) {
    check_same_shape(a_hr.val().shape, a_sr.val().shape, "position_loss");
    const int64_t n = a_hr.val().numel();
    Tensor<S> out({1});
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i)
        acc += std::abs(double(a_hr.val().data[i]) - double(a_sr.val().data[i]));
    out.data[0] = static_cast<S>(acc / n);
    auto a = a_hr.node(), b = a_sr.node();
    return nn::make_op<S>(std::move(out), {a_hr, a_sr}, [a, b, n](nn::Node<S>& self) {
        const S g = self.grad.data[0] / S(n);
        for (int64_t i = 0; i < n; ++i) {
            const S d = a->value.data[i] - b->value.data[i];
            const S sgn = d > S(0) ? S(1) : (d < S(0) ? S(-1) : S(0));
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad.data[i] += g * sgn;
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad.data[i] -= g * sgn;
            }
        }
    });
}

// Weighted cross-entropy over per-position distributions. labels are padded
// to T with pad_index; padded positions are excluded from the average. Class
// weights multiply each position's term; the divisor is the non-pad count, so
// doubling one class weight exactly doubles that class's contribution.
template <class S>
nn::Value<S> content_loss(const nn::Value<S>& probs,
                          const std::vector<std::vector<int>>& labels,
                          const std::vector<double>& class_weights, int pad_index) {
    const auto& pv = probs.val();
    if (pv.rank() != 3) throw std::invalid_argument("content_loss: expects (B,T,A)");
    const int b = pv.dim(0), t_len = pv.dim(1), a_len = pv.dim(2);
    if (static_cast<int>(labels.size()) != b)
        throw std::invalid_argument("content_loss: label count does not match batch");
    if (static_cast<int>(class_weights.size()) != a_len)
        throw std::invalid_argument("content_loss: weight vector length mismatch");
    const double floor = 1e-12;

    int64_t live = 0;
    double acc = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        if (static_cast<int>(labels[bi].size()) > t_len)
            throw std::invalid_argument("content_loss: label longer than " +
                                        std::to_string(t_len) + " positions");
        for (int t = 0; t < t_len; ++t) {
            const int y = t < static_cast<int>(labels[bi].size()) ? labels[bi][t] : pad_index;
            if (y == pad_index) continue;
            if (y < 0 || y >= a_len)
                throw std::invalid_argument("content_loss: symbol out of range");
            acc += -class_weights[y] * std::log(std::max(double(pv.at(bi, t, y)), floor));
            ++live;
        }
    }
    Tensor<S> out({1});
    out.data[0] = live > 0 ? static_cast<S>(acc / live) : S(0);
    auto pn = probs.node();
    return nn::make_op<S>(
        std::move(out), {probs},
        [pn, labels, class_weights, pad_index, t_len, a_len, live, floor](nn::Node<S>& self) {
            if (!pn->requires_grad || live == 0) return;
            pn->ensure_grad();
            const double g = double(self.grad.data[0]) / live;
            for (size_t bi = 0; bi < labels.size(); ++bi)
                for (int t = 0; t < t_len; ++t) {
                    const int y = t < static_cast<int>(labels[bi].size()) ? labels[bi][t]
                                                                          : pad_index;
                    if (y == pad_index) continue;
                    const int64_t ix = (int64_t(bi) * t_len + t) * a_len + y;
                    const double p = double(pn->value.data[ix]);
                    if (p > floor)
                        pn->grad.data[ix] += static_cast<S>(-g * class_weights[y] / p);
                }
        });
}

// Eq-style fine-tuning surrogate: alignment-free CTC of the guidance
// recognizer's LR distribution against the label.
template <class S>
nn::Value<S> finetune_loss(const nn::Value<S>& dist_pr,
                           const std::vector<std::vector<int>>& labels, int blank) {
    return nn::ctc_loss(dist_pr, labels, blank);
}

struct LossWeights {
    double lambda_pos = 1.0, lambda_con = 1.0;
    double alpha1 = 1.0, alpha2 = 1.0;

    void validate() const {
        if (lambda_pos < 0 || lambda_con < 0 || alpha1 < 0 || alpha2 < 0)
            throw std::invalid_argument("loss weights must be nonnegative");
    }
};

struct LossReport {
    double rc = 0, pos = 0, con = 0, re = 0, ft = 0, total = 0;

    std::string tsv_line(int64_t step) const {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%lld\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f",
                      static_cast<long long>(step), rc, pos, con, ft, total);
        return buf;
    }
};

// L = L_rc + a1*(lp*L_pos + lc*L_con) + a2*L_ft, kept as a graph so one
// backward covers every term. Parts must be finite scalars.
template <class S>
std::pair<nn::Value<S>, LossReport> total_loss(const nn::Value<S>& rc,
                                               const nn::Value<S>& pos,
                                               const nn::Value<S>& con,
                                               const nn::Value<S>& ft,
                                               const LossWeights& w) {
    w.validate();
    for (const auto* part : {&rc, &pos, &con, &ft})
        if (!std::isfinite(double(part->val().data[0])))
            throw std::runtime_error("total_loss: non-finite loss component, aborting");
    auto re = nn::add(nn::scale(pos, S(w.lambda_pos)), nn::scale(con, S(w.lambda_con)));
    auto total = nn::add(rc, nn::add(nn::scale(re, S(w.alpha1)), nn::scale(ft, S(w.alpha2))));
    LossReport rep;
    rep.rc = rc.val().data[0];
    rep.pos = pos.val().data[0];
    rep.con = con.val().data[0];
    rep.ft = ft.val().data[0];
    rep.re = re.val().data[0];
    rep.total = total.val().data[0];
    return {total, rep};
}

}  // namespace sgenet
