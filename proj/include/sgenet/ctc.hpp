#pragma once

#include <limits>
#include <vector>

#include "sgenet/autograd.hpp"

namespace sgenet::nn {

namespace detail {
constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}
}  // namespace detail

// Minimum frame count that admits any alignment of `label`.
inline int ctc_min_frames(const std::vector<int>& label) {
    int repeats = 0;
    for (size_t i = 1; i < label.size(); ++i)
        if (label[i] == label[i - 1]) ++repeats;
    return static_cast<int>(label.size()) + repeats;
}

// Alignment-free sequence loss: -log of the total probability over all
// monotone blank-separated alignments, forward algorithm in log space.
// probs is (B,L,A) of per-frame distributions; the DP runs in double
// regardless of S. Returns the batch mean.
template <class S>
Value<S> ctc_loss(const Value<S>& probs, const std::vector<std::vector<int>>& labels,
                  int blank) {
    const auto& pv = probs.val();
    if (pv.rank() != 3) throw std::invalid_argument("ctc_loss: expects (B,L,A)");
    const int b = pv.dim(0), t_len = pv.dim(1), a_len = pv.dim(2);
    if (static_cast<int>(labels.size()) != b)
        throw std::invalid_argument("ctc_loss: label count does not match batch");

    // Per-sample posterior d loss_b / d p[t][c], saved for backward.
    Tensor<double> dp({b, t_len, a_len});
    double total = 0.0;
    const double floor = 1e-30;

    for (int bi = 0; bi < b; ++bi) {
        const auto& lab = labels[bi];
        for (int c : lab) {
            if (c == blank) throw std::invalid_argument("ctc_loss: label contains blank");
            if (c < 0 || c >= a_len) throw std::invalid_argument("ctc_loss: symbol out of range");
        }
        if (ctc_min_frames(lab) > t_len)
            throw std::invalid_argument(
                "ctc_loss: label of length " + std::to_string(lab.size()) +
                " (needs " + std::to_string(ctc_min_frames(lab)) +
                " frames) is alignment-infeasible in " + std::to_string(t_len) + " frames");

        const int u = 2 * static_cast<int>(lab.size()) + 1;
        auto sym = [&](int s) { return s % 2 == 0 ? blank : lab[s / 2]; };
        auto logp = [&](int t, int c) {
            return std::log(std::max(double(pv.at(bi, t, c)), floor));
        };

        std::vector<std::vector<double>> alpha(t_len, std::vector<double>(u, detail::kLogZero));
        std::vector<std::vector<double>> beta(t_len, std::vector<double>(u, detail::kLogZero));
        alpha[0][0] = logp(0, sym(0));
        if (u > 1) alpha[0][1] = logp(0, sym(1));
        for (int t = 1; t < t_len; ++t)
            for (int s = 0; s < u; ++s) {
                double acc = alpha[t - 1][s];
                if (s >= 1) acc = detail::log_add(acc, alpha[t - 1][s - 1]);
                if (s >= 2 && sym(s) != blank && sym(s) != sym(s - 2))
                    acc = detail::log_add(acc, alpha[t - 1][s - 2]);
                alpha[t][s] = acc + logp(t, sym(s));
            }
        double log_z = alpha[t_len - 1][u - 1];
        if (u > 1) log_z = detail::log_add(log_z, alpha[t_len - 1][u - 2]);
        total += -log_z;

        if (probs.requires_grad()) {
            beta[t_len - 1][u - 1] = 0.0;
            if (u > 1) beta[t_len - 1][u - 2] = 0.0;
            for (int t = t_len - 2; t >= 0; --t)
                for (int s = 0; s < u; ++s) {
                    double acc = beta[t + 1][s] + logp(t + 1, sym(s));
                    if (s + 1 < u)
                        acc = detail::log_add(acc, beta[t + 1][s + 1] + logp(t + 1, sym(s + 1)));
                    if (s + 2 < u && sym(s + 2) != blank && sym(s + 2) != sym(s))
                        acc = detail::log_add(acc, beta[t + 1][s + 2] + logp(t + 1, sym(s + 2)));
                    beta[t][s] = acc;
                }
            // d(-log Z)/d p[t][c] = -(1/p) * sum_{s: sym(s)=c} exp(alpha+beta-logZ)
            for (int t = 0; t < t_len; ++t)
                for (int s = 0; s < u; ++s) {
                    const double post = alpha[t][s] + beta[t][s] - log_z;
                    if (post == detail::kLogZero) continue;
                    const int c = sym(s);
                    const double p = std::max(double(pv.at(bi, t, c)), floor);
                    dp.at(bi, t, c) += -std::exp(post) / p;
                }
        }
    }

    Tensor<S> out({1});
    out.data[0] = static_cast<S>(total / b);
    auto pn = probs.node();
    return make_op<S>(std::move(out), {probs}, [pn, dp = std::move(dp), b](Node<S>& self) {
        if (!pn->requires_grad) return;
        pn->ensure_grad();
        const double g = double(self.grad.data[0]) / b;
        for (int64_t i = 0; i < dp.numel(); ++i)
            pn->grad.data[i] += static_cast<S>(g * dp.data[i]);
    });
}

}  // namespace sgenet::nn
