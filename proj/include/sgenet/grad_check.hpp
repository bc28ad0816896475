#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sgenet/autograd.hpp"

namespace sgenet::nn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst;  // "name[i]" of the worst coordinate
    bool pass(double tol) const { return max_rel_err < tol; }
};

// Central finite differences against reverse-mode gradients, double precision.
// `build` must construct a fresh scalar graph from the checked leaves' current
// values. rel = |a-n| / max(|a|,|n|,0.01) so near-zero gradients are compared
// at an absolute floor.
inline GradCheckReport grad_check(
    const std::function<Value<double>()>& build,
    const std::vector<std::pair<std::string, Value<double>>>& leaves,
    double step = 1e-5) {
    Value<double> loss = build();
    for (auto& [name, leaf] : leaves) leaf.node()->zero_grad();
    loss.backward();

    std::vector<Tensor<double>> analytic;
    analytic.reserve(leaves.size());
    for (auto& [name, leaf] : leaves) {
        leaf.grad();  // ensure allocated even if untouched
        analytic.push_back(leaf.node()->grad);
    }

    GradCheckReport rep;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li].second;
        Tensor<double>& t = leaf.val();
        for (int64_t i = 0; i < t.numel(); ++i) {
            const double keep = t.data[i];
            t.data[i] = keep + step;
            const double fp = build().val().data[0];
            t.data[i] = keep - step;
            const double fm = build().val().data[0];
            t.data[i] = keep;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[li].data[i];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 0.01});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = leaves[li].first + "[" + std::to_string(i) + "]";
            }
        }
    }
    return rep;
}

}  // namespace sgenet::nn
