#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reference_impls.hpp"
#include "sgenet/grad_check.hpp"
#include "sgenet/losses.hpp"
#include "sgenet/recognizer.hpp"

using namespace sgenet;
using nn::Value;
using D = double;

namespace {
Value<D> leaf(Tensor<D> t, bool rg = false) { return Value<D>::leaf(std::move(t), rg); }
}  // namespace

TEST_CASE("reconstruction_loss: exact-match zero, unit gap, loop oracle") {
    Rng rng(1);
    auto a = random_uniform<D>({1, 3, 4, 4}, rng);
    CHECK(reconstruction_loss(leaf(a), leaf(a)).val().data[0] == 0.0);

    auto zeros = leaf(Tensor<D>({1, 3, 2, 2}, 0.0));
    auto ones = leaf(Tensor<D>({1, 3, 2, 2}, 1.0));
    CHECK(reconstruction_loss(zeros, ones).val().data[0] == doctest::Approx(1.0));

    auto b = random_uniform<D>({1, 3, 4, 4}, rng);
    double want = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i)
        want += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    want /= a.numel();
    CHECK(std::abs(reconstruction_loss(leaf(a), leaf(b)).val().data[0] - want) < 1e-7);

    CHECK_THROWS_AS(reconstruction_loss(leaf(a), zeros), std::invalid_argument);
}

TEST_CASE("position_loss: zero, constant offset, loop oracle") {
    Rng rng(2);
    auto a = random_uniform<D>({2, 4, 6}, rng);
    CHECK(position_loss(leaf(a), leaf(a)).val().data[0] == 0.0);

    Tensor<D> shifted = a;
    for (auto& v : shifted.data) v += 0.5;
    CHECK(position_loss(leaf(a), leaf(shifted)).val().data[0] == doctest::Approx(0.5));

    auto b = random_uniform<D>({2, 4, 6}, rng);
    double want = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) want += std::abs(a.data[i] - b.data[i]);
    want /= a.numel();
    CHECK(std::abs(position_loss(leaf(a), leaf(b)).val().data[0] - want) < 1e-7);
}

TEST_CASE("content_loss: certain prediction, uniform closed form, weight linearity") {
    const int a_len = 37, pad = 36;
    std::vector<double> w(a_len, 1.0);

    Tensor<D> certain({1, 3, a_len}, 0.0);
    std::vector<std::vector<int>> label = {{4, 7, 9}};
    certain.at(0, 0, 4) = 1.0;
    certain.at(0, 1, 7) = 1.0;
    certain.at(0, 2, 9) = 1.0;
    CHECK(content_loss(leaf(certain), label, w, pad).val().data[0] ==
          doctest::Approx(0.0).epsilon(1e-12));

    Tensor<D> uniform({1, 4, a_len}, 1.0 / a_len);
    auto l = content_loss(leaf(uniform), {{0, 1}}, w, pad);
    CHECK(l.val().data[0] == doctest::Approx(3.6109179126442243).epsilon(1e-9));

    // doubling one class weight doubles exactly that class's contribution
    Rng rng(3);
    Tensor<D> p({1, 2, a_len});
    for (int t = 0; t < 2; ++t) {
        double s = 0;
        for (int c = 0; c < a_len; ++c) {
            p.at(0, t, c) = rng.uniform() + 0.01;
            s += p.at(0, t, c);
        }
        for (int c = 0; c < a_len; ++c) p.at(0, t, c) /= s;
    }
    std::vector<std::vector<int>> lab2 = {{2, 5}};
    const double base = content_loss(leaf(p), lab2, w, pad).val().data[0];
    std::vector<double> w2 = w;
    w2[2] = 2.0;
    const double boosted = content_loss(leaf(p), lab2, w2, pad).val().data[0];
    const double contrib2 = -std::log(p.at(0, 0, 2)) / 2.0;  // position 0, weight 1
    CHECK(boosted - base == doctest::Approx(contrib2).epsilon(1e-9));

    // label longer than the decoder positions
    Tensor<D> small({1, 2, a_len}, 1.0 / a_len);
    CHECK_THROWS_AS(content_loss(leaf(small), {{0, 1, 2}}, w, pad), std::invalid_argument);
}

TEST_CASE("finetune_loss: certain path zero and the -ln(3/4) case") {
    Tensor<D> p({1, 2, 2}, 0.5);
    CHECK(finetune_loss(leaf(p), {{0}}, 1).val().data[0] ==
          doctest::Approx(0.2876820724517809).epsilon(1e-10));

    Tensor<D> sure({1, 1, 2}, 0.0);
    sure.at(0, 0, 0) = 1.0;
    CHECK(finetune_loss(leaf(sure), {{0}}, 1).val().data[0] ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("total_loss: arithmetic, degenerate weights, report invariants") {
    auto part = [&](double v) { return leaf(Tensor<D>({1}, v)); };
    LossWeights w;  // all ones
    auto [total, rep] = total_loss(part(0.5), part(0.2), part(0.3), part(0.4), w);
    CHECK(rep.re == doctest::Approx(0.5));
    CHECK(rep.total == doctest::Approx(1.4));
    CHECK(total.val().data[0] == doctest::Approx(1.4));
    // report recomputation invariants
    CHECK(rep.re ==
          doctest::Approx(w.lambda_pos * rep.pos + w.lambda_con * rep.con).epsilon(1e-6));
    CHECK(rep.total == doctest::Approx(rep.rc + w.alpha1 * rep.re + w.alpha2 * rep.ft)
                           .epsilon(1e-6));

    LossWeights off;
    off.alpha1 = 0.0;
    off.alpha2 = 0.0;
    auto [t2, rep2] = total_loss(part(0.5), part(0.2), part(0.3), part(0.4), off);
    CHECK(t2.val().data[0] == doctest::Approx(0.5));

    auto [t3, rep3] = total_loss(part(0.0), part(0.0), part(0.0), part(0.0), w);
    CHECK(t3.val().data[0] == 0.0);

    CHECK_THROWS_AS(
        total_loss(part(std::numeric_limits<double>::quiet_NaN()), part(0.0), part(0.0),
                   part(0.0), w),
        std::runtime_error);

    LossWeights bad;
    bad.alpha1 = -1.0;
    CHECK_THROWS_AS(total_loss(part(0.1), part(0.1), part(0.1), part(0.1), bad),
                    std::invalid_argument);
}

TEST_CASE("total_loss: linear in each weight (finite-difference slope equals L_re)") {
    auto part = [&](double v) { return leaf(Tensor<D>({1}, v)); };
    const double rc = 0.7, pos = 0.25, con = 0.15, ft = 0.4;
    LossWeights w;
    auto eval = [&](double a1) {
        LossWeights ww = w;
        ww.alpha1 = a1;
        return total_loss(part(rc), part(pos), part(con), part(ft), ww).second.total;
    };
    const double slope = (eval(1.0 + 0.5) - eval(1.0 - 0.5)) / 1.0;
    const double re = w.lambda_pos * pos + w.lambda_con * con;
    CHECK(slope == doctest::Approx(re).epsilon(1e-12));
}

TEST_CASE("losses: every term nonnegative and zero on exact-match inputs") {
    Rng rng(5);
    auto img = random_uniform<D>({1, 3, 4, 4}, rng);
    CHECK(reconstruction_loss(leaf(img), leaf(img)).val().data[0] == 0.0);
    auto attn = random_uniform<D>({1, 4, 6}, rng);
    CHECK(position_loss(leaf(attn), leaf(attn)).val().data[0] == 0.0);
    for (uint64_t s = 0; s < 10; ++s) {
        Rng r2(s);
        auto a = random_uniform<D>({1, 3, 4, 4}, r2);
        auto b = random_uniform<D>({1, 3, 4, 4}, r2);
        CHECK(reconstruction_loss(leaf(a), leaf(b)).val().data[0] >= 0.0);
        CHECK(position_loss(leaf(a), leaf(b)).val().data[0] >= 0.0);
    }
}

TEST_CASE("losses: gradient of L_total wrt the SR image (small instance)") {
    Alphabet al;
    Rng rng(6);
    // loss recognizer at the shrunken 8x16 HR geometry, 4 decoder positions
    LossRecognizer<D> rec(al, rng, 8, 2, 8, 16, 4);
    rec.set_frozen(true);
    Rng rx(7);
    auto i_sr = Value<D>::leaf(random_uniform<D>({1, 3, 8, 16}, rx), true);
    auto i_hr = leaf(random_uniform<D>({1, 3, 8, 16}, rx));
    std::vector<std::vector<int>> labels = {{3, 8}};
    std::vector<double> cw(al.size(), 1.0);
    auto hr_out = rec(i_hr);
    auto a_hr = hr_out.attn.detach();

    LossWeights w;
    w.alpha2 = 0.0;  // guidance term exercised separately
    auto rep = nn::grad_check(
        [&] {
            auto sr_out = rec(i_sr);
            auto rc = reconstruction_loss(i_sr, i_hr);
            auto pos = position_loss(a_hr, sr_out.attn);
            auto con = content_loss(sr_out.dist, labels, cw, al.blank_index());
            auto ft = leaf(Tensor<D>({1}, 0.0));
            return total_loss(rc, pos, con, ft, w).first;
        },
        {{"i_sr", i_sr}});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("losses: frozen recognizer receives exactly zero gradient") {
    Alphabet al;
    Rng rng(8);
    GuidanceRecognizer<D> rec(al, rng, GuidanceArch::kTiny, 4, 8, 4);
    rec.set_frozen(true);
    Rng rx(9);
    auto img = leaf(random_uniform<D>({1, 3, 4, 8}, rx));
    auto dist = rec(img);
    auto loss = finetune_loss(dist, {{1, 2}}, al.blank_index());
    for (auto& p : rec.params()) p.zero_grad();
    loss.backward();
    for (auto& p : rec.params())
        for (double g : p.grad().data) CHECK(g == 0.0);

    // and with the freeze lifted the same graph produces nonzero gradients
    rec.set_frozen(false);
    auto loss2 = finetune_loss(rec(img), {{1, 2}}, al.blank_index());
    loss2.backward();
    double total_mag = 0.0;
    for (auto& p : rec.params())
        for (double g : p.grad().data) total_mag += std::abs(g);
    CHECK(total_mag > 0.0);
}
