#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sgenet/ctc.hpp"
#include "sgenet/grad_check.hpp"
#include "sgenet/layers.hpp"

using namespace sgenet;
using nn::Value;
using D = double;

namespace {
Value<D> param(Tensor<D> t) { return Value<D>::leaf(std::move(t), true); }

// Squared-sum readout keeps every output coordinate in the objective.
Value<D> sq_mean(const Value<D>& v) { return nn::mean_all(nn::mul(v, v)); }
}  // namespace

TEST_CASE("grad: linear layer (20 seeds)") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 1);
        auto x = param(random_normal<D>({4, 3}, rng));
        auto w = param(random_normal<D>({5, 3}, rng));
        auto b = param(random_normal<D>({5}, rng));
        auto rep = nn::grad_check([&] { return sq_mean(nn::linear(x, w, b)); },
                                  {{"x", x}, {"w", w}, {"b", b}});
        INFO("seed ", seed, " worst ", rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: constant-zero loss leaves exact zero gradients") {
    Rng rng(7);
    auto x = param(random_normal<D>({3, 3}, rng));
    auto loss = nn::mean_all(nn::scale(x, 0.0));
    loss.backward();
    for (double g : x.grad().data) CHECK(g == 0.0);
}

TEST_CASE("grad: conv2d wrt input, weight, bias (20 seeds)") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 11);
        auto x = param(random_normal<D>({2, 2, 4, 5}, rng));
        auto w = param(random_normal<D>({3, 2, 3, 3}, rng));
        auto b = param(random_normal<D>({3}, rng));
        auto rep = nn::grad_check(
            [&] { return sq_mean(nn::conv2d(x, w, b, 1, 1, 1, 1)); },
            {{"x", x}, {"w", w}, {"b", b}});
        INFO("seed ", seed, " worst ", rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: strided conv2d") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 17);
        auto x = param(random_normal<D>({1, 2, 5, 7}, rng));
        auto w = param(random_normal<D>({2, 2, 3, 3}, rng));
        auto b = param(random_normal<D>({2}, rng));
        auto rep = nn::grad_check(
            [&] { return sq_mean(nn::conv2d(x, w, b, 2, 2, 1, 1)); },
            {{"x", x}, {"w", w}, {"b", b}});
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: layer_norm and spatial_norm (20 seeds)") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 23);
        auto x = param(random_normal<D>({2, 3, 6}, rng));
        auto g = param(random_normal<D>({6}, rng, 0.5));
        auto o = param(random_normal<D>({6}, rng, 0.5));
        auto rep = nn::grad_check([&] { return sq_mean(nn::layer_norm(x, g, o)); },
                                  {{"x", x}, {"g", g}, {"o", o}});
        INFO("ln seed ", seed, " worst ", rep.worst);
        CHECK(rep.max_rel_err < 1e-4);

        auto xs = param(random_normal<D>({2, 3, 3, 4}, rng));
        auto gs = param(random_normal<D>({3}, rng, 0.5));
        auto os = param(random_normal<D>({3}, rng, 0.5));
        auto rep2 = nn::grad_check([&] { return sq_mean(nn::spatial_norm(xs, gs, os)); },
                                   {{"x", xs}, {"g", gs}, {"o", os}});
        INFO("sn seed ", seed, " worst ", rep2.worst);
        CHECK(rep2.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: softmax, sigmoid, tanh, relu family") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 31);
        auto x = param(random_normal<D>({3, 5}, rng));
        auto rep = nn::grad_check(
            [&] { return sq_mean(nn::softmax_lastdim(x)); }, {{"x", x}});
        CHECK(rep.max_rel_err < 1e-4);

        auto rep2 = nn::grad_check(
            [&] { return sq_mean(nn::sigmoid(nn::tanh_op(x))); }, {{"x", x}});
        CHECK(rep2.max_rel_err < 1e-4);

        auto slope = param(Tensor<D>({1}, 0.25));
        auto rep3 = nn::grad_check(
            [&] { return sq_mean(nn::prelu(x, slope)); }, {{"x", x}, {"slope", slope}});
        CHECK(rep3.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: bmm both orientations") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 41);
        auto a = param(random_normal<D>({2, 3, 4}, rng));
        auto b = param(random_normal<D>({2, 4, 5}, rng));
        auto rep = nn::grad_check([&] { return sq_mean(nn::bmm(a, b)); },
                                  {{"a", a}, {"b", b}});
        CHECK(rep.max_rel_err < 1e-4);

        auto bt = param(random_normal<D>({2, 5, 4}, rng));
        auto rep2 = nn::grad_check([&] { return sq_mean(nn::bmm(a, bt, true)); },
                                   {{"a", a}, {"b", bt}});
        CHECK(rep2.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: pixel_shuffle, pooling, gating, concat, shapes") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 51);
        auto x = param(random_normal<D>({1, 8, 2, 3}, rng));
        auto rep = nn::grad_check([&] { return sq_mean(nn::pixel_shuffle(x, 2)); },
                                  {{"x", x}});
        CHECK(rep.max_rel_err < 1e-4);

        auto g = param(random_normal<D>({1, 8}, rng));
        auto rep2 = nn::grad_check(
            [&] { return sq_mean(nn::channelwise_mul(x, nn::sigmoid(g))); },
            {{"x", x}, {"g", g}});
        CHECK(rep2.max_rel_err < 1e-4);

        auto rep3 = nn::grad_check([&] { return sq_mean(nn::global_avg_pool(x)); },
                                   {{"x", x}});
        CHECK(rep3.max_rel_err < 1e-4);

        auto y = param(random_normal<D>({1, 3, 2, 3}, rng));
        auto rep4 = nn::grad_check(
            [&] { return sq_mean(nn::concat_channels(x, y)); }, {{"x", x}, {"y", y}});
        CHECK(rep4.max_rel_err < 1e-4);

        auto t = param(random_normal<D>({1, 6, 4}, rng));
        auto rep5 = nn::grad_check(
            [&] {
                return sq_mean(nn::from_tokens(nn::to_tokens(nn::pixel_shuffle(x, 2)), 4, 6));
            },
            {{"x", x}});
        CHECK(rep5.max_rel_err < 1e-4);
        auto rep6 = nn::grad_check(
            [&] { return sq_mean(nn::permute_0213(nn::reshape(t, {1, 2, 3, 4}))); },
            {{"t", t}});
        CHECK(rep6.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: multi-head attention composite wrt q,k,v and projections") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 61);
        nn::MhaLayer<D> mha(8, 2, rng);
        auto q = param(random_normal<D>({2, 3, 8}, rng));
        auto k = param(random_normal<D>({2, 4, 8}, rng));
        auto v = param(random_normal<D>({2, 4, 8}, rng));
        auto rep = nn::grad_check(
            [&] { return sq_mean(mha(q, k, v).out); },
            {{"q", q},
             {"k", k},
             {"v", v},
             {"wq", mha.wq.w},
             {"wo", mha.wo.w},
             {"bo", mha.wo.b}});
        INFO("seed ", seed, " worst ", rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: bidirectional recurrence composite") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 71);
        nn::BiGruLayer<D> gru(3, 2, rng);
        gru.fwd.wx.b.val() = random_normal<D>({6}, rng, 0.3);
        auto x = param(random_normal<D>({1, 3, 2, 4}, rng));
        auto rep = nn::grad_check(
            [&] { return sq_mean(gru(x)); },
            {{"x", x},
             {"fwd.wx", gru.fwd.wx.w},
             {"fwd.uh", gru.fwd.uh.w},
             {"fwd.b", gru.fwd.wx.b},
             {"bwd.wx", gru.bwd.wx.w},
             {"bwd.uh", gru.bwd.uh.w}});
        INFO("seed ", seed, " worst ", rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: channel attention composite") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 81);
        nn::ChannelAttentionLayer<D> ca(8, 4, rng);
        auto x = param(random_normal<D>({2, 8, 2, 3}, rng));
        auto rep = nn::grad_check(
            [&] { return sq_mean(nn::channelwise_mul(x, ca(x))); },
            {{"x", x}, {"fc1.w", ca.fc1.w}, {"fc2.w", ca.fc2.w}, {"fc2.b", ca.fc2.b}});
        INFO("seed ", seed, " worst ", rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: ctc loss wrt frame probabilities") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 91);
        // logits -> softmax keeps the checked leaf unconstrained while the
        // loss input stays on the simplex
        auto logits = param(random_normal<D>({2, 4, 3}, rng));
        std::vector<std::vector<int>> labels = {{1}, {1, 2}};
        auto rep = nn::grad_check(
            [&] { return nn::ctc_loss(nn::softmax_lastdim(logits), labels, 0); },
            {{"logits", logits}});
        INFO("seed ", seed, " worst ", rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: attention block composite with residual fan-out") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed + 101);
        nn::AttnBlock<D> blk(8, 2, rng);
        auto q = param(random_normal<D>({1, 3, 8}, rng));
        auto kv = param(random_normal<D>({1, 5, 8}, rng));
        auto rep = nn::grad_check(
            [&] { return sq_mean(blk(q, kv, kv).out); },
            {{"q", q}, {"kv", kv}, {"mlp.fc1.w", blk.mlp.fc1.w}, {"ln1.gain", blk.ln1.gain}});
        INFO("seed ", seed, " worst ", rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
}
