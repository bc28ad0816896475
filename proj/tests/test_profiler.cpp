#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "sgenet/profiler.hpp"

using namespace sgenet;
using prof::LayerSpec;

namespace {
// Hand-computed spreadsheet for the default configuration (tiny guidance
// recognizer + SR branch at 16x64, cf=D=64, heads=4, N=2, s=2, L=16, r=4),
// worked out per-layer from the documented conventions before the analytic
// counter was written. Integer equality is required.
struct OracleRow {
    const char* name;
    long long params, flops;
};
constexpr OracleRow kSpreadsheet[] = {
    {"g.conv1", 784, 397312},
    {"g.act1", 1, 4096},
    {"g.conv2", 8224, 1050624},
    {"g.act2", 1, 2048},
    {"g.conv3", 18480, 1181184},
    {"g.act3", 1, 1536},
    {"g.conv4", 36928, 1180672},
    {"g.act4", 1, 1024},
    {"g.head", 2405, 76368},
    {"g.softmax", 0, 1776},
    {"m.extract.conv", 15616, 31916032},
    {"m.extract.act", 1, 65536},
    {"m.semantic.embed", 2432, 76800},
    {"m.semantic.pe", 0, 1024},
    {"m.semantic.block.mha", 16640, 595712},
    {"m.semantic.block.res1", 0, 1024},
    {"m.semantic.block.ln1", 128, 7168},
    {"m.semantic.block.mlp.fc1", 8320, 264192},
    {"m.semantic.block.mlp.relu", 0, 2048},
    {"m.semantic.block.mlp.fc2", 8256, 263168},
    {"m.semantic.block.res2", 0, 1024},
    {"m.semantic.block.ln2", 128, 7168},
    {"m.align.pe", 0, 65536},
    {"m.align.stage1.0.mha", 16640, 21416960},
    {"m.align.stage1.0.res1", 0, 1024},
    {"m.align.stage1.0.ln1", 128, 7168},
    {"m.align.stage1.0.mlp.fc1", 8320, 264192},
    {"m.align.stage1.0.mlp.relu", 0, 2048},
    {"m.align.stage1.0.mlp.fc2", 8256, 263168},
    {"m.align.stage1.0.res2", 0, 1024},
    {"m.align.stage1.0.ln2", 128, 7168},
    {"m.align.stage2.0.mha", 16640, 21481472},
    {"m.align.stage2.0.res1", 0, 65536},
    {"m.align.stage2.0.ln1", 128, 458752},
    {"m.align.stage2.0.mlp.fc1", 8320, 16908288},
    {"m.align.stage2.0.mlp.relu", 0, 131072},
    {"m.align.stage2.0.mlp.fc2", 8256, 16842752},
    {"m.align.stage2.0.res2", 0, 65536},
    {"m.align.stage2.0.ln2", 128, 458752},
    {"m.fuse.p1", 8256, 16842752},
    {"m.fuse.p2", 8256, 16842752},
    {"m.fuse.p3", 8256, 16842752},
    {"m.fuse.ca", 2128, 69792},
    {"m.fuse.gate", 0, 65536},
    {"m.fuse.add", 0, 65536},
    {"m.srb0.c1", 36928, 75563008},
    {"m.srb0.n1", 128, 458752},
    {"m.srb0.act", 1, 65536},
    {"m.srb0.c2", 36928, 75563008},
    {"m.srb0.n2", 128, 458752},
    {"m.srb0.gru", 18624, 38535168},
    {"m.srb0.res", 0, 65536},
    {"m.srb1.c1", 36928, 75563008},
    {"m.srb1.n1", 128, 458752},
    {"m.srb1.act", 1, 65536},
    {"m.srb1.c2", 36928, 75563008},
    {"m.srb1.n2", 128, 458752},
    {"m.srb1.gru", 18624, 38535168},
    {"m.srb1.res", 0, 65536},
    {"m.upsample.expand", 147712, 302252032},
    {"m.upsample.shuffle", 0, 0},
    {"m.upsample.to_rgb", 1731, 14168064},
    {"m.upsample.sigmoid", 0, 12288},
};
constexpr long long kOracleParams = 547103;
constexpr long long kOracleFlops = 864119008;

std::string table_path(const char* name) {
    if (const char* env = std::getenv("SGENET_TABLE_DIR"))
        return std::string(env) + "/" + name;
    return std::string("data/") + name;  // repo-root relative fallback
}
}  // namespace

TEST_CASE("count_params: closed-form examples") {
    CHECK(prof::count_params(LayerSpec::conv2d("c", 3, 64, 9, 9, 16, 64)) == 15616);
    CHECK(prof::count_params(LayerSpec::linear("l", 64, 37, 16)) == 2405);
    CHECK(prof::count_params(LayerSpec::layer_norm("n", 64, 16)) == 128);
}

TEST_CASE("count_flops: closed-form examples") {
    // 1->1 channels, K=3, 4x4 output, no bias: 2*9*16 = 288
    CHECK(prof::count_flops(LayerSpec::conv2d("c", 1, 1, 3, 3, 4, 4, false)) == 288);
    CHECK(prof::count_flops(LayerSpec::pixel_shuffle("ps")) == 0);
    CHECK(prof::count_params(LayerSpec::pixel_shuffle("ps")) == 0);
}

TEST_CASE("default config matches the hand spreadsheet exactly") {
    Alphabet al;
    SrConfig cfg;
    auto specs = prof::full_model_specs(cfg, al.size());
    auto rep = prof::profile_layers(specs);
    const size_t n_oracle = sizeof(kSpreadsheet) / sizeof(kSpreadsheet[0]);
    REQUIRE(rep.rows.size() == n_oracle);
    for (size_t i = 0; i < n_oracle; ++i) {
        INFO("row ", i, " ", rep.rows[i].name);
        CHECK(rep.rows[i].name == kSpreadsheet[i].name);
        CHECK(rep.rows[i].params == kSpreadsheet[i].params);
        CHECK(rep.rows[i].flops == kSpreadsheet[i].flops);
    }
    CHECK(rep.total_params() == kOracleParams);
    CHECK(rep.total_flops() == kOracleFlops);
}

TEST_CASE("analytic parameter totals equal the real model's parameter count") {
    Alphabet al;
    SrConfig cfg;
    Rng rng(1);
    SgeNet<float> model(cfg, al, rng);
    int64_t actual = 0;
    for (const auto& p : model.params()) actual += p.val().numel();
    for (const auto& p : model.recognizer.params()) actual += p.val().numel();

    auto rep = prof::profile_layers(prof::full_model_specs(cfg, al.size()));
    CHECK(rep.total_params() == actual);
}

TEST_CASE("additivity and duplication") {
    auto spec = LayerSpec::conv2d("c", 8, 16, 3, 3, 10, 10);
    auto one = prof::profile_layers({spec});
    auto two = prof::profile_layers({spec, spec});
    CHECK(two.total_params() == 2 * one.total_params());
    CHECK(two.total_flops() == 2 * one.total_flops());

    long long sum_p = 0, sum_f = 0;
    Alphabet al;
    auto rep = prof::profile_layers(prof::full_model_specs(SrConfig{}, al.size()));
    for (const auto& r : rep.rows) {
        sum_p += r.params;
        sum_f += r.flops;
    }
    CHECK(sum_p == rep.total_params());
    CHECK(sum_f == rep.total_flops());
}

TEST_CASE("srb count sweep is strictly monotone in params and flops") {
    Alphabet al;
    long long prev_p = 0, prev_f = 0;
    for (int n : {2, 4, 6}) {
        SrConfig cfg;
        cfg.srbs = n;
        auto rep = prof::profile_layers(prof::full_model_specs(cfg, al.size()));
        CHECK(rep.total_params() > prev_p);
        CHECK(rep.total_flops() > prev_f);
        prev_p = rep.total_params();
        prev_f = rep.total_flops();
    }
}

TEST_CASE("recognizer swap changes cost behind the same interface") {
    Alphabet al;
    auto tiny =
        prof::profile_layers(prof::guidance_recognizer_specs(GuidanceArch::kTiny, 16, 64, 16, 37));
    auto large =
        prof::profile_layers(prof::guidance_recognizer_specs(GuidanceArch::kLarge, 16, 64, 16, 37));
    CHECK(large.total_params() > tiny.total_params());
    CHECK(large.total_flops() > tiny.total_flops());
}

TEST_CASE("reference table arithmetic reproduces the published reduction") {
    auto table = prof::load_reference_table(table_path("paper_table1.tsv"));
    REQUIRE(table.size() == 10);
    const auto find = [&](const std::string& m) -> const prof::ReferenceRow& {
        for (const auto& r : table)
            if (r.method == m) return r;
        throw std::runtime_error("missing row " + m);
    };
    CHECK_THROWS(find("NoSuchMethod"));
    CHECK_FALSE(find("Bicubic").flops_g.has_value());

    const double red = prof::reduction_percent(*find("SGENet").flops_g, *find("LEMMA").flops_g);
    CHECK(red == doctest::Approx(85.3731343284).epsilon(1e-9));
    CHECK(red >= 85.0);
    CHECK(red <= 85.5);

    // model vs itself reduces by exactly zero
    CHECK(prof::reduction_percent(0.98, 0.98) == doctest::Approx(0.0));

    // the different-recognizer comparison: the heavy config is ~6.2x costlier
    auto t3 = prof::load_reference_table(table_path("paper_table3.tsv"));
    REQUIRE(t3.size() == 2);
    CHECK(*t3[1].flops_g / *t3[0].flops_g == doctest::Approx(6.2347).epsilon(1e-3));
}

TEST_CASE("comparison text carries the headline reduction line") {
    Alphabet al;
    auto rep = prof::profile_layers(prof::full_model_specs(SrConfig{}, al.size()));
    auto table = prof::load_reference_table(table_path("paper_table1.tsv"));
    auto text = prof::compare_text(rep, table);
    CHECK(text.find("SGENet vs LEMMA (reference figures): 85.37% FLOPs reduction") !=
          std::string::npos);
    CHECK(text.find("convention") == std::string::npos);  // convention note lives in to_text
}
