#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "reference_impls.hpp"
#include "sgenet/dataset.hpp"
#include "sgenet/image_io.hpp"
#include "sgenet/metrics.hpp"

using namespace sgenet;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("sgenet_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}
}  // namespace

TEST_CASE("render_sample: bit-identical under a fixed seed") {
    Alphabet al;
    auto a = render_sample(1234, al, Severity::kMixed);
    auto b = render_sample(1234, al, Severity::kMixed);
    CHECK(a.label == b.label);
    CHECK(a.hr.data == b.hr.data);
    CHECK(a.lr.data == b.lr.data);
    auto c = render_sample(1235, al, Severity::kMixed);
    CHECK(a.hr.data != c.hr.data);
}

TEST_CASE("render_sample: labels stay on the non-blank alphabet and in range") {
    Alphabet al;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        auto s = render_sample(seed, al, Severity::kEasy);
        CHECK(s.label.size() >= 1);
        CHECK(s.label.size() <= 10);
        for (char ch : s.label) CHECK_NOTHROW(al.index_of(ch));
        CHECK(nn::ctc_min_frames(al.encode(s.label)) <= geom::kFrames);
    }
}

TEST_CASE("render_sample: text actually lands on the canvas") {
    Alphabet al;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto s = render_sample(seed, al, Severity::kEasy);
        auto bg = render_background(seed);
        double mse = 0.0;
        for (int64_t i = 0; i < s.hr.numel(); ++i) {
            const double d = double(s.hr.data[i]) - double(bg.data[i]);
            mse += d * d;
        }
        CHECK(mse / s.hr.numel() > 0.0);
    }
    // pixel range invariant
    auto s = render_sample(99, al, Severity::kHard);
    for (float v : s.hr.data) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
    for (float v : s.lr.data) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("degrade: the no-blur no-noise limit is a pure 2x2 area average") {
    Alphabet al;
    auto s = render_sample(7, al, Severity::kEasy);
    DegradeSpec spec;
    spec.blur_lo = spec.blur_hi = 1e-9;  // kernel collapses to identity
    spec.noise_lo = spec.noise_hi = 0.0;
    spec.brightness_jitter = 0.0;
    Rng rng(1);
    auto lr = degrade(s.hr, spec, rng);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 64; ++x) {
                const double want = (s.hr.at(c, 2 * y, 2 * x) + s.hr.at(c, 2 * y, 2 * x + 1) +
                                     s.hr.at(c, 2 * y + 1, 2 * x) +
                                     s.hr.at(c, 2 * y + 1, 2 * x + 1)) /
                                    4.0;
                CHECK(lr.at(c, y, x) == doctest::Approx(want).epsilon(1e-6));
            }
}

TEST_CASE("degrade: constants pass through unchanged") {
    Tensor<float> flat({3, 32, 128}, 0.42f);
    DegradeSpec spec;
    spec.noise_lo = spec.noise_hi = 0.0;
    spec.brightness_jitter = 0.0;
    Rng rng(2);
    auto lr = degrade(flat, spec, rng);
    for (float v : lr.data) CHECK(v == doctest::Approx(0.42f).epsilon(1e-6));
}

TEST_CASE("degrade: matches the separable gaussian + pooling reference at sigma 1") {
    Alphabet al;
    auto s = render_sample(11, al, Severity::kEasy);
    DegradeSpec spec;
    spec.blur_lo = spec.blur_hi = 1.0;
    spec.noise_lo = spec.noise_hi = 0.0;
    spec.brightness_jitter = 0.0;
    Rng rng(3);
    auto lr = degrade(s.hr, spec, rng);

    ref::Tensor hr_d({1, 3, 32, 128});
    for (int64_t i = 0; i < s.hr.numel(); ++i) hr_d.data[i] = s.hr.data[i];
    auto want = ref::blur_downsample(hr_d, 1.0, 2);
    for (int64_t i = 0; i < lr.numel(); ++i)
        CHECK(std::abs(double(lr.data[i]) - want.data[i]) < 1e-6);
}

TEST_CASE("degrade: deterministic under a fixed rng seed") {
    Alphabet al;
    auto s = render_sample(5, al, Severity::kEasy);
    DegradeSpec spec;
    Rng r1(9), r2(9);
    auto a = degrade(s.hr, spec, r1);
    auto b = degrade(s.hr, spec, r2);
    CHECK(a.data == b.data);
}

TEST_CASE("dataset: write/load round trip") {
    Alphabet al;
    auto dir = temp_dir("roundtrip");
    write_dataset(dir.string(), 8, 77, Severity::kMixed, al);
    auto corpus = load_dataset(dir.string());
    REQUIRE(corpus.samples.size() == 8);
    CHECK(corpus.severity == Severity::kMixed);
    CHECK(corpus.seed == 77);
    for (int i = 0; i < 8; ++i) {
        auto want = render_sample(77 + static_cast<uint64_t>(i), al,
                                  severity_for_index(Severity::kMixed, i));
        CHECK(corpus.samples[static_cast<size_t>(i)].label == want.label);
        // 8-bit quantization bound
        double max_err = 0.0;
        for (int64_t j = 0; j < want.hr.numel(); ++j)
            max_err = std::max(max_err,
                               std::abs(double(corpus.samples[static_cast<size_t>(i)].hr.data[j]) -
                                        double(want.hr.data[j])));
        CHECK(max_err <= 1.0 / 255 + 1e-6);
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset: identical seeds give identical directories") {
    Alphabet al;
    auto d1 = temp_dir("det1"), d2 = temp_dir("det2");
    write_dataset(d1.string(), 4, 5, Severity::kEasy, al);
    write_dataset(d2.string(), 4, 5, Severity::kEasy, al);
    for (const auto& e : fs::recursive_directory_iterator(d1)) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), d1);
        std::ifstream f1(e.path(), std::ios::binary), f2(d2 / rel, std::ios::binary);
        std::string c1((std::istreambuf_iterator<char>(f1)), {});
        std::string c2((std::istreambuf_iterator<char>(f2)), {});
        CHECK(c1 == c2);
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("dataset: load errors name the offending condition") {
    auto dir = temp_dir("errors");
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("no labels.tsv"),
                         std::runtime_error);

    Alphabet al;
    write_dataset(dir.string(), 2, 1, Severity::kEasy, al);
    {
        std::ofstream f(dir / "labels.tsv", std::ios::app);
        f << "1\tdup\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("duplicate index 1"),
                         std::runtime_error);

    // restore labels, then break the file inventory
    write_dataset(dir.string(), 2, 1, Severity::kEasy, al);
    fs::remove(dir / "pairs" / "000001_hr.png");
    CHECK_THROWS_AS(load_dataset(dir.string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("png: round trip preserves 8-bit values exactly") {
    Rng rng(123);
    auto img = random_uniform<float>({3, 10, 20}, rng);
    auto dir = temp_dir("png");
    write_png((dir / "x.png").string(), img);
    auto back = read_png((dir / "x.png").string());
    REQUIRE(back.shape == img.shape);
    for (int64_t i = 0; i < img.numel(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5f / 255 + 1e-6f);
    // second write of the loaded image is byte-stable
    write_png((dir / "y.png").string(), back);
    auto again = read_png((dir / "y.png").string());
    CHECK(again.data == back.data);
    fs::remove_all(dir);
}

TEST_CASE("psnr: closed-form cases") {
    Tensor<float> a({3, 8, 8}, 0.5f), b({3, 8, 8}, 0.5f);
    CHECK(psnr(a, b) == doctest::Approx(100.0));

    Tensor<float> c({3, 8, 8}, 0.4f);  // diff 0.1 -> MSE 0.01 -> 20 dB
    CHECK(psnr(a, c) == doctest::Approx(20.0).epsilon(1e-6));

    Tensor<float> z({3, 8, 8}, 0.0f), o({3, 8, 8}, 1.0f);
    CHECK(psnr(z, o) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("psnr: strictly decreasing as noise grows") {
    Alphabet al;
    auto s = render_sample(3, al, Severity::kEasy);
    double prev = 1e9;
    for (double sigma : {0.01, 0.05, 0.1}) {
        Rng rng(42);
        Tensor<float> noisy = s.hr;
        for (auto& v : noisy.data)
            v = static_cast<float>(std::min(1.0, std::max(0.0, v + sigma * rng.normal())));
        const double p = psnr(s.hr, noisy);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim: identity and degradation ordering") {
    Alphabet al;
    auto s = render_sample(21, al, Severity::kEasy);
    CHECK(ssim(s.hr, s.hr) == doctest::Approx(1.0));
    Rng rng(1);
    Tensor<float> noisy = s.hr;
    for (auto& v : noisy.data)
        v = static_cast<float>(std::min(1.0, std::max(0.0, v + 0.1 * rng.normal())));
    const double sv = ssim(s.hr, noisy);
    CHECK(sv < 1.0);
    CHECK(sv > -1.0);
}

TEST_CASE("bicubic: constants, geometry, smooth-signal recovery") {
    Tensor<float> flat({3, 16, 64}, 0.37f);
    auto up = bicubic_x2(flat);
    CHECK(up.shape == std::vector<int>{3, 32, 128});
    for (float v : up.data) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));

    // smooth gradient: downsample by area average then recover by bicubic
    Tensor<float> smooth({3, 32, 128});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 128; ++x)
                smooth.at(c, y, x) = static_cast<float>(
                    0.5 + 0.3 * std::sin(2.0 * M_PI * x / 128.0) * std::cos(M_PI * y / 32.0));
    Tensor<float> small({3, 16, 64});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 64; ++x)
                small.at(c, y, x) = (smooth.at(c, 2 * y, 2 * x) + smooth.at(c, 2 * y, 2 * x + 1) +
                                     smooth.at(c, 2 * y + 1, 2 * x) +
                                     smooth.at(c, 2 * y + 1, 2 * x + 1)) /
                                    4.f;
    auto rec = bicubic_x2(small);
    double mae = 0.0;
    for (int64_t i = 0; i < smooth.numel(); ++i)
        mae += std::abs(double(rec.data[i]) - double(smooth.data[i]));
    mae /= smooth.numel();
    CHECK(mae < 0.02);
}
