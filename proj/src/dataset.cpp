#include "sgenet/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sgenet/font.hpp"
#include "sgenet/image_io.hpp"

namespace fs = std::filesystem;

namespace sgenet {

Severity severity_from(const std::string& s) {
    if (s == "easy") return Severity::kEasy;
    if (s == "medium") return Severity::kMedium;
    if (s == "hard") return Severity::kHard;
    if (s == "mixed") return Severity::kMixed;
    throw std::invalid_argument("unknown severity: " + s);
}

const char* to_string(Severity s) {
    switch (s) {
        case Severity::kEasy: return "easy";
        case Severity::kMedium: return "medium";
        case Severity::kHard: return "hard";
        default: return "mixed";
    }
}

DegradeSpec DegradeSpec::for_severity(Severity s) {
    DegradeSpec d;
    switch (s) {
        case Severity::kEasy:
            d.blur_lo = 0.5;
            d.blur_hi = 1.0;
            d.noise_lo = 0.0;
            d.noise_hi = 0.01;
            break;
        case Severity::kMedium:
            d.blur_lo = 1.0;
            d.blur_hi = 1.5;
            d.noise_lo = 0.01;
            d.noise_hi = 0.02;
            break;
        case Severity::kHard:
            d.blur_lo = 1.5;
            d.blur_hi = 2.0;
            d.noise_lo = 0.02;
            d.noise_hi = 0.03;
            break;
        case Severity::kMixed:
            break;  // full ranges
    }
    return d;
}

namespace {

constexpr int kHrH = 32, kHrW = 128;
constexpr int kScale = 2;  // glyph pixel -> 2x2 block
constexpr int kAdvance = (kGlyphW + 1) * kScale;

float clamp01(double v) { return static_cast<float>(v < 0 ? 0 : (v > 1 ? 1 : v)); }

struct Colors {
    float bg[3], fg[3];
};

Colors draw_colors(Rng& rng) {
    Colors c{};
    const bool light_bg = rng.uniform() < 0.5;
    const double bg = light_bg ? rng.uniform(0.55, 0.9) : rng.uniform(0.1, 0.45);
    const double fg = light_bg ? rng.uniform(0.05, 0.35) : rng.uniform(0.65, 0.95);
    for (int ch = 0; ch < 3; ++ch) {
        c.bg[ch] = clamp01(bg + rng.uniform(-0.05, 0.05));
        c.fg[ch] = clamp01(fg + rng.uniform(-0.05, 0.05));
    }
    return c;
}

std::string draw_label(Rng& rng, const Alphabet& alphabet) {
    // resample until the label admits a CTC alignment in the frame budget
    for (;;) {
        const int len = rng.uniform_int(1, geom::kMaxLabel);
        std::string label;
        for (int i = 0; i < len; ++i)
            label.push_back(alphabet.at(rng.uniform_int(0, 35)));
        if (nn::ctc_min_frames(alphabet.encode(label)) <= geom::kFrames) return label;
    }
}

void paint_text(Tensor<float>& img, const std::string& label, const Colors& colors,
                int x_jitter) {
    const int total_w = static_cast<int>(label.size()) * kAdvance - kScale;
    int x0 = (kHrW - total_w) / 2 + x_jitter;
    x0 = std::max(0, std::min(kHrW - total_w, x0));
    const int y0 = (kHrH - kGlyphH * kScale) / 2;
    for (size_t gi = 0; gi < label.size(); ++gi) {
        const auto rows = glyph_rows(label[gi]);
        for (int r = 0; r < kGlyphH; ++r)
            for (int x = 0; x < kGlyphW; ++x) {
                if (!(rows[static_cast<size_t>(r)] & (1u << (kGlyphW - 1 - x)))) continue;
                for (int dy = 0; dy < kScale; ++dy)
                    for (int dx = 0; dx < kScale; ++dx) {
                        const int py = y0 + r * kScale + dy;
                        const int px = x0 + static_cast<int>(gi) * kAdvance + x * kScale + dx;
                        if (py < 0 || py >= kHrH || px < 0 || px >= kHrW) continue;
                        for (int c = 0; c < 3; ++c) img.at(c, py, px) = colors.fg[c];
                    }
            }
    }
}

}  // namespace

Tensor<float> degrade(const Tensor<float>& hr, const DegradeSpec& spec, Rng& rng) {
    if (hr.rank() != 3 || hr.dim(0) != 3 || hr.dim(1) != kHrH || hr.dim(2) != kHrW)
        throw std::invalid_argument("degrade: expects a (3,32,128) image, got " +
                                    hr.shape_str());
    const double sigma = rng.uniform(spec.blur_lo, spec.blur_hi);
    const double noise_std = rng.uniform(spec.noise_lo, spec.noise_hi);
    const double brightness =
        rng.uniform(-spec.brightness_jitter, spec.brightness_jitter);

    // separable gaussian, reflective edges
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kern(static_cast<size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kern[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        ksum += kern[static_cast<size_t>(i + radius)];
    }
    for (auto& k : kern) k /= ksum;
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
        return i;
    };

    Tensor<float> hpass({3, kHrH, kHrW}), blurred({3, kHrH, kHrW});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < kHrH; ++y)
            for (int x = 0; x < kHrW; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kern[static_cast<size_t>(i + radius)] *
                           hr.at(c, y, reflect(x + i, kHrW));
                hpass.at(c, y, x) = static_cast<float>(acc);
            }
        for (int y = 0; y < kHrH; ++y)
            for (int x = 0; x < kHrW; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kern[static_cast<size_t>(i + radius)] *
                           hpass.at(c, reflect(y + i, kHrH), x);
                blurred.at(c, y, x) = static_cast<float>(acc);
            }
    }

    const int s = spec.down;
    Tensor<float> lr({3, kHrH / s, kHrW / s});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < kHrH / s; ++y)
            for (int x = 0; x < kHrW / s; ++x) {
                double acc = 0.0;
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx) acc += blurred.at(c, y * s + dy, x * s + dx);
                lr.at(c, y, x) = static_cast<float>(acc / (s * s));
            }

    for (auto& v : lr.data)
        v = clamp01(v + noise_std * rng.normal() + brightness);
    return lr;
}

Tensor<float> render_background(uint64_t seed) {
    Rng rng(seed);
    const Colors colors = draw_colors(rng);
    Tensor<float> hr({3, kHrH, kHrW});
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < kHrH * kHrW; ++i)
            hr.data[static_cast<size_t>(c) * kHrH * kHrW + i] = colors.bg[c];
    return hr;
}

SamplePair render_sample(uint64_t seed, const Alphabet& alphabet, Severity severity) {
    Rng rng(seed);
    const Colors colors = draw_colors(rng);
    SamplePair out;
    out.hr = Tensor<float>({3, kHrH, kHrW});
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < kHrH * kHrW; ++i)
            out.hr.data[static_cast<size_t>(c) * kHrH * kHrW + i] = colors.bg[c];
    out.label = draw_label(rng, alphabet);
    const int x_jitter = rng.uniform_int(-2, 2);
    paint_text(out.hr, out.label, colors, x_jitter);
    out.lr = degrade(out.hr, DegradeSpec::for_severity(severity), rng);
    return out;
}

void write_dataset(const std::string& dir, int n, uint64_t seed, Severity severity,
                   const Alphabet& alphabet) {
    fs::create_directories(fs::path(dir) / "pairs");
    std::ofstream labels(fs::path(dir) / "labels.tsv", std::ios::binary);
    if (!labels) throw std::runtime_error("write_dataset: cannot write to " + dir);
    for (int i = 0; i < n; ++i) {
        const auto pair = render_sample(seed + static_cast<uint64_t>(i), alphabet,
                                        severity_for_index(severity, i));
        char name[32];
        std::snprintf(name, sizeof(name), "%06d", i);
        write_png((fs::path(dir) / "pairs" / (std::string(name) + "_lr.png")).string(),
                  pair.lr);
        write_png((fs::path(dir) / "pairs" / (std::string(name) + "_hr.png")).string(),
                  pair.hr);
        labels << i << '\t' << pair.label << '\n';
    }
    labels.close();
    std::ofstream meta(fs::path(dir) / "meta.txt", std::ios::binary);
    meta << "seed = " << seed << "\n"
         << "count = " << n << "\n"
         << "severity = " << to_string(severity) << "\n"
         << "mixed_rule = index mod 3 -> easy,medium,hard\n";
}

Corpus load_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream labels(root / "labels.tsv");
    if (!labels)
        throw std::runtime_error("load_dataset: no labels.tsv in " + dir);

    Corpus corpus;
    std::set<int> seen;
    std::string line;
    std::vector<std::pair<int, std::string>> rows;
    while (std::getline(labels, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("load_dataset: malformed labels.tsv line: " + line);
        const int idx = std::stoi(line.substr(0, tab));
        if (!seen.insert(idx).second)
            throw std::runtime_error("load_dataset: duplicate index " +
                                     std::to_string(idx) + " in labels.tsv");
        rows.emplace_back(idx, line.substr(tab + 1));
    }
    const int n = static_cast<int>(rows.size());
    for (const auto& [idx, label] : rows)
        if (idx < 0 || idx >= n)
            throw std::runtime_error("load_dataset: non-contiguous index " +
                                     std::to_string(idx) + " in labels.tsv");
    std::sort(rows.begin(), rows.end());

    // every listed pair must exist, and nothing else may sit in pairs/
    size_t png_count = 0;
    for (const auto& e : fs::directory_iterator(root / "pairs"))
        if (e.path().extension() == ".png") ++png_count;
    if (png_count != static_cast<size_t>(2 * n))
        throw std::runtime_error("load_dataset: expected " + std::to_string(2 * n) +
                                 " images, found " + std::to_string(png_count));

    corpus.samples.reserve(static_cast<size_t>(n));
    for (const auto& [idx, label] : rows) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06d", idx);
        const auto lr_path = root / "pairs" / (std::string(name) + "_lr.png");
        const auto hr_path = root / "pairs" / (std::string(name) + "_hr.png");
        if (!fs::exists(lr_path) || !fs::exists(hr_path))
            throw std::runtime_error("load_dataset: missing image pair for index " +
                                     std::to_string(idx));
        SamplePair p;
        p.lr = read_png(lr_path.string());
        p.hr = read_png(hr_path.string());
        p.label = label;
        if (p.lr.shape != std::vector<int>{3, 16, 64} ||
            p.hr.shape != std::vector<int>{3, kHrH, kHrW})
            throw std::runtime_error("load_dataset: bad geometry at index " +
                                     std::to_string(idx));
        corpus.samples.push_back(std::move(p));
    }

    std::ifstream meta(root / "meta.txt");
    if (meta) {
        while (std::getline(meta, line)) {
            std::istringstream is(line);
            std::string key, eq, value;
            if (is >> key >> eq >> value && eq == "=") {
                if (key == "severity") corpus.severity = severity_from(value);
                if (key == "seed") corpus.seed = std::stoull(value);
            }
        }
    }
    return corpus;
}

}  // namespace sgenet
