#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sgenet/recognizer.hpp"
#include "sgenet/tensor.hpp"

namespace sgenet {

enum class Severity { kEasy, kMedium, kHard, kMixed };

Severity severity_from(const std::string& s);
const char* to_string(Severity s);

// Mixed corpora interleave the three bins deterministically.
inline Severity severity_for_index(Severity corpus, int64_t index) {
    if (corpus != Severity::kMixed) return corpus;
    switch (index % 3) {
        case 0: return Severity::kEasy;
        case 1: return Severity::kMedium;
        default: return Severity::kHard;
    }
}

// Degradation parameter ranges; the three severity bins split the full blur
// and noise ranges into thirds.
struct DegradeSpec {
    double blur_lo = 0.5, blur_hi = 2.0;
    double noise_lo = 0.0, noise_hi = 0.03;
    double brightness_jitter = 0.1;
    int down = 2;

    static DegradeSpec for_severity(Severity s);
};

struct SamplePair {
    Tensor<float> lr;   // (3,16,64)
    Tensor<float> hr;   // (3,32,128)
    std::string label;  // 1..10 chars over the non-blank alphabet
};

// Deterministic given the seed: label draw, colors, layout, and the
// degradation parameters all come from one per-sample stream.
SamplePair render_sample(uint64_t seed, const Alphabet& alphabet, Severity severity);

// Renders only the background of the sample (same colors, no text).
Tensor<float> render_background(uint64_t seed);

// blur -> area-average downsample -> noise -> brightness -> clamp.
Tensor<float> degrade(const Tensor<float>& hr, const DegradeSpec& spec, Rng& rng);

struct Corpus {
    std::vector<SamplePair> samples;
    Severity severity = Severity::kMixed;
    uint64_t seed = 0;
};

// Layout: {dir}/pairs/{06d}_lr.png + _hr.png, {dir}/labels.tsv, {dir}/meta.txt.
void write_dataset(const std::string& dir, int n, uint64_t seed, Severity severity,
                   const Alphabet& alphabet);
Corpus load_dataset(const std::string& dir);

}  // namespace sgenet
