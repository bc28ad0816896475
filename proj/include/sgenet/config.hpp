#pragma once

#include <string>

#include "sgenet/losses.hpp"
#include "sgenet/sr_branch.hpp"

namespace sgenet {

// Flat `key = value` run configuration ('#' comments). Unknown keys are
// rejected; save/load round-trips the struct exactly.
struct RunConfig {
    SrConfig model;
    std::string alphabet = Alphabet{}.charset;
    LossWeights weights;
    bool finetune = false;  // Eq-5 fine-tuning of the guidance recognizer
    std::string char_weighting = "uniform";  // or inverse_frequency
    double lr = 1e-4;
    int batch = 16;
    int epochs = 30;
    uint64_t seed = 0;
    int ckpt_every = 1000;  // steps; 0 disables periodic checkpoints
    std::string data_dir, out_path;

    Alphabet make_alphabet() const {
        Alphabet al;
        al.charset = alphabet;
        return al;
    }

    bool operator==(const RunConfig&) const = default;
};

std::string serialize(const RunConfig& cfg);
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

}  // namespace sgenet
