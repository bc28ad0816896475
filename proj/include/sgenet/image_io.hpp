#pragma once

#include <string>

#include "sgenet/tensor.hpp"

namespace sgenet {

// Images move through the pipeline as (3,H,W) float tensors in [0,1];
// on disk they are 8-bit RGB PNGs.
Tensor<float> read_png(const std::string& path);
void write_png(const std::string& path, const Tensor<float>& img);

}  // namespace sgenet
