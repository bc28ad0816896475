#pragma once

#include "sgenet/tensor.hpp"

namespace sgenet {

// Peak signal-to-noise ratio in dB for [0,1] images; capped at 100 dB when
// the MSE vanishes.
double psnr(const Tensor<float>& a, const Tensor<float>& b);

// Mean SSIM over sliding 8x8 uniform windows, k1=0.01, k2=0.03, averaged
// across channels.
double ssim(const Tensor<float>& a, const Tensor<float>& b);

// Catmull-Rom bicubic resize of a (3,H,W) image, output clamped to [0,1].
Tensor<float> bicubic_resize(const Tensor<float>& img, int out_h, int out_w);

// The comparison baseline: plain x2 bicubic upsampling of the LR input.
Tensor<float> bicubic_x2(const Tensor<float>& lr);

}  // namespace sgenet
