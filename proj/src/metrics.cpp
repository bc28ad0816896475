#include "sgenet/metrics.hpp"

#include <cmath>

namespace sgenet {

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
    check_same_shape(a.shape, b.shape, "psnr");
    double mse = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        mse += d * d;
    }
    mse /= a.numel();
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor<float>& a, const Tensor<float>& b) {
    check_same_shape(a.shape, b.shape, "ssim");
    if (a.rank() != 3) throw std::invalid_argument("ssim: expects (C,H,W) images");
    const int ch = a.dim(0), h = a.dim(1), w = a.dim(2);
    const int win = 8;
    if (h < win || w < win) throw std::invalid_argument("ssim: image smaller than window");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    double total = 0.0;
    int64_t count = 0;
    for (int c = 0; c < ch; ++c)
        for (int y = 0; y + win <= h; ++y)
            for (int x = 0; x + win <= w; ++x) {
                double ma = 0, mb = 0;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        ma += a.at(c, y + dy, x + dx);
                        mb += b.at(c, y + dy, x + dx);
                    }
                ma /= win * win;
                mb /= win * win;
                double va = 0, vb = 0, cov = 0;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        const double da = a.at(c, y + dy, x + dx) - ma;
                        const double db = b.at(c, y + dy, x + dx) - mb;
                        va += da * da;
                        vb += db * db;
                        cov += da * db;
                    }
                va /= win * win - 1;
                vb /= win * win - 1;
                cov /= win * win - 1;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
    return total / count;
}

namespace {

// Catmull-Rom kernel (a = -0.5).
double cubic(double t) {
    const double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}

}  // namespace

Tensor<float> bicubic_resize(const Tensor<float>& img, int out_h, int out_w) {
    if (img.rank() != 3) throw std::invalid_argument("bicubic: expects (C,H,W)");
    const int ch = img.dim(0), h = img.dim(1), w = img.dim(2);
    const double sy = double(h) / out_h, sx = double(w) / out_w;
    Tensor<float> out({ch, out_h, out_w});
    auto clampi = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    for (int c = 0; c < ch; ++c)
        for (int oy = 0; oy < out_h; ++oy) {
            const double fy = (oy + 0.5) * sy - 0.5;
            const int y0 = static_cast<int>(std::floor(fy));
            for (int ox = 0; ox < out_w; ++ox) {
                const double fx = (ox + 0.5) * sx - 0.5;
                const int x0 = static_cast<int>(std::floor(fx));
                double acc = 0.0;
                for (int m = -1; m <= 2; ++m) {
                    const double wy = cubic(fy - (y0 + m));
                    if (wy == 0.0) continue;
                    for (int n = -1; n <= 2; ++n) {
                        const double wx = cubic(fx - (x0 + n));
                        if (wx == 0.0) continue;
                        acc += wy * wx * img.at(c, clampi(y0 + m, h), clampi(x0 + n, w));
                    }
                }
                out.at(c, oy, ox) = static_cast<float>(acc < 0 ? 0 : (acc > 1 ? 1 : acc));
            }
        }
    return out;
}

Tensor<float> bicubic_x2(const Tensor<float>& lr) {
    if (lr.rank() != 3) throw std::invalid_argument("bicubic_x2: expects (C,H,W)");
    return bicubic_resize(lr, lr.dim(1) * 2, lr.dim(2) * 2);
}

}  // namespace sgenet
