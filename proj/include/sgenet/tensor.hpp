#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgenet {

// Row-major dense tensor, rank 1..4. Carries images (B,C,H,W), token
// sequences (B,T,D) and flat parameter blocks alike.
template <class S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> sh, S fill = S(0)) : shape(std::move(sh)) {
        data.assign(static_cast<size_t>(numel_of(shape)), fill);
    }

    static int64_t numel_of(const std::vector<int>& sh) {
        int64_t n = 1;
        for (int d : sh) {
            if (d < 1) throw std::invalid_argument("tensor dims must be >= 1");
            n *= d;
        }
        return sh.empty() ? 0 : n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<size_t>(i)); }

    // Strided accessors for the common ranks.
    S& at(int i) { return data[static_cast<size_t>(i)]; }
    const S& at(int i) const { return data[static_cast<size_t>(i)]; }
    S& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    const S& at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
    S& at(int i, int j, int k) {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    const S& at(int i, int j, int k) const {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    S& at(int i, int j, int k, int l) {
        return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    const S& at(int i, int j, int k, int l) const {
        return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    Tensor reshaped(std::vector<int> sh) const {
        if (numel_of(sh) != numel()) throw std::invalid_argument("reshape: numel mismatch");
        Tensor t;
        t.shape = std::move(sh);
        t.data = data;
        return t;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '(';
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ')';
        return os.str();
    }

    template <class T>
    Tensor<T> cast() const {
        Tensor<T> t;
        t.shape = shape;
        t.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) t.data[i] = static_cast<T>(data[i]);
        return t;
    }
};

inline void check_same_shape(const std::vector<int>& a, const std::vector<int>& b,
                             const char* where) {
    if (a != b) {
        auto str = [](const std::vector<int>& s) {
            std::ostringstream os;
            os << '(';
            for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
            os << ')';
            return os.str();
        };
        throw std::invalid_argument(std::string(where) + ": shape mismatch " + str(a) +
                                    " vs " + str(b));
    }
}

// Deterministic RNG. splitmix64-seeded xoshiro-free mt19937_64 plus explicit
// uniform/normal transforms so streams do not depend on libstdc++ internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix(seed)) {}

    uint64_t next_u64() {
        // xorshift64* keeps the stream portable and cheap.
        uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0, u2 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Rng fork(uint64_t stream) { return Rng(state_ ^ splitmix(stream * 0x9E3779B97F4A7C15ULL + 1)); }

private:
    static uint64_t splitmix(uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

template <class S>
Tensor<S> random_normal(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
    Tensor<S> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<S>(rng.normal() * stddev);
    return t;
}

template <class S>
Tensor<S> random_uniform(std::vector<int> shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor<S> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<S>(rng.uniform(lo, hi));
    return t;
}

}  // namespace sgenet
