#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sinet/common.hpp"
#include "sinet/tensor.hpp"

namespace sinet {

// Deterministic parameter/data RNG. All randomness in the library flows
// through one of these so a fixed seed reproduces a run bit-for-bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    Real normal(Real mean = 0, Real stddev = 1) {
        std::normal_distribution<Real> d(mean, stddev);
        return d(eng_);
    }

    Real uniform(Real lo = 0, Real hi = 1) {
        std::uniform_real_distribution<Real> d(lo, hi);
        return d(eng_);
    }

    int uniform_int(int lo, int hi) { // inclusive bounds
        std::uniform_int_distribution<int> d(lo, hi);
        return d(eng_);
    }

    std::uint64_t next_u64() { return eng_(); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

// He-normal init for a conv weight of shape (oc, ic, kh, kw):
// stddev = sqrt(2 / fan_in) with fan_in = ic*kh*kw.
inline Tensor he_normal(Rng& rng, const Shape& shape) {
    const Real fan_in = static_cast<Real>(shape.c) * shape.h * shape.w;
    require(fan_in > 0, ErrorKind::Shape, "he_normal: empty fan-in");
    const Real stddev = std::sqrt(Real(2) / fan_in);
    std::vector<Real> data(shape.numel());
    for (Real& v : data) v = rng.normal(0, stddev);
    return Tensor::from_data(shape, std::move(data));
}

} // namespace sinet
