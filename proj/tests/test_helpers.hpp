#pragma once

#include <json.hpp>

#include "nsavg/covariance.hpp"
#include "nsavg/operators.hpp"
#include "nsavg/spectral_field.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>

namespace nsavg::testing {

inline NoiseStream probe_stream(uint64_t seed, uint32_t sample = 0) {
    return NoiseStream(seed, sample, StreamRole::Probe);
}

inline std::function<SpectralField()> field_sampler(const SpacePtr& space, uint64_t seed,
                                                    double decay = 2.0, double norm = 1.0) {
    auto stream = std::make_shared<NoiseStream>(probe_stream(seed));
    return [space, stream, decay, norm] {
        return random_divfree_field(space, *stream, decay, norm);
    };
}

// Dense modewise Leray oracle: applies I - k k^T/|k|^2 per mode with plain
// 2x2 matrix arithmetic, independent of the library's vectorized route.
inline SpectralField dense_leray_oracle(const SpectralField& raw) {
    SpectralField out = raw;
    const auto& sp = *raw.space();
    for (const auto& m : sp.retained()) {
        Eigen::Matrix2d proj = Eigen::Matrix2d::Identity();
        const Eigen::Vector2d k(m.k1, m.k2);
        proj -= k * k.transpose() / m.lambda;
        const Eigen::Vector2cd u(raw.component(0)(m.i1, m.i2), raw.component(1)(m.i1, m.i2));
        const Eigen::Vector2cd p = proj * u;
        out.component(0)(m.i1, m.i2) = p(0);
        out.component(1)(m.i1, m.i2) = p(1);
    }
    return out;
}

}  // namespace nsavg::testing
