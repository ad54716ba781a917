#include "nsavg/covariance.hpp"

#include "nsavg/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace nsavg {

CovarianceSpec::CovarianceSpec(SpacePtr sp, double alpha, double amp)
    : space(std::move(sp)), decay_exponent(alpha), amplitude(amp) {
    if (decay_exponent <= 1.0) {
        throw std::invalid_argument("covariance decay exponent must exceed 1");
    }
    if (amplitude < 0.0) {
        throw std::invalid_argument("covariance amplitude must be nonnegative");
    }
}

double CovarianceSpec::mode_eigenvalue(double lambda) const {
    return amplitude * std::pow(lambda, -decay_exponent);
}

double CovarianceSpec::trace() const {
    double sum = 0.0;
    for (const auto& m : space->retained()) {
        sum += 2.0 * mode_eigenvalue(m.lambda);  // both components
    }
    return sum;
}

SpectralField sample_increment(const CovarianceSpec& cov, double dt, NoiseStream& stream) {
    if (dt <= 0.0) throw std::domain_error("increment requires dt > 0");
    const auto& sp = *cov.space;
    SpectralField w(cov.space);
    for (const auto& m : sp.half_retained()) {
        const double sd = std::sqrt(0.5 * cov.mode_eigenvalue(m.lambda) * dt);
        const int j1 = sp.index_of(-m.k1), j2 = sp.index_of(-m.k2);
        for (int c = 0; c < 2; ++c) {
            const auto [z1, z2] = stream.normal_pair();
            const Complex v = sd * Complex(z1, z2);
            w.component(c)(m.i1, m.i2) = v;
            w.component(c)(j1, j2) = std::conj(v);
        }
    }
    return leray_project(std::move(w));
}

}  // namespace nsavg
