#pragma once

#include "nsavg/rng.hpp"
#include "nsavg/spectral_field.hpp"

namespace nsavg {

// Trace-class covariance for a Q-Wiener process, diagonal in the Fourier
// eigenbasis with power-law decay q_k = amplitude * |k|^{-2 alpha}.
struct CovarianceSpec {
    SpacePtr space;
    double decay_exponent;  // alpha > 1
    double amplitude;       // >= 0

    CovarianceSpec(SpacePtr sp, double alpha, double amp);

    double mode_eigenvalue(double lambda) const;

    // Sum of q_k over retained modes (both signs of k) and both vector
    // components: the trace of Q on the ambient two-component space.
    double trace() const;
    // Trace of the divergence-free restriction P Q P (one complex degree of
    // freedom per wavenumber): equals trace()/2 for this isotropic family.
    // E|dW|^2 = trace_h() * dt for sampled increments.
    double trace_h() const { return 0.5 * trace(); }
};

// One Q-Wiener increment over dt: independent centered Gaussian coefficients
// with variance q_k * dt per real degree of freedom, Hermitian-symmetrized
// and Leray-projected. Advances the stream counter deterministically.
SpectralField sample_increment(const CovarianceSpec& cov, double dt, NoiseStream& stream);

}  // namespace nsavg
