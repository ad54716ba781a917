#pragma once

#include "nsavg/rng.hpp"
#include "nsavg/spectral_space.hpp"

#include <array>

namespace nsavg {

// Divergence-free velocity field as complex Fourier coefficients, two
// components per retained wavenumber. Value-semantic and safe to move
// between threads.
//
// Structural invariants maintained by canonicalize() and by every operation
// in this library: coefficients vanish outside the dealiased band and on the
// mean mode, and Hermitian symmetry c(-k) = conj(c(k)) holds exactly.
// Divergence-freeness is a property of how fields are produced (Leray
// projection, increments, integrator steps); divergence_residual() measures it.
class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(SpacePtr space)
        : space_(std::move(space)),
          c_{CArray::Zero(space_->size(), space_->size()),
             CArray::Zero(space_->size(), space_->size())} {}

    static SpectralField zero(SpacePtr space) { return SpectralField(std::move(space)); }

    const SpacePtr& space() const { return space_; }
    bool empty() const { return space_ == nullptr; }

    CArray& component(int c) { return c_[c]; }
    const CArray& component(int c) const { return c_[c]; }

    Complex mode(int k1, int k2, int comp) const;
    // Sets coefficients at k and the conjugate pair at -k. The mode must lie
    // in the retained band.
    void set_mode_pair(int k1, int k2, Complex u1, Complex u2);

    // Re-impose the structural invariants (band mask, zero mean, Hermitian
    // symmetry).
    void canonicalize();

    double squared_norm() const { return c_[0].abs2().sum() + c_[1].abs2().sum(); }
    double norm() const;
    // max_k |k . c(k)| over retained modes.
    double divergence_residual() const;
    bool finite() const { return c_[0].isFinite().all() && c_[1].isFinite().all(); }

    SpectralField& operator+=(const SpectralField& other);
    SpectralField& operator-=(const SpectralField& other);
    SpectralField& operator*=(double s);

private:
    SpacePtr space_;
    std::array<CArray, 2> c_;
};

void require_same_space(const SpectralField& a, const SpectralField& b);

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);
SpectralField operator*(SpectralField a, double s);
SpectralField operator-(SpectralField a);

// Real L^2(T^2) inner product <a, b>.
double inner_product(const SpectralField& a, const SpectralField& b);

// Named flows.
SpectralField taylor_green(const SpacePtr& space, double amplitude = 1.0);
SpectralField shear_flow(const SpacePtr& space, double amplitude = 1.0);

// Divergence-free random field with |k|^{-decay} coefficient fall-off,
// normalized to |u| = target_norm (zero field if target_norm == 0).
SpectralField random_divfree_field(const SpacePtr& space, NoiseStream& stream,
                                   double decay = 2.0, double target_norm = 1.0);

}  // namespace nsavg
