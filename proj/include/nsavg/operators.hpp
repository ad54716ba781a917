#pragma once

#include "nsavg/spectral_field.hpp"

namespace nsavg {

// Norm selector: sobolev(s) is ||u||_s = sqrt(sum lambda_k^s |c_k|^2) over
// both components; lebesgue(p) is the L^p(T^2) norm of |u(xi)| via physical
// quadrature on the N x N grid. sobolev(0) coincides with lebesgue(2).
struct NormKind {
    enum class Family { Sobolev, Lebesgue };
    Family family;
    double order;

    static NormKind sobolev(double s) { return {Family::Sobolev, s}; }
    static NormKind lebesgue(double p) { return {Family::Lebesgue, p}; }
};

double field_norm(const SpectralField& u, const NormKind& kind);
double sobolev_norm(const SpectralField& u, double s);
double lebesgue_norm(const SpectralField& u, double p);

// Helmholtz-Leray projection onto divergence-free fields:
// c(k) <- c(k) - k (k.c(k)) / |k|^2. Idempotent; gradients map to zero.
SpectralField leray_project(SpectralField raw);

// Heat semigroup e^{tA}, A = Laplacian: modewise decay e^{-lambda_k t}.
// t = 0 is the identity; t < 0 is a domain error.
SpectralField apply_semigroup(const SpectralField& u, double t);

// B(u,v) = P_H((u.grad)v), computed pseudospectrally with the two-thirds
// mask applied to the product before projection.
SpectralField nonlinear_B(const SpectralField& u, const SpectralField& v);

// b(u,v,w) = <(u.grad)v, w> by physical-space quadrature; consistent with
// <nonlinear_B(u,v), w> for dealiased fields.
double trilinear_b(const SpectralField& u, const SpectralField& v, const SpectralField& w);

// Solves (-A) x = forcing modewise (division by lambda_k).
SpectralField solve_poisson(const SpectralField& forcing);

// Restriction to the +-(k1,k2) pair of modes (all other coefficients zeroed).
SpectralField mode_restriction(const SpectralField& u, int k1, int k2);

// Unit-norm divergence-free real field supported on the +-(k1,k2) pair,
// oriented along k-perp. Used as a Lipschitz mode-projection functional.
SpectralField divfree_mode_basis(const SpacePtr& space, int k1, int k2);

}  // namespace nsavg
