#include "nsavg/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace nsavg {

double sobolev_norm(const SpectralField& u, double s) {
    const auto& sp = *u.space();
    if (s == 0.0) return u.norm();
    // Masked entries get a harmless placeholder eigenvalue so lambda^s never
    // evaluates 0^negative.
    const RArray weights =
        (sp.eigenvalues() + (1.0 - sp.dealias_mask())).pow(s) * sp.dealias_mask();
    return std::sqrt((weights * (u.component(0).abs2() + u.component(1).abs2())).sum());
}

double lebesgue_norm(const SpectralField& u, double p) {
    if (p < 1.0) throw std::domain_error("lebesgue norm requires p >= 1");
    const auto& sp = *u.space();
    CArray p0, p1;
    sp.to_physical(u.component(0), p0);
    sp.to_physical(u.component(1), p1);
    const RArray mag2 = p0.real().square() + p1.real().square();
    const double cell = std::pow(2.0 * M_PI / sp.size(), 2);
    if (p == 2.0) return std::sqrt(cell * mag2.sum());
    return std::pow(cell * mag2.pow(p / 2.0).sum(), 1.0 / p);
}

double field_norm(const SpectralField& u, const NormKind& kind) {
    return kind.family == NormKind::Family::Sobolev ? sobolev_norm(u, kind.order)
                                                    : lebesgue_norm(u, kind.order);
}

SpectralField leray_project(SpectralField raw) {
    const auto& sp = *raw.space();
    const CArray div = sp.k1c() * raw.component(0) + sp.k2c() * raw.component(1);
    const CArray scaled = div * sp.inv_lambda_c();
    raw.component(0) -= sp.k1c() * scaled;
    raw.component(1) -= sp.k2c() * scaled;
    raw.component(0) *= sp.dealias_mask();
    raw.component(1) *= sp.dealias_mask();
    return raw;
}

SpectralField apply_semigroup(const SpectralField& u, double t) {
    if (t < 0.0) throw std::domain_error("semigroup time must be nonnegative");
    if (t == 0.0) return u;
    SpectralField out = u;
    const RArray decay = (-u.space()->eigenvalues() * t).exp();
    out.component(0) *= decay;
    out.component(1) *= decay;
    return out;
}

SpectralField nonlinear_B(const SpectralField& u, const SpectralField& v) {
    require_same_space(u, v);
    const auto& sp = *u.space();

    CArray u1p, u2p;
    sp.to_physical(u.component(0), u1p);
    sp.to_physical(u.component(1), u2p);

    SpectralField result(u.space());
    CArray deriv, d1p, d2p, prod;
    for (int j = 0; j < 2; ++j) {
        deriv = sp.ik1() * v.component(j);
        sp.to_physical(deriv, d1p);
        deriv = sp.ik2() * v.component(j);
        sp.to_physical(deriv, d2p);
        prod = (u1p.real() * d1p.real() + u2p.real() * d2p.real()).cast<Complex>();
        sp.to_spectral(prod, result.component(j));
    }
    result = leray_project(std::move(result));  // mask applied inside
    result.canonicalize();
    return result;
}

double trilinear_b(const SpectralField& u, const SpectralField& v, const SpectralField& w) {
    require_same_space(u, v);
    require_same_space(u, w);
    const auto& sp = *u.space();

    CArray u1p, u2p, w1p, w2p;
    sp.to_physical(u.component(0), u1p);
    sp.to_physical(u.component(1), u2p);
    sp.to_physical(w.component(0), w1p);
    sp.to_physical(w.component(1), w2p);

    CArray deriv, d1p, d2p;
    RArray acc = RArray::Zero(sp.size(), sp.size());
    for (int j = 0; j < 2; ++j) {
        deriv = sp.ik1() * v.component(j);
        sp.to_physical(deriv, d1p);
        deriv = sp.ik2() * v.component(j);
        sp.to_physical(deriv, d2p);
        const RArray wj = (j == 0 ? w1p : w2p).real();
        acc += (u1p.real() * d1p.real() + u2p.real() * d2p.real()) * wj;
    }
    return std::pow(2.0 * M_PI / sp.size(), 2) * acc.sum();
}

SpectralField solve_poisson(const SpectralField& forcing) {
    SpectralField out = forcing;
    out.component(0) *= forcing.space()->inverse_eigenvalues();
    out.component(1) *= forcing.space()->inverse_eigenvalues();
    return out;
}

SpectralField mode_restriction(const SpectralField& u, int k1, int k2) {
    SpectralField out(u.space());
    out.set_mode_pair(k1, k2, u.mode(k1, k2, 0), u.mode(k1, k2, 1));
    return out;
}

SpectralField divfree_mode_basis(const SpacePtr& space, int k1, int k2) {
    const double klen = std::sqrt(static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2);
    // k-perp direction, coefficients (1/sqrt2, 0i) per +-k so |e| = 1.
    const double a = 1.0 / std::sqrt(2.0);
    SpectralField e(space);
    e.set_mode_pair(k1, k2, Complex(-k2 / klen * a, 0.0), Complex(k1 / klen * a, 0.0));
    return e;
}

}  // namespace nsavg
