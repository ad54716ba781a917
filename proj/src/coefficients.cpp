#include "nsavg/coefficients.hpp"

#include <json.hpp>

#include <cmath>

namespace nsavg {

double verify_dissipativity(const CoefficientSet& set, double lambda1) {
    if (lambda1 <= 0.0) throw std::invalid_argument("lambda1 must be positive");
    return 2.0 * lambda1 - 2.0 * set.L_g - set.L_sigma2 * set.L_sigma2;
}

SpectralField fourier_saturation(const SpectralField& y, double scale) {
    SpectralField out = y;
    const double inv2 = 1.0 / (scale * scale);
    for (int c = 0; c < 2; ++c) {
        CArray& arr = out.component(c);
        arr = arr.unaryExpr([inv2](const Complex& z) {
            const double re = z.real() / std::sqrt(1.0 + z.real() * z.real() * inv2);
            const double im = z.imag() / std::sqrt(1.0 + z.imag() * z.imag() * inv2);
            return Complex(re, im);
        });
    }
    return leray_project(std::move(out));
}

namespace {

double param(const nlohmann::json& p, const char* key, double fallback) {
    if (p.is_object() && p.contains(key)) return p.at(key).get<double>();
    return fallback;
}

int iparam(const nlohmann::json& p, const char* key, int fallback) {
    if (p.is_object() && p.contains(key)) return p.at(key).get<int>();
    return fallback;
}

// sup_r of d/dr (y0^2 + r^2)^{zeta/2}: the global Lipschitz constant of the
// smoothed |y|^zeta growth profile.
double growth_profile_lipschitz(double zeta, double y0) {
    return zeta * std::pow(1.0 - zeta, -0.5) * std::pow(y0, zeta - 1.0) *
           std::pow((2.0 - zeta) / (1.0 - zeta), (zeta - 2.0) / 2.0);
}

void validate(const CoefficientSet& s) {
    if (s.L_f < 0 || s.L_g < 0 || s.L_sigma1 < 0 || s.L_sigma2 < 0) {
        throw config_error("declared Lipschitz constants must be nonnegative");
    }
    if (!(s.zeta > 0.0 && s.zeta < 1.0)) {
        throw config_error("growth exponent zeta must lie strictly inside (0,1)");
    }
}

}  // namespace

CoefficientSet builtin_coefficients(const std::string& name, const nlohmann::json& params,
                                    const CovarianceSpec& cov1, const CovarianceSpec& cov2) {
    const double tr1 = std::sqrt(cov1.trace_h());
    const double tr2 = std::sqrt(cov2.trace_h());
    if (tr1 <= 0.0 || tr2 <= 0.0) throw config_error("covariances must have positive trace");

    // sigma gains are normalized by sqrt(trace_h) so the HS norms equal the
    // configured parameters directly.
    const double a0 = param(params, "sigma1_a0", 0.3);
    const double a1 = param(params, "sigma1_a1", 0.2);
    auto sigma1 = [a0, a1, tr1](const SpectralField& x) {
        return NoiseMap{(a0 + a1 * soft_clamp(x.norm())) / tr1};
    };

    CoefficientSet set;
    set.name = name;
    set.sigma1 = sigma1;
    set.L_sigma1 = a1;

    const int hk1 = iparam(params, "h_mode_k1", 1);
    const int hk2 = iparam(params, "h_mode_k2", 0);

    if (name == "linear_ou") {
        const double c1 = param(params, "f_c1", 0.4);
        const double c2 = param(params, "f_c2", 1.0);
        const double hg = param(params, "h_gain", 0.8);
        const double s0 = param(params, "sigma2_s0", 1.0);

        auto h = [hg, hk1, hk2](const SpectralField& x) {
            return hg * mode_restriction(x, hk1, hk2);
        };
        set.f = [c1, c2](const SpectralField& x, const SpectralField& y) {
            return c1 * x + c2 * y;
        };
        set.g = [h](const SpectralField& x, const SpectralField&) { return h(x); };
        set.sigma2 = [s0, tr2](const SpectralField&, const SpectralField&) {
            return NoiseMap{s0 / tr2};
        };
        // Frozen equation is OU with stationary mean (-A)^{-1} h(x).
        set.fbar_closed = [c1, c2, h](const SpectralField& x) {
            return c1 * x + c2 * solve_poisson(h(x));
        };
        set.L_f = std::max(std::abs(c1), std::abs(c2));
        set.L_g = 0.0;
        set.L_sigma2 = 0.0;
        set.zeta = 0.5;
    } else if (name == "saturating") {
        const double c1 = param(params, "f_c1", 0.4);
        const double c2 = param(params, "f_c2", 0.5);
        const double kappa = param(params, "kappa", 0.25);
        const double sat_scale = param(params, "sat_scale", 1.0);
        const double hg = param(params, "h_gain", 0.25);
        const double s0 = param(params, "sigma2_s0", 0.5);
        const double sx = param(params, "sigma2_sx", 0.25);
        const double sy = param(params, "sigma2_sy", 0.5);
        const double zeta = param(params, "zeta", 0.5);
        const double y0 = param(params, "y0", 1.0);

        set.f = [c1, c2](const SpectralField& x, const SpectralField& y) {
            return c1 * x + c2 * y;
        };
        set.g = [kappa, sat_scale, hg, hk1, hk2](const SpectralField& x, const SpectralField& y) {
            return -kappa * fourier_saturation(y, sat_scale) + hg * mode_restriction(x, hk1, hk2);
        };
        set.sigma2 = [s0, sx, sy, zeta, y0, tr2](const SpectralField& x, const SpectralField& y) {
            const double growth = std::pow(y0 * y0 + y.squared_norm(), zeta / 2.0);
            return NoiseMap{(s0 + sx * soft_clamp(x.norm()) + sy * growth) / tr2};
        };
        set.L_f = std::max(std::abs(c1), std::abs(c2));
        set.L_g = kappa;
        set.L_sigma2 = sy * growth_profile_lipschitz(zeta, y0);
        set.zeta = zeta;
    } else if (name == "decoupled") {
        const double c1 = param(params, "f_c1", 0.4);
        const double s0 = param(params, "sigma2_s0", 0.7);

        set.f = [c1](const SpectralField& x, const SpectralField&) { return c1 * x; };
        set.g = [](const SpectralField& x, const SpectralField&) {
            return SpectralField::zero(x.space());
        };
        set.sigma2 = [s0, tr2](const SpectralField&, const SpectralField&) {
            return NoiseMap{s0 / tr2};
        };
        set.fbar_closed = [c1](const SpectralField& x) { return c1 * x; };
        set.L_f = std::abs(c1);
        set.L_g = 0.0;
        set.L_sigma2 = 0.0;
        set.zeta = 0.5;
    } else {
        throw config_error("unknown coefficient set '" + name + "'");
    }

    // Explicit overrides for the declared contract (experiment knobs).
    if (params.is_object()) {
        if (params.contains("L_g")) set.L_g = params.at("L_g").get<double>();
        if (params.contains("L_sigma2")) set.L_sigma2 = params.at("L_sigma2").get<double>();
    }
    validate(set);
    return set;
}

}  // namespace nsavg
