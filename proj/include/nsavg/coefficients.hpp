#pragma once

#include "nsavg/covariance.hpp"
#include "nsavg/errors.hpp"
#include "nsavg/operators.hpp"
#include "nsavg/spectral_field.hpp"

#include <json.hpp>

#include <functional>
#include <stdexcept>
#include <string>

namespace nsavg {

// Diagonal noise modulation: a scalar gain applied to a Q-Wiener increment.
// The action is linear in the increment by construction; the Hilbert-Schmidt
// norm relative to a covariance is |gain| * sqrt(trace_h).
struct NoiseMap {
    double gain = 0.0;

    SpectralField apply(const SpectralField& increment) const { return gain * increment; }
    double hs_norm(const CovarianceSpec& cov) const {
        return std::abs(gain) * std::sqrt(cov.trace_h());
    }
};

// The coefficient maps f, g, sigma1, sigma2 with their declared structural
// constants. Declared constants are the contract; estimate_lipschitz provides
// empirical lower bounds for testing them. Immutable after construction; all
// maps are pure.
struct CoefficientSet {
    std::string name;

    std::function<SpectralField(const SpectralField&, const SpectralField&)> f;
    std::function<SpectralField(const SpectralField&, const SpectralField&)> g;
    std::function<NoiseMap(const SpectralField&)> sigma1;
    std::function<NoiseMap(const SpectralField&, const SpectralField&)> sigma2;

    double L_f = 0.0;       // combined Lipschitz constant of f
    double L_g = 0.0;       // y-Lipschitz constant of g (enters A4)
    double L_sigma1 = 0.0;  // x-Lipschitz constant of sigma1 in HS norm
    double L_sigma2 = 0.0;  // y-Lipschitz constant of sigma2 in HS norm (enters A4)
    double zeta = 0.5;      // sublinear growth exponent of sigma2, in (0,1)

    // Analytic averaged drift, when the family admits one.
    std::function<SpectralField(const SpectralField&)> fbar_closed;
    bool has_closed_form_average() const { return static_cast<bool>(fbar_closed); }
};

// Dissipativity margin 2*lambda1 - 2*L_g - L_sigma2^2. Positive means
// admissible; a negative value is a valid return flagged by callers.
double verify_dissipativity(const CoefficientSet& set, double lambda1);

// Shipped coefficient families: "linear_ou", "saturating", "decoupled".
// Parameters are read from `params` (JSON object, possibly empty) with
// documented defaults; unknown names raise config_error.
CoefficientSet builtin_coefficients(const std::string& name, const nlohmann::json& params,
                                    const CovarianceSpec& cov1, const CovarianceSpec& cov2);

// Bounded Lipschitz clamp r -> r/(1+r).
inline double soft_clamp(double r) { return r / (1.0 + r); }

// Componentwise-in-Fourier bounded clamp v -> v / sqrt(1 + (v/scale)^2),
// applied to the real and imaginary parts of every retained coefficient,
// then Leray-projected back into H. Global Lipschitz constant 1.
SpectralField fourier_saturation(const SpectralField& y, double scale);

// Max over sampled pairs of distance(map(u), map(v)) / |u - v|; a lower
// bound on the true Lipschitz constant. Every other pair is a local
// perturbation pair to probe small-separation slopes. Degenerate pairs are
// skipped.
template <class Map, class Dist>
double estimate_lipschitz(Map&& map, const std::function<SpectralField()>& sampler,
                          int n_pairs, Dist&& distance) {
    if (n_pairs < 2) throw std::invalid_argument("estimate_lipschitz needs n_pairs >= 2");
    double best = 0.0;
    for (int i = 0; i < n_pairs; ++i) {
        SpectralField u = sampler();
        SpectralField v = sampler();
        if (i % 2 == 1) {
            const double vn = v.norm();
            if (vn > 0.0) v = u + (1e-3 / vn) * v;
        }
        const double sep = (u - v).norm();
        if (sep < 1e-14) continue;
        best = std::max(best, distance(map(u), map(v)) / sep);
    }
    return best;
}

template <class Map>
double estimate_lipschitz(Map&& map, const std::function<SpectralField()>& sampler,
                          int n_pairs) {
    return estimate_lipschitz(
        std::forward<Map>(map), sampler, n_pairs,
        [](const SpectralField& a, const SpectralField& b) { return (a - b).norm(); });
}

}  // namespace nsavg
