#pragma once

#include "nsavg/coefficients.hpp"
#include "nsavg/covariance.hpp"
#include "nsavg/errors.hpp"

#include <optional>
#include <vector>

namespace nsavg {

struct SimParams {
    double viscosity = 1.0;
    double cfl = 0.1;
    double dt_max = 1e-3;
    bool advection = true;  // include -B(x) in the slow drift (off: Stokes reduction)
};

// dt = min(cfl * eps, dt_max): the explicit fast drift increment stays O(cfl).
inline double dt_rule(double eps, const SimParams& p) {
    return std::min(p.cfl * eps, p.dt_max);
}

// One exponential Euler-Maruyama update for
//   dx = diffusivity * A x dt + drift dt + (noise impulse),
// modewise: x' = e^{-d lambda dt} x + (1 - e^{-d lambda dt})/(d lambda) drift + noise.
// The linear flow is exact; drift is the explicit left-point value per unit
// time; noise is a plain Ito increment.
SpectralField exponential_euler_update(const SpectralField& state, const SpectralField& drift,
                                       const SpectralField& noise, double diffusivity, double dt);

// Slow-component update shared by the coupled system and the averaged
// equation, so that coupled comparisons differ only through the drift field.
SpectralField slow_substep(const SpectralField& x, double dt, const SpectralField& f_eff,
                           const CoefficientSet& coeffs, const SpectralField& dW1,
                           const SimParams& params);

// Fast/frozen-component update. The frozen equation is the case
// inv_eps = noise_scale = 1 with x held fixed.
SpectralField fast_substep(const SpectralField& y, const SpectralField& x_arg, double dt,
                           double inv_eps, double noise_scale, const CoefficientSet& coeffs,
                           const SpectralField& dW2, const SimParams& params);

struct SlowFastState {
    double t = 0.0;
    SpectralField X, Y;
    NoiseStream slow, fast;
};

SlowFastState step_slow_fast(SlowFastState state, double dt, double eps,
                             const CoefficientSet& coeffs, const CovarianceSpec& q1,
                             const CovarianceSpec& q2, const SimParams& params);

// Same update with externally supplied increments (used to couple paths and
// for refinement studies). Throws blow_up_error on non-finite output.
void step_slow_fast_with_increments(SpectralField& X, SpectralField& Y, double t, double dt,
                                    double eps, const CoefficientSet& coeffs,
                                    const SpectralField& dW1, const SpectralField& dW2,
                                    const SimParams& params);

SpectralField step_frozen(const SpectralField& y, const SpectralField& x_frozen, double dt,
                          const CoefficientSet& coeffs, const CovarianceSpec& q2,
                          NoiseStream& stream, const SimParams& params);

// Estimator for the averaged drift fbar(x) = int f(x,y) mu^x(dy).
class FbarEstimator {
public:
    enum class Mode { ClosedForm, TimeAverage, WarmStart };

    struct Options {
        double t_erg = 50.0;    // time-average window
        double burn_in = 5.0;   // discarded transient
        int relax_steps = 200;  // warm-start relaxation per call
        int avg_steps = 50;     // warm-start averaging window
        double dt = 1e-3;       // frozen-equation step
    };

    // Only constructible for coefficient sets declaring an analytic average.
    static FbarEstimator closed_form(const CoefficientSet& coeffs);
    static FbarEstimator time_average(Options opts, SpectralField y0, NoiseStream frozen);
    static FbarEstimator warm_start(Options opts, SpectralField y0, NoiseStream frozen);

    Mode mode() const { return mode_; }
    const NoiseStream& stream() const { return stream_; }

    // TimeAverage and WarmStart advance the internal stream (and, for
    // WarmStart, retain the final fast state).
    SpectralField estimate(const SpectralField& x, const CoefficientSet& coeffs,
                           const CovarianceSpec& q2, const SimParams& params);

private:
    FbarEstimator(Mode mode, Options opts, SpectralField y0, NoiseStream stream)
        : mode_(mode), opts_(opts), y_state_(std::move(y0)), stream_(stream) {}

    Mode mode_;
    Options opts_;
    SpectralField y_state_;
    NoiseStream stream_;
};

SpectralField step_averaged_with_increment(const SpectralField& xbar, double dt,
                                           FbarEstimator& est, const CoefficientSet& coeffs,
                                           const CovarianceSpec& q2, const SpectralField& dW1,
                                           const SimParams& params);

SpectralField step_averaged(const SpectralField& xbar, double dt, FbarEstimator& est,
                            const CoefficientSet& coeffs, const CovarianceSpec& q1,
                            const CovarianceSpec& q2, NoiseStream& slow,
                            const SimParams& params);

// Khasminskii auxiliary pair co-evolved with the true slow-fast pair on the
// same noise paths. The frozen anchor is X^eps at the last delta-grid point.
struct AuxiliaryPathOutput {
    std::vector<double> times;
    std::vector<double> y_gap_sq;  // |Y - Yhat|^2 at recorded times
    std::vector<double> x_gap_sq;  // |X - Xhat|^2 at recorded times
    double int_y_gap = 0.0;        // int_0^T |Y - Yhat|^2 dt
    double sup_x_gap = 0.0;        // sup_t |X - Xhat|^2
    SpectralField X, Y, Xhat, Yhat;
};

AuxiliaryPathOutput run_auxiliary(const SpectralField& x0, const SpectralField& y0, double delta,
                                  double eps, double horizon, const CoefficientSet& coeffs,
                                  const CovarianceSpec& q1, const CovarianceSpec& q2,
                                  NoiseStream slow, NoiseStream fast, const SimParams& params,
                                  int record_every = 1);

}  // namespace nsavg
