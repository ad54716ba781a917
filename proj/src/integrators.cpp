#include "nsavg/integrators.hpp"

#include <cmath>

namespace nsavg {

SpectralField exponential_euler_update(const SpectralField& state, const SpectralField& drift,
                                       const SpectralField& noise, double diffusivity,
                                       double dt) {
    const auto& sp = *state.space();
    const RArray decay = (-diffusivity * dt * sp.eigenvalues()).exp();
    // (1 - e^{-d lambda dt})/(d lambda); zero on the mean mode and outside
    // the band, where inverse_eigenvalues vanishes.
    const RArray weight = (1.0 - decay) * sp.inverse_eigenvalues() / diffusivity;
    SpectralField out = state;
    for (int c = 0; c < 2; ++c) {
        out.component(c) = decay * state.component(c) + weight * drift.component(c) +
                           noise.component(c);
    }
    return out;
}

SpectralField slow_substep(const SpectralField& x, double dt, const SpectralField& f_eff,
                           const CoefficientSet& coeffs, const SpectralField& dW1,
                           const SimParams& params) {
    const SpectralField drift =
        leray_project(params.advection ? f_eff - nonlinear_B(x, x) : f_eff);
    const SpectralField noise = leray_project(coeffs.sigma1(x).apply(dW1));
    return exponential_euler_update(x, drift, noise, params.viscosity, dt);
}

SpectralField fast_substep(const SpectralField& y, const SpectralField& x_arg, double dt,
                           double inv_eps, double noise_scale, const CoefficientSet& coeffs,
                           const SpectralField& dW2, const SimParams& params) {
    (void)params;
    const SpectralField drift = inv_eps * leray_project(coeffs.g(x_arg, y));
    const SpectralField noise = noise_scale * leray_project(coeffs.sigma2(x_arg, y).apply(dW2));
    return exponential_euler_update(y, drift, noise, inv_eps, dt);
}

void step_slow_fast_with_increments(SpectralField& X, SpectralField& Y, double t, double dt,
                                    double eps, const CoefficientSet& coeffs,
                                    const SpectralField& dW1, const SpectralField& dW2,
                                    const SimParams& params) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("eps must lie in (0,1)");
    const SpectralField f_eff = coeffs.f(X, Y);
    SpectralField Xn = slow_substep(X, dt, f_eff, coeffs, dW1, params);
    SpectralField Yn =
        fast_substep(Y, X, dt, 1.0 / eps, 1.0 / std::sqrt(eps), coeffs, dW2, params);
    if (!Xn.finite() || !Yn.finite()) {
        throw blow_up_error(t + dt, Xn.norm(), Yn.norm());
    }
    X = std::move(Xn);
    Y = std::move(Yn);
}

SlowFastState step_slow_fast(SlowFastState state, double dt, double eps,
                             const CoefficientSet& coeffs, const CovarianceSpec& q1,
                             const CovarianceSpec& q2, const SimParams& params) {
    const SpectralField dW1 = sample_increment(q1, dt, state.slow);
    const SpectralField dW2 = sample_increment(q2, dt, state.fast);
    step_slow_fast_with_increments(state.X, state.Y, state.t, dt, eps, coeffs, dW1, dW2,
                                   params);
    state.t += dt;
    return state;
}

SpectralField step_frozen(const SpectralField& y, const SpectralField& x_frozen, double dt,
                          const CoefficientSet& coeffs, const CovarianceSpec& q2,
                          NoiseStream& stream, const SimParams& params) {
    if (dt <= 0.0) throw std::domain_error("frozen step requires dt > 0");
    const SpectralField dW = sample_increment(q2, dt, stream);
    SpectralField out = fast_substep(y, x_frozen, dt, 1.0, 1.0, coeffs, dW, params);
    if (!out.finite()) throw blow_up_error(dt, x_frozen.norm(), out.norm());
    return out;
}

FbarEstimator FbarEstimator::closed_form(const CoefficientSet& coeffs) {
    if (!coeffs.has_closed_form_average()) {
        throw std::invalid_argument("coefficient set '" + coeffs.name +
                                    "' declares no analytic average");
    }
    return FbarEstimator(Mode::ClosedForm, Options{}, SpectralField(),
                         NoiseStream(0, 0, StreamRole::Frozen));
}

FbarEstimator FbarEstimator::time_average(Options opts, SpectralField y0, NoiseStream frozen) {
    return FbarEstimator(Mode::TimeAverage, opts, std::move(y0), frozen);
}

FbarEstimator FbarEstimator::warm_start(Options opts, SpectralField y0, NoiseStream frozen) {
    return FbarEstimator(Mode::WarmStart, opts, std::move(y0), frozen);
}

SpectralField FbarEstimator::estimate(const SpectralField& x, const CoefficientSet& coeffs,
                                      const CovarianceSpec& q2, const SimParams& params) {
    const double margin = verify_dissipativity(coeffs, 1.0);
    if (margin <= 0.0) {
        throw admissibility_error("fbar estimation requires a positive dissipativity margin; "
                                  "margin = " + std::to_string(margin),
                                  margin);
    }
    if (mode_ == Mode::ClosedForm) {
        return coeffs.fbar_closed(x);
    }

    const double dt = opts_.dt;
    if (mode_ == Mode::TimeAverage) {
        const long burn = std::lround(opts_.burn_in / dt);
        const long window = std::lround(opts_.t_erg / dt);
        SpectralField y = y_state_;
        for (long i = 0; i < burn; ++i) {
            y = step_frozen(y, x, dt, coeffs, q2, stream_, params);
        }
        SpectralField acc(x.space());
        for (long i = 0; i < window; ++i) {
            acc += coeffs.f(x, y);
            y = step_frozen(y, x, dt, coeffs, q2, stream_, params);
        }
        return (1.0 / static_cast<double>(window)) * acc;
    }

    // Warm start: relax the retained fast state toward mu^x, average over a
    // short window, keep the final state for the next call.
    SpectralField y = y_state_;
    for (int i = 0; i < opts_.relax_steps; ++i) {
        y = step_frozen(y, x, dt, coeffs, q2, stream_, params);
    }
    SpectralField acc(x.space());
    const int window = std::max(1, opts_.avg_steps);
    for (int i = 0; i < window; ++i) {
        acc += coeffs.f(x, y);
        y = step_frozen(y, x, dt, coeffs, q2, stream_, params);
    }
    y_state_ = std::move(y);
    return (1.0 / static_cast<double>(window)) * acc;
}

SpectralField step_averaged_with_increment(const SpectralField& xbar, double dt,
                                           FbarEstimator& est, const CoefficientSet& coeffs,
                                           const CovarianceSpec& q2, const SpectralField& dW1,
                                           const SimParams& params) {
    const SpectralField f_eff = est.estimate(xbar, coeffs, q2, params);
    SpectralField out = slow_substep(xbar, dt, f_eff, coeffs, dW1, params);
    if (!out.finite()) throw blow_up_error(dt, out.norm(), 0.0);
    return out;
}

SpectralField step_averaged(const SpectralField& xbar, double dt, FbarEstimator& est,
                            const CoefficientSet& coeffs, const CovarianceSpec& q1,
                            const CovarianceSpec& q2, NoiseStream& slow,
                            const SimParams& params) {
    const SpectralField dW1 = sample_increment(q1, dt, slow);
    return step_averaged_with_increment(xbar, dt, est, coeffs, q2, dW1, params);
}

AuxiliaryPathOutput run_auxiliary(const SpectralField& x0, const SpectralField& y0, double delta,
                                  double eps, double horizon, const CoefficientSet& coeffs,
                                  const CovarianceSpec& q1, const CovarianceSpec& q2,
                                  NoiseStream slow, NoiseStream fast, const SimParams& params,
                                  int record_every) {
    const double dt = dt_rule(eps, params);
    const double ratio = delta / dt;
    const long steps_per_delta = std::lround(ratio);
    if (steps_per_delta < 1 || std::abs(ratio - static_cast<double>(steps_per_delta)) > 1e-9) {
        throw config_error("delta must be a positive integer multiple of dt");
    }
    const long steps = std::lround(horizon / dt);

    AuxiliaryPathOutput out;
    out.X = x0;
    out.Y = y0;
    out.Xhat = x0;
    out.Yhat = y0;
    SpectralField anchor = x0;

    const double inv_eps = 1.0 / eps;
    const double noise_scale = 1.0 / std::sqrt(eps);
    for (long i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        if (i % steps_per_delta == 0) anchor = out.X;  // X^eps at t(delta)

        out.int_y_gap += (out.Y - out.Yhat).squared_norm() * dt;

        const SpectralField dW1 = sample_increment(q1, dt, slow);
        const SpectralField dW2 = sample_increment(q2, dt, fast);

        // Auxiliary pair first: it reads the current true slow state's anchor.
        const SpectralField fhat = coeffs.f(anchor, out.Yhat);
        SpectralField xhat_n = slow_substep(out.Xhat, dt, fhat, coeffs, dW1, params);
        SpectralField yhat_n =
            fast_substep(out.Yhat, anchor, dt, inv_eps, noise_scale, coeffs, dW2, params);
        step_slow_fast_with_increments(out.X, out.Y, t, dt, eps, coeffs, dW1, dW2, params);
        if (!xhat_n.finite() || !yhat_n.finite()) {
            throw blow_up_error(t + dt, xhat_n.norm(), yhat_n.norm());
        }
        out.Xhat = std::move(xhat_n);
        out.Yhat = std::move(yhat_n);

        out.sup_x_gap = std::max(out.sup_x_gap, (out.X - out.Xhat).squared_norm());
        if ((i + 1) % record_every == 0 || i + 1 == steps) {
            out.times.push_back(t + dt);
            out.y_gap_sq.push_back((out.Y - out.Yhat).squared_norm());
            out.x_gap_sq.push_back((out.X - out.Xhat).squared_norm());
        }
    }
    return out;
}

}  // namespace nsavg
