#pragma once

#include "nsavg/config.hpp"
#include "nsavg/integrators.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nsavg {

// NSE_THREADS environment variable, default hardware concurrency. Affects
// scheduling only; reductions are ordered by sample index.
int worker_count();

// Runs body(sample) for sample = 0..count-1 across workers. Exceptions
// propagate after all workers join.
void parallel_samples(int count, const std::function<void(int)>& body);

// delta = eps^{1/3} snapped to the nearest positive multiple of dt.
double default_delta(double eps, double dt);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // RMS residual
};
LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);
// OLS on (log x, log y); entries with y <= 0 are skipped.
std::optional<LineFit> fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys);

struct ConvergenceRow {
    double eps = 0.0;
    double delta = 0.0;
    int samples = 0;     // effective (non-blown-up) samples
    int attrition = 0;
    double err = 0.0;    // MC mean of sup_t |X^eps - Xbar|^2
    double se = 0.0;
    double err_p2 = 0.0; // MC mean of sup_t |X^eps - Xbar|^4
    double se_p2 = 0.0;
    bool usable = true;  // attrition <= 10%
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;  // eps descending
    std::optional<LineFit> slope;      // log err vs log eps, attrition-free rows
    std::optional<LineFit> slope_p2;
    uint64_t seed = 0;
    std::string config_hash;
    std::string coefficient_set;
};

// The headline experiment: M coupled paths of X^eps (with Y^eps) and Xbar
// sharing the slow noise stream; per-path sup over the recording grid.
ConvergenceReport run_convergence_study(const ExperimentConfig& cfg);

struct SweepRow {
    double param = 0.0;
    double mean = 0.0, se = 0.0;
    double mean2 = 0.0, se2 = 0.0;
    int samples = 0, attrition = 0;
};

struct SweepTable {
    std::string param_name;
    std::vector<SweepRow> rows;
    std::optional<LineFit> slope;  // log mean vs log param
};

// E int_0^T |X_t - X_{t(delta)}|^2 dt vs delta at eps = cfg.epsilons.front().
// Every delta must be an integer multiple of dt.
SweepTable measure_time_increments(const ExperimentConfig& cfg, const std::vector<double>& deltas);

// mean = E int |Y - Yhat|^2 dt, mean2 = E sup |X - Xhat|^2 vs delta at fixed
// eps = cfg.epsilons.front().
SweepTable measure_auxiliary_gap(const ExperimentConfig& cfg, const std::vector<double>& deltas);

struct ErgodicityProbe {
    double rate = 0.0;       // fitted eta
    double prefactor = 0.0;
    std::vector<double> times;
    std::vector<double> gap;  // E|phi(Y^{x,y1}) - phi(Y^{x,y2})|
};

// Coupled frozen paths from y1, y2 on the same noise; exponential fit of the
// mean phi-gap. Non-positive fitted rate raises diagnostic_error.
ErgodicityProbe probe_ergodicity(const ExperimentConfig& cfg);
ErgodicityProbe probe_ergodicity(const ExperimentConfig& cfg, const SpectralField& x,
                                 const SpectralField& y1, const SpectralField& y2);

// Lipschitz observables for the probe.
std::function<double(const SpectralField&)> make_phi(const ExperimentConfig& cfg,
                                                     const SpacePtr& space);

struct InequalityRung {
    double amplitude = 0.0;
    double coercivity_c = 0.0;    // fitted max of the coercivity statistic
    double monotonicity_c = 0.0;  // fitted max of the local-monotonicity statistic
};

struct InequalityReport {
    double eps = 0.0;
    double c_eps = 0.0;  // pinned coercivity constant (min(nu, 1/eps)/2)
    std::vector<InequalityRung> rungs;
    int violations = 0;  // inequality families whose fitted constant grows
                         // along the amplitude ladder
};

// One evaluation of the coercivity statistic
//   [<Aw + F(w), w> + |sigma(w)|^2 + c_eps ||w||_V^2] / (1 + |w|_H^2)
// for w = (u, v); bounded above for a correct drift.
double coercivity_statistic(const RuntimeSetup& setup, double eps, const SpectralField& u,
                            const SpectralField& v, bool corrupt_b = false);

// One evaluation of the local-monotonicity statistic
//   [<A dw + F(w1) - F(w2), dw> + |sigma(w1) - sigma(w2)|^2]
//     / ((1 + |u2|_{L4}^4) |dw|_H^2).
double monotonicity_statistic(const RuntimeSetup& setup, double eps, const SpectralField& u1,
                              const SpectralField& v1, const SpectralField& u2,
                              const SpectralField& v2, bool corrupt_b = false);

// Numeric check of the coercivity and local-monotonicity inequalities on
// random field pairs, with an amplitude ladder; fitted constants must not
// grow along the ladder. corrupt_b injects a spurious non-conservative term
// into B (fault-injection fixture for validating the detector).
InequalityReport verify_appendix_inequalities(const ExperimentConfig& cfg, int n_samples,
                                              bool corrupt_b = false);

struct MomentRow {
    double eps = 0.0;
    int p = 1;
    double e_sup_x = 0.0;     // E sup_t |X^eps|^{2p}
    double e_int_x = 0.0;     // E int |X^eps|^{2p-2} ||X^eps||_1^2 dt
    double sup_e_y = 0.0;     // sup_{t >= burn} E|Y^eps|^{2p}
    double e_sup_xbar = 0.0;  // E sup_t |Xbar|^{2p} (eps-independent, reused)
    double e_sup_xhat = 0.0;  // E sup_t |Xhat|^{2p}
    double sup_e_yhat = 0.0;  // sup_{t >= burn} E|Yhat|^{2p}
    int attrition = 0;
};

struct MomentTable {
    std::vector<MomentRow> rows;  // eps-major, p-minor
    double burn_fraction = 0.2;
};

MomentTable measure_moment_bounds(const ExperimentConfig& cfg, const std::vector<int>& p_list);

// Estimator resolved from the config: closed_form when the set declares one
// (mode "auto"), otherwise warm-start with relax time >= 5/eta from the
// ergodicity probe unless relax_steps is set explicitly.
FbarEstimator make_configured_estimator(const ExperimentConfig& cfg, const RuntimeSetup& setup,
                                        int sample);

}  // namespace nsavg
