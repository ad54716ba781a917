// Acceptance suite: runs every acceptance criterion at its stated scale and
// tolerance and prints one pass/fail line per criterion. Exit status is the
// number of failed criteria.

#include <json.hpp>

#include "nsavg/config.hpp"
#include "nsavg/integrators.hpp"
#include "nsavg/operators.hpp"
#include "nsavg/snapshot.hpp"
#include "nsavg/studies.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <sys/wait.h>

using namespace nsavg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kBin = NSAVG_BIN_PATH;

int run_cli(const std::string& args) {
    const int status = std::system((kBin + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SpectralField rough_field(const SpacePtr& sp, NoiseStream& st, double norm = 1.0) {
    return random_divfree_field(sp, st, 1.0, norm);
}

// --------------------------------------------------------------------------

bool criterion_operator_identities(std::string& detail) {
    auto sp = make_space(32);
    NoiseStream st(1001, 0, StreamRole::Probe);
    double worst_null = 0.0, worst_antisym = 0.0, worst_idem = 0.0, worst_div = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const SpectralField u = rough_field(sp, st);
        const SpectralField v = rough_field(sp, st);
        const SpectralField w = rough_field(sp, st);
        const double scale = sobolev_norm(u, 0.5) * sobolev_norm(v, 1.5) * sobolev_norm(w, 0.5);
        worst_null = std::max(worst_null, std::abs(trilinear_b(u, v, v)) / scale);
        worst_antisym =
            std::max(worst_antisym,
                     std::abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) / scale);

        const SpectralField p = leray_project(u);
        const SpectralField pp = leray_project(p);
        worst_idem = std::max(worst_idem, (pp - p).norm() / p.norm());
        worst_div = std::max(worst_div, p.divergence_residual() / sobolev_norm(p, 1.0));
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "null %.2e, antisym %.2e (tol 1e-10); idem %.2e, div %.2e (tol 1e-12)",
                  worst_null, worst_antisym, worst_idem, worst_div);
    detail = buf;
    return worst_null <= 1e-10 && worst_antisym <= 1e-10 && worst_idem <= 1e-12 &&
           worst_div <= 1e-12;
}

bool criterion_taylor_green(std::string& detail) {
    auto sp32 = make_space(32);
    const SpectralField tg = taylor_green(sp32, 1.0);
    const double rel = nonlinear_B(tg, tg).norm() / std::pow(sobolev_norm(tg, 1.0), 2);

    // independent oracle at N = 64: closed-form (u.grad)u paired against every
    // divergence-free mode by direct quadrature
    const int n = 64;
    auto sp64 = make_space(n);
    const double h = 2.0 * M_PI / n;
    double worst = 0.0;
    for (const auto& m : sp64->half_retained()) {
        double cosp = 0.0, sinp = 0.0;
        const double klen = std::hypot(static_cast<double>(m.k1), static_cast<double>(m.k2));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double x = i * h, y = j * h;
                const double w1 = std::sin(x) * std::cos(x);
                const double w2 = std::sin(y) * std::cos(y);
                const double along = (w1 * (-m.k2) + w2 * m.k1) / klen;
                cosp += along * std::cos(m.k1 * x + m.k2 * y);
                sinp += along * std::sin(m.k1 * x + m.k2 * y);
            }
        }
        worst = std::max({worst, std::abs(cosp) * h * h, std::abs(sinp) * h * h});
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "N=32 relative %.2e (tol 1e-10); N=64 oracle %.2e", rel,
                  worst);
    detail = buf;
    return rel <= 1e-10 && worst <= 1e-10;
}

bool criterion_semigroup_smoothing(std::string& detail) {
    auto sp = make_space(32);
    NoiseStream st(1003, 0, StreamRole::Probe);
    int violations = 0;
    double closest = 1e300;
    for (int rep = 0; rep < 100; ++rep) {
        const SpectralField u = rough_field(sp, st);
        for (double t : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 0.3, 1.0}) {
            const double lhs = sobolev_norm(apply_semigroup(u, t), 1.0);
            const double rhs = std::pow(2.0 * M_E * t, -0.5) * u.norm();
            if (lhs > rhs) ++violations;
            closest = std::min(closest, rhs - lhs);
        }
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%d violations over 700 checks (margin >= %.2e)",
                  violations, closest);
    detail = buf;
    return violations == 0;
}

bool criterion_ergodicity(std::string& detail) {
    ExperimentConfig cfg;
    cfg.modes_per_axis = 16;
    cfg.samples = 8;
    cfg.seed = 1004;
    const ErgodicityProbe probe = probe_ergodicity(cfg);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "fitted rate %.4f (target 1 within 10%%)", probe.rate);
    detail = buf;
    return std::abs(probe.rate - 1.0) <= 0.1;
}

bool criterion_fbar_oracle(std::string& detail) {
    auto sp = make_space(16);
    CovarianceSpec q2(sp, 1.5, 0.5);
    const CoefficientSet lou = builtin_coefficients("linear_ou", json::object(), q2, q2);
    SimParams params;
    NoiseStream ix(1005, 0, StreamRole::Init), iy(1005, 1, StreamRole::Init);
    const SpectralField x = random_divfree_field(sp, ix, 2.0, 1.0);
    const SpectralField y0 = random_divfree_field(sp, iy, 2.0, 1.0);
    const SpectralField e = divfree_mode_basis(sp, 1, 0);
    const double target = inner_product(lou.fbar_closed(x), e);

    FbarEstimator::Options opts;
    opts.t_erg = 50.0;
    opts.burn_in = 5.0;
    opts.dt = 1e-3;
    const int replicates = 16;
    std::vector<double> vals(replicates);
    parallel_samples(replicates, [&](int r) {
        FbarEstimator est = FbarEstimator::time_average(
            opts, y0, NoiseStream(1005, static_cast<uint32_t>(r), StreamRole::Frozen));
        vals[r] = inner_product(est.estimate(x, lou, q2, params), e);
    });
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= replicates;
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (replicates - 1.0) / replicates);

    const CoefficientSet dec = builtin_coefficients("decoupled", json::object(), q2, q2);
    FbarEstimator closed = FbarEstimator::closed_form(dec);
    const double dec_err = (closed.estimate(x, dec, q2, params) - dec.fbar_closed(x)).norm();

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "time average %.4f vs closed form %.4f (|diff| %.4f <= 3 SE = %.4f); "
                  "decoupled exact: %.1e",
                  mean, target, std::abs(mean - target), 3.0 * se, dec_err);
    detail = buf;
    return std::abs(mean - target) <= 3.0 * se && dec_err == 0.0;
}

bool criterion_headline_convergence(std::string& detail) {
    ExperimentConfig cfg;
    cfg.modes_per_axis = 16;
    cfg.horizon = 0.5;
    cfg.samples = 64;
    cfg.seed = 1006;
    cfg.epsilons = {1e-1, 1e-2, 1e-3};
    const ConvergenceReport rep = run_convergence_study(cfg);

    bool decreasing = true, decreasing_p2 = true;
    for (size_t i = 1; i < rep.rows.size(); ++i) {
        const auto& a = rep.rows[i - 1];
        const auto& b = rep.rows[i];
        if (!(b.err < a.err - 2.0 * (a.se + b.se))) decreasing = false;
        if (!(b.err_p2 < a.err_p2 - 2.0 * (a.se_p2 + b.se_p2))) decreasing_p2 = false;
    }
    const bool slope_ok = rep.slope.has_value() && rep.slope->slope > 0.0;
    const bool slope_p2_ok = rep.slope_p2.has_value() && rep.slope_p2->slope > 0.0;
    int attrition = 0;
    for (const auto& r : rep.rows) attrition += r.attrition;

    std::ostringstream ss;
    ss << "err:";
    for (const auto& r : rep.rows) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), " %.3e(se %.1e)", r.err, r.se);
        ss << buf;
    }
    char buf[80];
    std::snprintf(buf, sizeof(buf), "; slope %.3f, p2 slope %.3f, attrition %d",
                  rep.slope ? rep.slope->slope : 0.0,
                  rep.slope_p2 ? rep.slope_p2->slope : 0.0, attrition);
    ss << buf;
    detail = ss.str();
    return decreasing && decreasing_p2 && slope_ok && slope_p2_ok && attrition == 0;
}

bool criterion_time_increments(std::string& detail) {
    ExperimentConfig cfg;
    cfg.modes_per_axis = 16;
    cfg.horizon = 0.5;
    cfg.samples = 64;
    cfg.seed = 1007;
    cfg.epsilons = {1e-2};
    cfg.dt_max = 0.5 / 512.0;  // delta sweep {2^-4..2^-8} T stays on the dt lattice

    std::vector<double> deltas;
    for (int k = 4; k <= 8; ++k) deltas.push_back(cfg.horizon * std::pow(2.0, -k));
    const SweepTable table = measure_time_increments(cfg, deltas);
    const double slope = table.slope ? table.slope->slope : 0.0;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "log-log slope %.3f (required >= 0.4)", slope);
    detail = buf;
    return table.slope.has_value() && slope >= 0.4;
}

bool criterion_auxiliary_gaps(std::string& detail) {
    ExperimentConfig cfg;
    cfg.modes_per_axis = 16;
    cfg.horizon = 0.5;
    cfg.samples = 64;
    cfg.seed = 1008;
    cfg.epsilons = {1e-2};
    const double dt = 1e-3;

    const SweepTable table = measure_auxiliary_gap(cfg, {16 * dt, 8 * dt, 4 * dt});
    bool monotone = true;
    for (size_t i = 1; i < table.rows.size(); ++i) {
        const auto& a = table.rows[i - 1];
        const auto& b = table.rows[i];
        if (!(b.mean <= a.mean + 2.0 * (a.se + b.se))) monotone = false;
        if (!(b.mean2 <= a.mean2 + 2.0 * (a.se2 + b.se2))) monotone = false;
    }

    // exact-zero gap: y-independent-and-constant g, constant sigma2
    RuntimeSetup setup(cfg);
    const CoefficientSet frozen_cfg =
        builtin_coefficients("linear_ou", {{"h_gain", 0.0}}, setup.q1, setup.q2);
    const auto aux = run_auxiliary(setup.x0, setup.y0, 8 * dt, 1e-2, 0.1, frozen_cfg,
                                   setup.q1, setup.q2, NoiseStream(1008, 0, StreamRole::Slow),
                                   NoiseStream(1008, 0, StreamRole::Fast), setup.params);

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "y-gaps %.2e/%.2e/%.2e monotone=%d; exact-zero config gap %.1e",
                  table.rows[0].mean, table.rows[1].mean, table.rows[2].mean,
                  monotone ? 1 : 0, aux.int_y_gap);
    detail = buf;
    return monotone && aux.int_y_gap == 0.0;
}

bool criterion_moment_bounds(std::string& detail) {
    ExperimentConfig cfg;
    cfg.modes_per_axis = 16;
    cfg.horizon = 0.5;
    cfg.samples = 32;
    cfg.seed = 1009;
    cfg.epsilons = {1e-1, 1e-2, 1e-3};
    const MomentTable table = measure_moment_bounds(cfg, {1});

    std::vector<double> sup_x, sup_ey;
    int attrition = 0;
    for (const auto& r : table.rows) {
        sup_x.push_back(r.e_sup_x);
        sup_ey.push_back(r.sup_e_y);
        attrition += r.attrition;
    }
    const auto ratio = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *hi / *lo;
    };
    const double rx = ratio(sup_x), ry = ratio(sup_ey);
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "E sup|X|^2 ratio %.2f, post-burn-in sup E|Y|^2 ratio %.2f (both <= 3)", rx,
                  ry);
    detail = buf;
    return rx <= 3.0 && ry <= 3.0 && attrition == 0;
}

bool criterion_appendix_inequalities(std::string& detail) {
    ExperimentConfig cfg;
    cfg.modes_per_axis = 16;
    cfg.seed = 1010;
    cfg.epsilons = {1e-1};

    const InequalityReport n16 = verify_appendix_inequalities(cfg, 1000, false);
    cfg.modes_per_axis = 32;
    const InequalityReport n32 = verify_appendix_inequalities(cfg, 1000, false);
    cfg.modes_per_axis = 16;
    const InequalityReport corrupted = verify_appendix_inequalities(cfg, 1000, true);

    const double c16 = std::abs(n16.rungs.back().coercivity_c);
    const double c32 = std::abs(n32.rungs.back().coercivity_c);
    const bool stable = c32 <= 3.0 * std::max(1.0, c16) && c16 <= 3.0 * std::max(1.0, c32);

    // fault injection must also drive the CLI to exit 5
    const fs::path dir = "acceptance_tmp/ineq";
    fs::remove_all(dir);
    fs::create_directories(dir);
    json cli_cfg = {{"space", {{"modes_per_axis", 16}}},
                    {"epsilons", {1e-1}},
                    {"mc", {{"samples", 4}, {"seed", 1010}}},
                    {"diagnostics", {{"inequality_samples", 500}}},
                    {"output", {{"dir", (dir / "out").string()}}}};
    std::ofstream(dir / "config.json") << cli_cfg.dump(2);
    const int exit_clean = run_cli("diag inequalities -c " + (dir / "config.json").string());
    const int exit_fault = run_cli("diag inequalities -c " + (dir / "config.json").string() +
                                   " --fault-inject-b");

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "violations N16=%d N32=%d corrupted=%d; constants stable=%d; CLI exits %d/%d "
                  "(expect 0/5)",
                  n16.violations, n32.violations, corrupted.violations, stable ? 1 : 0,
                  exit_clean, exit_fault);
    detail = buf;
    return n16.violations == 0 && n32.violations == 0 && corrupted.violations > 0 && stable &&
           exit_clean == 0 && exit_fault == 5;
}

bool criterion_reproducibility(std::string& detail) {
    const fs::path dir = "acceptance_tmp/repro";
    fs::remove_all(dir);
    fs::create_directories(dir);
    json cfg = {{"space", {{"modes_per_axis", 8}}},
                {"time", {{"horizon", 0.1}}},
                {"epsilons", {1e-1, 1e-2}},
                {"mc", {{"samples", 4}, {"seed", 7}}},
                {"output", {{"dir", (dir / "out").string()}}}};
    const fs::path cfg_path = dir / "config.json";
    std::ofstream(cfg_path) << cfg.dump(2);

    if (run_cli("converge -c " + cfg_path.string()) != 0) {
        detail = "converge failed";
        return false;
    }
    const std::string csv1 = slurp(dir / "out" / "run_convergence.csv");
    const std::string json1 = slurp(dir / "out" / "run_convergence.json");
    if (run_cli("converge -c " + cfg_path.string()) != 0) {
        detail = "second converge failed";
        return false;
    }
    const bool csv_same = slurp(dir / "out" / "run_convergence.csv") == csv1;
    const bool json_same = slurp(dir / "out" / "run_convergence.json") == json1;

    if (run_cli("simulate -c " + cfg_path.string()) != 0) {
        detail = "simulate failed";
        return false;
    }
    const std::string final1 = slurp(dir / "out" / "run_final.nsef");
    const std::string series1 = slurp(dir / "out" / "run_series.csv");
    if (run_cli("simulate -c " + cfg_path.string() + " --checkpoint-every 64") != 0) {
        detail = "checkpointed simulate failed";
        return false;
    }
    if (run_cli("simulate -c " + cfg_path.string() + " --resume " +
                (dir / "out" / "run").string()) != 0) {
        detail = "resume failed";
        return false;
    }
    const bool nsef_same = slurp(dir / "out" / "run_final.nsef") == final1;

    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "csv identical=%d json identical=%d resume nsef identical=%d (series %zu B)",
                  csv_same ? 1 : 0, json_same ? 1 : 0, nsef_same ? 1 : 0, series1.size());
    detail = buf;
    return csv_same && json_same && nsef_same;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<bool(std::string&)> body;
    };
    const std::vector<Criterion> criteria = {
        {1, "operator identities", criterion_operator_identities},
        {2, "Taylor-Green null", criterion_taylor_green},
        {3, "semigroup smoothing", criterion_semigroup_smoothing},
        {4, "frozen-equation ergodicity", criterion_ergodicity},
        {5, "fbar oracle equivalence", criterion_fbar_oracle},
        {6, "headline convergence", criterion_headline_convergence},
        {7, "time-increment bound", criterion_time_increments},
        {8, "auxiliary-process gaps", criterion_auxiliary_gaps},
        {9, "uniform moment bounds", criterion_moment_bounds},
        {10, "appendix inequalities", criterion_appendix_inequalities},
        {11, "reproducibility", criterion_reproducibility},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        std::string detail;
        try {
            ok = c.body(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %2d %-28s (%5.1fs)  %s\n", ok ? "PASS" : "FAIL", c.id, c.name, secs,
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
                criteria.size());
    return failures;
}
