#pragma once

#include "nsavg/coefficients.hpp"
#include "nsavg/covariance.hpp"
#include "nsavg/errors.hpp"
#include "nsavg/integrators.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace nsavg {

struct InitialSpec {
    std::string kind = "random_decay";  // random_decay | taylor_green | shear | zero
    double amplitude = 1.0;
    double decay = 2.0;  // |k|^{-decay} coefficient fall-off for random_decay
};

struct FbarSpec {
    std::string mode = "auto";  // auto | closed_form | time_average | warm_start
    double t_erg = 50.0;
    double burn_in = 5.0;
    int relax_steps = -1;  // < 0: derive from the ergodicity probe (>= 5/eta)
    int avg_steps = 50;
};

struct ExperimentConfig {
    int modes_per_axis = 16;
    double viscosity = 1.0;
    bool advection = true;

    double horizon = 0.5;
    double dt_max = 1e-3;
    double cfl = 0.1;
    int record_every = 1;

    std::vector<double> epsilons = {1e-1, 1e-2, 1e-3};
    std::string delta_rule = "eps_cbrt";  // eps_cbrt | explicit
    std::vector<double> delta_values;

    int samples = 64;
    uint64_t seed = 1;

    std::string coefficient_set = "linear_ou";
    nlohmann::json coefficient_params = nlohmann::json::object();

    double q1_alpha = 1.5, q1_amplitude = 0.5;
    double q2_alpha = 1.5, q2_amplitude = 0.5;

    InitialSpec initial_x, initial_y;
    FbarSpec fbar;

    int inequality_samples = 1000;
    double erg_horizon = 6.0;
    std::string phi = "mode_projection";  // mode_projection | clamped_norm
    int phi_k1 = 1, phi_k2 = 0;
    int moment_p_max = 2;

    std::string out_dir = "out";
    std::string prefix = "run";

    // Provenance.
    std::string config_hash;  // FNV-1a 64 over the config file bytes
    nlohmann::json echo = nlohmann::json::object();
};

// FNV-1a 64-bit, hex-encoded.
std::string fnv1a_hex(const std::string& bytes);

// Parses and validates. Parse failures and range violations raise
// config_error (parse messages carry the byte position from the JSON
// reader).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Applies one dotted-path override ("mc.samples=8") to a JSON document.
// Values parse as JSON scalars when possible, else as strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Everything instantiable from a config. Construction enforces the
// dissipativity margin (admissibility_error when not positive).
struct RuntimeSetup {
    explicit RuntimeSetup(const ExperimentConfig& cfg);

    SpacePtr space;
    CovarianceSpec q1, q2;
    CoefficientSet coeffs;
    SimParams params;
    SpectralField x0, y0;
    double margin;
};

SpectralField make_initial_field(const SpacePtr& space, const InitialSpec& spec,
                                 uint64_t seed, uint32_t sample);

}  // namespace nsavg
