#include "nsavg/config.hpp"

#include <fstream>
#include <sstream>

namespace nsavg {

std::string fnv1a_hex(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

using nlohmann::json;

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

InitialSpec read_initial(const json& j, const char* key, InitialSpec fallback) {
    if (!j.contains(key)) return fallback;
    const json& s = j.at(key);
    read(s, "kind", fallback.kind);
    read(s, "amplitude", fallback.amplitude);
    read(s, "decay", fallback.decay);
    return fallback;
}

void validate(const ExperimentConfig& c) {
    if (c.modes_per_axis <= 0 || c.modes_per_axis % 2 != 0) {
        throw config_error("space.modes_per_axis must be a positive even integer");
    }
    if (c.horizon <= 0) throw config_error("time.horizon must be positive");
    if (c.dt_max <= 0 || c.cfl <= 0) throw config_error("time.dt_max and time.cfl must be positive");
    if (c.record_every < 1) throw config_error("time.record_every must be >= 1");
    if (c.epsilons.empty()) throw config_error("epsilons must be nonempty");
    for (double e : c.epsilons) {
        if (!(e > 0.0 && e < 1.0)) throw config_error("every eps must lie in (0,1)");
    }
    if (c.samples < 2) throw config_error("mc.samples must be >= 2");
    if (c.delta_rule != "eps_cbrt" && c.delta_rule != "explicit") {
        throw config_error("delta.rule must be 'eps_cbrt' or 'explicit'");
    }
    if (c.delta_rule == "explicit" && c.delta_values.empty()) {
        throw config_error("delta.values required for the explicit delta rule");
    }
    if (c.q1_alpha <= 1.0 || c.q2_alpha <= 1.0) {
        throw config_error("covariance decay exponents must exceed 1");
    }
    if (c.q1_amplitude < 0 || c.q2_amplitude < 0) {
        throw config_error("covariance amplitudes must be nonnegative");
    }
    if (c.inequality_samples < 1) throw config_error("diagnostics.inequality_samples must be >= 1");
    if (c.moment_p_max < 1) throw config_error("diagnostics.moment_p_max must be >= 1");
    const auto check_kind = [](const InitialSpec& s, const char* which) {
        if (s.kind != "random_decay" && s.kind != "taylor_green" && s.kind != "shear" &&
            s.kind != "zero") {
            throw config_error(std::string("unknown initial condition kind for ") + which);
        }
    };
    check_kind(c.initial_x, "x");
    check_kind(c.initial_y, "y");
    if (c.fbar.mode != "auto" && c.fbar.mode != "closed_form" && c.fbar.mode != "time_average" &&
        c.fbar.mode != "warm_start") {
        throw config_error("fbar.mode must be auto|closed_form|time_average|warm_start");
    }
    if (c.phi != "mode_projection" && c.phi != "clamped_norm") {
        throw config_error("phi must be mode_projection or clamped_norm");
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }

    ExperimentConfig c;
    try {
        if (doc.contains("space")) {
            read(doc["space"], "modes_per_axis", c.modes_per_axis);
            read(doc["space"], "viscosity", c.viscosity);
            read(doc["space"], "advection", c.advection);
        }
        if (doc.contains("time")) {
            read(doc["time"], "horizon", c.horizon);
            read(doc["time"], "dt_max", c.dt_max);
            read(doc["time"], "cfl", c.cfl);
            read(doc["time"], "record_every", c.record_every);
        }
        read(doc, "epsilons", c.epsilons);
        if (doc.contains("delta")) {
            read(doc["delta"], "rule", c.delta_rule);
            read(doc["delta"], "values", c.delta_values);
        }
        if (doc.contains("mc")) {
            read(doc["mc"], "samples", c.samples);
            read(doc["mc"], "seed", c.seed);
        }
        if (doc.contains("coefficients")) {
            read(doc["coefficients"], "name", c.coefficient_set);
            if (doc["coefficients"].contains("params")) {
                c.coefficient_params = doc["coefficients"]["params"];
            }
        }
        if (doc.contains("noise")) {
            if (doc["noise"].contains("slow")) {
                read(doc["noise"]["slow"], "alpha", c.q1_alpha);
                read(doc["noise"]["slow"], "amplitude", c.q1_amplitude);
            }
            if (doc["noise"].contains("fast")) {
                read(doc["noise"]["fast"], "alpha", c.q2_alpha);
                read(doc["noise"]["fast"], "amplitude", c.q2_amplitude);
            }
        }
        c.initial_x = read_initial(doc, "initial_x", InitialSpec{});
        c.initial_y = read_initial(doc, "initial_y", InitialSpec{});
        if (doc.contains("fbar")) {
            read(doc["fbar"], "mode", c.fbar.mode);
            read(doc["fbar"], "t_erg", c.fbar.t_erg);
            read(doc["fbar"], "burn_in", c.fbar.burn_in);
            read(doc["fbar"], "relax_steps", c.fbar.relax_steps);
            read(doc["fbar"], "avg_steps", c.fbar.avg_steps);
        }
        if (doc.contains("diagnostics")) {
            read(doc["diagnostics"], "inequality_samples", c.inequality_samples);
            read(doc["diagnostics"], "erg_horizon", c.erg_horizon);
            read(doc["diagnostics"], "phi", c.phi);
            read(doc["diagnostics"], "phi_k1", c.phi_k1);
            read(doc["diagnostics"], "phi_k2", c.phi_k2);
            read(doc["diagnostics"], "moment_p_max", c.moment_p_max);
        }
        if (doc.contains("output")) {
            read(doc["output"], "dir", c.out_dir);
            read(doc["output"], "prefix", c.prefix);
        }
    } catch (const json::exception& e) {
        throw config_error(std::string("config field error: ") + e.what());
    }

    validate(c);
    c.config_hash = fnv1a_hex(text);
    c.echo = doc;
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw config_error("override '" + assignment + "' is not of the form path=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    nlohmann::json* node = &doc;
    size_t start = 0;
    while (true) {
        const size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw config_error("override path '" + path + "' has an empty segment");
        if (dot == std::string::npos) {
            nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

RuntimeSetup::RuntimeSetup(const ExperimentConfig& cfg)
    : space(make_space(cfg.modes_per_axis)),
      q1(space, cfg.q1_alpha, cfg.q1_amplitude),
      q2(space, cfg.q2_alpha, cfg.q2_amplitude),
      coeffs(builtin_coefficients(cfg.coefficient_set, cfg.coefficient_params, q1, q2)),
      params{cfg.viscosity, cfg.cfl, cfg.dt_max, cfg.advection},
      x0(make_initial_field(space, cfg.initial_x, cfg.seed, 0)),
      y0(make_initial_field(space, cfg.initial_y, cfg.seed, 1)),
      margin(verify_dissipativity(coeffs, 1.0)) {
    if (margin <= 0.0) {
        throw admissibility_error(
            "coefficient set '" + cfg.coefficient_set + "' violates the dissipativity " +
                "condition: margin 2*lambda1 - 2*L_g - L_sigma2^2 = " + std::to_string(margin),
            margin);
    }
}

SpectralField make_initial_field(const SpacePtr& space, const InitialSpec& spec, uint64_t seed,
                                 uint32_t sample) {
    if (spec.kind == "taylor_green") return taylor_green(space, spec.amplitude);
    if (spec.kind == "shear") return shear_flow(space, spec.amplitude);
    if (spec.kind == "zero") return SpectralField::zero(space);
    NoiseStream stream(seed, sample, StreamRole::Init);
    return random_divfree_field(space, stream, spec.decay, spec.amplitude);
}

}  // namespace nsavg
