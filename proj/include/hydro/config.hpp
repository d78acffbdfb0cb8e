#pragma once

/**
 * @file config.hpp
 * @brief JSON mapping of SimConfig. Missing keys keep their current value.
 */

#include "hydro/stepper.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <string>

namespace hydro {

inline nlohmann::json to_json(const SimConfig& c)
{
    nlohmann::json j{{"case", c.case_id},
                     {"scheme", to_string(c.scheme)},
                     {"cd4_coefficients", c.cd4 == Cd4Coefficients::Standard ? "standard" : "nine_sixteen"},
                     {"mirrored_weno_weights", c.mirrored_weno_weights},
                     {"cfl", c.cfl},
                     {"fallback_dt", c.fallback_dt},
                     {"viscous_limit", c.viscous_limit},
                     {"cfl_lsm", c.cfl_lsm},
                     {"enable_lsm", c.enable_lsm},
                     {"enable_sgs", c.enable_sgs},
                     {"nu", c.nu},
                     {"source", c.source},
                     {"steps", c.steps},
                     {"window", c.window},
                     {"output_every", c.output_every},
                     {"pressure_tolerance", c.pressure_tolerance},
                     {"max_cycles", c.max_cycles},
                     {"reinit_iterations", c.reinit_iterations},
                     {"reinit_tolerance", c.reinit_tolerance},
                     {"fluids",
                      {{"rho_w", c.fluids.rho_w},
                       {"mu_w", c.fluids.mu_w},
                       {"rho_a", c.fluids.rho_a},
                       {"mu_a", c.fluids.mu_a},
                       {"eps", c.fluids.eps}}}};
    j["fixed_dt"] = c.fixed_dt ? nlohmann::json(*c.fixed_dt) : nlohmann::json(nullptr);
    return j;
}

namespace detail {

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out)
{
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace detail

/// Overlays the keys present in `j` onto `c`; unknown keys are rejected.
inline void apply_json(const nlohmann::json& j, SimConfig& c)
{
    static const char* known[] = {"case",          "scheme",       "cd4_coefficients", "mirrored_weno_weights",
                                  "cfl",           "fixed_dt",     "fallback_dt",      "viscous_limit",
                                  "cfl_lsm",       "enable_lsm",   "enable_sgs",       "nu",
                                  "source",        "steps",        "window",           "output_every",
                                  "pressure_tolerance", "max_cycles", "reinit_iterations", "reinit_tolerance",
                                  "fluids"};
    if (!j.is_object()) {
        throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) {
            throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
        }
    }
    try {
        detail::read_key(j, "case", c.case_id);
        if (j.contains("scheme")) c.scheme = parse_scheme(j.at("scheme").get<std::string>());
        if (j.contains("cd4_coefficients")) {
            const auto s = j.at("cd4_coefficients").get<std::string>();
            if (s == "standard") {
                c.cd4 = Cd4Coefficients::Standard;
            } else if (s == "nine_sixteen") {
                c.cd4 = Cd4Coefficients::NineSixteen;
            } else {
                throw Error(ErrorCode::InvalidArgument, "cd4_coefficients must be standard or nine_sixteen");
            }
        }
        detail::read_key(j, "mirrored_weno_weights", c.mirrored_weno_weights);
        detail::read_key(j, "cfl", c.cfl);
        if (j.contains("fixed_dt")) {
            if (j.at("fixed_dt").is_null()) {
                c.fixed_dt.reset();
            } else {
                c.fixed_dt = j.at("fixed_dt").get<double>();
            }
        }
        detail::read_key(j, "fallback_dt", c.fallback_dt);
        detail::read_key(j, "viscous_limit", c.viscous_limit);
        detail::read_key(j, "cfl_lsm", c.cfl_lsm);
        detail::read_key(j, "enable_lsm", c.enable_lsm);
        detail::read_key(j, "enable_sgs", c.enable_sgs);
        detail::read_key(j, "nu", c.nu);
        detail::read_key(j, "source", c.source);
        detail::read_key(j, "steps", c.steps);
        detail::read_key(j, "window", c.window);
        detail::read_key(j, "output_every", c.output_every);
        detail::read_key(j, "pressure_tolerance", c.pressure_tolerance);
        detail::read_key(j, "max_cycles", c.max_cycles);
        detail::read_key(j, "reinit_iterations", c.reinit_iterations);
        detail::read_key(j, "reinit_tolerance", c.reinit_tolerance);
        if (j.contains("fluids")) {
            const auto& f = j.at("fluids");
            detail::read_key(f, "rho_w", c.fluids.rho_w);
            detail::read_key(f, "mu_w", c.fluids.mu_w);
            detail::read_key(f, "rho_a", c.fluids.rho_a);
            detail::read_key(f, "mu_a", c.fluids.mu_a);
            detail::read_key(f, "eps", c.fluids.eps);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
    }
}

inline nlohmann::json load_json(const std::filesystem::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + p.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, std::string("cannot parse ") + p.string() + ": " + e.what());
    }
}

} // namespace hydro
