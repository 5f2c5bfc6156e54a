#pragma once

// Report primitives: FNV-1a content hashing, atomic file writes, CSV tables
// with 17 significant digits, and JSON fragments for estimator outputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "expfun/asymptotics.hpp"
#include "expfun/config.hpp"
#include "expfun/fit.hpp"
#include "expfun/ladder.hpp"
#include "expfun/levy.hpp"

namespace expfun {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Writes via a temporary file in the destination directory, then renames.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ValidationError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string csv_curve(const ExpectationCurve& c, const char* value_name = "value") {
    using detail::format_real;
    std::string out = std::string("t,") + value_name + ",stderr,flagged\n";
    for (const auto& p : c.points) {
        out += format_real(p.t);
        out += ",";
        out += format_real(p.value);
        out += ",";
        out += format_real(p.se);
        out += ",";
        out += p.flagged ? "1" : "0";
        out += "\n";
    }
    return out;
}

inline std::string csv_renewal(const RenewalTable& t) {
    using detail::format_real;
    std::string out = "x,value,stderr\n";
    for (std::size_t i = 0; i < t.grid.size(); ++i) {
        out += format_real(t.grid[i]);
        out += ",";
        out += format_real(t.values[i]);
        out += ",";
        out += format_real(t.ses[i]);
        out += "\n";
    }
    return out;
}

inline std::string csv_coefficient(const CoefficientEstimate& c) {
    using detail::format_real;
    std::string out = "x,pre_limit,stderr\n";
    for (std::size_t i = 0; i < c.x_grid.size(); ++i) {
        out += format_real(c.x_grid[i]);
        out += ",";
        out += format_real(c.pre_limit[i]);
        out += ",";
        out += format_real(c.pre_limit_se[i]);
        out += "\n";
    }
    return out;
}

inline nlohmann::json curve_json(const ExpectationCurve& c) {
    nlohmann::json j;
    j["n_paths"] = c.n_paths;
    j["seed"] = c.seed;
    if (c.tilt) j["tilt"] = *c.tilt;
    auto& pts = j["points"] = nlohmann::json::array();
    for (const auto& p : c.points)
        pts.push_back({{"t", p.t}, {"value", p.value}, {"se", p.se}, {"flagged", p.flagged}});
    return j;
}

inline nlohmann::json fit_json(const DecayFit& f) {
    return {{"intercept", f.intercept},     {"rate", f.rate},
            {"poly_exponent", f.poly_exponent}, {"intercept_se", f.intercept_se},
            {"rate_se", f.rate_se},         {"poly_se", f.poly_se},
            {"chi2", f.chi2},               {"n_used", f.n_used},
            {"n_dropped", f.n_dropped}};
}

inline nlohmann::json regime_json(const Regime& r) {
    nlohmann::json j;
    j["kind"] = regime_name(r.kind);
    j["beta"] = r.beta;
    j["mean"] = r.mean;
    j["phi_beta"] = r.phi_beta;
    j["dphi_beta"] = r.dphi_beta;
    if (r.rho) j["rho"] = *r.rho;
    j["decay_rate"] = r.decay_rate;
    j["poly_exponent"] = r.poly_exponent;
    j["curvature"] = r.curvature;
    return j;
}

inline nlohmann::json conditions_json(const ConditionReport& c) {
    return {{"lipschitz_away_from_zero", c.lipschitz_away_from_zero},
            {"tail_bound", c.tail_bound},
            {"tail_ratio", c.tail_ratio},
            {"nonlattice", c.nonlattice},
            {"K", c.K},
            {"lipschitz_constant", c.lipschitz_constant}};
}

inline nlohmann::json coefficient_json(const CoefficientEstimate& c) {
    nlohmann::json j;
    j["value"] = c.value;
    j["se"] = c.se;
    j["ess"] = c.ess;
    j["flagged"] = c.flagged;
    j["tail_refinement"] = c.tail_refinement;
    j["x_grid"] = c.x_grid;
    j["pre_limit"] = c.pre_limit;
    j["pre_limit_se"] = c.pre_limit_se;
    return j;
}

// Stable hash of the defining fields of a triplet, embedded in table exports.
inline std::uint64_t triplet_hash(const LevyTriplet& t) {
    ExperimentConfig c;
    c.triplet = t;
    return fnv1a64(serialize(c));
}

}  // namespace expfun
