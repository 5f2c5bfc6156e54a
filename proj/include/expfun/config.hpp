#pragma once

// Flat key = value experiment configuration: parsing with collect-all
// diagnostics, invariant validation, and canonical serialization.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "expfun/asymptotics.hpp"
#include "expfun/cbre.hpp"
#include "expfun/levy.hpp"
#include "expfun/simulate.hpp"

namespace expfun {

inline constexpr const char* library_version = "1.0.0";

struct Diagnostic {
    int line = 0;  // 0 when not tied to a source line
    std::string field;
    std::string message;
};

struct ExperimentConfig {
    std::string kind;
    SimConfig sim;
    double alpha = 1.0;
    std::optional<double> beta;
    std::optional<double> tilt;
    std::optional<double> rho;
    double x_level = 1.0;
    std::optional<LevyTriplet> triplet;
    std::optional<CbreParams> cbre;
    bool cbre_tilted = false;
    std::optional<FSpec> f;
    std::vector<double> t_grid;
    std::vector<double> x_grid;
    std::vector<double> y_grid;
    std::vector<double> lambda_grid;
    std::optional<std::string> coeff_kind;
    double coeff_horizon = 0.0;
    std::vector<int> criteria;  // acceptance subset; empty = all
    std::optional<double> check_rate_tol;
    std::optional<double> check_poly_tol;
    bool write_csv = true;
    bool write_summary = true;
};

struct ConfigResult {
    ExperimentConfig config;
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return diagnostics.empty(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Raw key -> (line, value) map plus typed extraction that records every
// violation instead of stopping at the first.
class KeyReader {
  public:
    KeyReader(const std::string& text, std::vector<Diagnostic>& diags) : diags_(diags) {
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto nl = text.find('\n', pos);
            std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
            pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                diags_.push_back({line_no, "", "expected 'key = value'"});
                continue;
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty() ||
                key.find_first_not_of(
                    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.") !=
                    std::string::npos) {
                diags_.push_back({line_no, key, "invalid key"});
                continue;
            }
            if (entries_.count(key)) {
                diags_.push_back({line_no, key, "duplicate key"});
                continue;
            }
            entries_[key] = {line_no, value};
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    bool has_prefix(const std::string& prefix) const {
        const auto it = entries_.lower_bound(prefix);
        return it != entries_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
    }

    std::optional<std::string> take_string(const std::string& key) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        consumed_.insert(key);
        return it->second.second;
    }

    std::optional<double> take_real(const std::string& key) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        consumed_.insert(key);
        double v = 0.0;
        if (!parse_real(it->second.second, v)) {
            diags_.push_back({it->second.first, key, "expected a real number"});
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::uint64_t> take_u64(const std::string& key) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        consumed_.insert(key);
        const std::string& s = it->second.second;
        std::uint64_t v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
            diags_.push_back({it->second.first, key, "expected an unsigned integer"});
            return std::nullopt;
        }
        return v;
    }

    std::optional<bool> take_bool(const std::string& key) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        consumed_.insert(key);
        if (it->second.second == "true") return true;
        if (it->second.second == "false") return false;
        diags_.push_back({it->second.first, key, "expected true or false"});
        return std::nullopt;
    }

    std::optional<std::vector<double>> take_real_list(const std::string& key) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        consumed_.insert(key);
        std::vector<double> out;
        if (!parse_list(it->second.second, out)) {
            diags_.push_back({it->second.first, key, "expected a comma-separated list of reals"});
            return std::nullopt;
        }
        return out;
    }

    int line_of(const std::string& key) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.first;
    }

    void report_unknown() {
        for (const auto& [key, lv] : entries_)
            if (!consumed_.count(key)) diags_.push_back({lv.first, key, "unknown key"});
    }

  private:
    static bool parse_real(const std::string& s, double& v) {
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        return r.ec == std::errc{} && r.ptr == s.data() + s.size() && std::isfinite(v);
    }

    static bool parse_list(const std::string& s, std::vector<double>& out) {
        std::size_t pos = 0;
        while (pos <= s.size()) {
            const auto comma = s.find(',', pos);
            const std::string tok =
                trim(s.substr(pos, comma == std::string::npos ? comma : comma - pos));
            double v = 0.0;
            if (tok.empty() || !parse_real(tok, v)) return false;
            out.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        return !out.empty();
    }

    std::map<std::string, std::pair<int, std::string>> entries_;
    std::set<std::string> consumed_;
    std::vector<Diagnostic>& diags_;
};

inline std::optional<JumpSpec> read_jumps(KeyReader& r, const std::string& section,
                                          std::vector<Diagnostic>& diags) {
    const auto family = r.take_string(section + ".jumps");
    const std::string pfx = section + ".jump.";
    const auto real_or = [&](const char* name, double fallback) {
        return r.take_real(pfx + name).value_or(fallback);
    };
    if (!family || *family == "none") {
        if (family && r.has_prefix(pfx))
            diags.push_back({r.line_of(section + ".jumps"), section + ".jumps",
                             "jump parameters given for family 'none'"});
        return family ? std::optional<JumpSpec>(NoJumps{}) : std::nullopt;
    }
    if (*family == "point_mass")
        return JumpSpec(PointMassJumps{real_or("rate", 1.0), real_or("size", 1.0)});
    if (*family == "two_sided_exp")
        return JumpSpec(TwoSidedExpJumps{real_or("rate", 1.0), real_or("p_up", 0.5),
                                         real_or("eta_plus", 1.0), real_or("eta_minus", 1.0)});
    if (*family == "gaussian")
        return JumpSpec(GaussianJumps{real_or("rate", 1.0), real_or("mean", 0.0),
                                      real_or("stddev", 1.0)});
    if (*family == "tempered_stable")
        return JumpSpec(TemperedStableJumps{real_or("scale", 1.0), real_or("stability", 0.5),
                                            real_or("tempering", 1.0),
                                            r.take_bool(pfx + "positive").value_or(true)});
    diags.push_back({r.line_of(section + ".jumps"), section + ".jumps",
                     "unknown jump family '" + *family +
                         "' (none | point_mass | two_sided_exp | gaussian | tempered_stable)"});
    return std::nullopt;
}

inline void serialize_jumps(const JumpSpec& jumps, const std::string& section,
                            std::map<std::string, std::string>& out) {
    struct V {
        const std::string& s;
        std::map<std::string, std::string>& out;
        void operator()(const NoJumps&) { out[s + ".jumps"] = "none"; }
        void operator()(const PointMassJumps& j) {
            out[s + ".jumps"] = "point_mass";
            out[s + ".jump.rate"] = format_real(j.rate);
            out[s + ".jump.size"] = format_real(j.size);
        }
        void operator()(const TwoSidedExpJumps& j) {
            out[s + ".jumps"] = "two_sided_exp";
            out[s + ".jump.rate"] = format_real(j.rate);
            out[s + ".jump.p_up"] = format_real(j.p_up);
            out[s + ".jump.eta_plus"] = format_real(j.eta_plus);
            out[s + ".jump.eta_minus"] = format_real(j.eta_minus);
        }
        void operator()(const GaussianJumps& j) {
            out[s + ".jumps"] = "gaussian";
            out[s + ".jump.rate"] = format_real(j.rate);
            out[s + ".jump.mean"] = format_real(j.mean);
            out[s + ".jump.stddev"] = format_real(j.stddev);
        }
        void operator()(const TemperedStableJumps& j) {
            out[s + ".jumps"] = "tempered_stable";
            out[s + ".jump.scale"] = format_real(j.scale);
            out[s + ".jump.stability"] = format_real(j.stability);
            out[s + ".jump.tempering"] = format_real(j.tempering);
            out[s + ".jump.positive"] = j.positive ? "true" : "false";
        }
    };
    std::visit(V{section, out}, jumps);
}

}  // namespace detail

// Parses and fully validates an experiment configuration, returning every
// violation found rather than stopping at the first.
inline ConfigResult validate_config(const std::string& text) {
    ConfigResult res;
    auto& diags = res.diagnostics;
    detail::KeyReader r(text, diags);
    ExperimentConfig& c = res.config;

    static const std::set<std::string> kinds{"exponent",    "simulate", "firstpassage",
                                             "asymptotics", "cbre",     "acceptance"};
    if (const auto k = r.take_string("kind")) {
        if (!kinds.count(*k))
            diags.push_back({r.line_of("kind"), "kind",
                             "unknown kind '" + *k +
                                 "' (exponent | simulate | firstpassage | asymptotics | cbre | "
                                 "acceptance)"});
        else
            c.kind = *k;
    } else {
        diags.push_back({0, "kind", "kind required"});
    }

    if (const auto seed = r.take_u64("seed"))
        c.sim.seed = *seed;
    else if (!r.has("seed"))
        diags.push_back({0, "seed", "seed required"});
    c.sim.step_h = r.take_real("sim.step_h").value_or(0.01);
    c.sim.horizon_t = r.take_real("sim.horizon_t").value_or(0.0);
    c.sim.n_paths = r.take_u64("sim.n_paths").value_or(10000);
    c.sim.small_jump_cutoff = r.take_real("sim.small_jump_cutoff").value_or(0.0);
    if (!(c.sim.step_h > 0.0))
        diags.push_back({r.line_of("sim.step_h"), "sim.step_h", "must be positive"});
    if (c.sim.n_paths < 1)
        diags.push_back({r.line_of("sim.n_paths"), "sim.n_paths", "must be at least 1"});

    c.alpha = r.take_real("alpha").value_or(1.0);
    if (!(c.alpha > 0.0)) diags.push_back({r.line_of("alpha"), "alpha", "must be positive"});
    c.beta = r.take_real("beta");
    c.tilt = r.take_real("tilt");
    c.rho = r.take_real("rho");
    c.x_level = r.take_real("x").value_or(1.0);
    if (!(c.x_level > 0.0)) diags.push_back({r.line_of("x"), "x", "must be positive"});

    if (r.has("triplet.drift_a") || r.has("triplet.sigma") || r.has("triplet.jumps")) {
        LevyTriplet t;
        t.drift_a = r.take_real("triplet.drift_a").value_or(0.0);
        t.sigma = r.take_real("triplet.sigma").value_or(0.0);
        if (const auto j = detail::read_jumps(r, "triplet", diags)) t.jumps = *j;
        try {
            validate(t);
            c.triplet = t;
        } catch (const ValidationError& e) {
            diags.push_back({0, "triplet", e.what()});
        }
    }

    const bool has_env = r.has("env.beta_drift") || r.has("env.sigma") || r.has("env.jumps");
    if (has_env || r.has_prefix("cbre.")) {
        CbreParams p;
        p.env.beta_drift = r.take_real("env.beta_drift").value_or(0.0);
        p.env.sigma = r.take_real("env.sigma").value_or(0.0);
        if (const auto j = detail::read_jumps(r, "env", diags)) p.env.jumps = *j;
        p.x0 = r.take_real("cbre.x0").value_or(1.0);
        p.c = r.take_real("cbre.c").value_or(1.0);
        p.alpha = r.take_real("cbre.alpha").value_or(1.0);
        c.cbre_tilted = r.take_bool("cbre.tilted").value_or(false);
        try {
            validate(p);
            c.cbre = p;
        } catch (const ValidationError& e) {
            diags.push_back({0, "cbre", e.what()});
        }
    }

    if (const auto fam = r.take_string("f.family")) {
        if (*fam == "power_tail") {
            PowerTailF f;
            f.K = r.take_real("f.K").value_or(1.0);
            f.beta = r.take_real("f.beta").value_or(1.0);
            f.alpha = r.take_real("f.alpha").value_or(1.0);
            f.beta0 = r.take_real("f.beta0").value_or(0.0);
            f.C0 = r.take_real("f.C0");
            c.f = f;
        } else if (*fam == "cbre_tail") {
            CbreTailF f;
            f.x0 = r.take_real("f.x0").value_or(1.0);
            f.c = r.take_real("f.c").value_or(1.0);
            f.alpha = r.take_real("f.alpha").value_or(1.0);
            c.f = f;
        } else {
            diags.push_back({r.line_of("f.family"), "f.family",
                             "unknown payoff family '" + *fam + "' (power_tail | cbre_tail)"});
        }
        if (c.f) {
            try {
                validate(*c.f);
            } catch (const ValidationError& e) {
                diags.push_back({0, "f", e.what()});
                c.f.reset();
            }
        }
    }

    const auto grid = [&](const char* key, std::vector<double>& dst) {
        if (auto g = r.take_real_list(key)) {
            if (!std::is_sorted(g->begin(), g->end()) ||
                std::adjacent_find(g->begin(), g->end()) != g->end())
                diags.push_back({r.line_of(key), key, "must be strictly increasing"});
            else
                dst = std::move(*g);
        }
    };
    grid("grid.t", c.t_grid);
    grid("grid.x", c.x_grid);
    grid("grid.y", c.y_grid);
    grid("grid.lambda", c.lambda_grid);

    c.coeff_kind = r.take_string("coeff.kind");
    c.coeff_horizon = r.take_real("coeff.horizon_t").value_or(0.0);
    static const std::set<std::string> coeffs{"D2", "D3", "D4", "c_rho", "regime5"};
    if (c.coeff_kind && !coeffs.count(*c.coeff_kind))
        diags.push_back({r.line_of("coeff.kind"), "coeff.kind",
                         "unknown coefficient '" + *c.coeff_kind +
                             "' (D2 | D3 | D4 | c_rho | regime5)"});

    if (const auto list = r.take_real_list("acceptance.criteria")) {
        for (double v : *list) {
            const int i = static_cast<int>(v);
            if (v != i || i < 1 || i > 12)
                diags.push_back({r.line_of("acceptance.criteria"), "acceptance.criteria",
                                 "criteria must be integers in 1..12"});
            else
                c.criteria.push_back(i);
        }
    }

    c.check_rate_tol = r.take_real("check.rate_tol");
    c.check_poly_tol = r.take_real("check.poly_tol");
    c.write_csv = r.take_bool("report.csv").value_or(true);
    c.write_summary = r.take_bool("report.summary").value_or(true);
    r.report_unknown();

    // Cross-field invariants, still collect-all.
    if (c.triplet) {
        const auto dom = exponent_domain(*c.triplet);
        const auto inside = [&](const char* field, double v) {
            if (!dom.interior(v))
                diags.push_back({0, field,
                                 detail::format_real(v) + " outside the open exponent domain (" +
                                     detail::format_real(dom.lower) + ", " +
                                     detail::format_real(dom.upper) + ")"});
        };
        if (c.beta) inside("beta", *c.beta);
        if (c.tilt) inside("tilt", *c.tilt);
        if (c.rho) inside("rho", *c.rho);
    }
    const auto need = [&](bool ok, const char* field, const char* msg) {
        if (!ok) diags.push_back({0, field, msg});
    };
    if (c.kind == "exponent") {
        need(c.triplet.has_value(), "triplet", "exponent kind requires a triplet");
        need(!c.lambda_grid.empty(), "grid.lambda", "exponent kind requires grid.lambda");
    } else if (c.kind == "simulate") {
        need(c.triplet.has_value(), "triplet", "simulate kind requires a triplet");
        need(c.sim.horizon_t > 0.0, "sim.horizon_t", "simulate kind requires sim.horizon_t > 0");
    } else if (c.kind == "firstpassage") {
        need(c.triplet.has_value(), "triplet", "firstpassage kind requires a triplet");
        need(!c.t_grid.empty(), "grid.t", "firstpassage kind requires grid.t");
    } else if (c.kind == "asymptotics") {
        need(c.triplet.has_value(), "triplet", "asymptotics kind requires a triplet");
        if (c.coeff_kind) {
            if (*c.coeff_kind != "c_rho" && *c.coeff_kind != "regime5") {
                need(!c.x_grid.empty(), "grid.x", "this coefficient requires grid.x");
                need(c.coeff_horizon > 0.0, "coeff.horizon_t",
                     "this coefficient requires coeff.horizon_t > 0");
            }
            if (*c.coeff_kind == "D3")
                need(!c.y_grid.empty(), "grid.y", "coefficient D3 requires grid.y");
            if (*c.coeff_kind == "D2" || *c.coeff_kind == "D3")
                need(c.f.has_value(), "f.family", "this coefficient requires a payoff spec");
        } else {
            need(!c.t_grid.empty(), "grid.t", "asymptotics kind requires grid.t");
            need(c.f.has_value(), "f.family", "asymptotics kind requires a payoff spec");
        }
    } else if (c.kind == "cbre") {
        need(c.cbre.has_value(), "cbre", "cbre kind requires cbre/env parameters");
        need(!c.t_grid.empty(), "grid.t", "cbre kind requires grid.t");
    }
    if (c.t_grid.size() > 0 && c.t_grid.front() < 0.0)
        diags.push_back({0, "grid.t", "times must be nonnegative"});
    return res;
}

// Canonical text form: sorted keys, 17 significant digits. Parsing the output
// reproduces the config exactly.
inline std::string serialize(const ExperimentConfig& c) {
    using detail::format_real;
    std::map<std::string, std::string> kv;
    kv["kind"] = c.kind;
    kv["seed"] = std::to_string(c.sim.seed);
    kv["sim.step_h"] = format_real(c.sim.step_h);
    kv["sim.horizon_t"] = format_real(c.sim.horizon_t);
    kv["sim.n_paths"] = std::to_string(c.sim.n_paths);
    if (c.sim.small_jump_cutoff != 0.0)
        kv["sim.small_jump_cutoff"] = format_real(c.sim.small_jump_cutoff);
    kv["alpha"] = format_real(c.alpha);
    if (c.beta) kv["beta"] = format_real(*c.beta);
    if (c.tilt) kv["tilt"] = format_real(*c.tilt);
    if (c.rho) kv["rho"] = format_real(*c.rho);
    kv["x"] = format_real(c.x_level);
    if (c.triplet) {
        kv["triplet.drift_a"] = format_real(c.triplet->drift_a);
        kv["triplet.sigma"] = format_real(c.triplet->sigma);
        detail::serialize_jumps(c.triplet->jumps, "triplet", kv);
    }
    if (c.cbre) {
        kv["env.beta_drift"] = format_real(c.cbre->env.beta_drift);
        kv["env.sigma"] = format_real(c.cbre->env.sigma);
        detail::serialize_jumps(c.cbre->env.jumps, "env", kv);
        kv["cbre.x0"] = format_real(c.cbre->x0);
        kv["cbre.c"] = format_real(c.cbre->c);
        kv["cbre.alpha"] = format_real(c.cbre->alpha);
        kv["cbre.tilted"] = c.cbre_tilted ? "true" : "false";
    }
    if (c.f) {
        if (const auto* p = std::get_if<PowerTailF>(&*c.f)) {
            kv["f.family"] = "power_tail";
            kv["f.K"] = format_real(p->K);
            kv["f.beta"] = format_real(p->beta);
            kv["f.alpha"] = format_real(p->alpha);
            kv["f.beta0"] = format_real(p->beta0);
            if (p->C0) kv["f.C0"] = format_real(*p->C0);
        } else {
            const auto& q = std::get<CbreTailF>(*c.f);
            kv["f.family"] = "cbre_tail";
            kv["f.x0"] = format_real(q.x0);
            kv["f.c"] = format_real(q.c);
            kv["f.alpha"] = format_real(q.alpha);
        }
    }
    const auto list = [&](const char* key, const std::vector<double>& g) {
        if (g.empty()) return;
        std::string s;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (i) s += ", ";
            s += format_real(g[i]);
        }
        kv[key] = s;
    };
    list("grid.t", c.t_grid);
    list("grid.x", c.x_grid);
    list("grid.y", c.y_grid);
    list("grid.lambda", c.lambda_grid);
    if (c.coeff_kind) kv["coeff.kind"] = *c.coeff_kind;
    if (c.coeff_horizon != 0.0) kv["coeff.horizon_t"] = format_real(c.coeff_horizon);
    if (!c.criteria.empty()) {
        std::string s;
        for (std::size_t i = 0; i < c.criteria.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(c.criteria[i]);
        }
        kv["acceptance.criteria"] = s;
    }
    if (c.check_rate_tol) kv["check.rate_tol"] = format_real(*c.check_rate_tol);
    if (c.check_poly_tol) kv["check.poly_tol"] = format_real(*c.check_poly_tol);
    kv["report.csv"] = c.write_csv ? "true" : "false";
    kv["report.summary"] = c.write_summary ? "true" : "false";

    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

}  // namespace expfun
