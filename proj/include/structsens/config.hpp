#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "structsens/models.hpp"
#include "structsens/parallel.hpp"
#include "structsens/responses.hpp"

namespace structsens {

inline constexpr const char* kVersion = "0.1.0";

enum class Experiment { fit, intersect, simulate, bifurcate, hopf, report };

inline std::string experiment_name(Experiment e) {
    switch (e) {
        case Experiment::fit: return "fit";
        case Experiment::intersect: return "intersect";
        case Experiment::simulate: return "simulate";
        case Experiment::bifurcate: return "bifurcate";
        case Experiment::hopf: return "hopf";
        case Experiment::report: return "report";
    }
    return "?";
}

inline Experiment experiment_from_name(const std::string& s) {
    for (Experiment e : {Experiment::fit, Experiment::intersect, Experiment::simulate,
                         Experiment::bifurcate, Experiment::hopf, Experiment::report})
        if (experiment_name(e) == s) return e;
    throw config_error("unknown experiment: " + s);
}

// One [response] or [response.<name>] block. Either a plain family response
// (family/a/b) or a piecewise response given as a three-letter code plus the
// parameter pair of each family that appears in it.
struct ResponseBlock {
    std::string code;  // empty for a plain response
    std::optional<Family> family;
    std::map<char, std::pair<double, double>> params;  // keyed by family initial

    bool defined() const { return family.has_value() || !code.empty(); }

    bool operator==(const ResponseBlock&) const = default;
};

// Builds the runtime response. Piecewise breakpoints come from the
// intersections of the two families present in the code.
inline Response build_response(const ResponseBlock& blk) {
    if (blk.code.empty()) {
        if (!blk.family) throw config_error("response block missing `family` (or `code`)");
        auto it = blk.params.find(family_initial(*blk.family));
        if (it == blk.params.end()) throw config_error("response block missing `a`/`b`");
        FunctionalResponse r{*blk.family, it->second.first, it->second.second};
        r.validate();
        return r;
    }
    if (blk.code.size() != 3) throw config_error("piecewise code must have three letters");
    auto part = [&](char c) {
        auto it = blk.params.find(c);
        if (it == blk.params.end())
            throw config_error(std::string("piecewise response missing parameters for '") + c + "'");
        return FunctionalResponse{family_from_name(std::string(1, c)), it->second.first,
                                  it->second.second};
    };
    const FunctionalResponse low = part(blk.code[0]);
    const FunctionalResponse mid = part(blk.code[1]);
    const FunctionalResponse high = part(blk.code[2]);
    const FunctionalResponse& other = mid.family != low.family ? mid : high;
    if (other.family == low.family)
        throw config_error("piecewise code must use exactly two families");
    const auto inter = find_intersections(low, other, 0.0, 4.0);
    return make_piecewise(low, mid, high, inter);
}

// Fully resolved run description: what parse_config returns, with every
// default filled in so serialize() echoes the effective values.
struct RunConfig {
    Experiment experiment = Experiment::simulate;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 0;  // 0 = resolve from STRUCTSENS_THREADS (default 1)

    // [model]
    ModelKind model = ModelKind::rosenzweig_macarthur;
    double r = 1.0;
    double m = 0.1;
    double s = 0.0;
    double q = 0.0;
    double K = 0.0;
    double K_lo = 0.0, K_hi = 0.0, K_step = 0.0;

    // [response], [response.<name>]
    ResponseBlock response;
    std::map<std::string, ResponseBlock> named_responses;

    // [sim]
    double dt = 0.0;        // 0 = model default (1e-3 rm, 1e-4 lgm)
    double t_end = 0.0;     // 0 = model default (2000 rm, 100 lgm)
    double transient_fraction = 0.5;
    double sigma = 0.0;
    int replicates = 10;
    double ic_x = -1.0, ic_y = -1.0;  // negative = start near the equilibrium

    // [fit]
    std::string fit_candidate = "all";
    double fit_x_lo = 0.0, fit_x_hi = 4.0;
    int fit_n_grid = 1000;
    int fit_restarts = 8;
    std::string fit_data;  // CSV path; empty = fit to the [response] block

    // [hopf]
    double hopf_K_lo = 0.0;  // 0 = auto bracket
    double hopf_K_hi = 0.0;  // 0 = auto bracket
    double hopf_tol = 1e-9;

    // [bifurcate]
    double eq_perturbation = 0.01;
    double far_prey_fraction = 0.9;
    double far_predator_fraction = 0.02;
    bool refine_saddle = true;

    // [report]
    std::string report_fixed = "none";     // adds a fitted sub-model set
    std::string report_piecewise;          // comma-separated codes, may be empty
    double report_fit_lo = 0.0, report_fit_hi = 0.0;
    bool plots = true;

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct KeyValue {
    std::string section, key, value;
    int line = 0;
};

inline double parse_double(const KeyValue& kv) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(kv.value, &pos);
        if (pos != kv.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("line " + std::to_string(kv.line) + ": invalid number for " +
                           kv.section + "." + kv.key + ": '" + kv.value + "'");
    }
}

inline std::uint64_t parse_u64(const KeyValue& kv) {
    try {
        return std::stoull(kv.value);
    } catch (const std::exception&) {
        throw config_error("line " + std::to_string(kv.line) + ": invalid integer for " +
                           kv.section + "." + kv.key);
    }
}

inline bool parse_bool(const KeyValue& kv) {
    if (kv.value == "true" || kv.value == "1") return true;
    if (kv.value == "false" || kv.value == "0") return false;
    throw config_error("line " + std::to_string(kv.line) + ": invalid bool for " + kv.section +
                       "." + kv.key);
}

inline void apply_response_key(ResponseBlock& blk, const KeyValue& kv) {
    auto set_param = [&](char initial, bool is_a) {
        auto& p = blk.params[initial];
        (is_a ? p.first : p.second) = parse_double(kv);
    };
    if (kv.key == "family") {
        blk.family = family_from_name(kv.value);
    } else if (kv.key == "code") {
        blk.code = kv.value;
    } else if (kv.key == "a" || kv.key == "b") {
        if (!blk.family)
            throw config_error("line " + std::to_string(kv.line) +
                               ": `family` must precede `a`/`b` in a response block");
        set_param(family_initial(*blk.family), kv.key == "a");
    } else if (kv.key.size() == 3 && kv.key[1] == '_' && (kv.key[2] == 'a' || kv.key[2] == 'b') &&
               (kv.key[0] == 'H' || kv.key[0] == 'I' || kv.key[0] == 'T')) {
        set_param(kv.key[0], kv.key[2] == 'a');  // piecewise: H_a, H_b, I_a, ...
    } else {
        throw config_error("line " + std::to_string(kv.line) + ": unknown key " + kv.section +
                           "." + kv.key);
    }
}

}  // namespace detail

// Model-dependent defaults; applied once the model kind is known.
inline void apply_defaults(RunConfig& cfg) {
    const bool rm = cfg.model == ModelKind::rosenzweig_macarthur;
    if (cfg.dt == 0.0) cfg.dt = rm ? 1e-3 : 1e-4;
    if (cfg.t_end == 0.0) cfg.t_end = rm ? 2000.0 : 100.0;
    if (cfg.threads == 0) cfg.threads = default_thread_count();
}

inline void validate_config(const RunConfig& cfg) {
    if (cfg.model == ModelKind::leslie_gower_may) {
        if (!(cfg.s > 0.0)) throw config_error("lgm model requires key `s`");
        if (!(cfg.q > 0.0)) throw config_error("lgm model requires key `q`");
    } else {
        if (!(cfg.m > 0.0)) throw config_error("rm model requires key `m`");
    }
    if (!(cfg.r > 0.0)) throw config_error("model requires r > 0");
    auto need_named = [&](const char* who) {
        for (const char* name : {"holling", "ivlev", "trig"})
            if (!cfg.named_responses.count(name))
                throw config_error(std::string(who) + " requires a [response." + name + "] block");
    };
    auto need_grid = [&](const char* who) {
        if (!(cfg.K_lo > 0.0) || !(cfg.K_hi > cfg.K_lo) || !(cfg.K_step > 0.0))
            throw config_error(std::string(who) + " requires model keys K_lo < K_hi and K_step");
    };
    switch (cfg.experiment) {
        case Experiment::fit:
            if (cfg.fit_data.empty() && !cfg.response.defined())
                throw config_error("fit requires a [response] block or fit.data");
            if (!(cfg.fit_x_lo >= 0.0) || !(cfg.fit_x_lo < cfg.fit_x_hi))
                throw config_error("fit requires 0 <= x_lo < x_hi");
            break;
        case Experiment::intersect:
            need_named("intersect");
            break;
        case Experiment::simulate:
            if (!cfg.response.defined()) throw config_error("simulate requires a [response] block");
            if (!(cfg.K > 0.0)) throw config_error("simulate requires model key `K`");
            break;
        case Experiment::bifurcate:
            if (!cfg.response.defined()) throw config_error("bifurcate requires a [response] block");
            need_grid("bifurcate");
            break;
        case Experiment::hopf:
            if (!cfg.response.defined()) throw config_error("hopf requires a [response] block");
            break;
        case Experiment::report:
            need_named("report");
            need_grid("report");
            break;
    }
}

inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    bool have_experiment = false;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string s = detail::trim(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw config_error("line " + std::to_string(line) + ": malformed section header");
            section = detail::trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(line) + ": expected key = value");
        detail::KeyValue kv{section, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)),
                            line};
        auto unknown = [&] {
            throw config_error("line " + std::to_string(line) + ": unknown key " + section + "." +
                               kv.key);
        };
        if (section == "run") {
            if (kv.key == "experiment") {
                cfg.experiment = experiment_from_name(kv.value);
                have_experiment = true;
            } else if (kv.key == "seed")
                cfg.seed = detail::parse_u64(kv);
            else if (kv.key == "out")
                cfg.out_dir = kv.value;
            else if (kv.key == "threads")
                cfg.threads = static_cast<int>(detail::parse_u64(kv));
            else
                unknown();
        } else if (section == "model") {
            if (kv.key == "model") {
                if (kv.value == "rm")
                    cfg.model = ModelKind::rosenzweig_macarthur;
                else if (kv.value == "lgm")
                    cfg.model = ModelKind::leslie_gower_may;
                else
                    throw config_error("line " + std::to_string(line) +
                                       ": model must be 'rm' or 'lgm'");
            } else if (kv.key == "r")
                cfg.r = detail::parse_double(kv);
            else if (kv.key == "m")
                cfg.m = detail::parse_double(kv);
            else if (kv.key == "s")
                cfg.s = detail::parse_double(kv);
            else if (kv.key == "q")
                cfg.q = detail::parse_double(kv);
            else if (kv.key == "K")
                cfg.K = detail::parse_double(kv);
            else if (kv.key == "K_lo")
                cfg.K_lo = detail::parse_double(kv);
            else if (kv.key == "K_hi")
                cfg.K_hi = detail::parse_double(kv);
            else if (kv.key == "K_step")
                cfg.K_step = detail::parse_double(kv);
            else
                unknown();
        } else if (section == "response") {
            detail::apply_response_key(cfg.response, kv);
        } else if (section.rfind("response.", 0) == 0) {
            const std::string name = section.substr(9);
            if (name != "holling" && name != "ivlev" && name != "trig")
                throw config_error("line " + std::to_string(line) + ": unknown response section " +
                                   section);
            detail::apply_response_key(cfg.named_responses[name], kv);
        } else if (section == "sim") {
            if (kv.key == "dt")
                cfg.dt = detail::parse_double(kv);
            else if (kv.key == "t_end")
                cfg.t_end = detail::parse_double(kv);
            else if (kv.key == "transient_fraction")
                cfg.transient_fraction = detail::parse_double(kv);
            else if (kv.key == "sigma")
                cfg.sigma = detail::parse_double(kv);
            else if (kv.key == "replicates")
                cfg.replicates = static_cast<int>(detail::parse_u64(kv));
            else if (kv.key == "ic_x")
                cfg.ic_x = detail::parse_double(kv);
            else if (kv.key == "ic_y")
                cfg.ic_y = detail::parse_double(kv);
            else
                unknown();
        } else if (section == "fit") {
            if (kv.key == "candidate")
                cfg.fit_candidate = kv.value;
            else if (kv.key == "x_lo")
                cfg.fit_x_lo = detail::parse_double(kv);
            else if (kv.key == "x_hi")
                cfg.fit_x_hi = detail::parse_double(kv);
            else if (kv.key == "n_grid")
                cfg.fit_n_grid = static_cast<int>(detail::parse_u64(kv));
            else if (kv.key == "restarts")
                cfg.fit_restarts = static_cast<int>(detail::parse_u64(kv));
            else if (kv.key == "data")
                cfg.fit_data = kv.value;
            else
                unknown();
        } else if (section == "hopf") {
            if (kv.key == "K_lo")
                cfg.hopf_K_lo = detail::parse_double(kv);
            else if (kv.key == "K_hi")
                cfg.hopf_K_hi = detail::parse_double(kv);
            else if (kv.key == "tol")
                cfg.hopf_tol = detail::parse_double(kv);
            else
                unknown();
        } else if (section == "bifurcate") {
            if (kv.key == "refine_saddle")
                cfg.refine_saddle = detail::parse_bool(kv);
            else if (kv.key == "eq_perturbation")
                cfg.eq_perturbation = detail::parse_double(kv);
            else if (kv.key == "far_prey_fraction")
                cfg.far_prey_fraction = detail::parse_double(kv);
            else if (kv.key == "far_predator_fraction")
                cfg.far_predator_fraction = detail::parse_double(kv);
            else
                unknown();
        } else if (section == "report") {
            if (kv.key == "fixed")
                cfg.report_fixed = kv.value;
            else if (kv.key == "piecewise")
                cfg.report_piecewise = kv.value;
            else if (kv.key == "fit_lo")
                cfg.report_fit_lo = detail::parse_double(kv);
            else if (kv.key == "fit_hi")
                cfg.report_fit_hi = detail::parse_double(kv);
            else if (kv.key == "plots")
                cfg.plots = detail::parse_bool(kv);
            else
                unknown();
        } else {
            throw config_error("line " + std::to_string(line) + ": unknown section [" + section +
                               "]");
        }
    }
    if (!have_experiment) throw config_error("missing run.experiment");
    apply_defaults(cfg);
    validate_config(cfg);
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace detail {

inline void serialize_response_block(std::ostream& os, const std::string& section,
                                     const ResponseBlock& blk) {
    os << "[" << section << "]\n";
    if (blk.code.empty()) {
        os << "family = " << family_name(*blk.family) << "\n";
        const auto& p = blk.params.at(family_initial(*blk.family));
        os << "a = " << fmt_double(p.first) << "\n";
        os << "b = " << fmt_double(p.second) << "\n";
    } else {
        os << "code = " << blk.code << "\n";
        for (const auto& [initial, p] : blk.params) {
            os << initial << "_a = " << fmt_double(p.first) << "\n";
            os << initial << "_b = " << fmt_double(p.second) << "\n";
        }
    }
    os << "\n";
}

}  // namespace detail

// Canonical echo of a resolved config; parse_config_text(serialize(cfg))
// reproduces cfg exactly.
inline std::string serialize(const RunConfig& cfg) {
    using detail::fmt_double;
    std::ostringstream os;
    os << "[run]\n";
    os << "experiment = " << experiment_name(cfg.experiment) << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "out = " << cfg.out_dir << "\n";
    os << "threads = " << cfg.threads << "\n\n";
    os << "[model]\n";
    os << "model = " << model_name(cfg.model) << "\n";
    os << "r = " << fmt_double(cfg.r) << "\n";
    if (cfg.model == ModelKind::rosenzweig_macarthur) os << "m = " << fmt_double(cfg.m) << "\n";
    else {
        os << "s = " << fmt_double(cfg.s) << "\n";
        os << "q = " << fmt_double(cfg.q) << "\n";
    }
    if (cfg.K != 0.0) os << "K = " << fmt_double(cfg.K) << "\n";
    if (cfg.K_step != 0.0) {
        os << "K_lo = " << fmt_double(cfg.K_lo) << "\n";
        os << "K_hi = " << fmt_double(cfg.K_hi) << "\n";
        os << "K_step = " << fmt_double(cfg.K_step) << "\n";
    }
    os << "\n";
    if (cfg.response.defined()) detail::serialize_response_block(os, "response", cfg.response);
    for (const auto& [name, blk] : cfg.named_responses)
        detail::serialize_response_block(os, "response." + name, blk);
    os << "[sim]\n";
    os << "dt = " << fmt_double(cfg.dt) << "\n";
    os << "t_end = " << fmt_double(cfg.t_end) << "\n";
    os << "transient_fraction = " << fmt_double(cfg.transient_fraction) << "\n";
    os << "sigma = " << fmt_double(cfg.sigma) << "\n";
    os << "replicates = " << cfg.replicates << "\n";
    if (cfg.ic_x >= 0.0) os << "ic_x = " << fmt_double(cfg.ic_x) << "\n";
    if (cfg.ic_y >= 0.0) os << "ic_y = " << fmt_double(cfg.ic_y) << "\n";
    os << "\n[fit]\n";
    os << "candidate = " << cfg.fit_candidate << "\n";
    os << "x_lo = " << fmt_double(cfg.fit_x_lo) << "\n";
    os << "x_hi = " << fmt_double(cfg.fit_x_hi) << "\n";
    os << "n_grid = " << cfg.fit_n_grid << "\n";
    os << "restarts = " << cfg.fit_restarts << "\n";
    if (!cfg.fit_data.empty()) os << "data = " << cfg.fit_data << "\n";
    os << "\n[hopf]\n";
    os << "K_lo = " << fmt_double(cfg.hopf_K_lo) << "\n";
    os << "K_hi = " << fmt_double(cfg.hopf_K_hi) << "\n";
    os << "tol = " << fmt_double(cfg.hopf_tol) << "\n";
    os << "\n[bifurcate]\n";
    os << "refine_saddle = " << (cfg.refine_saddle ? "true" : "false") << "\n";
    os << "eq_perturbation = " << fmt_double(cfg.eq_perturbation) << "\n";
    os << "far_prey_fraction = " << fmt_double(cfg.far_prey_fraction) << "\n";
    os << "far_predator_fraction = " << fmt_double(cfg.far_predator_fraction) << "\n";
    os << "\n[report]\n";
    os << "fixed = " << cfg.report_fixed << "\n";
    if (!cfg.report_piecewise.empty()) os << "piecewise = " << cfg.report_piecewise << "\n";
    if (cfg.report_fit_hi != 0.0) {
        os << "fit_lo = " << fmt_double(cfg.report_fit_lo) << "\n";
        os << "fit_hi = " << fmt_double(cfg.report_fit_hi) << "\n";
    }
    os << "plots = " << (cfg.plots ? "true" : "false") << "\n";
    return os.str();
}

// FNV-1a, printed as 16 hex digits; keys every output file to the config that
// produced it.
inline std::string config_hash(const RunConfig& cfg) {
    const std::string text = serialize(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace structsens
