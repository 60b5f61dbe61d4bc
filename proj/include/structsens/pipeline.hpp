#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "structsens/bifurcation.hpp"
#include "structsens/config.hpp"
#include "structsens/fitting.hpp"
#include "structsens/svg.hpp"

namespace structsens {

struct ReportBundle {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::string> files;
};

namespace detail {

inline std::string csv_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string opt_num(const std::optional<double>& v) {
    return v ? csv_num(*v) : std::string("-");
}

struct CsvWriter {
    std::ofstream out;
    explicit CsvWriter(const std::string& path, const std::string& provenance) {
        out.open(path, std::ios::binary);
        if (!out) throw io_error("cannot write: " + path);
        out << "# " << provenance << "\n";
    }
    void line(const std::string& s) { out << s << "\n"; }
    void close(const std::string& path) {
        out.flush();
        if (!out) throw io_error("failed writing: " + path);
    }
};

inline std::vector<double> make_grid(double lo, double hi, double step) {
    std::vector<double> g;
    for (double k = lo; k <= hi + 0.5 * step; k += step) g.push_back(k);
    return g;
}

}  // namespace detail

// CSV with header x,f or x,f,w.
inline SampledCurve read_sampled_curve(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read data file: " + path);
    SampledCurve curve;
    std::string line;
    bool have_w = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line_no == 1 || (curve.x.empty() && cells[0] == "x")) {
            if (cells.size() < 2 || cells[0] != "x" || cells[1] != "f")
                throw io_error(path + ": expected header x,f[,w]");
            have_w = cells.size() > 2 && cells[2] == "w";
            continue;
        }
        if (cells.size() < 2) throw io_error(path + ": short row at line " + std::to_string(line_no));
        curve.x.push_back(std::stod(cells[0]));
        curve.f.push_back(std::stod(cells[1]));
        if (have_w) {
            if (cells.size() < 3)
                throw io_error(path + ": missing weight at line " + std::to_string(line_no));
            curve.w.push_back(std::stod(cells[2]));
        }
    }
    curve.validate();
    return curve;
}

namespace detail {

inline ModelSpec model_from_config(const RunConfig& cfg, const Response& response) {
    ModelSpec spec;
    spec.kind = cfg.model;
    spec.r = cfg.r;
    spec.K = cfg.K > 0.0 ? cfg.K : 1.0;
    spec.m = cfg.m;
    spec.s = cfg.s;
    spec.q = cfg.q;
    spec.response = response;
    return spec;
}

inline SimConfig sim_from_config(const RunConfig& cfg) {
    SimConfig sim;
    sim.dt = cfg.dt;
    sim.t_end = cfg.t_end;
    sim.transient_fraction = cfg.transient_fraction;
    sim.sigma = cfg.sigma;
    sim.seed = cfg.seed;
    return sim;
}

inline ICProtocol protocol_from_config(const RunConfig& cfg) {
    ICProtocol p;
    p.eq_perturbation = cfg.eq_perturbation;
    p.far_prey_fraction = cfg.far_prey_fraction;
    p.far_predator_fraction = cfg.far_predator_fraction;
    return p;
}

// Auto Hopf bracket when the config leaves K_lo/K_hi at zero: just above the
// (rm) coexistence prey density up to a generous ceiling.
inline std::optional<double> hopf_with_bracket(const RunConfig& cfg, const ModelSpec& spec) {
    double lo = cfg.hopf_K_lo, hi = cfg.hopf_K_hi;
    if (hi <= 0.0) hi = cfg.model == ModelKind::rosenzweig_macarthur ? 50.0 : 100.0;
    if (lo <= 0.0) {
        if (cfg.model == ModelKind::rosenzweig_macarthur) {
            const auto xs = prey_density_at_mortality(spec.response, spec.m);
            if (!xs) return std::nullopt;
            lo = *xs * 1.001;
        } else {
            lo = hi * 1e-3;
        }
    }
    return hopf_locate(spec, lo, hi, cfg.hopf_tol);
}

inline void write_diagram_csv(const std::string& path, const std::string& provenance,
                              const BifurcationDiagram& diag) {
    CsvWriter csv(path, provenance);
    csv.line("K,ic_label,var,min,max,class");
    for (std::size_t k = 0; k < diag.K_grid.size(); ++k) {
        for (int j = 0; j < diag.n_ic; ++j) {
            const DiagramCell& c = diag.cells[k * diag.n_ic + j];
            const std::string cls = c.failed ? "failed" : (c.is_cycle ? "cycle" : "point");
            csv.line(csv_num(c.K) + "," + c.ic_label + ",x," + csv_num(c.ext.x_min) + "," +
                     csv_num(c.ext.x_max) + "," + cls);
            csv.line(csv_num(c.K) + "," + c.ic_label + ",y," + csv_num(c.ext.y_min) + "," +
                     csv_num(c.ext.y_max) + "," + cls);
        }
    }
    csv.close(path);
}

inline void write_summary_csv(const std::string& path, const std::string& provenance,
                              const std::vector<std::pair<std::string, const BifurcationDiagram*>>& diags,
                              double spread_ratio) {
    CsvWriter csv(path, provenance);
    csv.line("response,hopf_K,lc_saddle_K,bistable_lo,bistable_hi");
    for (const auto& [label, d] : diags) {
        std::string lo = "-", hi = "-";
        if (d->bistable_window) {
            lo = csv_num(d->bistable_window->first);
            hi = csv_num(d->bistable_window->second);
        }
        csv.line(label + "," + opt_num(d->hopf_K) + "," + opt_num(d->lc_saddle_K) + "," + lo + "," +
                 hi);
    }
    if (spread_ratio > 0.0) csv.line("# hopf_spread_ratio = " + csv_num(spread_ratio));
    csv.close(path);
}

}  // namespace detail

// Dispatches a parsed config to the matching pipeline and writes the output
// set. Every file starts with a provenance line carrying the config hash and
// seed; rerunning the same config and seed reproduces the files byte for
// byte.
inline ReportBundle run(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    ReportBundle bundle;
    bundle.config_hash = config_hash(cfg);
    bundle.seed = cfg.seed;
    const std::string prov = std::string("structsens ") + kVersion + " config=" +
                             bundle.config_hash + " seed=" + std::to_string(cfg.seed);
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw io_error("cannot create output directory: " + cfg.out_dir);
    auto out_path = [&](const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); };
    auto emit = [&](const std::string& name) {
        bundle.files.push_back(out_path(name));
        return bundle.files.back();
    };

    // the resolved config is itself part of the bundle
    {
        std::ofstream echo(emit("config_echo.conf"), std::ios::binary);
        echo << "# " << prov << "\n" << serialize(cfg);
    }

    switch (cfg.experiment) {
        case Experiment::intersect: {
            detail::CsvWriter csv(emit("intersections.csv"), prov);
            csv.line("pair,index,x");
            const std::pair<std::string, std::string> pairs[] = {
                {"holling", "ivlev"}, {"ivlev", "trig"}, {"trig", "holling"}};
            for (const auto& [n1, n2] : pairs) {
                const auto r1 = std::get<FunctionalResponse>(build_response(cfg.named_responses.at(n1)));
                const auto r2 = std::get<FunctionalResponse>(build_response(cfg.named_responses.at(n2)));
                const auto set = find_intersections(r1, r2, cfg.fit_x_lo, cfg.fit_x_hi);
                int idx = 0;
                for (double p : set.points)
                    csv.line(n1 + "/" + n2 + "," + std::to_string(idx++) + "," +
                             detail::csv_num(p));
            }
            csv.close(out_path("intersections.csv"));
            break;
        }
        case Experiment::fit: {
            FitRegion region{cfg.fit_x_lo, cfg.fit_x_hi, cfg.fit_n_grid, {}};
            FitOptions opt;
            opt.restarts = cfg.fit_restarts;
            opt.seed = cfg.seed == 0 ? 17 : cfg.seed;
            std::vector<Family> candidates;
            std::optional<FunctionalResponse> fixed;
            std::optional<SampledCurve> data;
            if (!cfg.fit_data.empty())
                data = read_sampled_curve(cfg.fit_data);
            else
                fixed = std::get<FunctionalResponse>(build_response(cfg.response));
            if (cfg.fit_candidate == "all") {
                for (Family f : {Family::holling, Family::ivlev, Family::trig})
                    if (!fixed || f != fixed->family) candidates.push_back(f);
            } else {
                candidates.push_back(family_from_name(cfg.fit_candidate));
            }
            detail::CsvWriter csv(emit("fit.csv"), prov);
            csv.line("family,a,b,objective,converged");
            for (Family f : candidates) {
                const FitResult r = data ? fit_response(f, *data, region, opt)
                                         : fit_response(f, *fixed, region, opt);
                csv.line(family_name(f) + "," + detail::csv_num(r.a) + "," + detail::csv_num(r.b) +
                         "," + detail::csv_num(r.objective) + "," + (r.converged ? "1" : "0"));
            }
            csv.close(out_path("fit.csv"));
            break;
        }
        case Experiment::simulate: {
            const Response resp = build_response(cfg.response);
            ModelSpec spec = detail::model_from_config(cfg, resp);
            SimConfig sim = detail::sim_from_config(cfg);
            if (cfg.ic_x >= 0.0 && cfg.ic_y >= 0.0) {
                sim.ic = State{cfg.ic_x, cfg.ic_y};
            } else {
                const auto eq = coexistence_equilibrium(spec);
                sim.ic = eq ? State{eq->x * 1.01, eq->y * 1.01} : State{0.5 * spec.K, 0.1 * spec.K};
            }
            const Trajectory tr = sim.sigma > 0.0 ? integrate_stochastic(spec, sim)
                                                  : integrate_deterministic(spec, sim);
            detail::CsvWriter csv(emit("trajectory.csv"), prov);
            csv.line(tr.xi.empty() ? "t,x,y" : "t,x,y,xi");
            for (std::size_t i = 0; i < tr.t.size(); ++i) {
                std::string row = detail::csv_num(tr.t[i]) + "," + detail::csv_num(tr.x[i]) + "," +
                                  detail::csv_num(tr.y[i]);
                if (!tr.xi.empty()) row += "," + detail::csv_num(tr.xi[i]);
                csv.line(row);
            }
            csv.close(out_path("trajectory.csv"));
            const Extrema ext = post_transient_extrema(tr, sim.transient_fraction);
            detail::CsvWriter ecsv(emit("extrema.csv"), prov);
            ecsv.line("K,var,min,max");
            ecsv.line(detail::csv_num(spec.K) + ",x," + detail::csv_num(ext.x_min) + "," +
                      detail::csv_num(ext.x_max));
            ecsv.line(detail::csv_num(spec.K) + ",y," + detail::csv_num(ext.y_min) + "," +
                      detail::csv_num(ext.y_max));
            ecsv.close(out_path("extrema.csv"));
            if (cfg.plots) emit_plot(tr, emit("trajectory.svg"), response_label(resp), prov);
            break;
        }
        case Experiment::hopf: {
            const Response resp = build_response(cfg.response);
            const ModelSpec spec = detail::model_from_config(cfg, resp);
            const auto K = detail::hopf_with_bracket(cfg, spec);
            detail::CsvWriter csv(emit("hopf.csv"), prov);
            csv.line("response,hopf_K");
            csv.line(response_label(resp) + "," + detail::opt_num(K));
            csv.close(out_path("hopf.csv"));
            break;
        }
        case Experiment::bifurcate: {
            const Response resp = build_response(cfg.response);
            const ModelSpec spec = detail::model_from_config(cfg, resp);
            const SimConfig sim = detail::sim_from_config(cfg);
            const ICProtocol protocol = detail::protocol_from_config(cfg);
            const auto grid = detail::make_grid(cfg.K_lo, cfg.K_hi, cfg.K_step);
            BifurcationDiagram diag = scan_diagram(spec, grid, protocol, sim, cfg.threads);
            try {
                diag.hopf_K = detail::hopf_with_bracket(cfg, spec);
            } catch (const numeric_error&) {
                diag.hopf_K.reset();
            }
            detect_bistability(diag, spec, protocol, sim, cfg.refine_saddle);
            detail::write_diagram_csv(emit("diagram.csv"), prov, diag);
            const std::string label = response_label(resp);
            detail::write_summary_csv(emit("summary.csv"), prov, {{label, &diag}}, 0.0);
            if (cfg.plots) emit_plot(diag, emit("diagram.svg"), label, prov);
            if (cfg.sigma > 0.0) {
                const BifurcationDiagram sto =
                    stochastic_diagram(spec, grid, sim, cfg.replicates, protocol, cfg.threads);
                detail::CsvWriter csv(emit("stochastic.csv"), prov);
                csv.line("K,ic_label,var,min,max,class,extinct_replicates,replicates");
                for (std::size_t k = 0; k < grid.size(); ++k) {
                    const DiagramCell& c = sto.cells[k];
                    const std::string cls = c.failed ? "failed" : (c.is_cycle ? "cycle" : "point");
                    const std::string tail = "," + cls + "," + std::to_string(c.extinct_replicates) +
                                             "," + std::to_string(c.replicates);
                    csv.line(detail::csv_num(c.K) + ",stochastic,x," + detail::csv_num(c.ext.x_min) +
                             "," + detail::csv_num(c.ext.x_max) + tail);
                    csv.line(detail::csv_num(c.K) + ",stochastic,y," + detail::csv_num(c.ext.y_min) +
                             "," + detail::csv_num(c.ext.y_max) + tail);
                }
                csv.close(out_path("stochastic.csv"));
                if (cfg.plots) emit_plot(sto, emit("stochastic.svg"), label + " stochastic", prov);
            }
            break;
        }
        case Experiment::report: {
            const SimConfig sim = detail::sim_from_config(cfg);
            const ICProtocol protocol = detail::protocol_from_config(cfg);
            const auto grid = detail::make_grid(cfg.K_lo, cfg.K_hi, cfg.K_step);

            struct Entry {
                std::string label;
                Response response;
            };
            std::vector<Entry> entries;
            for (const char* name : {"holling", "ivlev", "trig"})
                entries.push_back({name, build_response(cfg.named_responses.at(name))});

            if (cfg.report_fixed != "none" && !cfg.report_fixed.empty()) {
                const Family fixed_family = family_from_name(cfg.report_fixed);
                const auto fixed = std::get<FunctionalResponse>(
                    build_response(cfg.named_responses.at(cfg.report_fixed)));
                const double lo = cfg.report_fit_hi > 0.0 ? cfg.report_fit_lo : cfg.fit_x_lo;
                const double hi = cfg.report_fit_hi > 0.0 ? cfg.report_fit_hi : cfg.fit_x_hi;
                FitRegion region{lo, hi, cfg.fit_n_grid, {}};
                FitOptions opt;
                opt.restarts = cfg.fit_restarts;
                opt.seed = cfg.seed == 0 ? 17 : cfg.seed;
                for (Family f : {Family::holling, Family::ivlev, Family::trig}) {
                    if (f == fixed_family) {
                        entries.push_back({family_name(f) + "_fixed", fixed});
                        continue;
                    }
                    const FitResult r = fit_response(f, fixed, region, opt);
                    entries.push_back({family_name(f) + "_fit_to_" + cfg.report_fixed,
                                       FunctionalResponse{f, r.a, r.b}});
                }
            }
            if (!cfg.report_piecewise.empty()) {
                std::istringstream ss(cfg.report_piecewise);
                std::string code;
                while (std::getline(ss, code, ',')) {
                    code = detail::trim(code);
                    if (code.empty()) continue;
                    ResponseBlock blk;
                    blk.code = code;
                    for (const auto& [name, named] : cfg.named_responses) {
                        const char initial = family_initial(family_from_name(name));
                        if (code.find(initial) != std::string::npos)
                            blk.params[initial] = named.params.at(initial);
                    }
                    entries.push_back({code, build_response(blk)});
                }
            }

            std::vector<BifurcationDiagram> diagrams(entries.size());
            for (std::size_t i = 0; i < entries.size(); ++i) {
                const ModelSpec spec = detail::model_from_config(cfg, entries[i].response);
                // horizon extension disabled: the report performs exactly
                // grid x ICs x responses integrations
                diagrams[i] = scan_diagram(spec, grid, protocol, sim, cfg.threads, 0);
                try {
                    diagrams[i].hopf_K = detail::hopf_with_bracket(cfg, spec);
                } catch (const numeric_error&) {
                    diagrams[i].hopf_K.reset();
                }
                // no saddle refinement here: the report performs exactly
                // grid x ICs x responses integrations
                detect_bistability(diagrams[i], spec, protocol, sim, false);
                detail::write_diagram_csv(emit("diagram_" + entries[i].label + ".csv"), prov,
                                          diagrams[i]);
                if (cfg.plots)
                    emit_plot(diagrams[i], emit("diagram_" + entries[i].label + ".svg"),
                              entries[i].label, prov);
            }
            std::vector<std::pair<std::string, const BifurcationDiagram*>> pairs;
            for (std::size_t i = 0; i < entries.size(); ++i)
                pairs.push_back({entries[i].label, &diagrams[i]});
            const SensitivityReport rep = sensitivity_report(pairs);
            detail::write_summary_csv(emit("sensitivity.csv"), prov, pairs, rep.hopf_spread_ratio);
            break;
        }
    }
    return bundle;
}

}  // namespace structsens
