#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "structsens/models.hpp"
#include "structsens/parallel.hpp"
#include "structsens/sim.hpp"

namespace structsens {

// Locates the carrying capacity where the coexistence steady state changes
// stability, by bisecting the largest eigenvalue real part of the Jacobian.
// Returns nothing when the stability is the same across the whole bracket.
// The equilibrium must exist at every probed K.
inline std::optional<double> hopf_locate(const ModelSpec& spec_template, double K_lo, double K_hi,
                                         double tol = 1e-9) {
    if (!(K_lo < K_hi)) throw config_error("hopf_locate: inverted K range");
    auto stability = [&](double K) {
        const ModelSpec spec = with_K(spec_template, K);
        const auto eq = coexistence_equilibrium(spec);
        if (!eq)
            throw numeric_error("hopf_locate: coexistence equilibrium disappears at K = " +
                                std::to_string(K));
        return max_real_eigenvalue(jacobian(spec, *eq));
    };
    const double g_lo = stability(K_lo);
    const double g_hi = stability(K_hi);
    if (g_lo == 0.0) return K_lo;
    if (g_hi == 0.0) return K_hi;
    if ((g_lo < 0.0) == (g_hi < 0.0)) return std::nullopt;
    return bisect(stability, K_lo, K_hi, tol);
}

struct LabeledIC {
    std::string label;
    State state;
};

// Initial-condition protocol for sweeps: one start near the coexistence
// equilibrium and one in the far field, so both basins are visited when the
// system is bistable.
struct ICProtocol {
    double eq_perturbation = 0.01;    // near-equilibrium start: eq * (1 + this)
    double far_prey_fraction = 0.9;   // far-field prey as a fraction of K
    double far_predator_fraction = 0.02;  // far-field predator relative to the natural scale

    std::vector<LabeledIC> make(const ModelSpec& spec) const {
        std::vector<LabeledIC> ics;
        const auto eq = coexistence_equilibrium(spec);
        if (eq) {
            ics.push_back({"near_eq", State{eq->x * (1.0 + eq_perturbation),
                                            eq->y * (1.0 + eq_perturbation)}});
        } else {
            ics.push_back({"near_eq", State{0.5 * spec.K, 0.1 * spec.K}});
        }
        const double y_scale =
            spec.kind == ModelKind::leslie_gower_may ? spec.K / spec.q : spec.K;
        ics.push_back({"far_field", State{far_prey_fraction * spec.K,
                                          std::max(1e-6, far_predator_fraction * y_scale)}});
        return ics;
    }
};

struct DiagramCell {
    double K = 0.0;
    int k_index = 0;
    std::string ic_label;
    Extrema ext;
    double x_mean = 0.0, y_mean = 0.0;
    bool is_cycle = false;
    bool failed = false;
    std::string error;
    int replicates = 0;          // stochastic cells only
    int extinct_replicates = 0;  // stochastic cells only
};

struct BifurcationDiagram {
    std::vector<double> K_grid;
    int n_ic = 0;
    std::vector<DiagramCell> cells;  // K-major, then IC order
    std::optional<double> hopf_K;
    std::optional<double> lc_saddle_K;
    std::optional<std::pair<double, double>> bistable_window;

    const DiagramCell& cell(int k_index, int ic_index) const {
        return cells[static_cast<std::size_t>(k_index) * n_ic + ic_index];
    }
};

// Ripple below the threshold is a point attractor; the threshold scales with
// the post-transient mean so both models' magnitudes are handled by one rule.
// Ranges above the threshold need their prey peak amplitudes examined, since
// a spiral decaying toward a weakly stable equilibrium keeps a visible range
// over any practical horizon. The last two peak amplitudes decide: flat or
// growing to half a permille means the trajectory sits on (or is headed to)
// an attractor with that amplitude, a drop past half a percent means it is
// still settling, and the band between is undecidable at this horizon.
enum class CycleVerdict { point, cycle, ambiguous };

inline CycleVerdict cycle_verdict(const RunSummary& s) {
    const double eps_x = std::max(1e-3 * s.x_mean, 1e-6);
    const double eps_y = std::max(1e-3 * s.y_mean, 1e-6);
    const bool in_range = (s.ext.x_max - s.ext.x_min) > eps_x || (s.ext.y_max - s.ext.y_min) > eps_y;
    if (!in_range) return CycleVerdict::point;
    if (s.peak_count < 3 || !(s.first_peak_excess > 0.0)) return CycleVerdict::cycle;
    if (s.last_peak_excess <= eps_x) return CycleVerdict::point;
    const double r = s.last_peak_excess / s.prev_peak_excess;
    if (r >= 0.9995) return CycleVerdict::cycle;
    if (r < 0.995) return CycleVerdict::point;
    return CycleVerdict::ambiguous;
}

inline bool classify_cycle(const RunSummary& s) {
    const CycleVerdict v = cycle_verdict(s);
    if (v == CycleVerdict::ambiguous)
        return s.last_peak_excess >= 0.999 * s.prev_peak_excess;
    return v == CycleVerdict::cycle;
}

// Integrates a cell and, while the verdict is ambiguous, doubles the horizon
// up to extend_levels times before settling on the tie-break.
inline RunSummary settle_cell(const ModelSpec& spec, SimConfig cfg, double x_ref,
                              int extend_levels) {
    RunSummary s = integrate_summary(spec, cfg, false, x_ref);
    for (int level = 0; level < extend_levels && cycle_verdict(s) == CycleVerdict::ambiguous;
         ++level) {
        cfg.t_end *= 2.0;
        s = integrate_summary(spec, cfg, false, x_ref);
    }
    return s;
}

namespace detail {

inline double coexistence_prey_ref(const ModelSpec& spec) {
    const auto eq = coexistence_equilibrium(spec);
    return eq ? eq->x : std::numeric_limits<double>::quiet_NaN();
}

inline DiagramCell run_cell(const ModelSpec& spec, const SimConfig& base_cfg, double K,
                            int k_index, const LabeledIC& ic, int extend_levels) {
    DiagramCell cell;
    cell.K = K;
    cell.k_index = k_index;
    cell.ic_label = ic.label;
    SimConfig cfg = base_cfg;
    cfg.ic = ic.state;
    cfg.sigma = 0.0;
    cfg.k_index = static_cast<std::uint64_t>(k_index);
    try {
        const ModelSpec at_K = with_K(spec, K);
        const RunSummary s = settle_cell(at_K, cfg, coexistence_prey_ref(at_K), extend_levels);
        cell.ext = s.ext;
        cell.x_mean = s.x_mean;
        cell.y_mean = s.y_mean;
        cell.is_cycle = classify_cycle(s);
    } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
    }
    return cell;
}

}  // namespace detail

// Deterministic sweep: integrate every (K, initial condition) cell, discard
// transients, classify point attractor vs cycle. extend_levels > 0 lets
// near-marginal cells rerun with a doubled horizon instead of guessing; pass
// 0 to pin the integration count to exactly grid x starts.
inline BifurcationDiagram scan_diagram(const ModelSpec& spec_template, const std::vector<double>& K_grid,
                                       const ICProtocol& protocol, const SimConfig& cfg,
                                       int threads = 1, int extend_levels = 2) {
    if (K_grid.empty()) throw config_error("scan_diagram: empty K grid");
    for (std::size_t i = 1; i < K_grid.size(); ++i)
        if (!(K_grid[i] > K_grid[i - 1])) throw config_error("scan_diagram: K grid must increase");
    BifurcationDiagram diag;
    diag.K_grid = K_grid;
    diag.n_ic = static_cast<int>(protocol.make(with_K(spec_template, K_grid.front())).size());
    diag.cells.resize(K_grid.size() * diag.n_ic);
    parallel_for(K_grid.size(), threads, [&](std::size_t k) {
        const double K = K_grid[k];
        const auto ics = protocol.make(with_K(spec_template, K));
        for (int j = 0; j < diag.n_ic; ++j)
            diag.cells[k * diag.n_ic + j] =
                detail::run_cell(spec_template, cfg, K, static_cast<int>(k), ics[j], extend_levels);
    });
    return diag;
}

namespace detail {

inline bool bistable_at(const BifurcationDiagram& diag, int k) {
    bool any_point = false, any_cycle = false;
    for (int j = 0; j < diag.n_ic; ++j) {
        const DiagramCell& c = diag.cell(k, j);
        if (c.failed) continue;
        (c.is_cycle ? any_cycle : any_point) = true;
    }
    return any_point && any_cycle;
}

// Re-evaluates bistability at an off-grid K, for the one-step edge refinement.
inline bool bistable_at_K(const ModelSpec& spec, const ICProtocol& protocol, const SimConfig& cfg,
                          double K, int extend_levels) {
    bool any_point = false, any_cycle = false;
    const ModelSpec at_K = with_K(spec, K);
    const double x_ref = coexistence_prey_ref(at_K);
    for (const auto& ic : protocol.make(at_K)) {
        SimConfig c = cfg;
        c.ic = ic.state;
        c.sigma = 0.0;
        try {
            const RunSummary s = settle_cell(at_K, c, x_ref, extend_levels);
            (classify_cycle(s) ? any_cycle : any_point) = true;
        } catch (const std::exception&) {
        }
    }
    return any_point && any_cycle;
}

}  // namespace detail

struct BistabilityResult {
    std::optional<std::pair<double, double>> window;
    std::optional<double> lc_saddle_K;
};

// Bistable cells are those where one initial condition settles to a point
// attractor and another to a cycle. The window is the longest contiguous run;
// the saddle-node of limit cycles sits at its lower edge. With refine set,
// the edge cell is split once to halve the bracketing error. A lone bistable
// cell is below sweep resolution (typically a classification edge right at a
// bifurcation) and does not count as a window.
inline BistabilityResult detect_bistability(BifurcationDiagram& diag, const ModelSpec& spec_template,
                                            const ICProtocol& protocol, const SimConfig& cfg,
                                            bool refine = true) {
    if (diag.n_ic < 2) throw config_error("detect_bistability: needs >= 2 initial conditions");
    const int n = static_cast<int>(diag.K_grid.size());
    int best_start = -1, best_len = 0;
    for (int k = 0; k < n;) {
        if (!detail::bistable_at(diag, k)) {
            ++k;
            continue;
        }
        int start = k;
        while (k < n && detail::bistable_at(diag, k)) ++k;
        if (k - start > best_len) {
            best_len = k - start;
            best_start = start;
        }
    }
    BistabilityResult out;
    if (best_len < 2) {
        diag.bistable_window.reset();
        diag.lc_saddle_K.reset();
        return out;
    }
    const double K_a = diag.K_grid[best_start];
    const double K_b = diag.K_grid[best_start + best_len - 1];
    out.window = {K_a, K_b};
    double saddle = K_a;
    if (refine && best_start > 0) {
        const double K_prev = diag.K_grid[best_start - 1];
        const double mid = 0.5 * (K_prev + K_a);
        if (detail::bistable_at_K(spec_template, protocol, cfg, mid, 2)) saddle = mid;
    }
    out.lc_saddle_K = saddle;
    diag.bistable_window = out.window;
    diag.lc_saddle_K = out.lc_saddle_K;
    return out;
}

// Stochastic sweep: per K, replicate runs on independent noise streams are
// pooled into one envelope; replicates absorbed at predator extinction are
// excluded from the pool and counted.
inline BifurcationDiagram stochastic_diagram(const ModelSpec& spec_template,
                                             const std::vector<double>& K_grid, const SimConfig& cfg,
                                             int replicates, const ICProtocol& protocol = {},
                                             int threads = 1) {
    if (!(cfg.sigma > 0.0)) throw config_error("stochastic_diagram: sigma must be positive");
    if (replicates < 1) throw config_error("stochastic_diagram: need at least one replicate");
    if (K_grid.empty()) throw config_error("stochastic_diagram: empty K grid");
    BifurcationDiagram diag;
    diag.K_grid = K_grid;
    diag.n_ic = 1;
    diag.cells.resize(K_grid.size());
    parallel_for(K_grid.size(), threads, [&](std::size_t k) {
        const double K = K_grid[k];
        DiagramCell cell;
        cell.K = K;
        cell.k_index = static_cast<int>(k);
        cell.ic_label = "stochastic";
        cell.replicates = replicates;
        const auto ics = protocol.make(with_K(spec_template, K));
        bool have_pool = false;
        for (int rep = 0; rep < replicates; ++rep) {
            SimConfig c = cfg;
            c.ic = ics.front().state;  // near-equilibrium start
            c.k_index = static_cast<std::uint64_t>(k);
            c.replicate = static_cast<std::uint64_t>(rep);
            try {
                const RunSummary s = integrate_summary(with_K(spec_template, K), c, true);
                if (s.extinction_absorbed) {
                    ++cell.extinct_replicates;
                    continue;
                }
                if (!have_pool) {
                    cell.ext = s.ext;
                    cell.x_mean = s.x_mean;
                    cell.y_mean = s.y_mean;
                    have_pool = true;
                } else {
                    cell.ext.x_min = std::min(cell.ext.x_min, s.ext.x_min);
                    cell.ext.x_max = std::max(cell.ext.x_max, s.ext.x_max);
                    cell.ext.y_min = std::min(cell.ext.y_min, s.ext.y_min);
                    cell.ext.y_max = std::max(cell.ext.y_max, s.ext.y_max);
                }
                RunSummary tmp;
                tmp.ext = cell.ext;
                tmp.x_mean = cell.x_mean;
                tmp.y_mean = cell.y_mean;
                cell.is_cycle = classify_cycle(tmp);
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
        }
        diag.cells[k] = cell;
    });
    return diag;
}

struct SensitivityReport {
    std::vector<std::string> labels;
    std::vector<std::optional<double>> hopf;
    std::vector<std::optional<double>> lc_saddle;
    double hopf_spread_ratio = 0.0;  // max/min over responses with a Hopf
};

// Table-style comparison across responses sharing one K grid: Hopf row,
// limit-cycle-saddle row, and the spread of the Hopf locations.
inline SensitivityReport sensitivity_report(
    const std::vector<std::pair<std::string, const BifurcationDiagram*>>& diagrams) {
    if (diagrams.size() < 2)
        throw config_error("sensitivity_report: need at least two diagrams to compare");
    const auto& ref_grid = diagrams.front().second->K_grid;
    for (const auto& [label, diag] : diagrams)
        if (diag->K_grid != ref_grid)
            throw config_error("sensitivity_report: diagrams use different K grids");
    SensitivityReport rep;
    double hopf_min = 0.0, hopf_max = 0.0;
    bool any = false;
    for (const auto& [label, diag] : diagrams) {
        rep.labels.push_back(label);
        rep.hopf.push_back(diag->hopf_K);
        rep.lc_saddle.push_back(diag->lc_saddle_K);
        if (diag->hopf_K) {
            if (!any) {
                hopf_min = hopf_max = *diag->hopf_K;
                any = true;
            } else {
                hopf_min = std::min(hopf_min, *diag->hopf_K);
                hopf_max = std::max(hopf_max, *diag->hopf_K);
            }
        }
    }
    if (any && hopf_min > 0.0) rep.hopf_spread_ratio = hopf_max / hopf_min;
    return rep;
}

}  // namespace structsens
