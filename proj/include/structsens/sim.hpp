#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "structsens/models.hpp"
#include "structsens/rng.hpp"

namespace structsens {

struct SimConfig {
    double dt = 1e-3;
    double t_end = 2000.0;
    double transient_fraction = 0.5;
    State ic{0.5, 0.5};
    std::uint64_t seed = 0;   // stochastic runs only
    double sigma = 0.0;       // OU noise amplitude; 0 = deterministic
    std::uint64_t k_index = 0;    // stream derivation for sweeps
    std::uint64_t replicate = 0;

    void validate() const {
        if (!(dt > 0.0)) throw config_error("sim requires dt > 0");
        if (!(t_end > dt)) throw config_error("sim requires t_end > dt");
        if (!(transient_fraction >= 0.0) || !(transient_fraction < 1.0))
            throw config_error("sim requires 0 <= transient_fraction < 1");
        if (sigma < 0.0) throw config_error("sim requires sigma >= 0");
        if (ic.x < 0.0 || ic.y < 0.0) throw config_error("sim initial state must be non-negative");
    }
};

struct Trajectory {
    std::vector<double> t;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> xi;   // OU path; empty for deterministic runs
    long clamp_events = 0;
};

struct Extrema {
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;
};

// Post-transient summary produced without materialising the trajectory;
// sweeps integrate thousands of cells and only need this.
struct RunSummary {
    Extrema ext;
    double x_mean = 0.0, y_mean = 0.0;  // post-transient means, for the cycle threshold
    long clamp_events = 0;
    bool extinction_absorbed = false;   // prey at the zero clamp or predator decayed away
    State final_state;
    // Prey oscillation peaks in the post-transient window, measured as the
    // excess over a reference level (the coexistence prey density when known).
    // A trajectory sitting on a cycle repeats its peaks almost exactly, while
    // any decaying spiral shrinks peak to peak; the last two peaks plus the
    // whole-window trend separate the two.
    int peak_count = 0;
    double first_peak_excess = 0.0;
    double last_peak_excess = 0.0;
    double prev_peak_excess = 0.0;  // the peak before the last one
};

// Every deterministic/stochastic integration bumps this; the report pipeline
// asserts it performs exactly the advertised number of runs.
inline std::atomic<long>& integration_counter() {
    static std::atomic<long> counter{0};
    return counter;
}

namespace detail {

// Forward Euler (Euler-Maruyama for the OU component). The observer sees the
// initial state and every step: observer(index, t, state, xi). Densities are
// clamped at zero from below; the noise path is never clamped. A run with
// sigma = 0 follows the identical arithmetic path as Stochastic = false since
// xi stays exactly 0.0 throughout.
template <bool Stochastic, class Observer>
long euler_run(const ModelSpec& spec, const SimConfig& cfg, Observer&& observe) {
    spec.validate();
    cfg.validate();
    integration_counter().fetch_add(1, std::memory_order_relaxed);

    const long n_steps = static_cast<long>(std::llround(cfg.t_end / cfg.dt));
    if (n_steps < 1) throw config_error("sim horizon shorter than one step");
    const double sqrt_dt = std::sqrt(cfg.dt);
    RngStream rng(cfg.seed, cfg.k_index, cfg.replicate);

    State st = cfg.ic;
    double xi = 0.0;
    long clamps = 0;
    observe(0L, 0.0, st, xi);
    for (long i = 1; i <= n_steps; ++i) {
        if constexpr (Stochastic) {
            xi += -xi * cfg.dt + cfg.sigma * sqrt_dt * rng.next_gaussian();
        }
        const Derivs d = vector_field_noisy(spec, st, xi);
        st.x += cfg.dt * d.dx;
        st.y += cfg.dt * d.dy;
        // finiteness is checked before clamping so an overflow cannot hide
        // behind the non-negativity clamp
        if (!std::isfinite(st.x) || !std::isfinite(st.y))
            throw numeric_error("integration produced a non-finite state at step " +
                                std::to_string(i));
        if (st.x < 0.0) {
            st.x = 0.0;
            ++clamps;
        }
        if (st.y < 0.0) {
            st.y = 0.0;
            ++clamps;
        }
        observe(i, i * cfg.dt, st, xi);
    }
    return clamps;
}

struct ExtremaAccumulator {
    long first_index = 0;
    double x_ref = std::numeric_limits<double>::quiet_NaN();
    long count = 0;
    RunSummary sum;
    double prev1 = 0.0, prev2 = 0.0;  // last two prey values, for peak detection

    void operator()(long i, double, const State& st, double) {
        if (i < first_index) return;
        if (count == 0) {
            sum.ext = Extrema{st.x, st.x, st.y, st.y};
        } else {
            sum.ext.x_min = std::min(sum.ext.x_min, st.x);
            sum.ext.x_max = std::max(sum.ext.x_max, st.x);
            sum.ext.y_min = std::min(sum.ext.y_min, st.y);
            sum.ext.y_max = std::max(sum.ext.y_max, st.y);
        }
        if (count >= 2 && prev1 > prev2 && prev1 > st.x && std::isfinite(x_ref)) {
            const double excess = prev1 - x_ref;
            // ignore numerical ripple around the reference level
            if (excess > 1e-9 * std::max(1.0, std::abs(x_ref))) {
                if (sum.peak_count == 0) sum.first_peak_excess = excess;
                sum.prev_peak_excess = sum.last_peak_excess;
                sum.last_peak_excess = excess;
                ++sum.peak_count;
            }
        }
        prev2 = prev1;
        prev1 = st.x;
        sum.x_mean += st.x;
        sum.y_mean += st.y;
        sum.final_state = st;
        ++count;
    }
};

inline long transient_cut_index(long n_total, double fraction) {
    return static_cast<long>(std::floor(fraction * static_cast<double>(n_total)));
}

}  // namespace detail

inline Trajectory integrate_deterministic(const ModelSpec& spec, const SimConfig& cfg) {
    Trajectory tr;
    const long n = static_cast<long>(std::llround(cfg.t_end / cfg.dt));
    tr.t.reserve(n + 1);
    tr.x.reserve(n + 1);
    tr.y.reserve(n + 1);
    tr.clamp_events = detail::euler_run<false>(spec, cfg, [&](long, double t, const State& st, double) {
        tr.t.push_back(t);
        tr.x.push_back(st.x);
        tr.y.push_back(st.y);
    });
    return tr;
}

// sigma = 0 is allowed and follows the deterministic arithmetic exactly (the
// OU path stays identically zero), so the two integrators agree bitwise.
inline Trajectory integrate_stochastic(const ModelSpec& spec, const SimConfig& cfg) {
    Trajectory tr;
    const long n = static_cast<long>(std::llround(cfg.t_end / cfg.dt));
    tr.t.reserve(n + 1);
    tr.x.reserve(n + 1);
    tr.y.reserve(n + 1);
    tr.xi.reserve(n + 1);
    tr.clamp_events = detail::euler_run<true>(spec, cfg, [&](long, double t, const State& st, double xi) {
        tr.t.push_back(t);
        tr.x.push_back(st.x);
        tr.y.push_back(st.y);
        tr.xi.push_back(xi);
    });
    return tr;
}

inline Extrema post_transient_extrema(const Trajectory& tr, double transient_fraction) {
    if (tr.t.empty()) throw numeric_error("post_transient_extrema: empty trajectory");
    const long n = static_cast<long>(tr.t.size());
    const long start = detail::transient_cut_index(n - 1, transient_fraction);
    if (start >= n) throw numeric_error("post_transient_extrema: empty post-transient window");
    Extrema e{tr.x[start], tr.x[start], tr.y[start], tr.y[start]};
    for (long i = start + 1; i < n; ++i) {
        e.x_min = std::min(e.x_min, tr.x[i]);
        e.x_max = std::max(e.x_max, tr.x[i]);
        e.y_min = std::min(e.y_min, tr.y[i]);
        e.y_max = std::max(e.y_max, tr.y[i]);
    }
    return e;
}

// One integration reduced to its post-transient summary. stochastic selects
// the Euler-Maruyama path; the observer arithmetic is shared either way.
// x_ref, when finite, is the reference prey level for peak-excess tracking.
inline RunSummary integrate_summary(const ModelSpec& spec, const SimConfig& cfg, bool stochastic,
                                    double x_ref = std::numeric_limits<double>::quiet_NaN()) {
    const long n = static_cast<long>(std::llround(cfg.t_end / cfg.dt));
    detail::ExtremaAccumulator acc;
    acc.first_index = detail::transient_cut_index(n, cfg.transient_fraction);
    acc.x_ref = x_ref;
    long clamps = stochastic ? detail::euler_run<true>(spec, cfg, acc)
                             : detail::euler_run<false>(spec, cfg, acc);
    RunSummary out = acc.sum;
    out.clamp_events = clamps;
    if (acc.count > 0) {
        out.x_mean /= static_cast<double>(acc.count);
        out.y_mean /= static_cast<double>(acc.count);
    }
    out.extinction_absorbed = out.final_state.x == 0.0 || out.final_state.y <= 1e-10;
    return out;
}

}  // namespace structsens
