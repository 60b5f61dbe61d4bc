#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "structsens/numeric.hpp"
#include "structsens/responses.hpp"

namespace structsens {

enum class ModelKind { rosenzweig_macarthur, leslie_gower_may };

inline std::string model_name(ModelKind k) {
    return k == ModelKind::rosenzweig_macarthur ? "rm" : "lgm";
}

struct State {
    double x = 0.0;  // prey density
    double y = 0.0;  // predator density
};

// Which predator-prey system is being run, and with what parameters.
//
//   rm:   x' = r x (1 - x/K) - f(x) y         lgm:  x' = r x (1 - x/K) - f(x) y
//         y' = f(x) y - m y                         y' = s y (1 - q y / x)
//
// r and K apply to both; m is rm-only, s and q are lgm-only.
struct ModelSpec {
    ModelKind kind = ModelKind::rosenzweig_macarthur;
    double r = 1.0;
    double K = 1.0;
    double m = 0.1;   // predator mortality (rm)
    double s = 0.0;   // predator growth rate (lgm)
    double q = 0.0;   // equilibrium density ratio (lgm)
    Response response = FunctionalResponse{};

    void validate() const {
        if (!(r > 0.0) || !(K > 0.0)) throw config_error("model requires r > 0 and K > 0");
        if (kind == ModelKind::rosenzweig_macarthur) {
            if (!(m > 0.0)) throw config_error("rm model requires m > 0");
        } else {
            if (!(s > 0.0) || !(q > 0.0)) throw config_error("lgm model requires s > 0 and q > 0");
        }
    }
};

inline ModelSpec with_K(ModelSpec spec, double K) {
    spec.K = K;
    return spec;
}

struct Derivs {
    double dx = 0.0;
    double dy = 0.0;
};

// Prey densities at or below this are treated as collapsed when evaluating
// the lgm predator equation, which is singular at x = 0.
constexpr double kPreyFloor = 1e-12;

// Right-hand side with the OU perturbation xi added to the functional
// response. xi enters wherever f(x) appears: both rm equations and the lgm
// prey equation; the lgm predator equation has no f(x) and is unchanged.
// Deterministic callers pass xi = 0, which is arithmetically a no-op.
//
// The perturbed response can go negative, but predation of absent prey cannot
// create prey, so the predation term is gated at x = 0. That makes the zero
// clamp absorbing for the prey: once a noisy trough drives x to the clamp the
// prey stays extinct and an rm predator starves at rate m.
inline Derivs vector_field_noisy(const ModelSpec& spec, const State& st, double xi) {
    const double fx = eval(spec.response, st.x) + xi;
    const double predation = st.x > 0.0 ? fx * st.y : 0.0;
    Derivs d;
    d.dx = spec.r * st.x * (1.0 - st.x / spec.K) - predation;
    if (spec.kind == ModelKind::rosenzweig_macarthur) {
        d.dy = predation - spec.m * st.y;
    } else {
        if (st.x <= kPreyFloor) {
            d.dy = -spec.s * st.y;  // predator collapse once prey is gone
        } else {
            d.dy = spec.s * st.y * (1.0 - spec.q * st.y / st.x);
        }
    }
    return d;
}

inline Derivs vector_field(const ModelSpec& spec, const State& st) {
    if (st.x < 0.0 || st.y < 0.0) throw numeric_error("vector_field: negative density");
    if (spec.kind == ModelKind::leslie_gower_may && st.x == 0.0 && st.y > 0.0)
        throw numeric_error("vector_field: lgm predator equation singular at x = 0");
    return vector_field_noisy(spec, st, 0.0);
}

inline Mat2 jacobian(const ModelSpec& spec, const State& st) {
    if (st.x < 0.0 || st.y < 0.0) throw numeric_error("jacobian: negative density");
    const double fx = eval(spec.response, st.x);
    const double dfx = derivative(spec.response, st.x);
    Mat2 J;
    J[0][0] = spec.r * (1.0 - 2.0 * st.x / spec.K) - dfx * st.y;
    J[0][1] = -fx;
    if (spec.kind == ModelKind::rosenzweig_macarthur) {
        J[1][0] = dfx * st.y;
        J[1][1] = fx - spec.m;
    } else {
        if (!(st.x > 0.0)) throw numeric_error("jacobian: lgm requires x > 0");
        J[1][0] = spec.s * spec.q * st.y * st.y / (st.x * st.x);
        J[1][1] = spec.s * (1.0 - 2.0 * spec.q * st.y / st.x);
    }
    return J;
}

// Prey density solving f(x*) = m, in closed form for the plain families and
// by bracketed bisection for piecewise responses. Empty when mortality meets
// or exceeds the saturation level.
inline std::optional<double> prey_density_at_mortality(const Response& response, double m) {
    if (const auto* fr = std::get_if<FunctionalResponse>(&response)) {
        if (m >= fr->upper_bound()) return std::nullopt;
        switch (fr->family) {
            case Family::holling: return m / (fr->a - fr->b * m);
            case Family::ivlev: return -std::log(1.0 - m / fr->a) / fr->b;
            case Family::trig: return std::atanh(m / fr->a) / fr->b;
        }
        return std::nullopt;
    }
    const auto& pw = std::get<PiecewiseResponse>(response);
    double hi = std::max(1.0, 2.0 * pw.x2);
    int grow = 0;
    while (pw(hi) <= m && grow++ < 60) hi *= 2.0;
    if (pw(hi) <= m) return std::nullopt;
    return bisect([&](double x) { return pw(x) - m; }, 0.0, hi, 1e-13 * std::max(1.0, hi));
}

// Interior steady state with both densities positive, if one exists.
//   rm:  f(x*) = m, y* = r x* (1 - x*/K) / f(x*); requires x* < K.
//   lgm: r (1 - x/K) = f(x)/q on (0, K), y* = x*/q. The left side minus the
//        right is strictly decreasing, so the root is unique.
inline std::optional<State> coexistence_equilibrium(const ModelSpec& spec) {
    spec.validate();
    if (spec.kind == ModelKind::rosenzweig_macarthur) {
        const auto xs = prey_density_at_mortality(spec.response, spec.m);
        if (!xs) return std::nullopt;
        const double x = *xs;
        if (!(x > 0.0) || !(x < spec.K)) return std::nullopt;
        const double y = spec.r * x * (1.0 - x / spec.K) / eval(spec.response, x);
        if (!(y > 0.0)) return std::nullopt;
        return State{x, y};
    }
    auto h = [&](double x) { return spec.r * (1.0 - x / spec.K) - eval(spec.response, x) / spec.q; };
    const double lo = spec.K * 1e-12;
    if (!(h(lo) > 0.0)) return std::nullopt;
    const double x = bisect(h, lo, spec.K, 1e-13 * spec.K);
    const double y = x / spec.q;
    if (!(x > 0.0) || !(y > 0.0)) return std::nullopt;
    return State{x, y};
}

struct EquilibriumSet {
    State extinction{0.0, 0.0};
    State prey_only{0.0, 0.0};
    std::optional<State> coexistence;
    bool coexistence_stable = false;
};

inline EquilibriumSet equilibria(const ModelSpec& spec) {
    EquilibriumSet eq;
    eq.prey_only = State{spec.K, 0.0};
    eq.coexistence = coexistence_equilibrium(spec);
    if (eq.coexistence)
        eq.coexistence_stable = max_real_eigenvalue(jacobian(spec, *eq.coexistence)) < 0.0;
    return eq;
}

// ---------------------------------------------------------------------------
// lgm parameter calibration.
//
// The Hopf locations of the lgm model are invariant under the rescaling
// (r, s, q) -> (lambda r, lambda s, q/lambda): substituting y = lambda*yhat
// turns the rescaled system into the original one run at speed lambda, so the
// whole deterministic bifurcation structure in x is unchanged. Three target
// Hopf values therefore pin only two combinations,
//     rho   = r*q      (sets the coexistence prey densities), and
//     sigma = s/r      (sets where the trace crosses zero),
// and the overall rate scale r must be supplied by convention. At a Hopf the
// coexistence x* solves rho (1 - x/K) = f(x) and the trace condition reads
//     s/r = (1 - 2 x*/K) - f'(x*) x* / rho  =:  g_f(rho; K),
// so matching two responses' Hopf values is one equation g_1 = g_2 in rho,
// and the third response supplies a consistency residual.
// ---------------------------------------------------------------------------

struct CalibrationResult {
    bool converged = false;
    double r = 0.0, s = 0.0, q = 0.0;
    double rho = 0.0;            // r*q
    double growth_ratio = 0.0;   // s/r
    double residual = 0.0;       // |g_T - g_I| / |g_I| at the fitted rho
    std::string message;
};

namespace detail {

// g_f(rho; K) above; quiet NaN when the nullcline root degenerates.
inline double lgm_trace_ratio(const FunctionalResponse& f, double K, double rho) {
    auto h = [&](double x) { return rho * (1.0 - x / K) - f(x); };
    const double lo = K * 1e-12;
    if (!(h(lo) > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double x = bisect(h, lo, K, 1e-13 * K);
    return (1.0 - 2.0 * x / K) - f.derivative(x) * x / rho;
}

}  // namespace detail

// Solves for (r, s, q) reproducing the three per-response Hopf carrying
// capacities. r_scale fixes the free overall rate scale discussed above.
inline CalibrationResult calibrate_lgm(const FunctionalResponse& holling, double hopf_holling,
                                       const FunctionalResponse& ivlev, double hopf_ivlev,
                                       const FunctionalResponse& trig, double hopf_trig,
                                       double r_scale) {
    CalibrationResult out;
    auto mismatch = [&](double rho) {
        return detail::lgm_trace_ratio(holling, hopf_holling, rho) -
               detail::lgm_trace_ratio(ivlev, hopf_ivlev, rho);
    };
    // log-spaced scan for a bracket, then bisection in log(rho)
    const double lo = 1.0, hi = 1e6;
    const int n = 600;
    double prev_rho = lo, prev_g = mismatch(lo);
    std::optional<double> rho_root;
    for (int i = 1; i <= n && !rho_root; ++i) {
        const double rho = lo * std::pow(hi / lo, static_cast<double>(i) / n);
        const double g = mismatch(rho);
        if (std::isfinite(prev_g) && std::isfinite(g) && (prev_g < 0.0) != (g < 0.0)) {
            const double lr = bisect([&](double t) { return mismatch(std::exp(t)); },
                                     std::log(prev_rho), std::log(rho), 1e-12);
            rho_root = std::exp(lr);
        }
        prev_rho = rho;
        prev_g = g;
    }
    if (!rho_root) {
        out.message = "no rho bracket found for the Holling/Ivlev Hopf match";
        return out;
    }
    out.rho = *rho_root;
    const double g_i = detail::lgm_trace_ratio(ivlev, hopf_ivlev, out.rho);
    const double g_t = detail::lgm_trace_ratio(trig, hopf_trig, out.rho);
    out.growth_ratio = g_i;
    out.residual = std::abs(g_t - g_i) / std::max(1e-12, std::abs(g_i));
    if (!(g_i > 0.0)) {
        out.message = "calibrated growth ratio s/r is not positive";
        return out;
    }
    if (!(out.residual < 0.05)) {
        out.message = "trig Hopf inconsistent with the fitted rho (residual " +
                      std::to_string(out.residual) + ")";
        return out;
    }
    out.r = r_scale;
    out.q = out.rho / out.r;
    out.s = out.growth_ratio * out.r;
    out.converged = true;
    return out;
}

}  // namespace structsens
