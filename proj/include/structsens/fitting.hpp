#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "structsens/numeric.hpp"
#include "structsens/responses.hpp"
#include "structsens/rng.hpp"

namespace structsens {

// Prey-density window the least-squares fit runs over. Samples are a uniform
// grid of n_grid points (endpoints included); weights, when present, are
// per-sample.
struct FitRegion {
    double x_lo = 0.0;
    double x_hi = 4.0;
    int n_grid = 1000;
    std::vector<double> weights;

    void validate() const {
        if (!(x_lo >= 0.0) || !(x_lo < x_hi))
            throw config_error("fit region requires 0 <= x_lo < x_hi");
        if (n_grid < 10) throw config_error("fit region requires n_grid >= 10");
        if (!weights.empty()) {
            if (static_cast<int>(weights.size()) != n_grid)
                throw config_error("fit region weights length must equal n_grid");
            for (double w : weights)
                if (!(w >= 0.0)) throw config_error("fit region weights must be non-negative");
        }
    }
};

// Observed predation-rate samples, sorted by prey density.
struct SampledCurve {
    std::vector<double> x;
    std::vector<double> f;
    std::vector<double> w;  // optional, same length as x when present

    void validate() const {
        if (x.size() != f.size() || (!w.empty() && w.size() != x.size()))
            throw config_error("sampled curve columns must have equal length");
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] < 0.0) throw config_error("sampled curve requires non-negative prey density");
            if (i > 0 && !(x[i] > x[i - 1]))
                throw config_error("sampled curve prey densities must strictly increase");
        }
    }
};

struct FitResult {
    Family family = Family::holling;
    double a = 0.0, b = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

struct FitSamples {
    std::vector<double> x, target, w;
};

inline FitSamples samples_from_response(const FunctionalResponse& target, const FitRegion& region) {
    region.validate();
    target.validate();
    FitSamples s;
    s.x.resize(region.n_grid);
    s.target.resize(region.n_grid);
    s.w.resize(region.n_grid, 1.0);
    const double h = (region.x_hi - region.x_lo) / (region.n_grid - 1);
    for (int i = 0; i < region.n_grid; ++i) {
        s.x[i] = region.x_lo + i * h;
        s.target[i] = target(s.x[i]);
        if (!region.weights.empty()) s.w[i] = region.weights[i];
    }
    return s;
}

inline FitSamples samples_from_curve(const SampledCurve& curve, const FitRegion& region) {
    curve.validate();
    if (!(region.x_lo >= 0.0) || !(region.x_lo < region.x_hi))
        throw config_error("fit region requires 0 <= x_lo < x_hi");
    FitSamples s;
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
        if (curve.x[i] < region.x_lo || curve.x[i] > region.x_hi) continue;
        s.x.push_back(curve.x[i]);
        s.target.push_back(curve.f[i]);
        s.w.push_back(curve.w.empty() ? 1.0 : curve.w[i]);
    }
    if (s.x.empty()) throw config_error("no samples fall inside the fit region");
    return s;
}

// Weighted sum of squared residuals; non-positive parameters get a large
// finite penalty that grows with the violation so the simplex is pushed back
// into the feasible quadrant.
inline double objective_on_samples(Family family, double a, double b, const FitSamples& s) {
    if (!(a > 0.0) || !(b > 0.0))
        return 1e12 * (1.0 + std::max(0.0, -a) + std::max(0.0, -b));
    const FunctionalResponse cand{family, a, b};
    double sum = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double res = cand(s.x[i]) - s.target[i];
        sum += s.w[i] * res * res;
    }
    return sum;
}

}  // namespace detail

inline double objective(Family candidate, double a, double b, const FunctionalResponse& target,
                        const FitRegion& region) {
    return detail::objective_on_samples(candidate, a, b,
                                        detail::samples_from_response(target, region));
}

inline double objective(Family candidate, double a, double b, const SampledCurve& target,
                        const FitRegion& region) {
    return detail::objective_on_samples(candidate, a, b,
                                        detail::samples_from_curve(target, region));
}

struct NelderMeadResult {
    double a = 0.0, b = 0.0;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Standard two-parameter Nelder-Mead simplex: reflection 1, expansion 2,
// contraction 0.5, shrink 0.5. Stops when the simplex objective spread falls
// below tol (with a relative epsilon guard) or max_iter is reached.
template <class Obj>
NelderMeadResult nelder_mead(Obj&& obj, double a0, double b0, double tol = 1e-12,
                             int max_iter = 5000) {
    if (!(tol > 0.0)) throw config_error("nelder_mead requires tol > 0");
    using Vertex = std::array<double, 2>;
    std::array<Vertex, 3> v{Vertex{a0, b0},
                            Vertex{a0 * 1.05 + 1e-4, b0},
                            Vertex{a0, b0 * 1.05 + 1e-4}};
    std::array<double, 3> fv{obj(v[0][0], v[0][1]), obj(v[1][0], v[1][1]), obj(v[2][0], v[2][1])};

    auto order = [&] {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int i, int j) { return fv[i] < fv[j]; });
        std::array<Vertex, 3> v2{v[idx[0]], v[idx[1]], v[idx[2]]};
        std::array<double, 3> f2{fv[idx[0]], fv[idx[1]], fv[idx[2]]};
        v = v2;
        fv = f2;
    };

    NelderMeadResult out;
    int it = 0;
    for (; it < max_iter; ++it) {
        order();
        if (fv[2] - fv[0] <= tol + 1e-12 * std::abs(fv[0])) {
            out.converged = true;
            break;
        }
        const Vertex centroid{0.5 * (v[0][0] + v[1][0]), 0.5 * (v[0][1] + v[1][1])};
        auto point = [&](double coef) {
            return Vertex{centroid[0] + coef * (centroid[0] - v[2][0]),
                          centroid[1] + coef * (centroid[1] - v[2][1])};
        };
        const Vertex refl = point(1.0);
        const double f_refl = obj(refl[0], refl[1]);
        if (f_refl < fv[0]) {
            const Vertex exp_pt = point(2.0);
            const double f_exp = obj(exp_pt[0], exp_pt[1]);
            if (f_exp < f_refl) {
                v[2] = exp_pt;
                fv[2] = f_exp;
            } else {
                v[2] = refl;
                fv[2] = f_refl;
            }
            continue;
        }
        if (f_refl < fv[1]) {
            v[2] = refl;
            fv[2] = f_refl;
            continue;
        }
        const bool outside = f_refl < fv[2];
        const Vertex contr = outside ? point(0.5) : point(-0.5);
        const double f_contr = obj(contr[0], contr[1]);
        if (f_contr < (outside ? f_refl : fv[2])) {
            v[2] = contr;
            fv[2] = f_contr;
            continue;
        }
        for (int i = 1; i < 3; ++i) {  // shrink toward the best vertex
            v[i] = Vertex{v[0][0] + 0.5 * (v[i][0] - v[0][0]), v[0][1] + 0.5 * (v[i][1] - v[0][1])};
            fv[i] = obj(v[i][0], v[i][1]);
        }
    }
    order();
    out.a = v[0][0];
    out.b = v[0][1];
    out.value = fv[0];
    out.iterations = it;
    return out;
}

struct FitOptions {
    int restarts = 8;
    double tol = 1e-12;
    int max_iter = 5000;
    std::uint64_t seed = 17;
};

namespace detail {

// Heuristic initial point: the curve's own scales. b0 is the reciprocal of
// the prey density where the target reaches half its maximum; a0 matches the
// saturation level (a/b for Holling, a otherwise).
inline std::array<double, 2> heuristic_init(Family family, const FitSamples& s) {
    double f_max = 0.0, x_max = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        f_max = std::max(f_max, s.target[i]);
        x_max = std::max(x_max, s.x[i]);
    }
    if (!(f_max > 0.0)) f_max = 1.0;
    double x_half = 0.5 * x_max;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (s.target[i] >= 0.5 * f_max) {
            x_half = std::max(s.x[i], 1e-6 * std::max(x_max, 1.0));
            break;
        }
    }
    const double b0 = 1.0 / x_half;
    const double a0 = family == Family::holling ? f_max * b0 : f_max;
    return {a0, b0};
}

inline FitResult fit_on_samples(Family family, const FitSamples& samples, const FitOptions& opt) {
    auto obj = [&](double a, double b) { return objective_on_samples(family, a, b, samples); };
    const auto init = heuristic_init(family, samples);
    RngStream rng(opt.seed, static_cast<std::uint64_t>(family), 0);
    FitResult best;
    bool have_best = false;
    for (int k = 0; k < std::max(1, opt.restarts); ++k) {
        double a0 = init[0], b0 = init[1];
        if (k > 0) {  // log-uniform jitter factor in [0.5, 2] per parameter
            a0 *= std::exp2(rng.next_double() * 2.0 - 1.0);
            b0 *= std::exp2(rng.next_double() * 2.0 - 1.0);
        }
        const NelderMeadResult r = nelder_mead(obj, a0, b0, opt.tol, opt.max_iter);
        if (!have_best || r.value < best.objective) {
            best.family = family;
            best.a = r.a;
            best.b = r.b;
            best.objective = r.value;
            best.iterations = r.iterations;
            best.converged = r.converged;
            have_best = true;
        }
    }
    return best;
}

}  // namespace detail

// Best of `restarts` Nelder-Mead runs from jittered starts; deterministic for
// a given seed. Restart 0 uses the plain heuristic initial point.
inline FitResult fit_response(Family candidate, const FunctionalResponse& target,
                              const FitRegion& region, const FitOptions& opt = {}) {
    if (candidate == target.family)
        throw config_error("fit_response: candidate must differ from the fixed response family");
    return detail::fit_on_samples(candidate, detail::samples_from_response(target, region), opt);
}

inline FitResult fit_response(Family candidate, const SampledCurve& target, const FitRegion& region,
                              const FitOptions& opt = {}) {
    return detail::fit_on_samples(candidate, detail::samples_from_curve(target, region), opt);
}

}  // namespace structsens
