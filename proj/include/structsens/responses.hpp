#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include "structsens/numeric.hpp"

namespace structsens {

enum class Family { holling, ivlev, trig };

inline char family_initial(Family f) {
    switch (f) {
        case Family::holling: return 'H';
        case Family::ivlev: return 'I';
        case Family::trig: return 'T';
    }
    return '?';
}

inline std::string family_name(Family f) {
    switch (f) {
        case Family::holling: return "holling";
        case Family::ivlev: return "ivlev";
        case Family::trig: return "trig";
    }
    return "?";
}

inline Family family_from_name(const std::string& name) {
    if (name == "holling" || name == "H") return Family::holling;
    if (name == "ivlev" || name == "I") return Family::ivlev;
    if (name == "trig" || name == "T") return Family::trig;
    throw config_error("unknown functional response family: " + name);
}

// One of the three saturating predation curves, f(x):
//   holling  a*x / (1 + b*x)
//   ivlev    a * (1 - exp(-b*x))
//   trig     a * tanh(b*x)
// All satisfy f(0) = 0, are strictly increasing and concave on x > 0, and
// saturate (holling at a/b, the other two at a).
struct FunctionalResponse {
    Family family = Family::holling;
    double a = 1.0;
    double b = 1.0;

    void validate() const {
        if (!(a > 0.0) || !(b > 0.0))
            throw config_error("functional response requires a > 0 and b > 0");
    }

    double operator()(double x) const {
        if (x < 0.0) throw numeric_error("functional response evaluated at negative prey density");
        switch (family) {
            case Family::holling: return a * x / (1.0 + b * x);
            case Family::ivlev: return a * (1.0 - std::exp(-b * x));
            case Family::trig: return a * std::tanh(b * x);
        }
        return 0.0;
    }

    double derivative(double x) const {
        if (x < 0.0) throw numeric_error("functional response derivative at negative prey density");
        switch (family) {
            case Family::holling: {
                const double d = 1.0 + b * x;
                return a / (d * d);
            }
            case Family::ivlev: return a * b * std::exp(-b * x);
            case Family::trig: {
                const double th = std::tanh(b * x);
                return a * b * (1.0 - th * th);
            }
        }
        return 0.0;
    }

    double upper_bound() const { return family == Family::holling ? a / b : a; }
};

inline double eval_response(const FunctionalResponse& r, double x) { return r(x); }
inline double response_derivative(const FunctionalResponse& r, double x) { return r.derivative(x); }

// Prey densities where two responses of different families take equal values,
// excluding the shared root at x = 0.
struct IntersectionSet {
    Family first = Family::holling;
    Family second = Family::ivlev;
    std::vector<double> points;  // strictly increasing
};

struct IntersectOptions {
    int n_scan = 4096;      // uniform scan intervals before bisection
    double xtol = 1e-9;     // bisection tolerance in x
    double zero_skip = 0.0; // roots at or below this x are treated as the trivial (0,0) crossing
};

inline IntersectionSet find_intersections(const FunctionalResponse& r1, const FunctionalResponse& r2,
                                          double x_lo, double x_hi,
                                          const IntersectOptions& opt = {}) {
    if (r1.family == r2.family)
        throw config_error("find_intersections: responses must be from different families");
    if (x_lo < 0.0) throw config_error("find_intersections: domain must be non-negative");
    if (!(x_lo < x_hi)) throw config_error("find_intersections: inverted domain");
    r1.validate();
    r2.validate();
    auto g = [&](double x) { return r1(x) - r2(x); };
    IntersectionSet out{r1.family, r2.family, {}};
    const double skip = std::max(opt.zero_skip, opt.xtol * 8.0);
    for (double root : scan_roots(g, x_lo, x_hi, opt.n_scan, opt.xtol)) {
        if (root > skip) out.points.push_back(root);
    }
    return out;
}

// Response assembled from two families: one segment per prey density region
// (low / mid / high), switching at two of the families' intersection points.
// Named by the segment initials, e.g. "HII".
struct PiecewiseResponse {
    std::array<FunctionalResponse, 3> segments;  // low, mid, high
    double x1 = 0.0;                             // low -> mid breakpoint
    double x2 = 0.0;                             // mid -> high breakpoint
    std::string code;

    double operator()(double x) const {
        if (x < 0.0) throw numeric_error("piecewise response evaluated at negative prey density");
        return segment_at(x)(x);
    }

    double derivative(double x) const { return segment_at(x).derivative(x); }

    const FunctionalResponse& segment_at(double x) const {
        if (x < x1) return segments[0];
        if (x < x2) return segments[1];
        return segments[2];
    }

    double upper_bound() const { return segments[2].upper_bound(); }
};

inline PiecewiseResponse make_piecewise(const FunctionalResponse& low, const FunctionalResponse& mid,
                               const FunctionalResponse& high, const IntersectionSet& inter) {
    std::vector<Family> fams{low.family, mid.family, high.family};
    std::sort(fams.begin(), fams.end());
    fams.erase(std::unique(fams.begin(), fams.end()), fams.end());
    if (fams.size() != 2)
        throw config_error("make_piecewise: exactly two distinct families required");
    const bool pair_matches = (fams[0] == std::min(inter.first, inter.second)) &&
                              (fams[1] == std::max(inter.first, inter.second));
    if (!pair_matches)
        throw config_error("make_piecewise: intersection set is for a different family pair");
    if (inter.points.size() < 2)
        throw config_error("make_piecewise: need at least two non-trivial intersections");
    if (inter.points.size() > 2)
        std::cerr << "warning: " << inter.points.size()
                  << " intersections for pair; using the two smallest as breakpoints\n";
    PiecewiseResponse p;
    p.segments = {low, mid, high};
    p.x1 = inter.points[0];
    p.x2 = inter.points[1];
    p.code = {family_initial(low.family), family_initial(mid.family), family_initial(high.family)};
    return p;
}

inline double eval_piecewise(const PiecewiseResponse& p, double x) { return p(x); }

// Either response kind; models take this so piecewise sub-models drop in
// anywhere a plain response is accepted.
using Response = std::variant<FunctionalResponse, PiecewiseResponse>;

inline double eval(const Response& r, double x) {
    return std::visit([x](const auto& f) { return f(x); }, r);
}

inline double derivative(const Response& r, double x) {
    return std::visit([x](const auto& f) { return f.derivative(x); }, r);
}

inline double upper_bound(const Response& r) {
    return std::visit([](const auto& f) { return f.upper_bound(); }, r);
}

inline std::string response_label(const Response& r) {
    if (const auto* fr = std::get_if<FunctionalResponse>(&r)) return family_name(fr->family);
    return std::get<PiecewiseResponse>(r).code;
}

}  // namespace structsens
