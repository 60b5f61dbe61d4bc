#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace structsens {

// Error taxonomy used across the library; the CLI maps these onto exit codes.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Mat2 = std::array<std::array<double, 2>, 2>;

inline double trace(const Mat2& J) { return J[0][0] + J[1][1]; }
inline double det(const Mat2& J) { return J[0][0] * J[1][1] - J[0][1] * J[1][0]; }

// Largest real part over the eigenvalues of a 2x2 matrix (closed form).
inline double max_real_eigenvalue(const Mat2& J) {
    const double tr = trace(J);
    const double disc = tr * tr - 4.0 * det(J);
    if (disc >= 0.0) return 0.5 * (tr + std::sqrt(disc));
    return 0.5 * tr;
}

// Bisection on a bracketed sign change; returns the midpoint of the final
// bracket. Endpoints that evaluate to exactly zero are returned as-is.
template <class F>
double bisect(F&& g, double lo, double hi, double xtol, int max_iter = 200) {
    if (!(lo < hi)) throw numeric_error("bisect: inverted bracket");
    double glo = g(lo);
    if (glo == 0.0) return lo;
    double ghi = g(hi);
    if (ghi == 0.0) return hi;
    if ((glo < 0.0) == (ghi < 0.0))
        throw numeric_error("bisect: endpoints do not bracket a sign change");
    for (int i = 0; i < max_iter && (hi - lo) > xtol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm == 0.0) return mid;
        if ((gm < 0.0) == (glo < 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// All roots of g on [lo, hi]: uniform scan with n_scan intervals, every sign
// change refined by bisection to xtol. Grid nodes landing exactly on a root
// are kept once. Roots closer than 4*xtol are merged.
template <class F>
std::vector<double> scan_roots(F&& g, double lo, double hi, int n_scan, double xtol) {
    if (!(lo < hi)) throw numeric_error("scan_roots: inverted domain");
    if (n_scan < 2) throw numeric_error("scan_roots: need at least 2 scan intervals");
    std::vector<double> roots;
    const double h = (hi - lo) / n_scan;
    double xa = lo;
    double ga = g(xa);
    for (int i = 1; i <= n_scan; ++i) {
        const double xb = (i == n_scan) ? hi : lo + i * h;
        const double gb = g(xb);
        if (ga == 0.0) {
            roots.push_back(xa);
        } else if (gb != 0.0 && (ga < 0.0) != (gb < 0.0)) {
            roots.push_back(bisect(g, xa, xb, xtol));
        }
        xa = xb;
        ga = gb;
    }
    if (ga == 0.0) roots.push_back(xa);
    std::vector<double> merged;
    for (double r : roots) {
        if (merged.empty() || r - merged.back() > 4.0 * xtol) merged.push_back(r);
    }
    return merged;
}

}  // namespace structsens
