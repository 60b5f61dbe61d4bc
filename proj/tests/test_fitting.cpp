#include <doctest.h>

#include <cmath>

#include "structsens/fitting.hpp"

using namespace structsens;

namespace {

const FunctionalResponse rm_holling{Family::holling, 3.05, 2.68};
const FunctionalResponse rm_ivlev{Family::ivlev, 1.0, 2.0};
const FitRegion full_domain{0.0, 4.0, 1000, {}};

}  // namespace

TEST_CASE("objective of the target against itself is zero") {
    CHECK(objective(Family::holling, 3.05, 2.68, rm_holling, full_domain) == 0.0);
}

TEST_CASE("objective orders candidates by fit quality") {
    const double near_opt = objective(Family::ivlev, 1.0, 2.0, rm_holling, full_domain);
    const double off = objective(Family::ivlev, 1.0, 3.0, rm_holling, full_domain);
    CHECK(near_opt > 0.0);
    CHECK(near_opt < off);
}

TEST_CASE("tabulated regional parameters sit within 5% of our optimum") {
    const FitRegion region{0.0, 0.1, 1000, {}};
    const FitResult best = fit_response(Family::ivlev, rm_holling, region);
    const double tab = objective(Family::ivlev, 0.6282, 4.8204, rm_holling, region);
    CHECK(tab <= 1.05 * best.objective);
}

TEST_CASE("non-positive parameters earn a large finite penalty") {
    const double p = objective(Family::ivlev, -1.0, 2.0, rm_holling, full_domain);
    CHECK(p >= 1e12);
    CHECK(std::isfinite(p));
}

TEST_CASE("nelder_mead finds a quadratic bowl minimum") {
    auto bowl = [](double a, double b) { return (a - 2.0) * (a - 2.0) + (b - 3.0) * (b - 3.0); };
    const auto r = nelder_mead(bowl, 1.0, 1.0);
    CHECK(r.converged);
    CHECK(r.a == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(r.b == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("nelder_mead stays positive under a penalty wall") {
    auto obj = [](double a, double b) {
        if (a <= 0.0 || b <= 0.0) return 1e12 * (1.0 + std::max(0.0, -a) + std::max(0.0, -b));
        return (a - 0.01) * (a - 0.01) + (b - 0.02) * (b - 0.02);
    };
    const auto r = nelder_mead(obj, 1.0, 1.0);
    CHECK(r.a > 0.0);
    CHECK(r.b > 0.0);
    CHECK(r.a == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("nelder_mead crosses a curved valley") {
    auto rosen = [](double a, double b) {
        return 100.0 * (b - a * a) * (b - a * a) + (1.0 - a) * (1.0 - a);
    };
    const auto r = nelder_mead(rosen, 0.5, 0.5, 1e-12, 2000);
    CHECK(r.converged);
    CHECK(r.iterations < 2000);
    CHECK(r.a == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.b == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("full-domain fits recover the published parameter pairs") {
    const FitResult h = fit_response(Family::holling, rm_ivlev, full_domain);
    CHECK(h.converged);
    CHECK(h.a == doctest::Approx(3.05).epsilon(0.02));
    CHECK(h.b == doctest::Approx(2.68).epsilon(0.02));
    const FitResult t = fit_response(Family::trig, rm_ivlev, full_domain);
    CHECK(t.a == doctest::Approx(0.99).epsilon(0.02));
    CHECK(t.b == doctest::Approx(1.48).epsilon(0.02));
}

TEST_CASE("fitting a family to itself via samples is grid-exact") {
    SampledCurve curve;
    for (int i = 0; i < 400; ++i) {
        const double x = 4.0 * i / 399.0;
        curve.x.push_back(x);
        curve.f.push_back(rm_ivlev(x));
    }
    const FitResult r = fit_response(Family::ivlev, curve, full_domain);
    CHECK(r.objective < 1e-12);
    CHECK(r.a == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(r.b == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("the fit never ends above its heuristic starting objective") {
    const auto samples = detail::samples_from_response(rm_ivlev, full_domain);
    const auto init = detail::heuristic_init(Family::holling, samples);
    const double at_init = detail::objective_on_samples(Family::holling, init[0], init[1], samples);
    const FitResult r = fit_response(Family::holling, rm_ivlev, full_domain);
    CHECK(r.objective <= at_init);
}

TEST_CASE("doubling the grid moves fitted parameters by well under half a percent") {
    FitRegion doubled = full_domain;
    doubled.n_grid = 2000;
    const FitResult a = fit_response(Family::holling, rm_ivlev, full_domain);
    const FitResult b = fit_response(Family::holling, rm_ivlev, doubled);
    CHECK(std::abs(a.a - b.a) / a.a < 0.005);
    CHECK(std::abs(a.b - b.b) / a.b < 0.005);
}

TEST_CASE("zero off-interval weights reduce a full-domain fit to the regional fit") {
    FitRegion weighted{0.0, 4.0, 1000, std::vector<double>(1000, 0.0)};
    for (int i = 0; i < 1000; ++i) {
        const double x = 4.0 * i / 999.0;
        if (x <= 0.1) weighted.weights[i] = 1.0;
    }
    const FitResult w = fit_response(Family::ivlev, rm_holling, weighted);
    const FitResult regional = fit_response(Family::ivlev, rm_holling, FitRegion{0.0, 0.1, 1000, {}});
    CHECK(w.a == doctest::Approx(regional.a).epsilon(0.02));
    CHECK(w.b == doctest::Approx(regional.b).epsilon(0.02));
}

TEST_CASE("fits are deterministic for a fixed seed") {
    FitOptions opt;
    opt.seed = 123;
    const FitResult a = fit_response(Family::holling, rm_ivlev, full_domain, opt);
    const FitResult b = fit_response(Family::holling, rm_ivlev, full_domain, opt);
    CHECK(a.a == b.a);
    CHECK(a.b == b.b);
    CHECK(a.objective == b.objective);
}

TEST_CASE("candidate equal to the fixed family is rejected") {
    CHECK_THROWS_AS(fit_response(Family::ivlev, rm_ivlev, full_domain), config_error);
}

TEST_CASE("fit regions validate their inputs") {
    CHECK_THROWS_AS(FitRegion({4.0, 0.0, 1000, {}}).validate(), config_error);
    CHECK_THROWS_AS(FitRegion({0.0, 4.0, 5, {}}).validate(), config_error);
    FitRegion bad_weights{0.0, 4.0, 100, std::vector<double>(7, 1.0)};
    CHECK_THROWS_AS(bad_weights.validate(), config_error);
    SampledCurve unsorted;
    unsorted.x = {0.0, 0.5, 0.4};
    unsorted.f = {0.0, 0.3, 0.2};
    CHECK_THROWS_AS(unsorted.validate(), config_error);
}
