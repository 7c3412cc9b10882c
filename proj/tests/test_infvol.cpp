#include <doctest.h>

#include <cmath>
#include <numbers>

#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>

#include "membrane/infvol.hpp"

using namespace membrane;
using namespace membrane::infvol;

namespace {

constexpr double pi = std::numbers::pi;

struct BesselArgs {
    std::vector<int> x;
};

double bessel_integrand(double t, void* p) {
    const auto& x = static_cast<BesselArgs*>(p)->x;
    const double d = static_cast<double>(x.size());
    double v = t;
    for (int xi : x) v *= gsl_sf_bessel_In_scaled(std::abs(xi), t / d);
    return v;
}

// G(0,x) = ∫₀^∞ t P(X_t = x) dt for the rate-one continuous-time walk, whose
// marginals are products of scaled modified Bessel functions.
double bessel_green(std::vector<int> x) {
    BesselArgs args{std::move(x)};
    const int d = static_cast<int>(args.x.size());
    gsl_integration_workspace* w = gsl_integration_workspace_alloc(10000);
    gsl_function F{&bessel_integrand, &args};
    double total = 0.0, a = 0.0, res = 0.0, err = 0.0;
    const double T = 1e7;
    for (double b : {10.0, 100.0, 1e3, 1e4, 1e5, 1e6, T}) {
        gsl_integration_qag(&F, a, b, 1e-14, 1e-12, 10000, GSL_INTEG_GAUSS61, w, &res, &err);
        total += res;
        a = b;
    }
    gsl_integration_workspace_free(w);
    // local CLT tail: t (d/(2πt))^{d/2}, integrated beyond T
    double r2 = 0.0;
    for (int v : args.x) r2 += v * v;
    total += std::pow(d / (2.0 * pi), d / 2.0) * 2.0 / std::sqrt(T) * (1.0 - d * r2 / (6.0 * T));
    return total;
}

}  // namespace

TEST_CASE("symbol and Gauss rule") {
    CHECK(mu(std::vector<double>(5, 0.0)) == 0.0);
    CHECK(mu(std::vector<double>(5, pi)) == doctest::Approx(2.0));
    CHECK(mu(std::vector<double>{1e-9, 0.0}) == doctest::Approx(0.25e-18).epsilon(1e-12));
    for (int n : {1, 4, 10, 15}) {
        const auto& g = gauss_legendre(n);
        double w = 0.0, top = 0.0;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            w += g.weights[i];
            top += g.weights[i] * std::pow(g.nodes[i], 2 * n - 2);
        }
        CHECK(w == doctest::Approx(2.0));
        CHECK(top == doctest::Approx(2.0 / (2 * n - 1)));
    }
}

TEST_CASE("inverse quartic over the unit cube") {
    // Homogeneity of degree −4 turns the integral into d/(d−4) ∫_{[0,1]^{d−1}} (1+|v|²)^{-2} dv.
    const auto& g = gauss_legendre(24);
    double face = 0.0;
    for (std::size_t a = 0; a < g.nodes.size(); ++a)
        for (std::size_t b = 0; b < g.nodes.size(); ++b)
            for (std::size_t c = 0; c < g.nodes.size(); ++c)
                for (std::size_t e = 0; e < g.nodes.size(); ++e) {
                    const double v[4] = {0.5 * (g.nodes[a] + 1), 0.5 * (g.nodes[b] + 1), 0.5 * (g.nodes[c] + 1),
                                         0.5 * (g.nodes[e] + 1)};
                    const double r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3];
                    face += g.weights[a] * g.weights[b] * g.weights[c] * g.weights[e] / 16.0 / ((1 + r2) * (1 + r2));
                }
    CHECK(unit_cube_inverse_quartic(5) == doctest::Approx(5.0 * face).epsilon(1e-10));
}

TEST_CASE("Fourier covariance agrees with the Bessel representation") {
    for (auto x : std::vector<std::vector<int>>{{0, 0, 0, 0, 0}, {1, 0, 0, 0, 0}, {2, 1, 0, 0, 0}}) {
        auto e = green_infinite_fourier(x);
        CHECK(e.error < 1e-8);
        CHECK(std::abs(e.value - bessel_green(x)) <= 1e-8 + e.error);
    }
    // the two-point form only depends on the difference
    auto a = green_infinite_fourier(std::vector<int>{3, 1, 0, 0, 0}, std::vector<int>{2, 1, 0, 0, 0});
    auto b = green_infinite_fourier(std::vector<int>{1, 0, 0, 0, 0});
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(green_infinite_fourier(std::vector<int>{0, 0, 0, 0}), doctest::Contains("diverges"), DomainError);
}

TEST_CASE("serial and parallel quadrature agree") {
    QuadraturePlan plan;
    plan.depth = 6;
    plan.base_nodes = 6;
    SeparableWeight w;
    w.factor = [](int, double t) { return std::cos(1.0 * t); };
    w.extra_nodes = [](int, double a, double b) { return static_cast<int>(std::ceil(0.8 * (b - a))); };
    w.value_at_origin = 1.0;
    w.curvature = 0.5;
    plan.exec = kernels::Execution::Serial;
    const double s = singular_cube_sum(5, w, plan);
    plan.exec = kernels::Execution::Parallel;
    const double p = singular_cube_sum(5, w, plan);
    CHECK(p == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("walk Monte Carlo: reproducible, and consistent with the Fourier side") {
    WalkConfig cfg;
    cfg.walks = 40000;
    cfg.batch_size = 5000;
    cfg.max_steps = 60;
    cfg.radius = 1;
    cfg.seed = 12;
    cfg.tail_tolerance = 1.0;
    auto s = walk_estimate(cfg, kernels::Execution::Serial);
    auto p = walk_estimate(cfg, kernels::Execution::Parallel);
    CHECK(s.mean == p.mean);
    CHECK(s.return_frequency == p.return_frequency);
    CHECK(s.targets() == 243);
    CHECK(s.return_frequency[0] == 1.0);
    CHECK(s.return_frequency[1] == 0.0);
    // a return after two steps: 1/(2d)
    CHECK(s.return_frequency[2] == doctest::Approx(0.1).epsilon(0.05));
    const std::vector<int> origin(5, 0);
    const auto k = s.target_index(origin);
    CHECK(s.target(k) == origin);
    auto f = green_infinite_fourier(origin);
    CHECK(std::abs(f.value - s.mean[k]) <= 3 * s.std_error[k] + f.error + s.tail_bound);
    cfg.tail_tolerance = 1e-6;
    CHECK_THROWS_AS(walk_estimate(cfg), NumericalError);
}

TEST_CASE("walk tail bound") {
    double direct = 0.0;
    for (long m = 201; m <= 2000000; ++m) direct += (m + 1.0) * std::pow(static_cast<double>(m), -2.5);
    // remainder beyond the cutoff ∫ m^{-1.5} + m^{-2.5}
    const double M = 2000000.5;
    direct += 2.0 / std::sqrt(M) + 2.0 / 3.0 * std::pow(M, -1.5);
    CHECK(walk_tail_bound(5, 200, 1.0) == doctest::Approx(direct).epsilon(1e-6));
    CHECK(walk_tail_bound(5, 200, 0.5) == doctest::Approx(0.5 * direct).epsilon(1e-6));
}

TEST_CASE("Gaussian test function and its transform") {
    auto f = gaussian_test(5, 0.7, 2.0);
    std::vector<double> theta{0.3, -1.1, 2.0, 0.0, 0.5};
    // separable numerical transform, trapezoid rule (spectrally accurate for Gaussians)
    double numeric = f.amplitude;
    for (double t : theta) {
        double acc = 0.0;
        const double step = 0.005;
        for (int k = -8000; k <= 8000; ++k) {
            const double x = k * step;
            acc += std::exp(-x * x / (2 * 0.49)) * std::cos(t * x) * step;
        }
        numeric *= acc / std::sqrt(2 * pi);
    }
    CHECK(f.transform(theta) == doctest::Approx(numeric).epsilon(1e-12));
    std::vector<double> x{0.1, 0.2, -0.3, 0.0, 1.0};
    CHECK(f(x) == doctest::Approx(2.0 * std::exp(-(0.01 + 0.04 + 0.09 + 1.0) / (2 * 0.49))));
    auto g = f.scaled(2.0);
    CHECK(g.amplitude == doctest::Approx(4.0));
    CHECK(g.transform(theta) == doctest::Approx(2.0 * f.transform(theta)));
    CHECK_THROWS_AS(gaussian_test(5, -1.0), DomainError);
}

TEST_CASE("limit norm: closed form and quadrature") {
    auto f = gaussian_test(5);
    CHECK(inv_laplacian_norm(f) == doctest::Approx(4.0 * std::pow(pi, 2.5) / 3.0).epsilon(1e-12));
    CHECK(inv_laplacian_norm_numeric(f) == doctest::Approx(inv_laplacian_norm(f)).epsilon(1e-10));
    auto g = gaussian_test(7, 0.5, 3.0);
    CHECK(inv_laplacian_norm_numeric(g) == doctest::Approx(inv_laplacian_norm(g)).epsilon(1e-10));
    CHECK_THROWS_AS(scaling_variance(gaussian_test(4), 8), DomainError);
    CHECK_THROWS_AS(scaling_variance(f, 1), DomainError);
}

TEST_CASE("Riemann sum error is the Poisson aliasing sum") {
    // d=1, N=1: error = Σ_{k≠0} f̂(θ + 2πk) for the Gaussian
    auto f = gaussian_test(1);
    for (double t : {0.0, 1.0, 2.5}) {
        double alias = 0.0;
        for (int k = -20; k <= 20; ++k)
            if (k != 0) alias += std::exp(-std::pow(t + 2 * pi * k, 2) / 2.0);
        CHECK(riemann_sum_error(f, std::vector<double>{t}, 1) == doctest::Approx(alias).epsilon(1e-6));
    }
    CHECK_THROWS_AS(riemann_sum_error(f, std::vector<double>{0.0, 0.0}, 2), DomainError);
}

TEST_CASE("sine bound") {
    auto r = sine_bound_check(5, {2, 4, 8, 16}, 20000, 3);
    CHECK(r.samples == 80000);
    CHECK(r.lower_violations == 0);
    // x² − sin²x ≤ x⁴/3 and sin²x ≥ 4x²/π² give C ≤ π²/12
    CHECK(r.c_hat >= 0.0);
    CHECK(r.c_hat <= pi * pi / 12.0);
}

TEST_CASE("eta2 trend reports positive ratios") {
    auto t = eta2_trend(5, {2, 4});
    REQUIRE(t.rows.size() == 2);
    for (const auto& row : t.rows) {
        CHECK(row.ratio > 0.0);
        CHECK(row.ratio == doctest::Approx(row.green.value * row.radius));
    }
    CHECK(std::isfinite(t.spread));
    CHECK_THROWS_AS(eta2_trend(5, {4, 2}), DomainError);
}
