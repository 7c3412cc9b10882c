#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "membrane/spectral.hpp"
#include "membrane/thomee.hpp"

using namespace membrane;
using namespace membrane::spectral;

namespace {

lattice::GridDomain unit_box(int d, int N) {
    return lattice::classify(lattice::Shape::box(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)), 1.0 / N);
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

TEST_CASE("dense eigenpairs match an independent eigensolve of L_h") {
    auto g = unit_box(2, 14);
    auto P = green::assemble_precision(g);
    auto solver = green::make_precision_solver(P);
    auto B = eigendecompose(P, *solver, 12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(thomee::assemble_lh(g)));
    for (int j = 0; j < 12; ++j) CHECK(B.values[j] == doctest::Approx(es.eigenvalues()[j]).epsilon(1e-10));
    for (int j = 1; j < 12; ++j) CHECK(B.values[j] >= B.values[j - 1]);
    CHECK(B.values[0] > 0.0);
    CHECK(B.orthonormality_error <= 1e-8);
    CHECK(B.max_residual <= 1e-6 * B.values[11]);
    CHECK(B.inner(B.vectors.col(3), B.vectors.col(3)) == doctest::Approx(1.0));
}

TEST_CASE("shift-invert Lanczos agrees with the dense path") {
    auto g = unit_box(2, 24);
    auto P = green::assemble_precision(g);
    auto solver = green::make_precision_solver(P);
    auto dense = eigendecompose(P, *solver, 20);
    EigenOptions opt;
    opt.dense_cap = 0;
    auto lz = eigendecompose(P, *solver, 20, opt);
    CHECK(lz.method.find("lanczos") != std::string::npos);
    for (int j = 0; j < 20; ++j) CHECK(lz.values[j] == doctest::Approx(dense.values[j]).epsilon(1e-9));
    CHECK(lz.orthonormality_error <= 1e-8);
    CHECK(lz.max_residual <= 1e-6 * lz.values[19]);
    CHECK_THROWS_AS(eigendecompose(P, *solver, 0), DomainError);
}

TEST_CASE("Lanczos on a diagonal operator") {
    const std::size_t n = 300;
    Eigen::VectorXd diag(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) diag[static_cast<Eigen::Index>(i)] = 1.0 / (1.0 + static_cast<double>(i));
    auto r = lanczos_largest([&](const Eigen::VectorXd& x) { return Eigen::VectorXd(diag.cwiseProduct(x)); }, n, 5, 1e-12, 3, 6);
    for (int j = 0; j < 5; ++j) CHECK(r.values[j] == doctest::Approx(1.0 / (1 + j)).epsilon(1e-10));
}

TEST_CASE("Weyl fit on synthetic spectra") {
    std::vector<double> v(100);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = 3.0 * std::pow(j + 1.0, 2.0);
    CHECK(weyl_fit(v) == doctest::Approx(2.0));
    CHECK(weyl_fit(v, 5, 50) == doctest::Approx(2.0));
    CHECK(weyl_prefactor(v, 2, 10, 90) == doctest::Approx(3.0));
    CHECK_THROWS_AS(weyl_fit(std::span<const double>(v.data(), 40)), DomainError);
}

TEST_CASE("Sobolev thresholds use integer ceilings") {
    for (int d = 2; d <= 12; ++d) {
        auto p = s_threshold(d);
        const int l0 = ceil_div(d / 2 + 1, 4), l2 = ceil_div(d / 2 + 3, 4), l5 = ceil_div(d / 2 + 6, 4);
        CHECK(p.l0 == l0);
        CHECK(p.l2 == l2);
        CHECK(p.l5 == l5);
        CHECK(p.s_threshold == doctest::Approx(d / 2.0 + 2.0 * (l0 + l5 - 1)));
    }
    CHECK_THROWS_AS(s_threshold(1), DomainError);
}

TEST_CASE("H^-s norms and Wiener partial sums") {
    std::vector<double> lam{2.0, 5.0, 9.0};
    CHECK(hs_norm(std::vector<double>{1, 0, 0}, lam, 3.0) == doctest::Approx(std::pow(2.0, -1.5)));
    CHECK(hs_norm(std::vector<double>{1, 2, 3}, lam, 0.0) == doctest::Approx(14.0));
    CHECK(hs_norm(std::vector<double>{0, 1, 0}, lam, 2.0, 1) == doctest::Approx(5.0));
    auto zero = wiener_partial_sums(lam, std::vector<double>{0, 0, 0}, 1.0);
    for (double z : zero) CHECK(z == 0.0);
    auto s = wiener_partial_sums(lam, std::vector<double>{1, -2, 0.5}, 2.0);
    CHECK(s[0] == doctest::Approx(1.0 / 4.0));
    CHECK(s[2] == doctest::Approx(0.25 + 4.0 / 25.0 + 0.25 / 81.0));
    CHECK(std::is_sorted(s.begin(), s.end()));
}

TEST_CASE("Wiener report follows the expected increments") {
    std::vector<double> lam(200);
    for (std::size_t j = 0; j < lam.size(); ++j) lam[j] = std::pow(j + 1.0, 0.8);
    auto r = wiener_convergence_report(lam, 1.0, 4000, {50, 100, 200}, 4);
    // E ξ² = 1, so the expected increment ratio is a ratio of deterministic sums
    double a = 0.0, b = 0.0;
    for (int j = 51; j <= 100; ++j) a += std::pow(j, -1.2);
    for (int j = 101; j <= 200; ++j) b += std::pow(j, -1.2);
    CHECK(r.increment_ratios[0] == doctest::Approx(b / a).epsilon(0.05));
    CHECK(r.nondecreasing);
    auto c = wiener_convergence_report(lam, -2.0, 200, {50, 100, 200}, 4);
    CHECK(c.increment_ratios[0] > 1.5);
    CHECK_THROWS_AS(wiener_convergence_report(lam, 1.0, 10, {50, 400}, 4), DomainError);
}

TEST_CASE("pairing variance two ways and the norm identity") {
    auto g = unit_box(2, 10);
    auto P = green::assemble_precision(g);
    auto solver = green::make_precision_solver(P);
    auto table = green::green_full(P, *solver);
    std::vector<double> f(g.interior_size());
    for (std::size_t r = 0; r < f.size(); ++r) {
        auto x = g.position(g.interior_point(r));
        f[r] = std::sin(std::numbers::pi * x[0]) * (1.0 + x[1]);
    }
    const double a = pairing_variance(table, f), b = pairing_variance(P, *solver, f);
    CHECK(a == doctest::Approx(b).epsilon(1e-10));
    // direct formula κ² h^{d+4} fᵀGf
    Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(f.size()));
    CHECK(a == doctest::Approx(std::pow(0.1, 6) / 16.0 * fv.dot(table.dense() * fv)));

    auto B = eigendecompose(P, *solver, P.size());
    Eigen::VectorXd phi = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(P.size()), -1.0, 1.0);
    for (int s : {0, 2, 4}) {
        auto id = psi_norm_identity(B, P, *solver, phi, s);
        CHECK(id.by_definition == doctest::Approx(id.by_basis).epsilon(1e-9));
    }
    CHECK_THROWS_AS(psi_norm_identity(B, P, *solver, phi, 1), DomainError);
}

TEST_CASE("Dirichlet Laplacian ground state on a box") {
    for (int d : {2, 3}) {
        const int N = 12;
        auto g = unit_box(d, N);
        const int m = N - 3;
        const double exact = d * 4.0 * N * N * std::pow(std::sin(std::numbers::pi / (2.0 * (m + 1))), 2);
        CHECK(dirichlet_laplacian_min_eigenvalue(g) == doctest::Approx(exact).epsilon(1e-10));
    }
}
