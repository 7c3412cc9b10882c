#include <doctest.h>

#include <cmath>
#include <random>

#include "membrane/green.hpp"
#include "membrane/sampler.hpp"

using namespace membrane;
using namespace membrane::sampler;

namespace {

lattice::GridDomain unit_box(int d, int N) {
    return lattice::classify(lattice::Shape::box(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)), 1.0 / N);
}

struct Fixture {
    lattice::GridDomain dom;
    green::PrecisionMatrix P;
    std::unique_ptr<SpdSolver> solver;
    explicit Fixture(lattice::GridDomain g) : dom(std::move(g)) {
        P = green::assemble_precision(dom);
        solver = green::make_precision_solver(P);
    }
};

std::vector<double> random_point(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> t(d);
    for (double& v : t) v = U(rng);
    return t;
}

}  // namespace

TEST_CASE("normal streams are deterministic and distinct") {
    auto a = standard_normal_stream(5, 0, 100), b = standard_normal_stream(5, 0, 100), c = standard_normal_stream(5, 1, 100),
         e = standard_normal_stream(6, 0, 100);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a != e);
    // the high word of the seed matters too
    CHECK(standard_normal_stream(1ULL << 40, 0, 10) != standard_normal_stream(0, 0, 10));
}

TEST_CASE("serial and parallel sampling agree bit for bit") {
    Fixture f(unit_box(2, 12));
    auto s = sample(f.P, *f.solver, 9, 40, 0, kernels::Execution::Serial);
    auto p = sample(f.P, *f.solver, 9, 40, 0, kernels::Execution::Parallel);
    REQUIRE(s.size() == 40);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i].values == p[i].values);
        CHECK(s[i].stream == i);
    }
    // stream k does not depend on how many samples were requested around it
    auto one = sample(f.P, *f.solver, 9, 1, 33);
    CHECK((one[0].values - s[33].values).cwiseAbs().maxCoeff() <= 1e-14);

    SolverOptions cg;
    cg.method = SolverOptions::Method::CG;
    auto it = green::make_precision_solver(f.P, cg);
    CHECK_THROWS_AS(sample(f.P, *it, 1, 1), DomainError);
}

TEST_CASE("simplex weights: partition of unity, barycentre and ordering") {
    std::mt19937_64 rng(21);
    for (int d : {2, 3}) {
        const int N = 8;
        auto dom = unit_box(d, N);
        for (int trial = 0; trial < 200; ++trial) {
            auto t = random_point(rng, d);
            auto w = InterpolatedField::weights(dom, t, N);
            REQUIRE(w.size() == static_cast<std::size_t>(d + 1));
            double sum = 0.0;
            std::vector<double> bary(d, 0.0);
            for (const auto& v : w) {
                CHECK(v.weight >= -1e-15);
                sum += v.weight;
                for (int i = 0; i < d; ++i) bary[i] += v.weight * v.vertex[i];
            }
            CHECK(sum == doctest::Approx(1.0));
            for (int i = 0; i < d; ++i) CHECK(bary[i] == doctest::Approx(N * t[i]).epsilon(1e-12));
            // consecutive vertices differ by one unit step
            for (std::size_t k = 1; k < w.size(); ++k) {
                int diff = 0;
                for (int i = 0; i < d; ++i) diff += std::abs(w[k].vertex[i] - w[k - 1].vertex[i]);
                CHECK(diff == 1);
            }
        }
        // upper face of the box uses the interior simplex
        std::vector<double> corner(d, 1.0);
        auto w = InterpolatedField::weights(dom, corner, N);
        for (const auto& v : w)
            for (int c : v.vertex) CHECK(c <= N);
        CHECK_THROWS_AS(InterpolatedField::weights(dom, std::vector<double>(d, 1.01), N), DomainError);
        CHECK_THROWS_AS(InterpolatedField::weights(dom, std::vector<double>(d, 0.5), N + 1), DomainError);
    }
}

TEST_CASE("interpolation reproduces lattice values and is continuous") {
    for (int d : {2, 3}) {
        const int N = d == 2 ? 16 : 8;
        Fixture f(unit_box(d, N));
        auto fields = sample(f.P, *f.solver, 4, 1);
        InterpolatedField psi(fields[0], N);
        CHECK(psi.prefactor() == doctest::Approx(std::pow(N, (d - 4) / 2.0) / (2.0 * d)));
        for (std::size_t i = 0; i < f.dom.size(); ++i) {
            auto x = f.dom.position(i);
            CHECK(psi(x) == doctest::Approx(psi.prefactor() * fields[0].at(f.dom.point(i))).epsilon(1e-12));
        }
        // Lipschitz with the discrete gradient bound: |Ψ(t) − Ψ(s)| ≤ L‖t−s‖₁ for nearby points
        double L = 0.0;
        for (std::size_t i = 0; i < f.dom.size(); ++i)
            for (int a = 0; a < d; ++a) {
                std::vector<int> p(f.dom.point(i).begin(), f.dom.point(i).end());
                const double v0 = fields[0].at(p);
                ++p[a];
                L = std::max(L, std::abs(fields[0].at(p) - v0));
            }
        L *= psi.prefactor() * N;
        std::mt19937_64 rng(5);
        std::normal_distribution<double> Z;
        for (int trial = 0; trial < 300; ++trial) {
            auto t = random_point(rng, d);
            auto s = t;
            double l1 = 0.0;
            for (double& v : s) {
                v = std::clamp(v + 1e-7 * Z(rng), 0.0, 1.0);
            }
            for (int i = 0; i < d; ++i) l1 += std::abs(s[i] - t[i]);
            CHECK(std::abs(psi(t) - psi(s)) <= L * l1 * (1 + 1e-9) + 1e-15);
        }
    }
}

TEST_CASE("rescaled maximum") {
    Fixture f(unit_box(2, 10));
    auto fields = sample(f.P, *f.solver, 2, 3);
    for (const auto& s : fields) {
        const double m = std::max(0.0, s.values.maxCoeff());
        CHECK(rescaled_max(s, 2, 10) == doctest::Approx(m * std::pow(10.0, -1.0) / 4.0));
    }
    CHECK_THROWS_AS(rescaled_max(fields[0], 3, 10), DomainError);
}

TEST_CASE("exact increment variance equals the quadratic form of the weights") {
    Fixture f(unit_box(2, 12));
    auto table = green::green_full(f.P, *f.solver);
    std::mt19937_64 rng(8);
    const double c = 1.0 / 4.0 / 12.0;
    for (int trial = 0; trial < 50; ++trial) {
        auto t = random_point(rng, 2), s = random_point(rng, 2);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.dom.interior_size()));
        for (const auto& v : InterpolatedField::weights(f.dom, t, 12))
            if (auto r = f.dom.interior_row(v.vertex); r >= 0) w[r] += v.weight;
        for (const auto& v : InterpolatedField::weights(f.dom, s, 12))
            if (auto r = f.dom.interior_row(v.vertex); r >= 0) w[r] -= v.weight;
        const double expect = c * c * w.dot(table.dense() * w);
        CHECK(exact_increment_variance(table, t, s, 12) == doctest::Approx(expect).epsilon(1e-10).scale(1e-16));
    }
    green::GreenTable sparse(f.dom);
    std::vector<double> t{0.5, 0.5}, s{0.25, 0.75};
    CHECK_THROWS_AS(exact_increment_variance(sparse, t, s, 12), DomainError);
    sparse.ensure_columns(f.P, *f.solver, interpolation_rows(f.dom, t, 12));
    sparse.ensure_columns(f.P, *f.solver, interpolation_rows(f.dom, s, 12));
    CHECK(exact_increment_variance(sparse, t, s, 12) == doctest::Approx(exact_increment_variance(table, t, s, 12)));
}

TEST_CASE("empirical variance of a point value matches G(x,x)") {
    Fixture f(unit_box(2, 16));
    const std::size_t n = 2000;
    auto fields = sample(f.P, *f.solver, 77, n);
    auto col = green::solve_green_column(f.P, *f.solver, LatticePoint{8, 8});
    const double g = col.values[static_cast<Eigen::Index>(col.source_row)];
    double emp = 0.0;
    for (const auto& s : fields) emp += std::pow(s.at(std::vector<int>{8, 8}), 2);
    emp /= static_cast<double>(n);
    CHECK(std::abs(emp - g) <= 3.0 * g * std::sqrt(2.0 / n));
}

TEST_CASE("moment study stays inside the requested ranges") {
    Fixture f(unit_box(2, 16));
    green::GreenTable table(f.dom);
    auto m = moment_study(table, f.P, *f.solver, 16, 30, 3, 0.02, 0.2, 0.25);
    REQUIRE(m.points.size() == 30);
    for (const auto& p : m.points) {
        CHECK(p.distance >= 0.02);
        CHECK(p.distance <= 0.2);
        CHECK(p.variance > 0.0);
    }
    CHECK(std::isfinite(m.fitted_exponent));
    CHECK_THROWS_AS(moment_study(table, f.P, *f.solver, 16, 3, 3, 0.2, 0.1), DomainError);
}

TEST_CASE("KS distance and regression") {
    CHECK(ks_distance({1, 2, 3}, {4, 5, 6}) == 1.0);
    CHECK(ks_distance({1, 2, 3}, {3, 2, 1}) == 0.0);
    CHECK(ks_distance({1, 2, 3, 4}, {3, 4, 5, 6}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(ks_distance({}, {1.0}), DomainError);
    std::vector<double> x{0, 1, 2, 3}, y{1, 4, 7, 10};
    CHECK(regression_slope(x, y) == doctest::Approx(3.0));
    CHECK_THROWS_AS(regression_slope(std::vector<double>{1, 1}, std::vector<double>{0, 2}), DomainError);
}
