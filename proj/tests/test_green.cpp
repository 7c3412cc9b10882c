#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <Eigen/Dense>
#include <json.hpp>

#include "membrane/green.hpp"
#include "membrane/kernels.hpp"
#include "membrane/solvers.hpp"

using namespace membrane;

namespace {

lattice::GridDomain unit_box(int d, int N) {
    return lattice::classify(lattice::Shape::box(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)), 1.0 / N);
}

// The quadratic form ½Σ|Δ₁φ|² over all of Z^d, φ zero outside R_h, evaluated directly.
double hamiltonian(const lattice::GridDomain& g, const Eigen::VectorXd& phi) {
    const int d = g.dim();
    std::map<std::vector<int>, double> field;
    for (std::size_t r = 0; r < g.interior_size(); ++r) {
        auto p = g.point(g.interior_point(r));
        field[{p.begin(), p.end()}] = phi[static_cast<Eigen::Index>(r)];
    }
    auto at = [&](const std::vector<int>& x) {
        auto it = field.find(x);
        return it == field.end() ? 0.0 : it->second;
    };
    std::set<std::vector<int>> support;
    for (const auto& [x, v] : field) {
        support.insert(x);
        for (int i = 0; i < d; ++i)
            for (int s : {-1, 1}) {
                auto y = x;
                y[i] += s;
                support.insert(y);
            }
    }
    double H = 0.0;
    for (const auto& x : support) {
        double lap = -at(x);
        for (int i = 0; i < d; ++i)
            for (int s : {-1, 1}) {
                auto y = x;
                y[i] += s;
                lap += at(y) / (2.0 * d);
            }
        H += 0.5 * lap * lap;
    }
    return H;
}

}  // namespace

TEST_CASE("precision is the Hessian of the Hamiltonian") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> Z;
    for (auto g : {unit_box(2, 9), unit_box(3, 6), lattice::classify(lattice::Shape::ball({0, 0}, 1.0), 0.2)}) {
        auto P = green::assemble_precision(g);
        CHECK(P.scale == doctest::Approx(1.0 / (4.0 * g.dim() * g.dim())));
        for (int t = 0; t < 5; ++t) {
            Eigen::VectorXd phi(static_cast<Eigen::Index>(g.interior_size()));
            for (auto& v : phi) v = Z(rng);
            CHECK(0.5 * phi.dot(P.matrix * phi) == doctest::Approx(hamiltonian(g, phi)).epsilon(1e-12));
        }
    }
}

TEST_CASE("Green table equals the dense inverse and is symmetric positive") {
    for (auto g : {unit_box(2, 8), unit_box(3, 6)}) {
        auto P = green::assemble_precision(g);
        auto solver = green::make_precision_solver(P);
        CHECK(solver->method() == "cholesky");
        auto table = green::green_full(P, *solver);
        Eigen::MatrixXd inv = Eigen::MatrixXd(P.matrix).inverse();
        CHECK((table.dense() - inv).cwiseAbs().maxCoeff() <= 1e-9 * inv.cwiseAbs().maxCoeff());
        CHECK(table.asymmetry() <= 1e-10);
        for (std::size_t r = 0; r < table.size(); ++r) CHECK(table.at(r, r) > 0.0);
    }
}

TEST_CASE("single columns, residuals and domain errors") {
    auto g = unit_box(2, 16);
    auto P = green::assemble_precision(g);
    auto solver = green::make_precision_solver(P);
    auto col = green::solve_green_column(P, *solver, LatticePoint{8, 8});
    CHECK(col.residual <= 1e-8);
    CHECK(col.values[static_cast<Eigen::Index>(col.source_row)] > 0.0);
    CHECK_THROWS_AS(green::solve_green_column(P, *solver, LatticePoint{1, 8}), DomainError);
    CHECK_THROWS_AS(green::solve_green_column(P, *solver, LatticePoint{8, 8, 8}), DomainError);

    green::GreenTable table(g);
    table.ensure_columns(P, *solver, {3, 40});
    CHECK(table.has_column(3));
    CHECK(table.at(3, 40) == doctest::Approx(table.at(40, 3)).epsilon(1e-12));
    CHECK_THROWS_AS((void)table.at(5, 6), DomainError);
    // points outside R_h carry zero covariance
    CHECK(table.at(std::vector<int>{0, 0}, std::vector<int>{8, 8}) == 0.0);

    auto empty = unit_box(2, 2);
    CHECK_THROWS_AS(green::assemble_precision(empty), DomainError);
}

TEST_CASE("solver backends agree") {
    auto g = unit_box(3, 10);
    auto P = green::assemble_precision(g);
    SolverOptions cg;
    cg.method = SolverOptions::Method::CG;
    cg.cg_tolerance = 1e-12;
    SolverOptions box;
    box.method = SolverOptions::Method::BoxPCG;
    box.cg_tolerance = 1e-12;
    auto direct = green::make_precision_solver(P);
    auto iter = green::make_precision_solver(P, cg);
    auto pcg = green::make_precision_solver(P, box);
    CHECK(iter->method() == "cg-jacobi");
    CHECK(pcg->method() == "pcg-dst");
    CHECK_FALSE(pcg->supports_sampling());
    Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(P.size()), -1.0, 2.0);
    Eigen::VectorXd x = direct->solve(b);
    CHECK((iter->solve(b) - x).norm() <= 1e-8 * x.norm());
    SolveInfo info;
    CHECK((pcg->solve(b, &info) - x).norm() <= 1e-8 * x.norm());
    CHECK(info.iterations < 60);
    CHECK(interior_box_extent(g) == std::vector<int>{7, 7, 7});
    CHECK(interior_box_extent(lattice::classify(lattice::Shape::ball({0, 0}, 1), 0.25)).empty());
}

TEST_CASE("sampling transform has covariance A^-1") {
    auto g = unit_box(2, 6);
    auto P = green::assemble_precision(g);
    CholeskyFactor f(P.matrix);
    const auto n = static_cast<Eigen::Index>(P.size());
    // X = T Z with Z = I gives T; T Tᵀ must be A⁻¹
    Eigen::MatrixXd T = f.sampling_transform(Eigen::MatrixXd::Identity(n, n));
    Eigen::MatrixXd inv = Eigen::MatrixXd(P.matrix).inverse();
    CHECK((T * T.transpose() - inv).cwiseAbs().maxCoeff() <= 1e-10 * inv.cwiseAbs().maxCoeff());
    CHECK(f.reciprocal_condition() > 0.0);
    CHECK(CholeskyFactor::predicted_factor_bytes(P.matrix) > 0.0);
}

TEST_CASE("bounds report on a small box") {
    auto g = unit_box(2, 12);
    auto P = green::assemble_precision(g);
    auto solver = green::make_precision_solver(P);
    auto rep = green::check_bounds(green::green_full(P, *solver));
    CHECK(rep.violations.empty());
    CHECK(rep.green_constant > 0.0);
    CHECK(rep.increment_variance > 0.0);
    CHECK(green::fitted_constants_stable({1.0, 1.5, 1.9}));
    CHECK_FALSE(green::fitted_constants_stable({1.0, 3.0}));
}

TEST_CASE("raw export round trip") {
    auto g = unit_box(2, 8);
    auto P = green::assemble_precision(g);
    auto solver = green::make_precision_solver(P);
    auto table = green::green_full(P, *solver);
    auto dir = std::filesystem::temp_directory_path() / "membrane_green_test";
    std::filesystem::create_directories(dir);
    table.write(dir / "g.f64", dir / "g.json", R"({"shape":"box"})");
    std::ifstream in(dir / "g.f64", std::ios::binary);
    std::vector<double> raw(table.size() * table.size());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(double)));
    CHECK(in.gcount() == static_cast<std::streamsize>(raw.size() * sizeof(double)));
    CHECK(raw[1 * table.size() + 4] == table.at(1, 4));
    auto meta = nlohmann::json::parse(std::ifstream(dir / "g.json"));
    CHECK(meta["rows"] == table.size());
    CHECK(meta["format"] == "float64-le");
    std::filesystem::remove_all(dir);
}

TEST_CASE("box stencil: serial and parallel paths agree with the assembled matrix") {
    for (int d : {2, 3, 4}) {
        const int N = d == 4 ? 8 : 12;
        auto g = unit_box(d, N);
        const auto stencil = lattice::stencil_weights(lattice::OperatorVariant::Bilaplacian, d);
        auto A = assemble_stencil_matrix(g, stencil, 0.25);
        kernels::BoxStencil box(interior_box_extent(g), stencil, 0.25);
        REQUIRE(box.size() == g.interior_size());
        Eigen::VectorXd x = Eigen::VectorXd::Random(static_cast<Eigen::Index>(box.size()));
        Eigen::VectorXd ys(x.size()), yp(x.size());
        const std::span<const double> xs(x.data(), box.size());
        box.apply(xs, {ys.data(), box.size()}, kernels::Execution::Serial);
        box.apply(xs, {yp.data(), box.size()}, kernels::Execution::Parallel);
        Eigen::VectorXd ya = A * x;
        CHECK((ys - ya).cwiseAbs().maxCoeff() <= 1e-12 * ya.cwiseAbs().maxCoeff());
        CHECK((yp - ys).cwiseAbs().maxCoeff() == 0.0);
        CHECK(box.diagonal() == doctest::Approx(0.25 * (4 * d * d + 2 * d)));
    }
    std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    CHECK(kernels::dot(a, b, kernels::Execution::Serial) == 32.0);
    CHECK(kernels::dot(a, b) == 32.0);
    kernels::axpy(2.0, a, b);
    CHECK(b[2] == 12.0);
    CHECK(kernels::max_abs(std::vector<double>{-7, 3}) == 7.0);
}

TEST_CASE("DST preconditioner inverts the squared Dirichlet Laplacian") {
    std::vector<int> ext{5, 6, 4};
    BoxBilaplacianSolver s(ext, 2.0, 1e-12, 100);
    // P = 2·(Δ_D)², so applying the integer Laplacian twice after P⁻¹ recovers x/2
    lattice::Stencil lap;
    lap.dim = 3;
    lap.offsets.push_back({0, 0, 0});
    lap.coefficients.push_back(Rational(6));
    for (int i = 0; i < 3; ++i)
        for (int sgn : {-1, 1}) {
            LatticePoint o(3, 0);
            o[i] = sgn;
            lap.offsets.push_back(o);
            lap.coefficients.push_back(Rational(-1));
        }
    kernels::BoxStencil L(ext, lap, 1.0);
    const std::size_t n = L.size();
    std::vector<double> x(n), y(n), t(n), u(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(1.0 + 3.0 * static_cast<double>(i));
    s.apply_preconditioner(x, y);
    L.apply(y, t);
    L.apply(t, u);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(2.0 * u[i] - x[i]));
    CHECK(worst <= 1e-10);
}
