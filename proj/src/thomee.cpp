#include "membrane/thomee.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "membrane/sampler.hpp"

namespace membrane::thomee {

Polynomial Polynomial::constant(int dim, double c) {
    Polynomial p(dim);
    p.add(Exponent(static_cast<std::size_t>(dim), 0), c);
    return p;
}

Polynomial Polynomial::variable(int dim, int axis) {
    Polynomial p(dim);
    Exponent e(static_cast<std::size_t>(dim), 0);
    e[axis] = 1;
    p.add(e, 1.0);
    return p;
}

void Polynomial::add(const Exponent& e, double c) {
    if (c == 0.0) return;
    auto it = terms_.find(e);
    if (it == terms_.end()) {
        terms_.emplace(e, c);
        return;
    }
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
}

int Polynomial::degree() const {
    int deg = 0;
    for (const auto& [e, c] : terms_) deg = std::max(deg, std::accumulate(e.begin(), e.end(), 0));
    return deg;
}

double Polynomial::operator()(std::span<const double> x) const {
    double acc = 0.0;
    for (const auto& [e, c] : terms_) {
        double m = c;
        for (int i = 0; i < dim_; ++i)
            for (int k = 0; k < e[i]; ++k) m *= x[i];
        acc += m;
    }
    return acc;
}

Polynomial Polynomial::derivative(int axis) const {
    Polynomial out(dim_);
    for (const auto& [e, c] : terms_) {
        if (e[axis] == 0) continue;
        Exponent f = e;
        f[axis] -= 1;
        out.add(f, c * e[axis]);
    }
    return out;
}

Polynomial Polynomial::derivative(const Exponent& alpha) const {
    Polynomial out = *this;
    for (int i = 0; i < dim_; ++i)
        for (int k = 0; k < alpha[i]; ++k) out = out.derivative(i);
    return out;
}

Polynomial Polynomial::laplacian() const {
    Polynomial out(dim_);
    for (int i = 0; i < dim_; ++i) out = out + derivative(i).derivative(i);
    return out;
}

double Polynomial::ball_sup_bound() const {
    double acc = 0.0;
    for (const auto& [e, c] : terms_) acc += std::abs(c);
    return acc;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    Polynomial out = a;
    for (const auto& [e, c] : b.terms_) out.add(e, c);
    return out;
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-1.0) * b; }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial out(a.dim_);
    for (const auto& [ea, ca] : a.terms_)
        for (const auto& [eb, cb] : b.terms_) {
            Polynomial::Exponent e = ea;
            for (std::size_t i = 0; i < e.size(); ++i) e[i] += eb[i];
            out.add(e, ca * cb);
        }
    return out;
}

Polynomial operator*(double c, const Polynomial& a) {
    Polynomial out(a.dim_);
    for (const auto& [e, v] : a.terms_) out.add(e, c * v);
    return out;
}

std::vector<Polynomial::Exponent> multi_indices(int dim, int k) {
    std::vector<Polynomial::Exponent> out;
    Polynomial::Exponent e(static_cast<std::size_t>(dim), 0);
    std::function<void(int, int)> rec = [&](int axis, int left) {
        if (axis == dim) {
            out.push_back(e);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            e[axis] = v;
            rec(axis + 1, left - v);
        }
        e[axis] = 0;
    };
    rec(0, k);
    return out;
}

Polynomial disk_solution(int dim) {
    Polynomial r2(dim);
    for (int i = 0; i < dim; ++i) r2 = r2 + Polynomial::variable(dim, i) * Polynomial::variable(dim, i);
    const Polynomial g = Polynomial::constant(dim, 1.0) - r2;
    return g * g;
}

ManufacturedProblem manufactured_disk(int dim) {
    if (dim < 2) throw DomainError("manufactured_disk: d >= 2 required");
    const Polynomial u = disk_solution(dim);
    const auto bound = [&](int k) {
        double acc = 0.0;
        for (const auto& alpha : multi_indices(dim, k)) acc += u.derivative(alpha).ball_sup_bound();
        return acc;
    };
    ManufacturedProblem p;
    p.shape = lattice::Shape::ball(std::vector<double>(static_cast<std::size_t>(dim), 0.0), 1.0);
    p.dim = dim;
    p.u = [u](std::span<const double> x) { return u(x); };
    const double f = 8.0 * dim * (dim + 2);
    p.f = [f](std::span<const double>) { return f; };
    p.M2 = bound(2);
    p.M5 = bound(5);
    p.label = "ball d=" + std::to_string(dim) + ", u=(1-|x|^2)^2";
    return p;
}

SparseMatrix assemble_lh(const lattice::GridDomain& domain) {
    const double h = domain.h();
    return assemble_stencil_matrix(domain, lattice::stencil_weights(lattice::OperatorVariant::Bilaplacian, domain.dim()),
                                   1.0 / std::pow(h, 4));
}

double grid_norm(std::span<const double> values, double h, int dim) {
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return std::sqrt(std::pow(h, dim) * acc);
}

DiscreteSolution solve_dirichlet(const lattice::GridDomain& domain, std::span<const double> f,
                                 const SolverOptions& options) {
    if (domain.interior_empty()) throw DomainError("solve_dirichlet: R_h is empty");
    if (f.size() != domain.interior_size()) throw DomainError("solve_dirichlet: f must be given on R_h");
    const double h = domain.h();
    const int d = domain.dim();
    const SparseMatrix L = assemble_lh(domain);
    const auto solver = make_solver(L, domain, 1.0 / std::pow(h, 4), options);
    const Eigen::Map<const Eigen::VectorXd> b(f.data(), static_cast<Eigen::Index>(f.size()));
    DiscreteSolution sol;
    sol.domain = &domain;
    sol.method = solver->method();
    sol.u = solver->solve(Eigen::VectorXd(b));
    Eigen::VectorXd r = b - L * sol.u;
    // one refinement step removes most of the rounding left by the factorization
    sol.u += solver->solve(r);
    r = b - L * sol.u;
    sol.residual = grid_norm({r.data(), static_cast<std::size_t>(r.size())}, h, d);
    const double scale = std::max(1.0, grid_norm(f, h, d));
    if (sol.residual > 1e-8 * scale)
        throw NumericalError("solve_dirichlet: residual " + std::to_string(sol.residual) + " exceeds tolerance");
    return sol;
}

Eigen::VectorXd solve_box(const std::vector<int>& extent, double h, std::span<const double> f, double tolerance,
                          SolveInfo* info) {
    BoxBilaplacianSolver solver(extent, 1.0 / std::pow(h, 4), tolerance, 100000);
    if (f.size() != solver.size()) throw DomainError("solve_box: f has the wrong size");
    Eigen::VectorXd x(static_cast<Eigen::Index>(f.size()));
    solver.solve_into(f, {x.data(), f.size()}, info);
    return x;
}

namespace {

/// Dense padded copy of a field on R_h over the R_h bounding box widened by 2.
struct PaddedField {
    std::vector<int> lo, extent;
    std::vector<std::int64_t> stride;
    std::vector<double> values;
};

PaddedField pad(const lattice::GridDomain& domain, std::span<const double> rows) {
    const int d = domain.dim();
    if (rows.size() != domain.interior_size()) throw DomainError("field must be given on R_h");
    PaddedField p;
    p.lo.assign(static_cast<std::size_t>(d), 0);
    std::vector<int> hi(static_cast<std::size_t>(d), 0);
    if (domain.interior_empty()) {
        p.extent.assign(static_cast<std::size_t>(d), 1);
    } else {
        const auto first = domain.point(domain.interior_point(0));
        std::copy(first.begin(), first.end(), p.lo.begin());
        std::copy(first.begin(), first.end(), hi.begin());
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto q = domain.point(domain.interior_point(r));
            for (int a = 0; a < d; ++a) {
                p.lo[a] = std::min(p.lo[a], q[a]);
                hi[a] = std::max(hi[a], q[a]);
            }
        }
        p.extent.resize(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a) {
            p.lo[a] -= 2;
            p.extent[a] = hi[a] + 2 - p.lo[a] + 1;
        }
    }
    p.stride.assign(static_cast<std::size_t>(d), 1);
    for (int a = d - 2; a >= 0; --a) p.stride[a] = p.stride[a + 1] * p.extent[a + 1];
    p.values.assign(static_cast<std::size_t>(p.stride[0] * p.extent[0]), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto q = domain.point(domain.interior_point(r));
        std::int64_t idx = 0;
        for (int a = 0; a < d; ++a) idx += (q[a] - p.lo[a]) * p.stride[a];
        p.values[static_cast<std::size_t>(idx)] = rows[r];
    }
    return p;
}

/// Forward difference along `axis` with zero beyond the array.
std::vector<double> forward(const PaddedField& p, const std::vector<double>& v, int axis, double h) {
    std::vector<double> out(v.size());
    const std::int64_t s = p.stride[axis];
    const int n = p.extent[axis];
    for (std::size_t i = 0; i < v.size(); ++i) {
        const int coord = static_cast<int>((static_cast<std::int64_t>(i) / s) % n);
        const double next = coord + 1 < n ? v[i + static_cast<std::size_t>(s)] : 0.0;
        out[i] = (next - v[i]) / h;
    }
    return out;
}

}  // namespace

double forward_difference_norm(const lattice::GridDomain& domain, std::span<const double> rows, int axis) {
    const auto p = pad(domain, rows);
    const auto diff = forward(p, p.values, axis, domain.h());
    return grid_norm(diff, domain.h(), domain.dim());
}

double sobolev_h2_norm(const lattice::GridDomain& domain, std::span<const double> rows) {
    const auto p = pad(domain, rows);
    const int d = domain.dim();
    const double h = domain.h();
    double acc = 0.0;
    for (const auto& beta : multi_indices(d, 2)) {
        std::vector<double> v = p.values;
        for (int a = 0; a < d; ++a)
            for (int k = 0; k < beta[a]; ++k) v = forward(p, v, a, h);
        const double n = grid_norm(v, h, d);
        acc += n * n;
    }
    return std::sqrt(acc);
}

std::vector<double> apply_lh2(const lattice::GridDomain& domain, std::span<const double> rows) {
    const auto full = domain.extend_from_interior(rows);
    const auto out = lattice::apply(lattice::OperatorVariant::Lh2, full, domain);
    return domain.restrict_to_interior(out);
}

double interior_error(const DiscreteSolution& solution, std::span<const double> exact_rows) {
    if (exact_rows.size() != static_cast<std::size_t>(solution.u.size()))
        throw DomainError("interior_error: size mismatch");
    std::vector<double> e(exact_rows.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = exact_rows[i] - solution.u[static_cast<Eigen::Index>(i)];
    return grid_norm(e, solution.domain->h(), solution.domain->dim());
}

ConvergenceStudy convergence_study(const ManufacturedProblem& problem, const std::vector<double>& h_list,
                                   const SolverOptions& options) {
    if (h_list.size() < 3) throw DomainError("convergence_study: at least three spacings required");
    for (std::size_t i = 1; i < h_list.size(); ++i)
        if (!(h_list[i] < h_list[i - 1])) throw DomainError("convergence_study: spacings must decrease");

    ConvergenceStudy study;
    study.label = problem.label;
    for (double h : h_list) {
        const auto domain = lattice::classify(problem.shape, h);
        const std::size_t n = domain.interior_size();
        std::vector<double> f(n), exact(n);
        for (std::size_t r = 0; r < n; ++r) {
            const auto x = domain.position(domain.interior_point(r));
            f[r] = problem.f(x);
            exact[r] = problem.u(x);
        }
        const auto sol = solve_dirichlet(domain, f, options);
        ConvergenceRow row;
        row.h = h;
        row.interior_points = n;
        row.near_boundary_points = domain.count(lattice::PointClass::NearBoundary);
        row.error = interior_error(sol, exact);
        row.bound = problem.M5 * problem.M5 * h * h + h * (problem.M5 * problem.M5 * std::pow(h, 6) + problem.M2 * problem.M2);
        row.residual = sol.residual;
        for (std::size_t i = 0; i < domain.size(); ++i)
            if (domain.point_class(i) == lattice::PointClass::Boundary)
                row.boundary_error = std::max(row.boundary_error, std::abs(problem.u(domain.position(i))));
        study.rows.push_back(row);
    }
    std::vector<double> lx, ly;
    for (const auto& r : study.rows) {
        lx.push_back(std::log(r.h));
        ly.push_back(std::log(r.error));
    }
    study.fitted_order = sampler::regression_slope(lx, ly);
    for (std::size_t i = 1; i < study.rows.size(); ++i)
        if (!(study.rows[i].error < study.rows[i - 1].error)) study.monotone = false;
    const auto& coarse = study.rows.front();
    study.fitted_constant = coarse.error * coarse.error / coarse.bound;
    for (const auto& r : study.rows)
        if (r.error * r.error > study.fitted_constant * r.bound * (1.0 + 1e-12)) study.within_bound = false;
    study.pass = study.monotone && study.fitted_order >= 0.5 && study.within_bound;
    return study;
}

}  // namespace membrane::thomee
