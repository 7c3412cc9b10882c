#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "membrane/lattice.hpp"
#include "membrane/solvers.hpp"

namespace membrane::thomee {

/// Real polynomial in d variables with exact monomial bookkeeping.
class Polynomial {
public:
    using Exponent = std::vector<int>;

    explicit Polynomial(int dim = 0) : dim_(dim) {}
    static Polynomial constant(int dim, double c);
    static Polynomial variable(int dim, int axis);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] const std::map<Exponent, double>& terms() const { return terms_; }
    [[nodiscard]] int degree() const;

    [[nodiscard]] double operator()(std::span<const double> x) const;
    [[nodiscard]] Polynomial derivative(int axis) const;
    [[nodiscard]] Polynomial derivative(const Exponent& alpha) const;
    [[nodiscard]] Polynomial laplacian() const;

    /// Upper bound of sup |p| over the closed unit ball: Σ |c_α| (each |x^α| ≤ 1 there).
    [[nodiscard]] double ball_sup_bound() const;

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(double c, const Polynomial& a);

private:
    void add(const Exponent& e, double c);
    int dim_;
    std::map<Exponent, double> terms_;
};

/// All multi-indices α ∈ N^d with |α| ≤ k.
std::vector<Polynomial::Exponent> multi_indices(int dim, int k);

/// Biharmonic Dirichlet problem with a closed-form solution.
struct ManufacturedProblem {
    lattice::Shape shape;
    int dim = 0;
    std::function<double(std::span<const double>)> u;
    std::function<double(std::span<const double>)> f;
    double M2 = 0.0;  ///< Σ_{|α|≤2} sup |D^α u|
    double M5 = 0.0;  ///< Σ_{|α|≤5} sup |D^α u|
    std::string label;
};

/// Unit ball, u = (1 − ‖x‖²)², f = Δ²u = 8d(d+2); M_k from bounds on the polynomial derivatives.
ManufacturedProblem manufactured_disk(int dim);
/// The polynomial u of manufactured_disk, for symbolic checks.
Polynomial disk_solution(int dim);

/// L_h = Δ_h² on R_h with zero extension, h⁻⁴ scaled.
SparseMatrix assemble_lh(const lattice::GridDomain& domain);

struct DiscreteSolution {
    const lattice::GridDomain* domain = nullptr;
    Eigen::VectorXd u;        ///< u_h on R_h rows (u_h = 0 on B_h)
    double residual = 0.0;    ///< ‖L_h u_h − f‖_{h,grid}
    std::string method;
};

/// L_h u_h = f on R_h, u_h = 0 on B_h. Throws DomainError when R_h is empty and
/// NumericalError when the residual exceeds 1e-8.
DiscreteSolution solve_dirichlet(const lattice::GridDomain& domain, std::span<const double> f,
                                 const SolverOptions& options = {});

/// Matrix-free solve of L_h H = f on a full box of unknowns (row-major, first axis slowest).
Eigen::VectorXd solve_box(const std::vector<int>& extent, double h, std::span<const double> f, double tolerance,
                          SolveInfo* info = nullptr);

/// ‖f‖_{h,grid} = (h^d Σ f²)^{1/2}.
double grid_norm(std::span<const double> values, double h, int dim);

/// ‖f‖_{h,2} = (Σ_{|β|≤2} ‖D^β f‖²_{h,grid})^{1/2} with forward differences, f on R_h rows (zero elsewhere).
double sobolev_h2_norm(const lattice::GridDomain& domain, std::span<const double> rows);
/// ‖D_j f‖_{h,grid} for a field on R_h rows.
double forward_difference_norm(const lattice::GridDomain& domain, std::span<const double> rows, int axis);
/// L_{h,2} f on R_h rows (L_h on R_h*, h² L_h on B_h*).
std::vector<double> apply_lh2(const lattice::GridDomain& domain, std::span<const double> rows);

/// ‖R_h(u − u_h)‖_{h,grid} for exact values given on R_h rows.
double interior_error(const DiscreteSolution& solution, std::span<const double> exact_rows);

struct ConvergenceRow {
    double h = 0.0;
    std::size_t interior_points = 0;
    std::size_t near_boundary_points = 0;
    double error = 0.0;           ///< ‖R_h e_h‖_{h,grid}
    double bound = 0.0;           ///< M_5²h² + h(M_5²h⁶ + M_2²)
    double boundary_error = 0.0;  ///< max |u| over B_h (diagnostic)
    double residual = 0.0;
};

struct ConvergenceStudy {
    std::string label;
    std::vector<ConvergenceRow> rows;
    double fitted_order = 0.0;     ///< slope of log error against log h
    bool monotone = true;          ///< errors strictly decreasing
    double fitted_constant = 0.0;  ///< error²/bound at the coarsest h
    bool within_bound = true;      ///< error² ≤ fitted_constant·bound at every h
    bool pass = false;             ///< monotone && order ≥ 0.5 && within_bound
};

/// Requires at least three decreasing spacings.
ConvergenceStudy convergence_study(const ManufacturedProblem& problem, const std::vector<double>& h_list,
                                   const SolverOptions& options = {});

}  // namespace membrane::thomee
