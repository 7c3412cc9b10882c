#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "membrane/kernels.hpp"
#include "membrane/lattice.hpp"

namespace membrane {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Sparse matrix of a constant-coefficient stencil on R_h with zero extension:
/// row x, column y holds scale·c(y - x) when y ∈ R_h. Rows follow R_h order.
SparseMatrix assemble_stencil_matrix(const lattice::GridDomain& domain, const lattice::Stencil& stencil, double scale);

struct SolveInfo {
    std::string method;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Symmetric positive definite solve interface shared by the direct and iterative backends.
class SpdSolver {
public:
    virtual ~SpdSolver() = default;
    [[nodiscard]] virtual std::size_t size() const = 0;
    [[nodiscard]] virtual std::string method() const = 0;
    virtual Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveInfo* info = nullptr) const = 0;
    /// Column-blocked solve; the default loops over columns.
    virtual Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;
    /// X = Pᵀ L⁻ᵀ Z where A = Pᵀ L Lᵀ P, so Cov(X) = A⁻¹ when Z is standard normal.
    /// Only direct factorizations support this.
    [[nodiscard]] virtual bool supports_sampling() const { return false; }
    virtual Eigen::MatrixXd sampling_transform(const Eigen::MatrixXd& Z) const;
};

/// Supernodal sparse Cholesky (CHOLMOD) with a fill-reducing ordering.
class CholeskyFactor final : public SpdSolver {
public:
    explicit CholeskyFactor(const SparseMatrix& A);
    ~CholeskyFactor() override;
    CholeskyFactor(const CholeskyFactor&) = delete;
    CholeskyFactor& operator=(const CholeskyFactor&) = delete;

    [[nodiscard]] std::size_t size() const override { return n_; }
    [[nodiscard]] std::string method() const override { return "cholesky"; }
    using SpdSolver::solve;
    Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveInfo* info = nullptr) const override;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const override;
    [[nodiscard]] bool supports_sampling() const override { return true; }
    Eigen::MatrixXd sampling_transform(const Eigen::MatrixXd& Z) const override;

    [[nodiscard]] double factor_nonzeros() const;
    [[nodiscard]] double reciprocal_condition() const;

    /// Bytes the numeric factor would need, from a symbolic analysis only.
    static double predicted_factor_bytes(const SparseMatrix& A);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t n_ = 0;
};

/// Conjugate gradients with diagonal preconditioning on an assembled matrix.
class JacobiCG final : public SpdSolver {
public:
    JacobiCG(SparseMatrix A, double tolerance, int max_iterations);
    [[nodiscard]] std::size_t size() const override { return static_cast<std::size_t>(A_.rows()); }
    [[nodiscard]] std::string method() const override { return "cg-jacobi"; }
    using SpdSolver::solve;
    Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveInfo* info = nullptr) const override;

private:
    SparseMatrix A_;
    double tol_;
    int maxit_;
};

/// Matrix-free solver for scale·(bilaplacian stencil) on a full box of unknowns
/// (R_h of a box domain). Preconditioned CG where the preconditioner is the
/// square of the Dirichlet Laplacian on the same box, inverted exactly by a
/// multi-dimensional discrete sine transform.
class BoxBilaplacianSolver final : public SpdSolver {
public:
    BoxBilaplacianSolver(std::vector<int> extent, double scale, double tolerance, int max_iterations);
    ~BoxBilaplacianSolver() override;
    BoxBilaplacianSolver(const BoxBilaplacianSolver&) = delete;
    BoxBilaplacianSolver& operator=(const BoxBilaplacianSolver&) = delete;

    [[nodiscard]] std::size_t size() const override { return stencil_.size(); }
    [[nodiscard]] std::string method() const override { return "pcg-dst"; }
    using SpdSolver::solve;
    Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveInfo* info = nullptr) const override;
    void solve_into(std::span<const double> b, std::span<double> x, SolveInfo* info = nullptr) const;

    void apply(std::span<const double> x, std::span<double> y) const { stencil_.apply(x, y); }
    /// y = P⁻¹ x with P = scale·(Δ_D)² (integer stencils).
    void apply_preconditioner(std::span<const double> x, std::span<double> y) const;

private:
    struct Impl;
    kernels::BoxStencil stencil_;
    std::unique_ptr<Impl> impl_;
    double tol_;
    int maxit_;
};

/// Extents of R_h when it is a full sub-box of the lattice bounding box
/// (box shapes); empty otherwise.
std::vector<int> interior_box_extent(const lattice::GridDomain& domain);

struct SolverOptions {
    enum class Method { Auto, Direct, CG, BoxPCG };
    Method method = Method::Auto;
    double factor_memory_cap_bytes = 2.0e9;
    double cg_tolerance = 1e-10;
    int cg_max_iterations = 50000;
};

/// Direct factorization when the predicted factor fits under the memory cap,
/// otherwise the DST-preconditioned box solver (box domains) or Jacobi CG.
std::unique_ptr<SpdSolver> make_solver(const SparseMatrix& A, const lattice::GridDomain& domain, double scale,
                                       const SolverOptions& options = {});

}  // namespace membrane
