#include "membrane/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <cholmod.h>
#include <fftw3.h>

namespace membrane {

SparseMatrix assemble_stencil_matrix(const lattice::GridDomain& domain, const lattice::Stencil& stencil, double scale) {
    const std::size_t n = domain.interior_size();
    const int d = domain.dim();
    std::vector<Eigen::Triplet<double, int>> triplets;
    triplets.reserve(n * stencil.offsets.size());
    std::vector<double> coeff(stencil.coefficients.size());
    for (std::size_t s = 0; s < coeff.size(); ++s) coeff[s] = stencil.coefficients[s].value() * scale;
    std::vector<int> q(static_cast<std::size_t>(d));
    for (std::size_t row = 0; row < n; ++row) {
        const auto p = domain.point(domain.interior_point(row));
        for (std::size_t s = 0; s < stencil.offsets.size(); ++s) {
            for (int a = 0; a < d; ++a) q[a] = p[a] + stencil.offsets[s][a];
            const auto col = domain.interior_row(q);
            if (col >= 0) triplets.emplace_back(static_cast<int>(row), static_cast<int>(col), coeff[s]);
        }
    }
    SparseMatrix A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    A.setFromTriplets(triplets.begin(), triplets.end());
    A.makeCompressed();
    return A;
}

Eigen::MatrixXd SpdSolver::solve(const Eigen::MatrixXd& B) const {
    Eigen::MatrixXd X(B.rows(), B.cols());
    for (Eigen::Index j = 0; j < B.cols(); ++j) X.col(j) = solve(Eigen::VectorXd(B.col(j)));
    return X;
}

Eigen::MatrixXd SpdSolver::sampling_transform(const Eigen::MatrixXd&) const {
    throw NumericalError(method() + ": sampling requires a direct factorization");
}

// ---------------------------------------------------------------------------
// CHOLMOD

namespace {

cholmod_sparse sparse_view(const SparseMatrix& A) {
    cholmod_sparse s{};
    s.nrow = static_cast<std::size_t>(A.rows());
    s.ncol = static_cast<std::size_t>(A.cols());
    s.nzmax = static_cast<std::size_t>(A.nonZeros());
    s.p = const_cast<int*>(A.outerIndexPtr());
    s.i = const_cast<int*>(A.innerIndexPtr());
    s.x = const_cast<double*>(A.valuePtr());
    s.stype = -1;  // symmetric, lower triangle referenced
    s.itype = CHOLMOD_INT;
    s.xtype = CHOLMOD_REAL;
    s.dtype = CHOLMOD_DOUBLE;
    s.sorted = 1;
    s.packed = 1;
    return s;
}

cholmod_dense dense_view(const Eigen::MatrixXd& B) {
    cholmod_dense v{};
    v.nrow = static_cast<std::size_t>(B.rows());
    v.ncol = static_cast<std::size_t>(B.cols());
    v.nzmax = v.nrow * v.ncol;
    v.d = v.nrow;
    v.x = const_cast<double*>(B.data());
    v.xtype = CHOLMOD_REAL;
    v.dtype = CHOLMOD_DOUBLE;
    return v;
}

}  // namespace

struct CholeskyFactor::Impl {
    cholmod_common common{};
    cholmod_factor* L = nullptr;
    std::mutex mutex;

    Impl() {
        cholmod_start(&common);
        common.supernodal = CHOLMOD_SUPERNODAL;
        common.final_ll = 1;
        common.print = 0;
        common.error_handler = nullptr;
    }
    ~Impl() {
        if (L) cholmod_free_factor(&L, &common);
        cholmod_finish(&common);
    }

    Eigen::MatrixXd run(int system, const Eigen::MatrixXd& B) {
        if (B.cols() == 0) return B;
        auto view = dense_view(B);
        cholmod_dense* X = cholmod_solve(system, L, &view, &common);
        if (!X) throw NumericalError("cholmod_solve failed");
        Eigen::MatrixXd out = Eigen::Map<const Eigen::MatrixXd>(static_cast<const double*>(X->x), B.rows(), B.cols());
        cholmod_free_dense(&X, &common);
        return out;
    }
};

CholeskyFactor::CholeskyFactor(const SparseMatrix& A) : impl_(std::make_unique<Impl>()), n_(static_cast<std::size_t>(A.rows())) {
    if (A.rows() != A.cols() || A.rows() == 0) throw DomainError("CholeskyFactor: matrix must be square and nonempty");
    if (!A.isCompressed()) throw DomainError("CholeskyFactor: matrix must be compressed");
    auto view = sparse_view(A);
    impl_->L = cholmod_analyze(&view, &impl_->common);
    if (!impl_->L) throw NumericalError("cholmod_analyze failed (status " + std::to_string(impl_->common.status) + ")");
    cholmod_factorize(&view, impl_->L, &impl_->common);
    if (impl_->common.status == CHOLMOD_NOT_POSDEF || impl_->L->minor < impl_->L->n) {
        std::ostringstream msg;
        msg << "Cholesky factorization failed: matrix not positive definite at column " << impl_->L->minor << " of "
            << impl_->L->n;
        throw NumericalError(msg.str());
    }
    if (impl_->common.status < CHOLMOD_OK)
        throw NumericalError("cholmod_factorize failed (status " + std::to_string(impl_->common.status) + ")");
}

CholeskyFactor::~CholeskyFactor() = default;

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& b, SolveInfo* info) const {
    if (static_cast<std::size_t>(b.size()) != n_) throw DomainError("CholeskyFactor::solve: size mismatch");
    std::lock_guard lock(impl_->mutex);
    Eigen::MatrixXd x = impl_->run(CHOLMOD_A, b);
    if (info) *info = {method(), 0, 0.0};
    return x.col(0);
}

Eigen::MatrixXd CholeskyFactor::solve(const Eigen::MatrixXd& B) const {
    if (static_cast<std::size_t>(B.rows()) != n_) throw DomainError("CholeskyFactor::solve: size mismatch");
    std::lock_guard lock(impl_->mutex);
    return impl_->run(CHOLMOD_A, B);
}

Eigen::MatrixXd CholeskyFactor::sampling_transform(const Eigen::MatrixXd& Z) const {
    if (static_cast<std::size_t>(Z.rows()) != n_) throw DomainError("sampling_transform: size mismatch");
    std::lock_guard lock(impl_->mutex);
    Eigen::MatrixXd Y = impl_->run(CHOLMOD_Lt, Z);
    return impl_->run(CHOLMOD_Pt, Y);
}

double CholeskyFactor::factor_nonzeros() const { return impl_->common.lnz; }

double CholeskyFactor::reciprocal_condition() const {
    std::lock_guard lock(impl_->mutex);
    return cholmod_rcond(impl_->L, &impl_->common);
}

double CholeskyFactor::predicted_factor_bytes(const SparseMatrix& A) {
    Impl impl;
    auto view = sparse_view(A);
    impl.L = cholmod_analyze(&view, &impl.common);
    if (!impl.L) throw NumericalError("cholmod_analyze failed");
    return impl.common.lnz * (sizeof(double) + sizeof(int));
}

// ---------------------------------------------------------------------------

JacobiCG::JacobiCG(SparseMatrix A, double tolerance, int max_iterations)
    : A_(std::move(A)), tol_(tolerance), maxit_(max_iterations) {}

Eigen::VectorXd JacobiCG::solve(const Eigen::VectorXd& b, SolveInfo* info) const {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(tol_);
    cg.setMaxIterations(maxit_);
    cg.compute(A_);
    Eigen::VectorXd x = cg.solve(b);
    if (cg.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "conjugate gradients did not converge: " << cg.iterations() << " iterations, relative residual "
            << cg.error();
        throw NumericalError(msg.str());
    }
    if (info) *info = {method(), static_cast<int>(cg.iterations()), cg.error()};
    return x;
}

// ---------------------------------------------------------------------------
// Box solver

namespace {
std::mutex fftw_planner_mutex;
}

struct BoxBilaplacianSolver::Impl {
    std::vector<double> inverse_eigen;  // 1 / (scale·λ²·normalization)
    mutable std::vector<double> buffer;
    fftw_plan plan = nullptr;
    mutable std::mutex mutex;

    ~Impl() {
        if (plan) {
            std::lock_guard lock(fftw_planner_mutex);
            fftw_destroy_plan(plan);
        }
    }
};

BoxBilaplacianSolver::BoxBilaplacianSolver(std::vector<int> extent, double scale, double tolerance, int max_iterations)
    : stencil_(extent, lattice::stencil_weights(lattice::OperatorVariant::Bilaplacian, static_cast<int>(extent.size())),
               scale),
      impl_(std::make_unique<Impl>()),
      tol_(tolerance),
      maxit_(max_iterations) {
    const int d = static_cast<int>(extent.size());
    const std::size_t n = stencil_.size();
    impl_->buffer.assign(n, 0.0);
    std::vector<fftw_r2r_kind> kinds(static_cast<std::size_t>(d), FFTW_RODFT00);
    {
        std::lock_guard lock(fftw_planner_mutex);
        impl_->plan = fftw_plan_r2r(d, extent.data(), impl_->buffer.data(), impl_->buffer.data(), kinds.data(),
                                    FFTW_ESTIMATE);
    }
    if (!impl_->plan) throw NumericalError("fftw: could not create sine-transform plan");

    // Per-axis eigenvalues of the 1D Dirichlet second difference (negated).
    std::vector<std::vector<double>> axis(static_cast<std::size_t>(d));
    double normalization = 1.0;
    for (int a = 0; a < d; ++a) {
        const int m = extent[a];
        normalization *= 2.0 * (m + 1);
        for (int k = 1; k <= m; ++k) axis[a].push_back(2.0 - 2.0 * std::cos(std::numbers::pi * k / (m + 1)));
    }
    impl_->inverse_eigen.resize(n);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
        double lam = 0.0;
        for (int a = 0; a < d; ++a) lam += axis[a][idx[a]];
        impl_->inverse_eigen[flat] = 1.0 / (scale * lam * lam * normalization);
        for (int a = d - 1; a >= 0; --a) {
            if (++idx[a] < extent[a]) break;
            idx[a] = 0;
        }
    }
}

BoxBilaplacianSolver::~BoxBilaplacianSolver() = default;

void BoxBilaplacianSolver::apply_preconditioner(std::span<const double> x, std::span<double> y) const {
    std::lock_guard lock(impl_->mutex);
    auto& buf = impl_->buffer;
    std::copy(x.begin(), x.end(), buf.begin());
    fftw_execute(impl_->plan);
    const auto n = static_cast<std::int64_t>(buf.size());
    const double* inv = impl_->inverse_eigen.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) buf[i] *= inv[i];
    fftw_execute(impl_->plan);
    std::copy(buf.begin(), buf.end(), y.begin());
}

void BoxBilaplacianSolver::solve_into(std::span<const double> b, std::span<double> x, SolveInfo* info) const {
    const std::size_t n = size();
    if (b.size() != n || x.size() != n) throw DomainError("BoxBilaplacianSolver: size mismatch");
    std::vector<double> r(b.begin(), b.end()), z(n), p(n), Ap(n);
    std::fill(x.begin(), x.end(), 0.0);
    const double bnorm = std::sqrt(kernels::dot(b, b));
    if (bnorm == 0.0) {
        if (info) *info = {method(), 0, 0.0};
        return;
    }
    apply_preconditioner(r, z);
    p = z;
    double rz = kernels::dot(r, z);
    double rel = 1.0;
    int it = 0;
    for (; it < maxit_; ++it) {
        stencil_.apply(p, Ap);
        const double alpha = rz / kernels::dot(p, Ap);
        kernels::axpy(alpha, p, x);
        kernels::axpy(-alpha, Ap, r);
        rel = std::sqrt(kernels::dot(r, r)) / bnorm;
        if (rel <= tol_) {
            ++it;
            break;
        }
        apply_preconditioner(r, z);
        const double rz_new = kernels::dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        const auto m = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
    }
    if (rel > tol_) {
        std::ostringstream msg;
        msg << "preconditioned CG did not converge: " << it << " iterations, relative residual " << rel;
        throw NumericalError(msg.str());
    }
    if (info) *info = {method(), it, rel};
}

Eigen::VectorXd BoxBilaplacianSolver::solve(const Eigen::VectorXd& b, SolveInfo* info) const {
    Eigen::VectorXd x(b.size());
    solve_into({b.data(), static_cast<std::size_t>(b.size())}, {x.data(), static_cast<std::size_t>(x.size())}, info);
    return x;
}

// ---------------------------------------------------------------------------

std::vector<int> interior_box_extent(const lattice::GridDomain& domain) {
    const std::size_t n = domain.interior_size();
    if (n == 0) return {};
    const int d = domain.dim();
    std::vector<int> lo(domain.point(domain.interior_point(0)).begin(), domain.point(domain.interior_point(0)).end());
    std::vector<int> hi(lo);
    for (std::size_t r = 1; r < n; ++r) {
        const auto p = domain.point(domain.interior_point(r));
        for (int a = 0; a < d; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    std::vector<int> extent(static_cast<std::size_t>(d));
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) {
        extent[a] = hi[a] - lo[a] + 1;
        total *= static_cast<std::size_t>(extent[a]);
    }
    if (total != n) return {};
    return extent;
}

std::unique_ptr<SpdSolver> make_solver(const SparseMatrix& A, const lattice::GridDomain& domain, double scale,
                                       const SolverOptions& options) {
    using Method = SolverOptions::Method;
    Method m = options.method;
    if (m == Method::Auto) {
        if (CholeskyFactor::predicted_factor_bytes(A) <= options.factor_memory_cap_bytes)
            m = Method::Direct;
        else if (!interior_box_extent(domain).empty())
            m = Method::BoxPCG;
        else
            m = Method::CG;
    }
    switch (m) {
        case Method::Direct: return std::make_unique<CholeskyFactor>(A);
        case Method::BoxPCG: {
            auto extent = interior_box_extent(domain);
            if (extent.empty()) throw DomainError("box solver requires R_h to be a full box");
            return std::make_unique<BoxBilaplacianSolver>(std::move(extent), scale, options.cg_tolerance,
                                                          options.cg_max_iterations);
        }
        case Method::CG: return std::make_unique<JacobiCG>(A, options.cg_tolerance, options.cg_max_iterations);
        case Method::Auto: break;
    }
    throw DomainError("make_solver: unknown method");
}

}  // namespace membrane
