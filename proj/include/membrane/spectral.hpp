#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "membrane/green.hpp"

namespace membrane::spectral {

/// Lowest eigenpairs of the h-scaled discrete bilaplacian L_h = κ⁻²h⁻⁴ A on R_h.
/// Eigenvectors are normalized in the discrete L² product h^d Σ u_i u_j.
struct SpectralBasis {
    const lattice::GridDomain* domain = nullptr;
    Eigen::VectorXd values;   ///< ascending
    Eigen::MatrixXd vectors;  ///< column j is u_j on R_h rows
    std::string method;
    double max_residual = 0.0;        ///< max_j ‖L_h u_j − λ_j u_j‖ in the discrete L² norm
    double orthonormality_error = 0.0;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(values.size()); }
    /// Discrete L² product h^d Σ a b.
    [[nodiscard]] double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
};

struct EigenOptions {
    std::size_t dense_cap = 3000;
    double tolerance = 1e-12;  ///< Ritz residual relative to the Ritz value of A⁻¹
    std::uint64_t seed = 1;
    int max_restarts = 6;
};

/// k smallest eigenpairs. Dense symmetric solver up to `dense_cap` unknowns,
/// shift-invert Lanczos with full reorthogonalization against `solver` above.
/// Throws NumericalError with diagnostics when Lanczos does not converge.
SpectralBasis eigendecompose(const green::PrecisionMatrix& precision, const SpdSolver& solver, std::size_t k,
                             const EigenOptions& options = {});

/// Largest eigenvalues of a symmetric operator, available as a black box. Returns
/// (values descending, Ritz vectors) of the top k; used with op = A⁻¹.
struct LanczosResult {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    int steps = 0;
    double max_ritz_residual = 0.0;
};
LanczosResult lanczos_largest(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op, std::size_t n,
                              std::size_t k, double tolerance, std::uint64_t seed, int max_restarts);

/// Least-squares slope of log λ_j against log j over j ∈ [first, last] (1-based, inclusive).
double weyl_fit(std::span<const double> values, std::size_t first, std::size_t last);
/// Default window j ∈ [10, k−10]; throws DomainError when k < 60.
double weyl_fit(std::span<const double> values);
/// λ_j ≈ C j^{4/d}: the fitted prefactor exp(mean(log λ_j − (4/d) log j)) over the window.
double weyl_prefactor(std::span<const double> values, int dim, std::size_t first, std::size_t last);

struct SobolevParams {
    int dim = 0;
    int l0 = 0;
    int l2 = 0;
    int l5 = 0;
    double s_threshold = 0.0;
};

/// l_m = ⌈(⌊d/2⌋ + m + 1)/4⌉, s_d = d/2 + 2(l_0 + l_5 − 1). Throws DomainError for d < 2.
SobolevParams s_threshold(int dim);

/// Σ_{j≤J} λ_j^{∓s/2} c_j² with sign = −1 for the H^{-s} norm (λ^{-s/2}).
double hs_norm(std::span<const double> coefficients, std::span<const double> values, double s, int sign = -1);

/// Partial sums S(J) = Σ_{j≤J} λ_j^{−s/2−1} ξ_j², J = 1..size.
std::vector<double> wiener_partial_sums(std::span<const double> values, std::span<const double> xi, double s);

struct WienerReport {
    double s = 0.0;
    std::vector<std::size_t> truncations;       ///< e.g. 50, 100, 200
    std::vector<double> mean_partial_sums;      ///< trial-averaged S(J) at the truncations
    std::vector<double> increment_ratios;       ///< (S(J₂)−S(J₁)) / (S(J₁)−S(J₀)) on consecutive doublings
    bool nondecreasing = true;                  ///< every trial's partial sums are nondecreasing
};

/// Trial-averaged partial sums of ‖ψ_D‖²_{−s} over i.i.d. normal coefficients.
WienerReport wiener_convergence_report(std::span<const double> values, double s, std::size_t trials,
                                       std::vector<std::size_t> truncations, std::uint64_t seed);

/// Var(ψ_h, f) = κ² h^{d+4} Σ G(x,y) f(x) f(y) over R_h (f on R_h rows).
double pairing_variance(const green::GreenTable& table, std::span<const double> f);
/// Same quantity through one solve: κ² h^{d+4} fᵀ A⁻¹ f.
double pairing_variance(const green::PrecisionMatrix& precision, const SpdSolver& solver, std::span<const double> f);

/// ‖ψ_h‖²_{−s} two ways on a full basis (|basis| = |R_h|) for a field φ on R_h:
/// via the definition ‖ψ_h‖²_{−s} = h^d wᵀ L_h^{−s/2} w and via Σ λ_j^{−s/2}(ψ_h,u_j)²,
/// where w = κ h^{(d+4)/2} h^{−d} φ is the density of ψ_h. Only even integer s.
struct NormIdentity {
    double by_definition = 0.0;
    double by_basis = 0.0;
};
NormIdentity psi_norm_identity(const SpectralBasis& basis, const green::PrecisionMatrix& precision,
                               const SpdSolver& solver, const Eigen::VectorXd& phi, int s);

/// Smallest eigenvalue of the Dirichlet Laplacian −Δ_h on R_h (h⁻² scaled).
double dirichlet_laplacian_min_eigenvalue(const lattice::GridDomain& domain);

}  // namespace membrane::spectral
