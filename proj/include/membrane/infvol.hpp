#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "membrane/kernels.hpp"

namespace membrane::infvol {

/// μ(θ) = (1/d) Σ (1 − cos θ_i).
double mu(std::span<const double> theta);

/// Gauss–Legendre nodes and weights on [−1, 1] (cached, Newton iteration on the recurrence).
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussRule& gauss_legendre(int n);

struct Estimate {
    double value = 0.0;
    double error = 0.0;  ///< estimated absolute error
};

/// ∫_{[0,π]^d} μ(θ)^{-2} Π_i g_i(θ_i) dθ for d ≥ 5 with a separable weight.
///
/// The cube is split into dyadic shells [0,ρ]^d \ [0,ρ/2]^d, ρ = π 2^{-k}, k < depth,
/// each a union of 2^d − 1 subcubes carrying a tensor Gauss rule. The innermost
/// cube [0, π 2^{-depth}]^d uses μ ≈ ‖θ‖²/(2d), g_i ≈ g_i(0) and the exact
/// scaling of ∫‖θ‖^{-4}.
struct SeparableWeight {
    std::function<double(int axis, double t)> factor;
    /// Extra Gauss nodes needed on [a, b] along an axis (oscillation or decay scale).
    std::function<int(int axis, double a, double b)> extra_nodes;
    /// log of an upper bound of Π_i |g_i| over a subcube; subcubes below −70 are skipped.
    std::function<double(std::span<const double> lo, std::span<const double> hi)> log_sup;
    double value_at_origin = 1.0;  ///< Π_i g_i(0)
    double curvature = 0.0;        ///< |Π g(θ)/Π g(0) − 1| ≲ curvature·‖θ‖² near 0
};

struct QuadraturePlan {
    int base_nodes = 10;
    int depth = 12;
    double resolution = 1.0;  ///< scales every node count
    kernels::Execution exec = kernels::Execution::Parallel;
};

/// Value at the plan's resolution; error = |difference to a 1.5× finer rule| + inner-cube model error.
Estimate singular_cube_integral(int dim, const SeparableWeight& weight, const QuadraturePlan& plan = {});
/// One evaluation without the error estimate.
double singular_cube_sum(int dim, const SeparableWeight& weight, const QuadraturePlan& plan);

/// ∫_{[0,1]^d} ‖u‖^{-4} du (d ≥ 5), cached per d.
double unit_cube_inverse_quartic(int dim);

/// G(0,x) = (2π)^{-d} ∫_{[−π,π]^d} μ(θ)^{-2} e^{−i⟨x,θ⟩} dθ. Throws DomainError("integral diverges") for d ≤ 4.
/// The odd part vanishes identically under θ → −θ and is folded away exactly.
Estimate green_infinite_fourier(std::span<const int> x, const QuadraturePlan& plan = {});
/// G(x, y) through the difference vector.
Estimate green_infinite_fourier(std::span<const int> x, std::span<const int> y, const QuadraturePlan& plan = {});

struct WalkConfig {
    int dim = 5;
    std::uint64_t walks = 1'000'000;
    int max_steps = 200;
    int radius = 2;                 ///< targets are all x with ‖x‖_∞ ≤ radius
    std::uint64_t seed = 1;
    std::uint64_t batch_size = 10'000;
    double tail_tolerance = 0.1;    ///< absolute, in covariance units
};

struct WalkResult {
    int dim = 0;
    int radius = 0;
    int max_steps = 0;
    std::uint64_t walks = 0;
    std::vector<double> mean;        ///< per target, indexed by target_index
    std::vector<double> std_error;
    std::vector<double> return_frequency;  ///< P̂[S_m = 0], m = 0..M
    double c_hat = 0.0;              ///< fitted P[S_m = 0] ≈ ĉ m^{-d/2} (parity averaged)
    double tail_bound = 0.0;         ///< Σ_{m>M} (m+1) ĉ m^{-d/2}

    [[nodiscard]] std::size_t target_index(std::span<const int> x) const;
    [[nodiscard]] std::vector<int> target(std::size_t index) const;
    [[nodiscard]] std::size_t targets() const { return mean.size(); }
};

/// Monte Carlo of Σ_{m≤M} (m+1) 1{S_m = x} over simple random walks from 0.
/// Batches use independent streams keyed by (seed, batch); the reduction order is fixed.
/// Throws NumericalError when the tail bound exceeds the tolerance.
WalkResult walk_estimate(const WalkConfig& config, kernels::Execution exec = kernels::Execution::Parallel);

/// Σ_{m>M} (m+1) c m^{-d/2}.
double walk_tail_bound(int dim, int max_steps, double c);

struct Eta2Row {
    double radius = 0.0;
    Estimate green;
    double ratio = 0.0;  ///< G(0, r e_1) r^{d-4}
};

struct Eta2Trend {
    int dim = 0;
    std::vector<Eta2Row> rows;
    double spread = 0.0;  ///< (max − min)/mean of the ratio over the upper half of the radii
};

/// Throws NumericalError when a quadrature error exceeds 10% of the ratio scale.
Eta2Trend eta2_trend(int dim, const std::vector<int>& radii, const QuadraturePlan& plan = {});

/// Separable Gaussian test function f(x) = a exp(−‖x‖²/(2σ²)), f̂(θ) = a σ^d exp(−σ²‖θ‖²/2)
/// in the symmetric convention f̂(θ) = (2π)^{-d/2} ∫ e^{−i⟨x,θ⟩} f(x) dx.
struct SchwartzTest {
    std::string name = "gaussian";
    int dim = 5;
    double width = 1.0;
    double amplitude = 1.0;

    [[nodiscard]] double operator()(std::span<const double> x) const;
    [[nodiscard]] double transform(std::span<const double> theta) const;
    [[nodiscard]] SchwartzTest scaled(double factor) const;
};

SchwartzTest gaussian_test(int dim, double width = 1.0, double amplitude = 1.0);

/// Var(ψ_N, f) from the Fourier representation with f̂ in place of the lattice
/// transform; error = quadrature error + Poisson-summation budget for the replacement.
/// Throws DomainError for d ≤ 4 or N < 2, NumericalError when the budget exceeds 5% of the value.
Estimate scaling_variance(const SchwartzTest& f, int N, const QuadraturePlan& plan = {});

/// ‖(−Δ)^{-1} f‖² = ∫ ‖θ‖^{-4} |f̂(θ)|² dθ: closed form and radial quadrature.
double inv_laplacian_norm(const SchwartzTest& f);
double inv_laplacian_norm_numeric(const SchwartzTest& f);

/// |(2π)^{-d/2} N^{-d} Σ_{x∈Z^d} e^{−i⟨x/N,θ⟩} f(x/N) − f̂(θ)|, the lattice sum truncated where |f| < 1e-16.
double riemann_sum_error(const SchwartzTest& f, std::span<const double> theta, int N);

struct SineBoundReport {
    std::size_t samples = 0;
    std::size_t lower_violations = 0;  ///< ‖w‖^{-4} > N^{-4}(Σ sin²(w_i/N))^{-2}
    double c_hat = 0.0;                ///< smallest C making the upper bound hold on every sample
};

/// Uniform w in [−Nπ/2, Nπ/2]^d \ {0}, pooled over all N in the list.
SineBoundReport sine_bound_check(int dim, const std::vector<int>& N_list, std::size_t samples_per_N,
                                 std::uint64_t seed);

}  // namespace membrane::infvol
