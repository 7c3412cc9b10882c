#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "membrane/green.hpp"
#include "membrane/kernels.hpp"

namespace membrane::sampler {

/// One draw of the membrane model on R_h; φ ≡ 0 outside R_h.
struct FieldSample {
    const lattice::GridDomain* domain = nullptr;
    Eigen::VectorXd values;  ///< indexed by R_h row
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    /// φ at an integer lattice point (0 outside R_h).
    [[nodiscard]] double at(std::span<const int> k) const;
};

/// Standard normal vector of length n for stream `stream` under `seed`.
/// Streams are independent of thread count and of each other.
Eigen::VectorXd standard_normal_stream(std::uint64_t seed, std::uint64_t stream, std::size_t n);

/// `count` independent N(0, A⁻¹) samples, streams first_stream .. first_stream+count-1.
/// Requires a direct factorization (solver.supports_sampling()).
std::vector<FieldSample> sample(const green::PrecisionMatrix& precision, const SpdSolver& solver, std::uint64_t seed,
                                std::size_t count, std::uint64_t first_stream = 0,
                                kernels::Execution exec = kernels::Execution::Parallel);

/// A lattice vertex with its barycentric weight.
struct VertexWeight {
    LatticePoint vertex;
    double weight = 0.0;
};

/// Simplex (Freudenthal) interpolation of a lattice field at scale N on the box
/// closure: Ψ_N(t) = κ N^{(d-4)/2} Σ w_v φ_v, d ∈ {2,3}.
class InterpolatedField {
public:
    InterpolatedField(const FieldSample& field, int N);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int N() const { return N_; }
    [[nodiscard]] double prefactor() const;

    /// Throws DomainError when t lies outside the domain closure.
    [[nodiscard]] double operator()(std::span<const double> t) const;

    /// Vertices and weights of the simplex containing N·t. Ties between
    /// fractional parts take the lower axis first; on the upper face of the
    /// lattice box the interior simplex is used (limit by continuity).
    static std::vector<VertexWeight> weights(const lattice::GridDomain& domain, std::span<const double> t, int N);

private:
    const FieldSample* field_;
    int dim_;
    int N_;
};

/// κ N^{(d-4)/2} max_{x ∈ V_h} φ_x (boundary values are 0) = sup_t Ψ_N(t).
double rescaled_max(const FieldSample& field, int dim, int N);

/// R_h rows of the interpolation vertices of t (those whose G columns are needed).
std::vector<std::size_t> interpolation_rows(const lattice::GridDomain& domain, std::span<const double> t, int N);

/// E|Ψ_N(t) − Ψ_N(s)|² from the covariance table, no Monte Carlo.
double exact_increment_variance(const green::GreenTable& table, std::span<const double> t, std::span<const double> s,
                                int N);

struct IncrementPoint {
    double distance = 0.0;
    double variance = 0.0;
};

struct MomentStudy {
    std::vector<IncrementPoint> points;
    double fitted_exponent = 0.0;  ///< slope of log E|ΔΨ|² against log ‖t−s‖
};

/// Random pairs with ‖t−s‖ log-uniform in [min_distance, max_distance]; both points lie
/// at least `margin` inside the domain along every axis. Columns are solved on demand
/// when the table is in column mode.
MomentStudy moment_study(green::GreenTable& table, const green::PrecisionMatrix& precision, const SpdSolver& solver,
                         int N, std::size_t pairs, std::uint64_t seed, double min_distance, double max_distance,
                         double margin = 0.0);

/// Two-sample Kolmogorov–Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Least-squares slope of y against x.
double regression_slope(std::span<const double> x, std::span<const double> y);

}  // namespace membrane::sampler
