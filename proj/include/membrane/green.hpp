#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "membrane/lattice.hpp"
#include "membrane/solvers.hpp"

namespace membrane::green {

/// Precision of the membrane model on R_h: the quadratic form of
/// H(φ) = ½ Σ |Δ₁φ|² with φ ≡ 0 outside R_h, i.e. κ²·(bilaplacian stencil)
/// restricted to R_h × R_h.
struct PrecisionMatrix {
    const lattice::GridDomain* domain = nullptr;
    SparseMatrix matrix;
    double scale = 0.0;  ///< κ², the factor applied to the integer stencil

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
};

/// Throws DomainError when R_h is empty.
PrecisionMatrix assemble_precision(const lattice::GridDomain& domain);

/// Factorization (or iterative fallback) for a precision matrix.
std::unique_ptr<SpdSolver> make_precision_solver(const PrecisionMatrix& precision, const SolverOptions& options = {});

struct GreenColumn {
    std::size_t source_row = 0;
    Eigen::VectorXd values;  ///< G(x, ·) on R_h rows
    double residual = 0.0;   ///< ‖A g − δ_x‖_∞
};

/// Solve Δ₁² G(x, ·) = δ_x on R_h with zero extension. Throws DomainError if
/// x ∉ R_h and NumericalError if the residual exceeds `max_residual`.
GreenColumn solve_green_column(const PrecisionMatrix& precision, const SpdSolver& solver, std::size_t row,
                               double max_residual = 1e-8);
GreenColumn solve_green_column(const PrecisionMatrix& precision, const SpdSolver& solver,
                               const LatticePoint& x, double max_residual = 1e-8);

/// Covariance values G(x, y) of the membrane model, either as a full dense
/// matrix or a set of solved columns. Entries involving points outside R_h are 0.
class GreenTable {
public:
    enum class Mode { Dense, Columns };

    GreenTable() = default;
    GreenTable(const lattice::GridDomain& domain, Eigen::MatrixXd dense, double max_residual);
    explicit GreenTable(const lattice::GridDomain& domain);

    [[nodiscard]] Mode mode() const { return mode_; }
    [[nodiscard]] const lattice::GridDomain& domain() const { return *domain_; }
    [[nodiscard]] std::size_t size() const { return domain_->interior_size(); }
    [[nodiscard]] double max_residual() const { return max_residual_; }

    /// G between R_h rows. In column mode one of the two rows must have been solved.
    [[nodiscard]] double at(std::size_t row_x, std::size_t row_y) const;
    /// G between arbitrary lattice points, zero outside R_h.
    [[nodiscard]] double at(std::span<const int> x, std::span<const int> y) const;
    [[nodiscard]] bool has_column(std::size_t row) const;
    [[nodiscard]] const Eigen::MatrixXd& dense() const { return dense_; }

    void add_column(GreenColumn column);
    /// Solve any of `rows` not yet present.
    void ensure_columns(const PrecisionMatrix& precision, const SpdSolver& solver, const std::vector<std::size_t>& rows);

    /// max |G(x,y) − G(y,x)| over available pairs.
    [[nodiscard]] double asymmetry() const;

    /// Raw little-endian float64 array (row-major |R_h|×|R_h| in dense mode,
    /// columns in the listed order otherwise) plus a JSON sidecar.
    void write(const std::filesystem::path& raw_path, const std::filesystem::path& meta_path,
               const std::string& domain_spec) const;

private:
    const lattice::GridDomain* domain_ = nullptr;
    Mode mode_ = Mode::Columns;
    Eigen::MatrixXd dense_;
    std::map<std::size_t, Eigen::VectorXd> columns_;
    double max_residual_ = 0.0;
};

/// All columns against one factorization. Throws DomainError when |R_h| exceeds `dense_cap`
/// (use selected columns instead) and NumericalError if the result is not symmetric to 1e-10.
GreenTable green_full(const PrecisionMatrix& precision, const SpdSolver& solver, std::size_t dense_cap = 20000);

/// Fitted constants of the covariance bounds on a box of scale N = 1/h.
struct BoundsReport {
    int dim = 0;
    double N = 0.0;
    double sup_green = 0.0;            ///< sup |G|
    double green_constant = 0.0;       ///< sup |G| / N^{4-d}
    double sup_gradient = 0.0;         ///< sup ‖∇_x G‖
    double gradient_constant = 0.0;    ///< sup ‖∇_x G‖ / N^{3-d}
    double mixed_constant = 0.0;       ///< sup ‖∇_x∇_y G‖ / bound(x,y)
    double increment_variance = 0.0;   ///< sup_z,i E[(φ_{z+e_i} − φ_z)²]
    double increment_constant = 0.0;   ///< increment_variance / (log N in d=2, 1 in d=3)
    std::vector<std::string> violations;
};

BoundsReport check_bounds(const GreenTable& table);

/// Whether consecutive fitted constants stay within a factor 2 of each other.
bool fitted_constants_stable(const std::vector<double>& constants, double factor = 2.0);

}  // namespace membrane::green
