#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "membrane/common.hpp"

namespace membrane::lattice {

/// Bounded continuum domain D (or V) described by an analytic membership test.
class Shape {
public:
    enum class Kind { Box, Ball, Implicit };

    /// Implicit shapes are `{x : level(x) <= 0}` inside the given bounding box.
    using LevelFunction = std::function<double(std::span<const double>)>;

    static Shape box(std::vector<double> lower, std::vector<double> upper);
    static Shape ball(std::vector<double> center, double radius);
    static Shape implicit(int dim, LevelFunction level, std::vector<double> bbox_lower, std::vector<double> bbox_upper,
                          std::string label = "implicit");

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] const std::vector<double>& lower() const { return lower_; }
    [[nodiscard]] const std::vector<double>& upper() const { return upper_; }
    [[nodiscard]] const std::vector<double>& center() const { return center_; }
    [[nodiscard]] double radius() const { return radius_; }
    [[nodiscard]] const std::string& label() const { return label_; }

    /// Closed-set membership. `slack` widens the set by an absolute amount and is
    /// only used by `classify` to absorb rounding of k*h.
    [[nodiscard]] bool contains(std::span<const double> x, double slack = 0.0) const;

    /// Axis-aligned bounding box (the box itself for Kind::Box).
    [[nodiscard]] std::vector<double> bbox_lower() const;
    [[nodiscard]] std::vector<double> bbox_upper() const;

private:
    Kind kind_ = Kind::Box;
    int dim_ = 0;
    std::vector<double> lower_, upper_;
    std::vector<double> center_;
    double radius_ = 0.0;
    LevelFunction level_;
    std::string label_;
};

/// Thomee's classification of V_h = closure(D) ∩ hZ^d.
enum class PointClass : std::uint8_t {
    Boundary,      ///< B_h = V_h \ R_h
    NearBoundary,  ///< B_h* = R_h \ R_h*
    DeepInterior,  ///< R_h*
};

const char* to_string(PointClass c);

/// Offsets of N(ξ) = {±e_i, ±e_i±e_j}, i.e. the support of the bilaplacian stencil minus the origin.
std::vector<LatticePoint> second_neighbourhood(int dim);

/// Lattice discretization of a shape with a complete classification.
///
/// Points are stored in lexicographic order of their integer coordinates
/// (first axis slowest). R_h rows are numbered in the same order.
class GridDomain {
public:
    GridDomain() = default;

    [[nodiscard]] const Shape& shape() const { return shape_; }
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] double h() const { return h_; }
    [[nodiscard]] double kappa() const { return 1.0 / (2.0 * dim_); }

    [[nodiscard]] std::size_t size() const { return classes_.size(); }
    [[nodiscard]] std::span<const int> point(std::size_t i) const {
        return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    [[nodiscard]] double coordinate(std::size_t i, int axis) const;
    [[nodiscard]] std::vector<double> position(std::size_t i) const;
    [[nodiscard]] PointClass point_class(std::size_t i) const { return classes_[i]; }

    /// Index into V_h of an integer lattice point, or -1 when it is not in V_h.
    [[nodiscard]] std::int64_t find(std::span<const int> k) const;

    /// |R_h| and the R_h <-> V_h maps.
    [[nodiscard]] std::size_t interior_size() const { return interior_.size(); }
    [[nodiscard]] std::size_t interior_point(std::size_t row) const { return interior_[row]; }
    [[nodiscard]] std::int64_t row_of(std::size_t i) const { return row_of_[i]; }
    [[nodiscard]] std::int64_t interior_row(std::span<const int> k) const {
        const auto i = find(k);
        return i < 0 ? -1 : row_of_[static_cast<std::size_t>(i)];
    }

    [[nodiscard]] std::size_t count(PointClass c) const;
    /// Set when h is so coarse that R_h is empty; not an error.
    [[nodiscard]] bool interior_empty() const { return interior_.empty(); }

    /// Integer bounding box of V_h (inclusive bounds).
    [[nodiscard]] const std::vector<int>& lattice_lower() const { return klo_; }
    [[nodiscard]] const std::vector<int>& lattice_upper() const { return khi_; }

    /// Scatter values given on R_h rows into a V_h-indexed vector (zero elsewhere).
    [[nodiscard]] std::vector<double> extend_from_interior(std::span<const double> rows) const;
    /// Gather R_h rows from a V_h-indexed vector.
    [[nodiscard]] std::vector<double> restrict_to_interior(std::span<const double> values) const;

    /// CSV with columns x_1..x_d,class.
    void write_csv(std::ostream& out) const;

    friend GridDomain classify(const Shape& shape, double h);

private:
    Shape shape_;
    int dim_ = 0;
    double h_ = 0.0;
    std::int64_t inverse_h_ = 0;  // N when h == 1/N exactly, else 0
    std::vector<int> coords_;
    std::vector<PointClass> classes_;
    std::vector<std::size_t> interior_;
    std::vector<std::int64_t> row_of_;
    std::vector<int> klo_, khi_;
    std::vector<std::int64_t> strides_;
    std::vector<std::int64_t> lookup_;  // dense over the bounding box
};

/// Discretize and classify. Throws DomainError for h <= 0 or an empty V_h
/// ("degenerate discretization"). An empty R_h is reported via interior_empty().
GridDomain classify(const Shape& shape, double h);

// ---------------------------------------------------------------------------
// Discrete operators

enum class OperatorVariant {
    Delta1,                 ///< Δ₁ = (1/2d) Σ_{y~x} (f(y) - f(x))
    DeltaH,                 ///< Δ_h, scaled by h^-2
    Bilaplacian,            ///< L_h = Δ_h², scaled by h^-4
    BilaplacianNormalized,  ///< Δ₁² = κ² h⁴ L_h
    Lh2,                    ///< L_h on R_h*, h² L_h on B_h*, 0 outside R_h
};

const char* to_string(OperatorVariant v);

/// Offset -> exact coefficient, before the h-power scaling.
struct Stencil {
    int dim = 0;
    std::vector<LatticePoint> offsets;
    std::vector<Rational> coefficients;
    int h_power = 0;  ///< result is multiplied by h^h_power

    [[nodiscard]] Rational coefficient(std::span<const int> offset) const;
    [[nodiscard]] Rational sum() const;
};

Stencil stencil_weights(OperatorVariant variant, int dim);

/// Pointwise stencil application on V_h, with the field extended by zero outside V_h.
/// `field` is indexed by V_h; the result is too (Lh2 is zero outside R_h).
std::vector<double> apply(OperatorVariant variant, std::span<const double> field, const GridDomain& domain);

// ---------------------------------------------------------------------------
// B₂* verification

struct B2StarWitness {
    std::size_t point = 0;  ///< V_h index of ξ ∈ B_h*
    int axis = 0;
    int direction = 1;      ///< +1 or -1
    int step = 0;           ///< ξ + step·h·e and ξ + (step+1)·h·e are both in B_h
};

struct B2StarReport {
    bool pass = true;
    int K = 4;
    std::size_t checked = 0;
    std::vector<B2StarWitness> witnesses;
    std::vector<std::size_t> failures;  ///< V_h indices of B_h* points without a witness
};

/// Axis-ray search for two consecutive B_h points within distance K·h of each ξ ∈ B_h*.
B2StarReport verify_b2star(const GridDomain& domain, int K = 4);

}  // namespace membrane::lattice
