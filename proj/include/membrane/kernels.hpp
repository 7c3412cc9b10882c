#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "membrane/lattice.hpp"

namespace membrane::kernels {

/// Every data-parallel kernel has a plain serial reference path (kept for
/// testing and for bit-exact single-threaded runs) and an OpenMP path.
enum class Execution { Serial, Parallel };

/// Number of OpenMP threads in use (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

/// A constant-coefficient stencil applied on a dense axis-aligned box of
/// unknowns (row-major, first axis slowest), with zero extension outside.
class BoxStencil {
public:
    BoxStencil(std::vector<int> extent, const lattice::Stencil& stencil, double scale);

    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] const std::vector<int>& extent() const { return extent_; }
    [[nodiscard]] double diagonal() const { return diagonal_; }

    /// out = scale · S in. `in` and `out` must not alias.
    void apply(std::span<const double> in, std::span<double> out, Execution exec = Execution::Parallel) const;

private:
    void apply_serial(std::span<const double> in, std::span<double> out) const;
    void apply_parallel(std::span<const double> in, std::span<double> out) const;

    std::vector<int> extent_;
    std::size_t size_ = 0;
    int radius_ = 0;
    std::vector<LatticePoint> offsets_;
    std::vector<double> coeffs_;
    double diagonal_ = 0.0;
    // padded layout
    std::vector<int> padded_extent_;
    std::vector<std::int64_t> padded_strides_;
    std::vector<std::int64_t> linear_offsets_;
    mutable std::vector<double> padded_;
};

double dot(std::span<const double> a, std::span<const double> b, Execution exec = Execution::Parallel);
/// y += alpha x
void axpy(double alpha, std::span<const double> x, std::span<double> y, Execution exec = Execution::Parallel);
double max_abs(std::span<const double> a, Execution exec = Execution::Parallel);

}  // namespace membrane::kernels
