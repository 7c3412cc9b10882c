#include <algorithm>
#include <cmath>

#include "membrane/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace membrane::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

BoxStencil::BoxStencil(std::vector<int> extent, const lattice::Stencil& stencil, double scale)
    : extent_(std::move(extent)) {
    const int d = static_cast<int>(extent_.size());
    if (d != stencil.dim) throw DomainError("BoxStencil: dimension mismatch");
    size_ = 1;
    for (int e : extent_) {
        if (e < 1) throw DomainError("BoxStencil: empty box");
        size_ *= static_cast<std::size_t>(e);
    }
    offsets_ = stencil.offsets;
    for (std::size_t s = 0; s < offsets_.size(); ++s) {
        coeffs_.push_back(stencil.coefficients[s].value() * scale);
        bool centre = true;
        for (int v : offsets_[s]) {
            radius_ = std::max(radius_, std::abs(v));
            centre = centre && v == 0;
        }
        if (centre) diagonal_ = coeffs_.back();
    }
    padded_extent_.resize(d);
    padded_strides_.assign(d, 1);
    std::int64_t total = 1;
    for (int a = d - 1; a >= 0; --a) {
        padded_extent_[a] = extent_[a] + 2 * radius_;
        padded_strides_[a] = total;
        total *= padded_extent_[a];
    }
    for (const auto& off : offsets_) {
        std::int64_t lin = 0;
        for (int a = 0; a < d; ++a) lin += off[a] * padded_strides_[a];
        linear_offsets_.push_back(lin);
    }
    padded_.assign(static_cast<std::size_t>(total), 0.0);
}

void BoxStencil::apply(std::span<const double> in, std::span<double> out, Execution exec) const {
    if (in.size() != size_ || out.size() != size_) throw DomainError("BoxStencil::apply: size mismatch");
    if (exec == Execution::Serial)
        apply_serial(in, out);
    else
        apply_parallel(in, out);
}

// Reference: explicit multi-index arithmetic with bounds checks, no padding.
void BoxStencil::apply_serial(std::span<const double> in, std::span<double> out) const {
    const int d = static_cast<int>(extent_.size());
    std::vector<int> idx(d, 0), q(d);
    for (std::size_t flat = 0; flat < size_; ++flat) {
        double acc = 0.0;
        for (std::size_t s = 0; s < offsets_.size(); ++s) {
            bool inside = true;
            std::size_t lin = 0;
            for (int a = 0; a < d; ++a) {
                q[a] = idx[a] + offsets_[s][a];
                if (q[a] < 0 || q[a] >= extent_[a]) {
                    inside = false;
                    break;
                }
                lin = lin * static_cast<std::size_t>(extent_[a]) + static_cast<std::size_t>(q[a]);
            }
            if (inside) acc += coeffs_[s] * in[lin];
        }
        out[flat] = acc;
        for (int a = d - 1; a >= 0; --a) {
            if (++idx[a] < extent_[a]) break;
            idx[a] = 0;
        }
    }
}

// Copy into a zero-padded buffer, then a branch-free sweep with linear offsets.
// Rows along the last axis are contiguous in both layouts.
void BoxStencil::apply_parallel(std::span<const double> in, std::span<double> out) const {
    const int d = static_cast<int>(extent_.size());
    const int row = extent_[d - 1];
    const auto rows = static_cast<std::int64_t>(size_ / static_cast<std::size_t>(row));
    const auto r = radius_;
    const auto nterms = offsets_.size();
    double* padded = padded_.data();
    const double* coeffs = coeffs_.data();
    const std::int64_t* lin = linear_offsets_.data();

    auto padded_base = [&](std::int64_t rowIndex) {
        std::int64_t rem = rowIndex, base = 0;
        for (int a = d - 2; a >= 0; --a) {
            const std::int64_t i = rem % extent_[a];
            rem /= extent_[a];
            base += (i + r) * padded_strides_[a];
        }
        return base + r;
    };

#pragma omp parallel
    {
#pragma omp for schedule(static)
        for (std::int64_t k = 0; k < rows; ++k) {
            const std::int64_t base = padded_base(k);
            std::copy_n(in.data() + k * row, row, padded + base);
        }
#pragma omp for schedule(static)
        for (std::int64_t k = 0; k < rows; ++k) {
            const std::int64_t base = padded_base(k);
            double* o = out.data() + k * row;
            for (int j = 0; j < row; ++j) o[j] = 0.0;
            for (std::size_t s = 0; s < nterms; ++s) {
                const double c = coeffs[s];
                const double* src = padded + base + lin[s];
                for (int j = 0; j < row; ++j) o[j] += c * src[j];
            }
        }
    }
}

double dot(std::span<const double> a, std::span<const double> b, Execution exec) {
    const auto n = static_cast<std::int64_t>(a.size());
    double acc = 0.0;
    if (exec == Execution::Serial) {
        for (std::int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
        return acc;
    }
#pragma omp parallel for reduction(+ : acc) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y, Execution exec) {
    const auto n = static_cast<std::int64_t>(x.size());
    if (exec == Execution::Serial) {
        for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs(std::span<const double> a, Execution exec) {
    const auto n = static_cast<std::int64_t>(a.size());
    double m = 0.0;
    if (exec == Execution::Serial) {
        for (std::int64_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i]));
        return m;
    }
#pragma omp parallel for reduction(max : m) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

}  // namespace membrane::kernels
