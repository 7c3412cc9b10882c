#include "membrane/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace membrane::sampler {

double FieldSample::at(std::span<const int> k) const {
    const auto row = domain->interior_row(k);
    return row < 0 ? 0.0 : values[row];
}

Eigen::VectorXd standard_normal_stream(std::uint64_t seed, std::uint64_t stream, std::size_t n) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) z[static_cast<Eigen::Index>(i)] = normal(rng);
    return z;
}

std::vector<FieldSample> sample(const green::PrecisionMatrix& precision, const SpdSolver& solver, std::uint64_t seed,
                                std::size_t count, std::uint64_t first_stream, kernels::Execution exec) {
    if (!solver.supports_sampling())
        throw DomainError("sampling requires a direct factorization, got solver '" + solver.method() + "'");
    const std::size_t n = precision.size();
    constexpr std::size_t block = 32;
    std::vector<FieldSample> out;
    out.reserve(count);
    for (std::size_t start = 0; start < count; start += block) {
        const std::size_t m = std::min(block, count - start);
        Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
        const auto fill = [&](std::size_t j) { Z.col(static_cast<Eigen::Index>(j)) = standard_normal_stream(seed, first_stream + start + j, n); };
        if (exec == kernels::Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
            for (std::size_t j = 0; j < m; ++j) fill(j);
        } else {
            for (std::size_t j = 0; j < m; ++j) fill(j);
        }
        const Eigen::MatrixXd X = solver.sampling_transform(Z);
        for (std::size_t j = 0; j < m; ++j) {
            FieldSample s;
            s.domain = precision.domain;
            s.values = X.col(static_cast<Eigen::Index>(j));
            s.seed = seed;
            s.stream = first_stream + start + j;
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {

void check_scale(const lattice::GridDomain& domain, int N) {
    if (domain.dim() != 2 && domain.dim() != 3) throw DomainError("interpolation is defined for d = 2, 3");
    if (N <= 0 || std::abs(domain.h() * N - 1.0) > 1e-12) throw DomainError("interpolation scale N must equal 1/h");
}

double prefactor_for(int dim, int N) {
    return 1.0 / (2.0 * dim) * std::pow(static_cast<double>(N), (dim - 4) / 2.0);
}

}  // namespace

InterpolatedField::InterpolatedField(const FieldSample& field, int N) : field_(&field), dim_(field.domain->dim()), N_(N) {
    check_scale(*field.domain, N);
}

double InterpolatedField::prefactor() const { return prefactor_for(dim_, N_); }

std::vector<VertexWeight> InterpolatedField::weights(const lattice::GridDomain& domain, std::span<const double> t, int N) {
    check_scale(domain, N);
    const int d = domain.dim();
    if (static_cast<int>(t.size()) != d) throw DomainError("point dimension does not match the domain");
    if (!domain.shape().contains(t, 1e-12)) throw DomainError("point lies outside the domain closure");

    LatticePoint base(d);
    std::vector<double> frac(d);
    const auto& hi = domain.lattice_upper();
    for (int i = 0; i < d; ++i) {
        const double p = t[i] * N;
        double a = std::floor(p);
        double f = p - a;
        if (f > 1.0 - 1e-12) {
            a += 1.0;
            f = 0.0;
        } else if (f < 1e-12) {
            f = 0.0;
        }
        base[i] = static_cast<int>(a);
        if (base[i] >= hi[i] && f == 0.0) {
            base[i] = hi[i] - 1;
            f = 1.0;
        }
        frac[i] = f;
    }
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });

    std::vector<VertexWeight> out;
    out.reserve(d + 1);
    LatticePoint v = base;
    out.push_back({v, 1.0 - frac[order[0]]});
    for (int k = 0; k < d; ++k) {
        v[order[k]] += 1;
        const double next = k + 1 < d ? frac[order[k + 1]] : 0.0;
        out.push_back({v, frac[order[k]] - next});
    }
    return out;
}

double InterpolatedField::operator()(std::span<const double> t) const {
    double acc = 0.0;
    for (const auto& w : weights(*field_->domain, t, N_))
        if (w.weight != 0.0) acc += w.weight * field_->at(w.vertex);
    return prefactor() * acc;
}

double rescaled_max(const FieldSample& field, int dim, int N) {
    if (field.domain->dim() != dim) throw DomainError("dimension mismatch");
    double m = 0.0;  // V_h \ R_h is never empty, where φ = 0
    for (Eigen::Index i = 0; i < field.values.size(); ++i) m = std::max(m, field.values[i]);
    return prefactor_for(dim, N) * m;
}

std::vector<std::size_t> interpolation_rows(const lattice::GridDomain& domain, std::span<const double> t, int N) {
    std::vector<std::size_t> rows;
    for (const auto& w : InterpolatedField::weights(domain, t, N)) {
        const auto r = domain.interior_row(w.vertex);
        if (r >= 0 && w.weight != 0.0) rows.push_back(static_cast<std::size_t>(r));
    }
    return rows;
}

double exact_increment_variance(const green::GreenTable& table, std::span<const double> t, std::span<const double> s,
                                int N) {
    const auto& domain = table.domain();
    std::map<std::size_t, double> combo;
    for (const auto& w : InterpolatedField::weights(domain, t, N)) {
        const auto r = domain.interior_row(w.vertex);
        if (r >= 0) combo[static_cast<std::size_t>(r)] += w.weight;
    }
    for (const auto& w : InterpolatedField::weights(domain, s, N)) {
        const auto r = domain.interior_row(w.vertex);
        if (r >= 0) combo[static_cast<std::size_t>(r)] -= w.weight;
    }
    double var = 0.0;
    for (const auto& [ra, wa] : combo) {
        if (wa == 0.0) continue;
        for (const auto& [rb, wb] : combo) {
            if (wb == 0.0) continue;
            if (!table.has_column(ra) && !table.has_column(rb))
                throw DomainError("covariance table lacks the columns needed for this pair");
            var += wa * wb * table.at(ra, rb);
        }
    }
    const double c = prefactor_for(domain.dim(), N);
    return c * c * std::max(var, 0.0);
}

MomentStudy moment_study(green::GreenTable& table, const green::PrecisionMatrix& precision, const SpdSolver& solver,
                         int N, std::size_t pairs, std::uint64_t seed, double min_distance, double max_distance,
                         double margin) {
    const auto& domain = table.domain();
    const int d = domain.dim();
    if (!(min_distance > 0.0 && max_distance > min_distance)) throw DomainError("invalid distance range");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto lo = domain.shape().bbox_lower();
    const auto hi = domain.shape().bbox_upper();

    MomentStudy study;
    std::vector<double> t(d), s(d), dir(d), probe(d);
    auto inside = [&](const std::vector<double>& p) {
        if (!domain.shape().contains(p)) return false;
        if (margin <= 0.0) return true;
        probe = p;
        for (int i = 0; i < d; ++i) {
            for (double sign : {-1.0, 1.0}) {
                probe[i] = p[i] + sign * margin;
                if (!domain.shape().contains(probe)) return false;
            }
            probe[i] = p[i];
        }
        return true;
    };
    std::size_t attempts = 0;
    while (study.points.size() < pairs) {
        if (++attempts > 1000 * pairs + 1000) throw DomainError("could not place pairs inside the domain");
        for (int i = 0; i < d; ++i) t[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
        if (!inside(t)) continue;
        double norm = 0.0;
        for (int i = 0; i < d; ++i) {
            dir[i] = normal(rng);
            norm += dir[i] * dir[i];
        }
        norm = std::sqrt(norm);
        const double r = min_distance * std::pow(max_distance / min_distance, unit(rng));
        for (int i = 0; i < d; ++i) s[i] = t[i] + r * dir[i] / norm;
        if (!inside(s)) continue;

        auto rows = interpolation_rows(domain, t, N);
        const auto more = interpolation_rows(domain, s, N);
        rows.insert(rows.end(), more.begin(), more.end());
        if (table.mode() == green::GreenTable::Mode::Columns) table.ensure_columns(precision, solver, rows);
        const double v = exact_increment_variance(table, t, s, N);
        if (v <= 0.0) continue;
        study.points.push_back({r, v});
    }
    std::vector<double> x, y;
    for (const auto& p : study.points) {
        x.push_back(std::log(p.distance));
        y.push_back(std::log(p.variance));
    }
    study.fitted_exponent = regression_slope(x, y);
    return study;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DomainError("KS distance needs two nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        best = std::max(best, std::abs(i / na - j / nb));
    }
    return best;
}

double regression_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("regression needs at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw DomainError("regression abscissae are constant");
    return sxy / sxx;
}

}  // namespace membrane::sampler
