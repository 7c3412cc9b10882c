#include "membrane/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "membrane/sampler.hpp"

namespace membrane::spectral {

double SpectralBasis::inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return std::pow(domain->h(), domain->dim()) * a.dot(b);
}

LanczosResult lanczos_largest(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op, std::size_t n,
                              std::size_t k, double tolerance, std::uint64_t seed, int max_restarts) {
    if (k == 0 || k > n) throw DomainError("lanczos: need 1 <= k <= n");
    const auto N = static_cast<Eigen::Index>(n);
    std::size_t m = std::min(n, std::max<std::size_t>(2 * k + 50, 3 * k));
    std::ostringstream history;
    for (int attempt = 0; attempt <= max_restarts; ++attempt) {
        const auto M = static_cast<Eigen::Index>(m);
        Eigen::MatrixXd V(N, M);
        Eigen::VectorXd alpha(M), beta(M);
        Eigen::VectorXd v = sampler::standard_normal_stream(seed, static_cast<std::uint64_t>(attempt), n);
        v.normalize();
        V.col(0) = v;
        Eigen::Index steps = M;
        double last_beta = 0.0;
        for (Eigen::Index j = 0; j < M; ++j) {
            Eigen::VectorXd w = op(V.col(j));
            alpha[j] = V.col(j).dot(w);
            for (int pass = 0; pass < 2; ++pass) {
                const Eigen::VectorXd c = V.leftCols(j + 1).transpose() * w;
                w.noalias() -= V.leftCols(j + 1) * c;
            }
            const double b = w.norm();
            if (j + 1 == M) {
                last_beta = b;
                break;
            }
            if (b < 1e-14 * std::abs(alpha[j])) {
                steps = j + 1;
                last_beta = 0.0;
                break;
            }
            beta[j] = b;
            V.col(j + 1) = w / b;
        }
        if (static_cast<std::size_t>(steps) < k) throw NumericalError("lanczos: invariant subspace smaller than k");

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        tri.computeFromTridiagonal(alpha.head(steps), beta.head(steps - 1), Eigen::ComputeEigenvectors);
        if (tri.info() != Eigen::Success) throw NumericalError("lanczos: tridiagonal eigensolver failed");
        const Eigen::VectorXd& theta = tri.eigenvalues();   // ascending
        const Eigen::MatrixXd& S = tri.eigenvectors();

        LanczosResult out;
        out.steps = static_cast<int>(steps);
        out.values.resize(static_cast<Eigen::Index>(k));
        out.vectors.resize(N, static_cast<Eigen::Index>(k));
        bool converged = true;
        for (std::size_t i = 0; i < k; ++i) {
            const Eigen::Index col = steps - 1 - static_cast<Eigen::Index>(i);
            const double residual = last_beta * std::abs(S(steps - 1, col));
            out.max_ritz_residual = std::max(out.max_ritz_residual, residual / std::abs(theta[col]));
            if (residual > tolerance * std::abs(theta[col])) converged = false;
            out.values[static_cast<Eigen::Index>(i)] = theta[col];
            out.vectors.col(static_cast<Eigen::Index>(i)).noalias() = V.leftCols(steps) * S.col(col);
        }
        history << " [steps=" << steps << " max relative Ritz residual=" << out.max_ritz_residual << "]";
        if (converged || static_cast<std::size_t>(steps) == n) return out;
        m = std::min(n, m + m / 2 + 1);
    }
    throw NumericalError("lanczos: no convergence after restarts:" + history.str());
}

SpectralBasis eigendecompose(const green::PrecisionMatrix& precision, const SpdSolver& solver, std::size_t k,
                             const EigenOptions& options) {
    const auto& domain = *precision.domain;
    const std::size_t n = precision.size();
    if (k == 0 || k > n) throw DomainError("eigendecompose: need 1 <= k <= |R_h|");
    const int d = domain.dim();
    const double h = domain.h();
    const double to_continuum = 1.0 / (precision.scale * std::pow(h, 4));
    const double cell = std::pow(h, d);

    SpectralBasis basis;
    basis.domain = &domain;
    Eigen::MatrixXd U;
    if (n <= options.dense_cap) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(precision.matrix)};
        if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
        U = es.eigenvectors().leftCols(static_cast<Eigen::Index>(k));
        basis.method = "dense";
    } else {
        auto r = lanczos_largest([&](const Eigen::VectorXd& x) { return solver.solve(x); }, n, k, options.tolerance,
                                 options.seed, options.max_restarts);
        U = std::move(r.vectors);
        basis.method = "lanczos-shift-invert(" + std::to_string(r.steps) + " steps)";
    }

    basis.values.resize(static_cast<Eigen::Index>(k));
    for (Eigen::Index j = 0; j < U.cols(); ++j) {
        Eigen::VectorXd u = U.col(j);
        u /= std::sqrt(cell * u.squaredNorm());
        const Eigen::VectorXd Au = precision.matrix * u;
        const double lambda = u.dot(Au) / u.squaredNorm();
        basis.values[j] = lambda * to_continuum;
        const double residual = std::sqrt(cell * (Au - lambda * u).squaredNorm()) * to_continuum;
        basis.max_residual = std::max(basis.max_residual, residual);
        U.col(j) = u;
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < k; ++i) order[i] = static_cast<Eigen::Index>(i);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return basis.values[a] < basis.values[b]; });
    Eigen::VectorXd sorted(static_cast<Eigen::Index>(k));
    basis.vectors.resize(U.rows(), U.cols());
    for (std::size_t i = 0; i < k; ++i) {
        sorted[static_cast<Eigen::Index>(i)] = basis.values[order[i]];
        basis.vectors.col(static_cast<Eigen::Index>(i)) = U.col(order[i]);
    }
    basis.values = std::move(sorted);
    const Eigen::MatrixXd gram = cell * (basis.vectors.transpose() * basis.vectors);
    basis.orthonormality_error =
        (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    return basis;
}

double weyl_fit(std::span<const double> values, std::size_t first, std::size_t last) {
    if (first < 1 || last > values.size() || last < first + 2) throw DomainError("weyl_fit: window too small");
    std::vector<double> x, y;
    for (std::size_t j = first; j <= last; ++j) {
        x.push_back(std::log(static_cast<double>(j)));
        y.push_back(std::log(values[j - 1]));
    }
    return sampler::regression_slope(x, y);
}

double weyl_fit(std::span<const double> values) {
    if (values.size() < 60) throw DomainError("weyl_fit: window too small (need k >= 60)");
    return weyl_fit(values, 10, values.size() - 10);
}

double weyl_prefactor(std::span<const double> values, int dim, std::size_t first, std::size_t last) {
    if (first < 1 || last > values.size() || last < first) throw DomainError("weyl_prefactor: bad window");
    double acc = 0.0;
    for (std::size_t j = first; j <= last; ++j)
        acc += std::log(values[j - 1]) - 4.0 / dim * std::log(static_cast<double>(j));
    return std::exp(acc / static_cast<double>(last - first + 1));
}

SobolevParams s_threshold(int dim) {
    if (dim < 2) throw DomainError("s_threshold: d >= 2 required");
    const auto ceil4 = [](int v) { return (v + 3) / 4; };
    SobolevParams p;
    p.dim = dim;
    p.l0 = ceil4(dim / 2 + 1);
    p.l2 = ceil4(dim / 2 + 3);
    p.l5 = ceil4(dim / 2 + 6);
    p.s_threshold = dim / 2.0 + 2.0 * (p.l0 + p.l5 - 1);
    return p;
}

double hs_norm(std::span<const double> coefficients, std::span<const double> values, double s, int sign) {
    if (coefficients.size() > values.size()) throw DomainError("hs_norm: more coefficients than eigenvalues");
    if (sign != 1 && sign != -1) throw DomainError("hs_norm: sign must be +1 or -1");
    double acc = 0.0;
    for (std::size_t j = 0; j < coefficients.size(); ++j)
        acc += std::pow(values[j], sign * s / 2.0) * coefficients[j] * coefficients[j];
    return acc;
}

std::vector<double> wiener_partial_sums(std::span<const double> values, std::span<const double> xi, double s) {
    if (xi.size() > values.size()) throw DomainError("wiener_partial_sums: more coefficients than eigenvalues");
    std::vector<double> out(xi.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < xi.size(); ++j) {
        acc += std::pow(values[j], -s / 2.0 - 1.0) * xi[j] * xi[j];
        out[j] = acc;
    }
    return out;
}

WienerReport wiener_convergence_report(std::span<const double> values, double s, std::size_t trials,
                                       std::vector<std::size_t> truncations, std::uint64_t seed) {
    if (truncations.empty() || truncations.back() > values.size())
        throw DomainError("wiener_convergence_report: truncation beyond the basis");
    if (trials == 0) throw DomainError("wiener_convergence_report: trials must be positive");
    WienerReport report;
    report.s = s;
    report.truncations = truncations;
    report.mean_partial_sums.assign(truncations.size(), 0.0);
    const std::size_t J = truncations.back();
    for (std::size_t t = 0; t < trials; ++t) {
        const Eigen::VectorXd xi = sampler::standard_normal_stream(seed, t, J);
        const auto sums = wiener_partial_sums(values.first(J), {xi.data(), J}, s);
        for (std::size_t j = 1; j < J; ++j)
            if (sums[j] < sums[j - 1]) report.nondecreasing = false;
        for (std::size_t i = 0; i < truncations.size(); ++i)
            report.mean_partial_sums[i] += sums[truncations[i] - 1] / static_cast<double>(trials);
    }
    for (std::size_t i = 2; i < truncations.size(); ++i) {
        const double a = report.mean_partial_sums[i - 1] - report.mean_partial_sums[i - 2];
        const double b = report.mean_partial_sums[i] - report.mean_partial_sums[i - 1];
        report.increment_ratios.push_back(b / a);
    }
    return report;
}

namespace {

double pairing_scale(const lattice::GridDomain& domain) {
    const double kappa = domain.kappa();
    return kappa * kappa * std::pow(domain.h(), domain.dim() + 4);
}

}  // namespace

double pairing_variance(const green::GreenTable& table, std::span<const double> f) {
    const std::size_t n = table.size();
    if (f.size() != n) throw DomainError("pairing_variance: f must be given on R_h");
    double acc = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        if (f[x] == 0.0) continue;
        double row = 0.0;
        for (std::size_t y = 0; y < n; ++y)
            if (f[y] != 0.0) row += table.at(x, y) * f[y];
        acc += f[x] * row;
    }
    return pairing_scale(table.domain()) * acc;
}

double pairing_variance(const green::PrecisionMatrix& precision, const SpdSolver& solver, std::span<const double> f) {
    if (f.size() != precision.size()) throw DomainError("pairing_variance: f must be given on R_h");
    const Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(f.size()));
    const Eigen::VectorXd g = solver.solve(Eigen::VectorXd(fv));
    return pairing_scale(*precision.domain) * fv.dot(g);
}

NormIdentity psi_norm_identity(const SpectralBasis& basis, const green::PrecisionMatrix& precision,
                               const SpdSolver& solver, const Eigen::VectorXd& phi, int s) {
    const auto& domain = *precision.domain;
    if (basis.size() != precision.size()) throw DomainError("psi_norm_identity: needs the full basis");
    if (s % 2 != 0) throw DomainError("psi_norm_identity: s must be an even integer");
    const int d = domain.dim();
    const double h = domain.h();
    const double cell = std::pow(h, d);
    const double to_continuum = 1.0 / (precision.scale * std::pow(h, 4));
    const Eigen::VectorXd w = domain.kappa() * std::pow(h, (4.0 - d) / 2.0) * phi;

    Eigen::VectorXd v = w;
    for (int i = 0; i < std::abs(s) / 2; ++i) {
        if (s > 0)
            v = solver.solve(v) / to_continuum;
        else
            v = to_continuum * (precision.matrix * v);
    }
    NormIdentity out;
    out.by_definition = cell * w.dot(v);
    Eigen::VectorXd c(static_cast<Eigen::Index>(basis.size()));
    for (Eigen::Index j = 0; j < c.size(); ++j) c[j] = basis.inner(w, basis.vectors.col(j));
    out.by_basis = hs_norm({c.data(), static_cast<std::size_t>(c.size())},
                           {basis.values.data(), basis.size()}, s, -1);
    return out;
}

double dirichlet_laplacian_min_eigenvalue(const lattice::GridDomain& domain) {
    const double h = domain.h();
    const auto stencil = lattice::stencil_weights(lattice::OperatorVariant::DeltaH, domain.dim());
    const SparseMatrix L = assemble_stencil_matrix(domain, stencil, -1.0 / (h * h));
    const std::size_t n = domain.interior_size();
    if (n == 0) throw DomainError("dirichlet_laplacian_min_eigenvalue: empty R_h");
    if (n <= 3000) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(L), Eigen::EigenvaluesOnly);
        return es.eigenvalues()[0];
    }
    const CholeskyFactor factor(L);
    const auto r = lanczos_largest([&](const Eigen::VectorXd& x) { return factor.solve(x); }, n, 1, 1e-13, 7, 6);
    Eigen::VectorXd u = r.vectors.col(0);
    return u.dot(L * u) / u.squaredNorm();
}

}  // namespace membrane::spectral
