#include "membrane/green.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace membrane::green {

PrecisionMatrix assemble_precision(const lattice::GridDomain& domain) {
    if (domain.interior_empty()) throw DomainError("assemble_precision: R_h is empty");
    PrecisionMatrix P;
    P.domain = &domain;
    P.scale = domain.kappa() * domain.kappa();
    P.matrix = assemble_stencil_matrix(
        domain, lattice::stencil_weights(lattice::OperatorVariant::Bilaplacian, domain.dim()), P.scale);
    return P;
}

std::unique_ptr<SpdSolver> make_precision_solver(const PrecisionMatrix& precision, const SolverOptions& options) {
    return make_solver(precision.matrix, *precision.domain, precision.scale, options);
}

GreenColumn solve_green_column(const PrecisionMatrix& precision, const SpdSolver& solver, std::size_t row,
                               double max_residual) {
    const std::size_t n = precision.size();
    if (row >= n) throw DomainError("solve_green_column: source point is not in R_h");
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    delta[static_cast<Eigen::Index>(row)] = 1.0;
    GreenColumn col;
    col.source_row = row;
    col.values = solver.solve(delta);
    col.residual = (precision.matrix * col.values - delta).lpNorm<Eigen::Infinity>();
    if (!(col.residual <= max_residual))
        throw NumericalError("solve_green_column: residual " + std::to_string(col.residual) + " exceeds tolerance");
    return col;
}

GreenColumn solve_green_column(const PrecisionMatrix& precision, const SpdSolver& solver, const LatticePoint& x,
                               double max_residual) {
    if (static_cast<int>(x.size()) != precision.domain->dim()) throw DomainError("solve_green_column: dimension mismatch");
    const auto row = precision.domain->interior_row(x);
    if (row < 0) throw DomainError("solve_green_column: source point is not in R_h");
    return solve_green_column(precision, solver, static_cast<std::size_t>(row), max_residual);
}

// ---------------------------------------------------------------------------

GreenTable::GreenTable(const lattice::GridDomain& domain, Eigen::MatrixXd dense, double max_residual)
    : domain_(&domain), mode_(Mode::Dense), dense_(std::move(dense)), max_residual_(max_residual) {}

GreenTable::GreenTable(const lattice::GridDomain& domain) : domain_(&domain), mode_(Mode::Columns) {}

bool GreenTable::has_column(std::size_t row) const {
    return mode_ == Mode::Dense ? row < size() : columns_.contains(row);
}

double GreenTable::at(std::size_t row_x, std::size_t row_y) const {
    if (mode_ == Mode::Dense) return dense_(static_cast<Eigen::Index>(row_y), static_cast<Eigen::Index>(row_x));
    if (auto it = columns_.find(row_x); it != columns_.end()) return it->second[static_cast<Eigen::Index>(row_y)];
    if (auto it = columns_.find(row_y); it != columns_.end()) return it->second[static_cast<Eigen::Index>(row_x)];
    throw DomainError("GreenTable::at: missing table entries (neither column solved)");
}

double GreenTable::at(std::span<const int> x, std::span<const int> y) const {
    const auto rx = domain_->interior_row(x);
    const auto ry = domain_->interior_row(y);
    if (rx < 0 || ry < 0) return 0.0;
    return at(static_cast<std::size_t>(rx), static_cast<std::size_t>(ry));
}

void GreenTable::add_column(GreenColumn column) {
    if (mode_ == Mode::Dense) return;
    max_residual_ = std::max(max_residual_, column.residual);
    columns_[column.source_row] = std::move(column.values);
}

void GreenTable::ensure_columns(const PrecisionMatrix& precision, const SpdSolver& solver,
                                const std::vector<std::size_t>& rows) {
    if (mode_ == Mode::Dense) return;
    std::vector<std::size_t> missing;
    for (auto r : rows)
        if (!columns_.contains(r) && std::find(missing.begin(), missing.end(), r) == missing.end()) missing.push_back(r);
    if (missing.empty()) return;
    const auto n = static_cast<Eigen::Index>(precision.size());
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(missing.size()));
    for (std::size_t k = 0; k < missing.size(); ++k)
        rhs(static_cast<Eigen::Index>(missing[k]), static_cast<Eigen::Index>(k)) = 1.0;
    const Eigen::MatrixXd X = solver.solve(rhs);
    const double residual = (precision.matrix * X - rhs).lpNorm<Eigen::Infinity>();
    if (!(residual <= 1e-8))
        throw NumericalError("ensure_columns: residual " + std::to_string(residual) + " exceeds tolerance");
    for (std::size_t k = 0; k < missing.size(); ++k)
        add_column({missing[k], X.col(static_cast<Eigen::Index>(k)), residual});
}

double GreenTable::asymmetry() const {
    double worst = 0.0;
    if (mode_ == Mode::Dense) {
        worst = (dense_ - dense_.transpose()).cwiseAbs().maxCoeff();
    } else {
        for (const auto& [a, ca] : columns_)
            for (const auto& [b, cb] : columns_)
                worst = std::max(worst, std::abs(ca[static_cast<Eigen::Index>(b)] - cb[static_cast<Eigen::Index>(a)]));
    }
    return worst;
}

void GreenTable::write(const std::filesystem::path& raw_path, const std::filesystem::path& meta_path,
                       const std::string& domain_spec) const {
    static_assert(std::endian::native == std::endian::little, "raw export assumes a little-endian host");
    std::ofstream raw(raw_path, std::ios::binary);
    if (!raw) throw ConfigError("cannot open " + raw_path.string());
    const std::size_t n = size();
    std::vector<std::size_t> order;
    if (mode_ == Mode::Dense) {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = dense_;
        raw.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    } else {
        for (const auto& [row, values] : columns_) {
            order.push_back(row);
            raw.write(reinterpret_cast<const char*>(values.data()),
                      static_cast<std::streamsize>(values.size() * sizeof(double)));
        }
    }
    nlohmann::json meta;
    meta["format"] = "float64-le";
    meta["layout"] = mode_ == Mode::Dense ? "row-major, rows and columns in lexicographic R_h order"
                                          : "one block of |R_h| values per solved column, in 'columns' order";
    meta["rows"] = n;
    meta["cols"] = mode_ == Mode::Dense ? n : order.size();
    meta["dimension"] = domain_->dim();
    meta["h"] = domain_->h();
    meta["domain"] = nlohmann::json::parse(domain_spec.empty() ? "null" : domain_spec);
    meta["max_residual"] = max_residual_;
    meta["asymmetry"] = asymmetry();
    if (!order.empty()) {
        nlohmann::json cols = nlohmann::json::array();
        for (auto r : order) {
            const auto p = domain_->point(domain_->interior_point(r));
            cols.push_back({{"row", r}, {"point", std::vector<int>(p.begin(), p.end())}});
        }
        meta["columns"] = cols;
    }
    std::ofstream(meta_path) << meta.dump(2) << '\n';
}

GreenTable green_full(const PrecisionMatrix& precision, const SpdSolver& solver, std::size_t dense_cap) {
    const std::size_t n = precision.size();
    if (n > dense_cap)
        throw DomainError("green_full: |R_h| = " + std::to_string(n) + " exceeds the dense cap of " +
                          std::to_string(dense_cap) + "; use selected columns instead");
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd G(N, N);
    double residual = 0.0;
    constexpr Eigen::Index block = 256;
    for (Eigen::Index start = 0; start < N; start += block) {
        const Eigen::Index w = std::min(block, N - start);
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(N, w);
        for (Eigen::Index k = 0; k < w; ++k) rhs(start + k, k) = 1.0;
        G.middleCols(start, w) = solver.solve(rhs);
        residual = std::max(residual, (precision.matrix * G.middleCols(start, w) - rhs).lpNorm<Eigen::Infinity>());
    }
    if (!(residual <= 1e-8)) throw NumericalError("green_full: residual " + std::to_string(residual) + " exceeds 1e-8");
    GreenTable table(*precision.domain, std::move(G), residual);
    const double scale = table.dense().cwiseAbs().maxCoeff();
    if (table.asymmetry() > 1e-10 * scale) throw NumericalError("green_full: table is not symmetric to 1e-10");
    return table;
}

// ---------------------------------------------------------------------------

BoundsReport check_bounds(const GreenTable& table) {
    const auto& dom = table.domain();
    const int d = dom.dim();
    BoundsReport rep;
    rep.dim = d;
    rep.N = 1.0 / dom.h();
    const double N = rep.N;
    const std::size_t n = table.size();
    const std::size_t nv = dom.size();

    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) rep.sup_green = std::max(rep.sup_green, std::abs(table.at(a, b)));
    for (std::size_t a = 0; a < n; ++a)
        if (!(table.at(a, a) > 0.0)) rep.violations.push_back("non-positive diagonal at row " + std::to_string(a));

    // Zero-extended lookups over V_h ⊇ R_h ± e_i.
    std::vector<int> xp(static_cast<std::size_t>(d)), yp(static_cast<std::size_t>(d));
    auto G = [&](std::span<const int> x, std::span<const int> y) { return table.at(x, y); };

    for (std::size_t ix = 0; ix < nv; ++ix) {
        const auto x = dom.point(ix);
        for (std::size_t iy = 0; iy < nv; ++iy) {
            const auto y = dom.point(iy);
            const double gxy = G(x, y);
            double grad2 = 0.0;
            for (int i = 0; i < d; ++i) {
                xp.assign(x.begin(), x.end());
                ++xp[i];
                const double di = G(xp, y) - gxy;
                grad2 += di * di;
            }
            rep.sup_gradient = std::max(rep.sup_gradient, std::sqrt(grad2));
            if (d == 2 || d == 3) {
                double mixed2 = 0.0;
                for (int i = 0; i < d; ++i) {
                    xp.assign(x.begin(), x.end());
                    ++xp[i];
                    for (int j = 0; j < d; ++j) {
                        yp.assign(y.begin(), y.end());
                        ++yp[j];
                        const double m = G(xp, yp) - G(xp, y) - G(x, yp) + gxy;
                        mixed2 += m * m;
                    }
                }
                double dist = 0.0;
                for (int a = 0; a < d; ++a) dist += static_cast<double>((x[a] - y[a]) * (x[a] - y[a]));
                dist = std::sqrt(dist);
                const double bound = d == 2 ? std::log(1.0 + N * N / ((dist + 1.0) * (dist + 1.0))) : 1.0;
                rep.mixed_constant = std::max(rep.mixed_constant, std::sqrt(mixed2) / bound);
            }
        }
        // E[(φ_{z+e_i} − φ_z)²] = G(z+e,z+e) − 2G(z,z+e) + G(z,z)
        for (int i = 0; i < d; ++i) {
            xp.assign(x.begin(), x.end());
            ++xp[i];
            const double v = G(xp, xp) - 2.0 * G(x, xp) + G(x, x);
            rep.increment_variance = std::max(rep.increment_variance, v);
        }
    }
    rep.green_constant = rep.sup_green / std::pow(N, 4 - d);
    rep.gradient_constant = rep.sup_gradient / std::pow(N, 3 - d);
    rep.increment_constant = rep.increment_variance / (d == 2 ? std::log(N) : 1.0);
    if (!std::isfinite(rep.green_constant) || !std::isfinite(rep.mixed_constant))
        rep.violations.push_back("non-finite fitted constant");
    return rep;
}

bool fitted_constants_stable(const std::vector<double>& constants, double factor) {
    for (std::size_t i = 1; i < constants.size(); ++i) {
        const double r = constants[i] / constants[i - 1];
        if (!(r >= 1.0 / factor && r <= factor)) return false;
    }
    return true;
}

}  // namespace membrane::green
