#include "membrane/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace membrane {

std::string to_string(const Rational& r) {
    if (r.den == 1) return std::to_string(r.num);
    return std::to_string(r.num) + "/" + std::to_string(r.den);
}

}  // namespace membrane

namespace membrane::lattice {

Shape Shape::box(std::vector<double> lower, std::vector<double> upper) {
    if (lower.empty() || lower.size() != upper.size()) throw DomainError("box: bounds must have equal nonzero length");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] < upper[i])) throw DomainError("box: lower bound must be below upper bound");
    Shape s;
    s.kind_ = Kind::Box;
    s.dim_ = static_cast<int>(lower.size());
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    s.label_ = "box";
    return s;
}

Shape Shape::ball(std::vector<double> center, double radius) {
    if (center.empty()) throw DomainError("ball: empty center");
    if (!(radius > 0.0)) throw DomainError("ball: radius must be positive");
    Shape s;
    s.kind_ = Kind::Ball;
    s.dim_ = static_cast<int>(center.size());
    s.center_ = std::move(center);
    s.radius_ = radius;
    s.label_ = "ball";
    return s;
}

Shape Shape::implicit(int dim, LevelFunction level, std::vector<double> bbox_lower, std::vector<double> bbox_upper,
                      std::string label) {
    if (dim < 1 || bbox_lower.size() != static_cast<std::size_t>(dim) || bbox_upper.size() != bbox_lower.size())
        throw DomainError("implicit: bounding box does not match dimension");
    Shape s;
    s.kind_ = Kind::Implicit;
    s.dim_ = dim;
    s.level_ = std::move(level);
    s.lower_ = std::move(bbox_lower);
    s.upper_ = std::move(bbox_upper);
    s.label_ = std::move(label);
    return s;
}

bool Shape::contains(std::span<const double> x, double slack) const {
    if (static_cast<int>(x.size()) != dim_) throw DomainError("contains: dimension mismatch");
    switch (kind_) {
        case Kind::Box:
            for (int i = 0; i < dim_; ++i)
                if (x[i] < lower_[i] - slack || x[i] > upper_[i] + slack) return false;
            return true;
        case Kind::Ball: {
            double r2 = 0.0;
            for (int i = 0; i < dim_; ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
            const double r = radius_ + slack;
            return r2 <= r * r;
        }
        case Kind::Implicit:
            for (int i = 0; i < dim_; ++i)
                if (x[i] < lower_[i] - slack || x[i] > upper_[i] + slack) return false;
            return level_(x) <= slack;
    }
    return false;
}

std::vector<double> Shape::bbox_lower() const {
    if (kind_ != Kind::Ball) return lower_;
    std::vector<double> lo(center_);
    for (auto& c : lo) c -= radius_;
    return lo;
}

std::vector<double> Shape::bbox_upper() const {
    if (kind_ != Kind::Ball) return upper_;
    std::vector<double> hi(center_);
    for (auto& c : hi) c += radius_;
    return hi;
}

const char* to_string(PointClass c) {
    switch (c) {
        case PointClass::Boundary: return "B_h";
        case PointClass::NearBoundary: return "B_h*";
        case PointClass::DeepInterior: return "R_h*";
    }
    return "?";
}

std::vector<LatticePoint> second_neighbourhood(int dim) {
    std::vector<LatticePoint> out;
    for (int i = 0; i < dim; ++i) {
        for (int s : {-1, 1}) {
            LatticePoint e(dim, 0);
            e[i] = s;
            out.push_back(e);
            e[i] = 2 * s;
            out.push_back(e);
        }
    }
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            for (int si : {-1, 1})
                for (int sj : {-1, 1}) {
                    LatticePoint e(dim, 0);
                    e[i] = si;
                    e[j] = sj;
                    out.push_back(e);
                }
    std::sort(out.begin(), out.end());
    return out;
}

double GridDomain::coordinate(std::size_t i, int axis) const {
    const int k = coords_[i * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(axis)];
    if (inverse_h_ > 0) return static_cast<double>(k) / static_cast<double>(inverse_h_);
    return static_cast<double>(k) * h_;
}

std::vector<double> GridDomain::position(std::size_t i) const {
    std::vector<double> x(static_cast<std::size_t>(dim_));
    for (int a = 0; a < dim_; ++a) x[static_cast<std::size_t>(a)] = coordinate(i, a);
    return x;
}

std::int64_t GridDomain::find(std::span<const int> k) const {
    std::int64_t flat = 0;
    for (int a = 0; a < dim_; ++a) {
        const int v = k[static_cast<std::size_t>(a)];
        if (v < klo_[a] || v > khi_[a]) return -1;
        flat += static_cast<std::int64_t>(v - klo_[a]) * strides_[a];
    }
    return lookup_[static_cast<std::size_t>(flat)];
}

std::size_t GridDomain::count(PointClass c) const {
    return static_cast<std::size_t>(std::count(classes_.begin(), classes_.end(), c));
}

std::vector<double> GridDomain::extend_from_interior(std::span<const double> rows) const {
    if (rows.size() != interior_.size()) throw DomainError("extend_from_interior: expected |R_h| values");
    std::vector<double> out(size(), 0.0);
    for (std::size_t r = 0; r < interior_.size(); ++r) out[interior_[r]] = rows[r];
    return out;
}

std::vector<double> GridDomain::restrict_to_interior(std::span<const double> values) const {
    if (values.size() != size()) throw DomainError("restrict_to_interior: expected |V_h| values");
    std::vector<double> out(interior_.size());
    for (std::size_t r = 0; r < interior_.size(); ++r) out[r] = values[interior_[r]];
    return out;
}

void GridDomain::write_csv(std::ostream& out) const {
    for (int a = 0; a < dim_; ++a) out << "x_" << (a + 1) << ',';
    out << "class\n";
    std::ostringstream line;
    line.precision(17);
    for (std::size_t i = 0; i < size(); ++i) {
        line.str("");
        for (int a = 0; a < dim_; ++a) line << coordinate(i, a) << ',';
        line << to_string(classes_[i]) << '\n';
        out << line.str();
    }
}

GridDomain classify(const Shape& shape, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("classify: spacing h must be positive");
    GridDomain g;
    g.shape_ = shape;
    g.dim_ = shape.dim();
    g.h_ = h;
    const double inv = 1.0 / h;
    if (std::abs(inv - std::round(inv)) < 1e-9 * inv) g.inverse_h_ = static_cast<std::int64_t>(std::llround(inv));

    const int d = g.dim_;
    const auto lo = shape.bbox_lower();
    const auto hi = shape.bbox_upper();
    constexpr double slack = 1e-12;
    g.klo_.resize(d);
    g.khi_.resize(d);
    g.strides_.assign(d, 1);
    std::int64_t total = 1;
    for (int a = 0; a < d; ++a) {
        g.klo_[a] = static_cast<int>(std::ceil(lo[a] / h - 1e-9));
        g.khi_[a] = static_cast<int>(std::floor(hi[a] / h + 1e-9));
        if (g.khi_[a] < g.klo_[a]) throw DomainError("degenerate discretization");
    }
    for (int a = d - 1; a >= 0; --a) {
        g.strides_[a] = total;
        total *= g.khi_[a] - g.klo_[a] + 1;
    }
    g.lookup_.assign(static_cast<std::size_t>(total), -1);

    auto to_x = [&](int k) {
        return g.inverse_h_ > 0 ? static_cast<double>(k) / static_cast<double>(g.inverse_h_) : k * h;
    };

    // Membership over the bounding box, lexicographic order (first axis slowest).
    std::vector<int> k(g.klo_);
    std::vector<double> x(d);
    for (std::int64_t flat = 0; flat < total; ++flat) {
        for (int a = 0; a < d; ++a) x[a] = to_x(k[a]);
        if (shape.contains(x, slack)) {
            g.lookup_[static_cast<std::size_t>(flat)] = static_cast<std::int64_t>(g.classes_.size());
            g.coords_.insert(g.coords_.end(), k.begin(), k.end());
            g.classes_.push_back(PointClass::Boundary);
        }
        for (int a = d - 1; a >= 0; --a) {
            if (++k[a] <= g.khi_[a]) break;
            k[a] = g.klo_[a];
        }
    }
    if (g.classes_.empty()) throw DomainError("degenerate discretization");

    const auto nbhd = second_neighbourhood(d);
    const auto n = static_cast<std::int64_t>(g.classes_.size());

    // Pass 1: R_h = {ξ : N(ξ) ⊂ V_h}.
    std::vector<std::uint8_t> in_r(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        std::vector<int> q(d);
        const auto p = g.point(static_cast<std::size_t>(i));
        bool ok = true;
        for (const auto& off : nbhd) {
            for (int a = 0; a < d; ++a) q[a] = p[a] + off[a];
            if (g.find(q) < 0) {
                ok = false;
                break;
            }
        }
        in_r[static_cast<std::size_t>(i)] = ok ? 1 : 0;
    }
    // Pass 2: R_h* = {ξ ∈ R_h : N(ξ) ⊂ R_h}.
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        if (!in_r[static_cast<std::size_t>(i)]) continue;
        std::vector<int> q(d);
        const auto p = g.point(static_cast<std::size_t>(i));
        bool deep = true;
        for (const auto& off : nbhd) {
            for (int a = 0; a < d; ++a) q[a] = p[a] + off[a];
            if (!in_r[static_cast<std::size_t>(g.find(q))]) {
                deep = false;
                break;
            }
        }
        g.classes_[static_cast<std::size_t>(i)] = deep ? PointClass::DeepInterior : PointClass::NearBoundary;
    }

    g.row_of_.assign(static_cast<std::size_t>(n), -1);
    for (std::int64_t i = 0; i < n; ++i) {
        if (in_r[static_cast<std::size_t>(i)]) {
            g.row_of_[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(g.interior_.size());
            g.interior_.push_back(static_cast<std::size_t>(i));
        }
    }
    return g;
}

// ---------------------------------------------------------------------------

const char* to_string(OperatorVariant v) {
    switch (v) {
        case OperatorVariant::Delta1: return "delta1";
        case OperatorVariant::DeltaH: return "deltah";
        case OperatorVariant::Bilaplacian: return "bilaplacian";
        case OperatorVariant::BilaplacianNormalized: return "bilaplacian-normalized";
        case OperatorVariant::Lh2: return "Lh2";
    }
    return "?";
}

Rational Stencil::coefficient(std::span<const int> offset) const {
    for (std::size_t s = 0; s < offsets.size(); ++s)
        if (std::equal(offsets[s].begin(), offsets[s].end(), offset.begin(), offset.end())) return coefficients[s];
    return Rational(0);
}

Rational Stencil::sum() const {
    Rational total(0);
    for (const auto& c : coefficients) total += c;
    return total;
}

namespace {

Stencil collect(int dim, const std::map<LatticePoint, Rational>& terms, int h_power) {
    Stencil st;
    st.dim = dim;
    st.h_power = h_power;
    for (const auto& [off, c] : terms) {
        if (c.num == 0) continue;
        st.offsets.push_back(off);
        st.coefficients.push_back(c);
    }
    return st;
}

// Literal expansion of h⁴ L_h u(x):
//   Σ_i Σ_j {u(x+h(e_i+e_j)) + u(x-h(e_i+e_j)) + u(x+h(e_i-e_j)) + u(x-h(e_i-e_j))}
//   - 4d Σ_i {u(x+he_i) + u(x-he_i)} + 4d² u(x)
std::map<LatticePoint, Rational> bilaplacian_terms(int d) {
    std::map<LatticePoint, Rational> t;
    auto add = [&](const LatticePoint& off, Rational c) {
        auto [it, inserted] = t.emplace(off, c);
        if (!inserted) it->second += c;
    };
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            for (int s : {1, -1}) {
                LatticePoint plus(d, 0), minus(d, 0);
                plus[i] += s;
                plus[j] += s;
                minus[i] += s;
                minus[j] -= s;
                add(plus, 1);
                add(minus, 1);
            }
        }
        for (int s : {1, -1}) {
            LatticePoint e(d, 0);
            e[i] = s;
            add(e, Rational(-4 * d));
        }
    }
    add(LatticePoint(d, 0), Rational(4 * d * d));
    return t;
}

}  // namespace

Stencil stencil_weights(OperatorVariant variant, int dim) {
    if (dim < 1) throw DomainError("stencil_weights: dimension must be >= 1");
    std::map<LatticePoint, Rational> terms;
    switch (variant) {
        case OperatorVariant::Delta1: {
            terms[LatticePoint(dim, 0)] = Rational(-1);
            for (int i = 0; i < dim; ++i)
                for (int s : {1, -1}) {
                    LatticePoint e(dim, 0);
                    e[i] = s;
                    terms[e] = Rational(1, 2 * dim);
                }
            return collect(dim, terms, 0);
        }
        case OperatorVariant::DeltaH: {
            terms[LatticePoint(dim, 0)] = Rational(-2 * dim);
            for (int i = 0; i < dim; ++i)
                for (int s : {1, -1}) {
                    LatticePoint e(dim, 0);
                    e[i] = s;
                    terms[e] = Rational(1);
                }
            return collect(dim, terms, -2);
        }
        case OperatorVariant::Bilaplacian:
        case OperatorVariant::Lh2:
            return collect(dim, bilaplacian_terms(dim), -4);
        case OperatorVariant::BilaplacianNormalized: {
            const Rational kappa2(1, 4 * dim * dim);
            terms = bilaplacian_terms(dim);
            for (auto& [off, c] : terms) c = c * kappa2;
            return collect(dim, terms, 0);
        }
    }
    throw DomainError("stencil_weights: unknown variant");
}

std::vector<double> apply(OperatorVariant variant, std::span<const double> field, const GridDomain& domain) {
    if (field.size() != domain.size()) throw DomainError("apply: dimension mismatch between field and domain");
    const int d = domain.dim();
    const Stencil st = stencil_weights(variant, d);
    const double scale = std::pow(domain.h(), st.h_power);
    std::vector<double> coeff(st.coefficients.size());
    for (std::size_t s = 0; s < coeff.size(); ++s) coeff[s] = st.coefficients[s].value() * scale;

    const auto n = static_cast<std::int64_t>(domain.size());
    std::vector<double> out(domain.size(), 0.0);
    const double h2 = domain.h() * domain.h();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        double weight = 1.0;
        if (variant == OperatorVariant::Lh2) {
            const auto c = domain.point_class(idx);
            if (c == PointClass::Boundary) continue;
            if (c == PointClass::NearBoundary) weight = h2;
        }
        const auto p = domain.point(idx);
        std::vector<int> q(d);
        double acc = 0.0;
        for (std::size_t s = 0; s < st.offsets.size(); ++s) {
            for (int a = 0; a < d; ++a) q[a] = p[a] + st.offsets[s][a];
            const auto j = domain.find(q);
            if (j >= 0) acc += coeff[s] * field[static_cast<std::size_t>(j)];
        }
        out[idx] = weight * acc;
    }
    return out;
}

// ---------------------------------------------------------------------------

B2StarReport verify_b2star(const GridDomain& domain, int K) {
    if (K < 1) throw DomainError("verify_b2star: K must be >= 1");
    B2StarReport rep;
    rep.K = K;
    const int d = domain.dim();
    auto in_boundary = [&](std::vector<int>& q) {
        const auto j = domain.find(q);
        return j >= 0 && domain.point_class(static_cast<std::size_t>(j)) == PointClass::Boundary;
    };
    for (std::size_t i = 0; i < domain.size(); ++i) {
        if (domain.point_class(i) != PointClass::NearBoundary) continue;
        ++rep.checked;
        const auto p = domain.point(i);
        bool found = false;
        std::vector<int> q(p.begin(), p.end());
        for (int axis = 0; axis < d && !found; ++axis) {
            for (int dir : {1, -1}) {
                // Steps 1..K along the ray; consecutive pairs (s, s+1) with s+1 <= K.
                std::vector<char> flags(static_cast<std::size_t>(K) + 1, 0);
                for (int s = 1; s <= K; ++s) {
                    q.assign(p.begin(), p.end());
                    q[axis] += dir * s;
                    flags[static_cast<std::size_t>(s)] = in_boundary(q) ? 1 : 0;
                }
                for (int s = 1; s < K; ++s) {
                    if (flags[static_cast<std::size_t>(s)] && flags[static_cast<std::size_t>(s) + 1]) {
                        rep.witnesses.push_back({i, axis, dir, s});
                        found = true;
                        break;
                    }
                }
                if (found) break;
            }
        }
        if (!found) rep.failures.push_back(i);
    }
    rep.pass = rep.failures.empty();
    return rep;
}

}  // namespace membrane::lattice
