#include "membrane/infvol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>

#include "membrane/common.hpp"

namespace membrane::infvol {

namespace {

constexpr double kPi = std::numbers::pi;

/// 1 − cos t without cancellation near 0.
double one_minus_cos(double t) {
    const double s = std::sin(0.5 * t);
    return 2.0 * s * s;
}

void require_high_dim(int dim) {
    if (dim <= 4) throw DomainError("integral diverges: the infinite-volume covariance needs d >= 5");
}

}  // namespace

double mu(std::span<const double> theta) {
    double acc = 0.0;
    for (double t : theta) acc += one_minus_cos(t);
    return acc / static_cast<double>(theta.size());
}

const GaussRule& gauss_legendre(int n) {
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    if (n < 1) throw DomainError("gauss_legendre: n >= 1 required");
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

namespace {

struct Subcube {
    std::vector<double> lo, hi;
};

std::vector<Subcube> shell_tasks(int dim, const SeparableWeight& weight, int depth, double outer) {
    std::vector<Subcube> tasks;
    for (int k = 0; k < depth; ++k) {
        const double rho = outer * std::ldexp(1.0, -k);
        for (unsigned mask = 1; mask < (1u << dim); ++mask) {
            Subcube c;
            c.lo.resize(static_cast<std::size_t>(dim));
            c.hi.resize(static_cast<std::size_t>(dim));
            for (int i = 0; i < dim; ++i) {
                const bool upper = (mask >> i) & 1u;
                c.lo[i] = upper ? rho / 2 : 0.0;
                c.hi[i] = upper ? rho : rho / 2;
            }
            if (weight.log_sup && weight.log_sup(c.lo, c.hi) < -70.0) continue;
            tasks.push_back(std::move(c));
        }
    }
    return tasks;
}

int axis_nodes(const SeparableWeight& weight, const QuadraturePlan& plan, int axis, double a, double b) {
    const int extra = weight.extra_nodes ? weight.extra_nodes(axis, a, b) : 0;
    return std::max(1, static_cast<int>(std::ceil(plan.resolution * (plan.base_nodes + extra))));
}

/// Precomputed per-axis tables, vectorizable inner loop over the last axis.
double subcube_fast(int dim, const SeparableWeight& weight, const QuadraturePlan& plan, const Subcube& c,
                    bool inverse_quartic) {
    std::vector<std::vector<double>> w(static_cast<std::size_t>(dim)), m(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        const int n = axis_nodes(weight, plan, i, c.lo[i], c.hi[i]);
        const auto& rule = gauss_legendre(n);
        const double half = 0.5 * (c.hi[i] - c.lo[i]);
        const double mid = 0.5 * (c.hi[i] + c.lo[i]);
        w[i].resize(static_cast<std::size_t>(n));
        m[i].resize(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            const double t = mid + half * rule.nodes[j];
            w[i][j] = half * rule.weights[j] * (weight.factor ? weight.factor(i, t) : 1.0);
            m[i][j] = inverse_quartic ? t * t : one_minus_cos(t) / dim;
        }
    }
    const auto& wl = w[dim - 1];
    const auto& ml = m[dim - 1];
    const std::size_t nl = wl.size();
    std::vector<std::size_t> idx(static_cast<std::size_t>(dim - 1), 0);
    double total = 0.0;
    while (true) {
        double wp = 1.0, mp = 0.0;
        for (int i = 0; i < dim - 1; ++i) {
            wp *= w[i][idx[i]];
            mp += m[i][idx[i]];
        }
        double inner = 0.0;
        for (std::size_t j = 0; j < nl; ++j) {
            const double s = mp + ml[j];
            inner += wl[j] / (s * s);
        }
        total += wp * inner;
        int a = dim - 2;
        while (a >= 0 && ++idx[a] == w[a].size()) idx[a--] = 0;
        if (a < 0) break;
    }
    return total;
}

/// Reference path: each point evaluated from scratch through mu() and the weight callback.
double subcube_reference(int dim, const SeparableWeight& weight, const QuadraturePlan& plan, const Subcube& c,
                         bool inverse_quartic) {
    std::vector<int> n(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) n[i] = axis_nodes(weight, plan, i, c.lo[i], c.hi[i]);
    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    std::vector<double> theta(static_cast<std::size_t>(dim));
    double total = 0.0;
    while (true) {
        double wt = 1.0;
        for (int i = 0; i < dim; ++i) {
            const auto& rule = gauss_legendre(n[i]);
            const double half = 0.5 * (c.hi[i] - c.lo[i]);
            theta[i] = 0.5 * (c.hi[i] + c.lo[i]) + half * rule.nodes[idx[i]];
            wt *= half * rule.weights[idx[i]];
            if (weight.factor) wt *= weight.factor(i, theta[i]);
        }
        double s;
        if (inverse_quartic) {
            s = 0.0;
            for (double t : theta) s += t * t;
        } else {
            s = mu(theta);
        }
        total += wt / (s * s);
        int a = dim - 1;
        while (a >= 0 && ++idx[a] == n[a]) idx[a--] = 0;
        if (a < 0) break;
    }
    return total;
}

double shells_sum(int dim, const SeparableWeight& weight, const QuadraturePlan& plan, double outer,
                  bool inverse_quartic) {
    const auto tasks = shell_tasks(dim, weight, plan.depth, outer);
    std::vector<double> partial(tasks.size(), 0.0);
    if (plan.exec == kernels::Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::size_t t = 0; t < tasks.size(); ++t)
            partial[t] = subcube_fast(dim, weight, plan, tasks[t], inverse_quartic);
    } else {
        for (std::size_t t = 0; t < tasks.size(); ++t)
            partial[t] = subcube_reference(dim, weight, plan, tasks[t], inverse_quartic);
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace

double unit_cube_inverse_quartic(int dim) {
    require_high_dim(dim);
    static std::mutex mutex;
    static std::map<int, double> cache;
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(dim); it != cache.end()) return it->second;
    }
    QuadraturePlan plan;
    plan.base_nodes = 20;
    plan.depth = 1;
    const double shell = shells_sum(dim, SeparableWeight{}, plan, 1.0, true);
    const double value = shell / (1.0 - std::ldexp(1.0, 4 - dim));
    std::lock_guard lock(mutex);
    cache[dim] = value;
    return value;
}

double singular_cube_sum(int dim, const SeparableWeight& weight, const QuadraturePlan& plan) {
    require_high_dim(dim);
    const double rho = kPi * std::ldexp(1.0, -plan.depth);
    const double inner = weight.value_at_origin * 4.0 * dim * dim * std::pow(rho, dim - 4) * unit_cube_inverse_quartic(dim);
    return shells_sum(dim, weight, plan, kPi, false) + inner;
}

Estimate singular_cube_integral(int dim, const SeparableWeight& weight, const QuadraturePlan& plan) {
    require_high_dim(dim);
    QuadraturePlan fine = plan;
    fine.resolution = plan.resolution * 1.5;
    const double coarse_value = singular_cube_sum(dim, weight, plan);
    const double fine_value = singular_cube_sum(dim, weight, fine);
    const double rho = kPi * std::ldexp(1.0, -plan.depth);
    const double inner = std::abs(weight.value_at_origin) * 4.0 * dim * dim * std::pow(rho, dim - 4) *
                         unit_cube_inverse_quartic(dim);
    const double inner_error = inner * (weight.curvature + 1.0 / 6.0) * dim * rho * rho;
    return {fine_value, std::abs(fine_value - coarse_value) + inner_error};
}

Estimate green_infinite_fourier(std::span<const int> x, const QuadraturePlan& plan) {
    const int dim = static_cast<int>(x.size());
    require_high_dim(dim);
    std::vector<double> xs(x.begin(), x.end());
    SeparableWeight weight;
    weight.factor = [xs](int axis, double t) { return std::cos(xs[axis] * t); };
    weight.extra_nodes = [xs](int axis, double a, double b) {
        return static_cast<int>(std::ceil(0.8 * std::abs(xs[axis]) * (b - a)));
    };
    double r2 = 0.0;
    for (double v : xs) r2 += v * v;
    weight.curvature = 0.5 * r2;
    const auto e = singular_cube_integral(dim, weight, plan);
    const double norm = std::pow(kPi, -dim);
    return {e.value * norm, e.error * norm};
}

Estimate green_infinite_fourier(std::span<const int> x, std::span<const int> y, const QuadraturePlan& plan) {
    if (x.size() != y.size()) throw DomainError("green_infinite_fourier: dimension mismatch");
    std::vector<int> diff(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diff[i] = y[i] - x[i];
    return green_infinite_fourier(diff, plan);
}

// ---------------------------------------------------------------------------

std::size_t WalkResult::target_index(std::span<const int> x) const {
    const int side = 2 * radius + 1;
    std::size_t idx = 0;
    for (int v : x) {
        if (std::abs(v) > radius) throw DomainError("target outside the tallied cube");
        idx = idx * static_cast<std::size_t>(side) + static_cast<std::size_t>(v + radius);
    }
    return idx;
}

std::vector<int> WalkResult::target(std::size_t index) const {
    const int side = 2 * radius + 1;
    std::vector<int> x(static_cast<std::size_t>(dim));
    for (int i = dim - 1; i >= 0; --i) {
        x[i] = static_cast<int>(index % static_cast<std::size_t>(side)) - radius;
        index /= static_cast<std::size_t>(side);
    }
    return x;
}

double walk_tail_bound(int dim, int max_steps, double c) {
    const double p = dim / 2.0;
    constexpr int explicit_terms = 1'000'000;
    double sum = 0.0;
    for (int m = explicit_terms; m > max_steps; --m) sum += (m + 1.0) * std::pow(static_cast<double>(m), -p);
    const double T = explicit_terms;
    // ∫_T^∞ (m+1) m^{-p} dm
    sum += std::pow(T, 2.0 - p) / (p - 2.0) + std::pow(T, 1.0 - p) / (p - 1.0);
    return c * sum;
}

namespace {

struct BatchTally {
    std::vector<double> sum, sumsq;
    std::vector<double> returns;
};

BatchTally run_batch(const WalkConfig& cfg, std::uint64_t batch, std::uint64_t walks) {
    const int d = cfg.dim;
    const int R = cfg.radius;
    const int side = 2 * R + 1;
    std::size_t targets = 1;
    for (int i = 0; i < d; ++i) targets *= static_cast<std::size_t>(side);
    std::vector<std::int64_t> stride(static_cast<std::size_t>(d), 1);
    for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * side;

    BatchTally out;
    out.sum.assign(targets, 0.0);
    out.sumsq.assign(targets, 0.0);
    out.returns.assign(static_cast<std::size_t>(cfg.max_steps + 1), 0.0);
    std::vector<double> local(targets, 0.0);
    std::vector<std::size_t> touched;
    touched.reserve(static_cast<std::size_t>(cfg.max_steps + 1));

    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(batch), static_cast<std::uint32_t>(batch >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<int> move(0, 2 * d - 1);
    std::vector<int> pos(static_cast<std::size_t>(d));
    std::int64_t origin = 0;
    for (int i = 0; i < d; ++i) origin += R * stride[i];

    for (std::uint64_t w = 0; w < walks; ++w) {
        std::fill(pos.begin(), pos.end(), 0);
        int outside = 0;  // number of coordinates with |x_i| > R
        std::int64_t idx = origin;
        for (int m = 0; m <= cfg.max_steps; ++m) {
            if (m > 0) {
                const int r = move(rng);
                const int axis = r >> 1;
                const int step = (r & 1) ? 1 : -1;
                const int before = pos[axis];
                pos[axis] += step;
                idx += step * stride[axis];
                outside += (std::abs(pos[axis]) > R) - (std::abs(before) > R);
            }
            if (outside == 0) {
                const auto k = static_cast<std::size_t>(idx);
                if (local[k] == 0.0) touched.push_back(k);
                local[k] += m + 1.0;
                if (idx == origin) out.returns[static_cast<std::size_t>(m)] += 1.0;
            }
        }
        for (std::size_t k : touched) {
            out.sum[k] += local[k];
            out.sumsq[k] += local[k] * local[k];
            local[k] = 0.0;
        }
        touched.clear();
    }
    return out;
}

}  // namespace

WalkResult walk_estimate(const WalkConfig& cfg, kernels::Execution exec) {
    require_high_dim(cfg.dim);
    if (cfg.max_steps < 2 || cfg.radius < 0 || cfg.walks == 0 || cfg.batch_size == 0)
        throw DomainError("walk_estimate: invalid configuration");
    const std::uint64_t batches = (cfg.walks + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<BatchTally> tallies(static_cast<std::size_t>(batches));
    const auto run = [&](std::uint64_t b) {
        const std::uint64_t count = std::min(cfg.batch_size, cfg.walks - b * cfg.batch_size);
        tallies[static_cast<std::size_t>(b)] = run_batch(cfg, b, count);
    };
    if (exec == kernels::Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t b = 0; b < static_cast<std::int64_t>(batches); ++b) run(static_cast<std::uint64_t>(b));
    } else {
        for (std::uint64_t b = 0; b < batches; ++b) run(b);
    }

    WalkResult res;
    res.dim = cfg.dim;
    res.radius = cfg.radius;
    res.max_steps = cfg.max_steps;
    res.walks = cfg.walks;
    const std::size_t targets = tallies.front().sum.size();
    std::vector<double> sum(targets, 0.0), sumsq(targets, 0.0);
    res.return_frequency.assign(static_cast<std::size_t>(cfg.max_steps + 1), 0.0);
    for (const auto& t : tallies) {
        for (std::size_t k = 0; k < targets; ++k) {
            sum[k] += t.sum[k];
            sumsq[k] += t.sumsq[k];
        }
        for (std::size_t m = 0; m < t.returns.size(); ++m) res.return_frequency[m] += t.returns[m];
    }
    const double W = static_cast<double>(cfg.walks);
    res.mean.resize(targets);
    res.std_error.resize(targets);
    for (std::size_t k = 0; k < targets; ++k) {
        res.mean[k] = sum[k] / W;
        const double var = cfg.walks > 1 ? std::max(0.0, (sumsq[k] - W * res.mean[k] * res.mean[k]) / (W - 1.0)) : 0.0;
        res.std_error[k] = std::sqrt(var / W);
    }
    for (auto& f : res.return_frequency) f /= W;

    double acc = 0.0;
    int count = 0;
    for (int m = cfg.max_steps / 2 + 1; m <= cfg.max_steps; ++m) {
        acc += res.return_frequency[static_cast<std::size_t>(m)] * std::pow(static_cast<double>(m), cfg.dim / 2.0);
        ++count;
    }
    res.c_hat = acc / count;
    res.tail_bound = walk_tail_bound(cfg.dim, cfg.max_steps, res.c_hat);
    if (res.tail_bound > cfg.tail_tolerance)
        throw NumericalError("walk_estimate: tail bound " + std::to_string(res.tail_bound) + " exceeds tolerance " +
                             std::to_string(cfg.tail_tolerance) + "; increase the step count M");
    return res;
}

Eta2Trend eta2_trend(int dim, const std::vector<int>& radii, const QuadraturePlan& plan) {
    require_high_dim(dim);
    if (radii.size() < 2) throw DomainError("eta2_trend: at least two radii required");
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (radii[i] <= radii[i - 1]) throw DomainError("eta2_trend: radii must increase");
    Eta2Trend trend;
    trend.dim = dim;
    for (int r : radii) {
        std::vector<int> x(static_cast<std::size_t>(dim), 0);
        x[0] = r;
        Eta2Row row;
        row.radius = r;
        row.green = green_infinite_fourier(x, plan);
        const double scale = std::pow(static_cast<double>(r), dim - 4);
        row.ratio = row.green.value * scale;
        if (row.green.error * scale > 0.1 * std::abs(row.ratio))
            throw NumericalError("eta2_trend: quadrature error too large at radius " + std::to_string(r));
        trend.rows.push_back(row);
    }
    double lo = INFINITY, hi = -INFINITY, mean = 0.0;
    const std::size_t start = trend.rows.size() / 2;
    for (std::size_t i = start; i < trend.rows.size(); ++i) {
        lo = std::min(lo, trend.rows[i].ratio);
        hi = std::max(hi, trend.rows[i].ratio);
        mean += trend.rows[i].ratio;
    }
    mean /= static_cast<double>(trend.rows.size() - start);
    trend.spread = (hi - lo) / mean;
    return trend;
}

// ---------------------------------------------------------------------------

double SchwartzTest::operator()(std::span<const double> x) const {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return amplitude * std::exp(-r2 / (2.0 * width * width));
}

double SchwartzTest::transform(std::span<const double> theta) const {
    double r2 = 0.0;
    for (double v : theta) r2 += v * v;
    return amplitude * std::pow(width, dim) * std::exp(-width * width * r2 / 2.0);
}

SchwartzTest SchwartzTest::scaled(double factor) const {
    SchwartzTest out = *this;
    out.amplitude *= factor;
    return out;
}

SchwartzTest gaussian_test(int dim, double width, double amplitude) {
    if (dim < 1 || width <= 0.0) throw DomainError("gaussian_test: invalid parameters");
    SchwartzTest f;
    f.dim = dim;
    f.width = width;
    f.amplitude = amplitude;
    return f;
}

namespace {

double cube_inverse_mu_squared(int dim) {
    static std::mutex mutex;
    static std::map<int, double> cache;
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(dim); it != cache.end()) return it->second;
    }
    const double v = singular_cube_sum(dim, SeparableWeight{}, QuadraturePlan{});
    std::lock_guard lock(mutex);
    cache[dim] = v;
    return v;
}

}  // namespace

Estimate scaling_variance(const SchwartzTest& f, int N, const QuadraturePlan& plan) {
    const int d = f.dim;
    require_high_dim(d);
    if (N < 2) throw DomainError("scaling_variance: N >= 2 required");
    if (f.amplitude == 0.0) return {0.0, 0.0};
    const double sigma = f.width;
    const double sn = sigma * N;
    const double axis_amp = std::pow(std::abs(f.amplitude), 2.0 / d) * sigma * sigma;  // per-axis factor of |f̂|²

    SeparableWeight weight;
    weight.factor = [=](int, double t) { return axis_amp * std::exp(-sn * sn * t * t); };
    weight.extra_nodes = [=](int, double a, double b) { return static_cast<int>(std::ceil(2.0 * sn * (b - a))); };
    weight.log_sup = [=](std::span<const double> lo, std::span<const double>) {
        double acc = d * std::log(axis_amp);
        for (double v : lo) acc -= sn * sn * v * v;
        return acc - std::log(std::max(1.0, std::pow(axis_amp, d)));
    };
    weight.value_at_origin = std::pow(axis_amp, d);
    weight.curvature = sn * sn;

    QuadraturePlan p = plan;
    p.depth = plan.depth + static_cast<int>(std::ceil(std::log2(std::max(1.0, sn))));
    const auto e = singular_cube_integral(d, weight, p);

    const double kappa = 1.0 / (2.0 * d);
    const double prefactor = kappa * kappa * std::pow(static_cast<double>(N), d - 4) * std::ldexp(1.0, d);

    // Poisson summation: the lattice transform differs from f̂ by aliases at distance ≥ Nπ per axis.
    const double gmax = std::pow(std::abs(f.amplitude), 1.0 / d) * sigma;
    double alias = 0.0;
    for (int j = 0; j < 64; ++j) {
        const double z = sigma * kPi * N * (2.0 * j + 1.0);
        alias += std::exp(-z * z / 2.0);
    }
    alias *= 2.0 * gmax;
    const double poisson = prefactor * cube_inverse_mu_squared(d) *
                           (std::pow(gmax + alias, 2.0 * d) - std::pow(gmax, 2.0 * d));

    Estimate out{prefactor * e.value, prefactor * e.error + poisson};
    if (out.error > 0.05 * std::abs(out.value))
        throw NumericalError("scaling_variance: error budget exceeds 5% of the value");
    return out;
}

double inv_laplacian_norm(const SchwartzTest& f) {
    const int d = f.dim;
    require_high_dim(d);
    const double sphere = 2.0 * std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0);
    const double s = f.width;
    return f.amplitude * f.amplitude * std::pow(s, 2 * d) * sphere * std::tgamma((d - 4) / 2.0) /
           (2.0 * std::pow(s, d - 4));
}

double inv_laplacian_norm_numeric(const SchwartzTest& f) {
    const int d = f.dim;
    require_high_dim(d);
    const double sphere = 2.0 * std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0);
    const double s = f.width;
    const double R = 12.0 / s;
    constexpr int panels = 60;
    const auto& rule = gauss_legendre(20);
    double acc = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = R * p / panels, b = R * (p + 1) / panels;
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            const double r = mid + half * rule.nodes[j];
            const double fh = f.amplitude * std::pow(s, d) * std::exp(-s * s * r * r / 2.0);
            acc += half * rule.weights[j] * std::pow(r, d - 5) * fh * fh;
        }
    }
    return sphere * acc;
}

double riemann_sum_error(const SchwartzTest& f, std::span<const double> theta, int N) {
    if (N < 1) throw DomainError("riemann_sum_error: N >= 1 required");
    if (static_cast<int>(theta.size()) != f.dim) throw DomainError("riemann_sum_error: dimension mismatch");
    const double s = f.width;
    const auto kmax = static_cast<long>(std::ceil(N * s * std::sqrt(2.0 * std::log(1e16))));
    double lattice = f.amplitude;
    for (double t : theta) {
        double acc = 0.0;
        for (long k = kmax; k >= 1; --k) {
            const double y = static_cast<double>(k) / N;
            acc += 2.0 * std::exp(-y * y / (2.0 * s * s)) * std::cos(y * t);
        }
        acc += 1.0;
        lattice *= acc / N / std::sqrt(2.0 * kPi);
    }
    return std::abs(lattice - f.transform(theta));
}

SineBoundReport sine_bound_check(int dim, const std::vector<int>& N_list, std::size_t samples_per_N,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SineBoundReport report;
    report.c_hat = -INFINITY;
    std::vector<double> w(static_cast<std::size_t>(dim));
    for (int N : N_list) {
        std::uniform_real_distribution<double> unif(-N * kPi / 2.0, N * kPi / 2.0);
        for (std::size_t k = 0; k < samples_per_N; ++k) {
            double r2 = 0.0, s = 0.0;
            for (auto& v : w) {
                v = unif(rng);
                r2 += v * v;
                const double sn = std::sin(v / N);
                s += sn * sn;
            }
            if (r2 == 0.0) continue;
            ++report.samples;
            const double lower = 1.0 / (r2 * r2);
            const double middle = std::pow(static_cast<double>(N), -4) / (s * s);
            if (lower > middle * (1.0 + 1e-12)) ++report.lower_violations;
            report.c_hat = std::max(report.c_hat, 1.0 / s - static_cast<double>(N) * N / r2);
        }
    }
    return report;
}

}  // namespace membrane::infvol
