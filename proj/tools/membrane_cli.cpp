#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cli_support.hpp"
#include "membrane/green.hpp"
#include "membrane/infvol.hpp"
#include "membrane/lattice.hpp"
#include "membrane/sampler.hpp"
#include "membrane/spectral.hpp"
#include "membrane/thomee.hpp"

using namespace membrane;
using cli::format;
using cli::json;

namespace {

struct Recipe {
    const char* name;
    const char* anchor;
    const char* summary;
};

// Each recipe with the claim it checks.
const std::vector<Recipe> catalog{
    {"green", "Section 2.1 boundary value problem", "Green columns of the bilaplacian with zero boundary values"},
    {"sample", "Section 1 Hamiltonian", "Gaussian fields with precision the discrete bilaplacian"},
    {"interpolate", "Theorem 2.1", "simplex interpolation Psi_N of a sampled field on [0,1]^d, d=2,3"},
    {"max-scaling", "Corollary 2.2", "law of kappa N^((d-4)/2) M_N stabilizes across N (KS distance)"},
    {"moment-check", "Lemma 2.5", "E|Psi_N(t)-Psi_N(s)|^2 against ||t-s|| from the exact covariance"},
    {"spectrum", "Proposition 3.4", "lowest bilaplacian eigenpairs, Weyl slope, gap to the squared Dirichlet ground state"},
    {"pair", "Proposition 3.9", "Var(psi_h, f) converges as h halves; Green and finite-difference routes agree"},
    {"thomee", "Theorem A.9", "finite-difference error on the disk decays at order >= 1/2 under the bound curve"},
    {"infvol green", "Section 4.1 covariance", "random-walk sum against the Fourier integral of G(0,x), d>=5"},
    {"infvol eta2", "Fact 4.1", "G(0,r e_1) r^(d-4) as r grows"},
    {"infvol variance", "Theorem 4.7", "Var(psi_N, f) tends to ||(-Delta)^-1 f||^2"},
    {"b2star", "Appendix B", "every near-boundary point sees two consecutive boundary points within K h"},
};

struct Globals {
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out;
    CLI::App* app = nullptr;
};

Globals globals;

cli::Run open_run(const std::string& recipe) {
    return cli::Run(recipe, cli::echo_config(*globals.app), cli::output_directory(globals.out, recipe));
}

template <class F>
int execute(cli::Run& run, F&& body) {
    try {
        body();
    } catch (const NumericalError& e) {
        run.check("completed", false, std::string("numerical error: ") + e.what());
    }
    return run.finish();
}

// ---------------------------------------------------------------------------
// Domains

struct DomainOptions {
    std::string file;
    std::string shape = "box";
    int d = 2;
    std::string lower, upper, center;
    double radius = 1.0;
    std::string h;
    std::map<std::string, CLI::Option*> flags;
};

void add_domain_options(CLI::App* app, DomainOptions& o, const std::string& h_default, bool h_list) {
    o.h = h_default;
    o.flags["domain"] = app->add_option("--domain", o.file, "JSON domain file (shape, d, lower, upper, center, radius, h)")
                            ->check(CLI::ExistingFile);
    o.flags["shape"] = app->add_option("--shape", o.shape, "box or ball")->check(CLI::IsMember({"box", "ball"}));
    o.flags["d"] = app->add_option("--d", o.d, "dimension")->check(CLI::PositiveNumber);
    o.flags["lower"] = app->add_option("--lower", o.lower, "box lower corner, one value or d values (default 0)");
    o.flags["upper"] = app->add_option("--upper", o.upper, "box upper corner, one value or d values (default 1)");
    o.flags["center"] = app->add_option("--center", o.center, "ball center, one value or d values (default 0)");
    o.flags["radius"] = app->add_option("--radius", o.radius, "ball radius")->check(CLI::PositiveNumber);
    o.flags["h"] = app->add_option("--h", o.h, h_list ? "lattice spacings, e.g. 1/8,1/16" : "lattice spacing, e.g. 1/16");
}

struct ResolvedDomain {
    lattice::Shape shape;
    std::string h;
    json spec;
};

std::vector<double> corner(const std::string& text, int d, double fallback) {
    if (text.empty()) return std::vector<double>(d, fallback);
    auto v = cli::parse_double_list(text);
    if (v.size() == 1) v.assign(d, v[0]);
    if (static_cast<int>(v.size()) != d) throw ConfigError("corner '" + text + "' does not have " + std::to_string(d) + " values");
    return v;
}

ResolvedDomain resolve_domain(DomainOptions& o) {
    if (!o.file.empty()) {
        std::ifstream in(o.file);
        json f;
        try {
            f = json::parse(in, nullptr, true, true);
        } catch (const json::parse_error& e) {
            throw ConfigError("domain file: " + std::string(e.what()));
        }
        auto take = [&](const char* key, auto& target) {
            if (!f.contains(key) || o.flags[key]->count() > 0) return;
            using T = std::decay_t<decltype(target)>;
            if constexpr (std::is_same_v<T, std::string>) {
                target = f[key].is_string() ? f[key].get<std::string>() : f[key].dump();
                if (f[key].is_array()) {
                    target.clear();
                    for (const auto& e : f[key]) target += (target.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
                }
            } else {
                target = f[key].get<T>();
            }
        };
        take("shape", o.shape);
        take("d", o.d);
        take("lower", o.lower);
        take("upper", o.upper);
        take("center", o.center);
        take("radius", o.radius);
        take("h", o.h);
        if (o.shape != "box" && o.shape != "ball") throw ConfigError("unknown shape '" + o.shape + "'");
    }
    ResolvedDomain r;
    r.h = o.h;
    if (o.shape == "ball") {
        auto c = corner(o.center, o.d, 0.0);
        r.shape = lattice::Shape::ball(c, o.radius);
        r.spec = {{"shape", "ball"}, {"d", o.d}, {"center", c}, {"radius", o.radius}, {"h", o.h}};
    } else {
        auto lo = corner(o.lower, o.d, 0.0), hi = corner(o.upper, o.d, 1.0);
        r.shape = lattice::Shape::box(lo, hi);
        r.spec = {{"shape", "box"}, {"d", o.d}, {"lower", lo}, {"upper", hi}, {"h", o.h}};
    }
    return r;
}

lattice::GridDomain unit_box(int d, int N) {
    return lattice::classify(lattice::Shape::box(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)), 1.0 / N);
}

int inverse_spacing(double h) {
    const long N = std::lround(1.0 / h);
    if (N < 1 || std::abs(N * h - 1.0) > 1e-12) throw ConfigError(format("h = %.17g is not 1/N", h));
    return static_cast<int>(N);
}

std::vector<std::string> axis_columns(const char* prefix, int d) {
    std::vector<std::string> out;
    for (int i = 1; i <= d; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

/// R_h rows with their integer and continuum coordinates.
void write_points(cli::Run& run, const lattice::GridDomain& dom) {
    const int d = dom.dim();
    auto csv = run.csv("points.csv", concat(concat({"row"}, axis_columns("k_", d)), axis_columns("x_", d)));
    for (std::size_t r = 0; r < dom.interior_size(); ++r) {
        const auto i = dom.interior_point(r);
        std::vector<double> row{static_cast<double>(r)};
        for (int v : dom.point(i)) row.push_back(v);
        for (double v : dom.position(i)) row.push_back(v);
        csv.row(row);
    }
}

// ---------------------------------------------------------------------------
// Recipes

int run_green(DomainOptions& o, const std::string& columns) {
    auto rd = resolve_domain(o);
    auto dom = lattice::classify(rd.shape, cli::parse_h(rd.h));
    std::vector<std::size_t> rows;
    if (columns != "all") {
        std::stringstream ss(columns);
        for (std::string t; std::getline(ss, t, ';');) {
            auto k = cli::parse_int_list(t);
            if (static_cast<int>(k.size()) != dom.dim()) throw ConfigError("column point '" + t + "' has the wrong dimension");
            const auto row = dom.interior_row(k);
            if (row < 0) throw DomainError("column point '" + t + "' is not in R_h");
            rows.push_back(static_cast<std::size_t>(row));
        }
        if (rows.empty()) throw ConfigError("no column points given");
    }
    auto run = open_run("green");
    run.result("domain", rd.spec);
    return execute(run, [&] {
        auto P = run.stage("assemble", [&] { return green::assemble_precision(dom); });
        auto solver = run.stage("factorize", [&] { return green::make_precision_solver(P); });
        green::GreenTable table(dom);
        if (columns == "all") {
            table = run.stage("solve", [&] { return green::green_full(P, *solver); });
        } else {
            run.stage("solve", [&] { table.ensure_columns(P, *solver, rows); });
        }
        table.write(run.path("green.f64"), run.path("green.json"), rd.spec.dump());
        write_points(run, dom);
        run.result("interior_points", dom.interior_size());
        run.result("solver", solver->method());
        run.check("column residual", table.max_residual() <= 1e-8,
                  format("max |Delta_1^2 G(x,.) - delta_x| = %.3e (<= 1e-8)", table.max_residual()));
        run.check("symmetry", table.asymmetry() <= 1e-10, format("max |G(x,y) - G(y,x)| = %.3e (<= 1e-10)", table.asymmetry()));
    });
}

int run_sample(DomainOptions& o, std::size_t count, std::uint64_t first_stream) {
    auto rd = resolve_domain(o);
    auto dom = lattice::classify(rd.shape, cli::parse_h(rd.h));
    auto run = open_run("sample");
    run.result("domain", rd.spec);
    return execute(run, [&] {
        auto P = run.stage("assemble", [&] { return green::assemble_precision(dom); });
        auto solver = run.stage("factorize", [&] { return green::make_precision_solver(P); });
        auto fields = run.stage("sample", [&] { return sampler::sample(P, *solver, globals.seed, count, first_stream); });
        std::vector<double> data;
        data.reserve(count * dom.interior_size());
        bool finite = true;
        for (const auto& f : fields)
            for (double v : f.values) {
                data.push_back(v);
                finite = finite && std::isfinite(v);
            }
        run.raw("samples", data, {count, dom.interior_size()},
                {{"domain", rd.spec},
                 {"seed", globals.seed},
                 {"first_stream", first_stream},
                 {"rows", "one sample per row; columns are R_h rows in lexicographic point order (points.csv)"},
                 {"solver", solver->method()}});
        write_points(run, dom);
        run.result("interior_points", dom.interior_size());
        run.check("finite", finite, format("%zu samples of %zu values", count, dom.interior_size()));
    });
}

int run_interpolate(int d, int N, std::uint64_t stream, int grid) {
    if (grid <= 0) grid = 4 * N;
    auto dom = unit_box(d, N);
    auto run = open_run("interpolate");
    return execute(run, [&] {
        auto P = green::assemble_precision(dom);
        auto solver = run.stage("factorize", [&] { return green::make_precision_solver(P); });
        auto fields = sampler::sample(P, *solver, globals.seed, 1, stream);
        sampler::InterpolatedField psi(fields[0], N);
        auto csv = run.csv("interpolate.csv", concat(axis_columns("t_", d), {"psi"}));
        std::vector<int> idx(d, 0);
        std::vector<double> t(d);
        auto walk_grid = [&](int M, auto&& visit) {
            std::fill(idx.begin(), idx.end(), 0);
            while (true) {
                for (int i = 0; i < d; ++i) t[i] = static_cast<double>(idx[i]) / M;
                visit();
                int a = d - 1;
                while (a >= 0 && ++idx[a] > M) idx[a--] = 0;
                if (a < 0) break;
            }
        };
        run.stage("evaluate", [&] {
            walk_grid(grid, [&] {
                std::vector<double> row(t);
                row.push_back(psi(t));
                csv.row(row);
            });
        });
        double worst = 0.0;
        walk_grid(N, [&] { worst = std::max(worst, std::abs(psi(t) - psi.prefactor() * fields[0].at(idx))); });
        run.result("rescaled_max", sampler::rescaled_max(fields[0], d, N));
        run.check("lattice values", worst <= 1e-12, format("max |Psi_N(k/N) - kappa N^((d-4)/2) phi_k| = %.3e", worst));
    });
}

int run_max_scaling(int d, const std::string& N_text, std::size_t count, double ks_max) {
    const auto Ns = cli::parse_int_list(N_text);
    auto run = open_run("max-scaling");
    return execute(run, [&] {
        auto csv = run.csv("maxima.csv", {"N", "sample", "rescaled_max"});
        std::vector<std::vector<double>> maxima;
        for (std::size_t i = 0; i < Ns.size(); ++i) {
            const int N = Ns[i];
            auto dom = unit_box(d, N);
            auto P = green::assemble_precision(dom);
            auto solver = run.stage(format("factorize N=%d", N), [&] { return green::make_precision_solver(P); });
            auto fields = run.stage(format("sample N=%d", N), [&] { return sampler::sample(P, *solver, globals.seed + i, count); });
            std::vector<double> m;
            for (std::size_t k = 0; k < fields.size(); ++k) {
                m.push_back(sampler::rescaled_max(fields[k], d, N));
                csv.row(N, k, m.back());
            }
            maxima.push_back(std::move(m));
        }
        if (maxima.size() >= 2) {
            const double ks = sampler::ks_distance(maxima.front(), maxima.back());
            run.result("ks_distance", ks);
            run.check("KS distance", ks <= ks_max, format("N=%d vs N=%d: %.4f (<= %g)", Ns.front(), Ns.back(), ks, ks_max));
        }
    });
}

int run_moment_check(int d, int N, std::size_t pairs, double min_distance, double max_distance, double margin,
                     const std::string& range_text) {
    std::vector<double> range;
    if (!range_text.empty()) range = cli::parse_double_list(range_text);
    else if (d == 2) range = {1.5, 2.1};
    else if (d == 3) range = {0.9, 1.3};
    else throw ConfigError("--exponent-range is required for d = " + std::to_string(d));
    if (range.size() != 2) throw ConfigError("--exponent-range takes two values");
    if (min_distance <= 0.0) min_distance = 0.5 / N;
    auto dom = unit_box(d, N);
    auto run = open_run("moment-check");
    return execute(run, [&] {
        auto P = green::assemble_precision(dom);
        auto solver = run.stage("factorize", [&] { return green::make_precision_solver(P); });
        green::GreenTable table(dom);
        auto study = run.stage("pairs", [&] {
            return sampler::moment_study(table, P, *solver, N, pairs, globals.seed, min_distance, max_distance, margin);
        });
        auto csv = run.csv("moments.csv", {"distance", "variance"});
        for (const auto& p : study.points) csv.row(p.distance, p.variance);
        run.result("fitted_exponent", study.fitted_exponent);
        run.check("fitted exponent", study.fitted_exponent >= range[0] && study.fitted_exponent <= range[1],
                  format("%.4f in [%g, %g]", study.fitted_exponent, range[0], range[1]));
    });
}

int run_spectrum(DomainOptions& o, std::size_t k, double weyl_target, double weyl_tol, bool vectors) {
    auto rd = resolve_domain(o);
    auto dom = lattice::classify(rd.shape, cli::parse_h(rd.h));
    auto run = open_run("spectrum");
    run.result("domain", rd.spec);
    return execute(run, [&] {
        auto P = green::assemble_precision(dom);
        auto solver = run.stage("factorize", [&] { return green::make_precision_solver(P); });
        spectral::EigenOptions opt;
        opt.seed = globals.seed;
        auto B = run.stage("eigensolve", [&] { return spectral::eigendecompose(P, *solver, k, opt); });
        auto csv = run.csv("spectrum.csv", {"j", "lambda"});
        for (std::size_t j = 0; j < B.size(); ++j) csv.row(j + 1, B.values[static_cast<Eigen::Index>(j)]);
        if (vectors) {
            Eigen::MatrixXd rowwise = B.vectors.transpose();
            Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = rowwise;
            run.raw("eigenvectors", std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())),
                    {B.size(), dom.interior_size()},
                    {{"domain", rd.spec},
                     {"rows", "row j is u_{j+1} on R_h rows (points.csv), normalized so h^d sum u^2 = 1"}});
            write_points(run, dom);
        }
        run.result("method", B.method);
        const double top = B.values[B.values.size() - 1];
        run.check("eigen residual", B.max_residual <= 1e-6 * top,
                  format("max ||L_h u - lambda u|| = %.3e (<= 1e-6 lambda_k)", B.max_residual));
        run.check("orthonormality", B.orthonormality_error <= 1e-8, format("%.3e (<= 1e-8)", B.orthonormality_error));
        const double mu = spectral::dirichlet_laplacian_min_eigenvalue(dom);
        run.result("dirichlet_laplacian_min", mu);
        run.check("gap to squared Dirichlet ground state", B.values[0] - mu * mu > 1e-6,
                  format("lambda_1 %.8g - mu_1^2 %.8g = %.3e (> 1e-6)", B.values[0], mu * mu, B.values[0] - mu * mu));
        if (k >= 60) {
            std::vector<double> v(B.values.data(), B.values.data() + B.values.size());
            const double slope = spectral::weyl_fit(v);
            run.result("weyl_slope", slope);
            run.result("weyl_prefactor", spectral::weyl_prefactor(v, dom.dim(), 10, k - 10));
            if (weyl_target > 0.0)
                run.check("Weyl slope", std::abs(slope / weyl_target - 1.0) <= weyl_tol,
                          format("%.4f within %g of %.4f", slope, weyl_tol, weyl_target));
        } else if (weyl_target > 0.0) {
            throw ConfigError("a Weyl fit needs --k >= 60");
        }
    });
}

double test_function(const std::string& name, std::span<const double> x) {
    double r2 = 0.0, prod = 1.0;
    for (double v : x) {
        r2 += (v - 0.5) * (v - 0.5);
        prod *= std::sin(std::numbers::pi * v);
    }
    if (name == "bump") {
        const double s2 = r2 / 0.16;
        return s2 < 1.0 ? std::exp(-1.0 / (1.0 - s2)) : 0.0;
    }
    if (name == "gaussian") return std::exp(-r2 / (2 * 0.01));
    return prod;
}

int run_pair(int d, const std::string& fname, const std::string& h_text, double tolerance, bool cross_check) {
    const auto hs = cli::parse_h_list(h_text);
    std::vector<int> Ns;
    for (double h : hs) Ns.push_back(inverse_spacing(h));
    for (int N : Ns)
        if (N < 5) throw ConfigError("pair needs h <= 1/5");
    auto run = open_run("pair");
    return execute(run, [&] {
        auto csv = run.csv("pair.csv", {"h", "N", "unknowns", "variance", "thomee_variance", "relative_difference", "iterations"});
        const double kappa2 = 1.0 / (4.0 * d * d);
        std::vector<double> var;
        double cross = 0.0;
        for (std::size_t i = 0; i < Ns.size(); ++i) {
            const int N = Ns[i];
            const double h = 1.0 / N;
            // R_h of [0,1]^d at h = 1/N is {2..N-2}^d
            const int m = N - 3;
            std::vector<int> extent(d, m);
            std::size_t n = 1;
            for (int e : extent) n *= static_cast<std::size_t>(e);
            std::vector<double> f(n), x(d);
            std::vector<int> idx(d, 0);
            for (std::size_t r = 0; r < n; ++r) {
                for (int a = 0; a < d; ++a) x[a] = (idx[a] + 2) * h;
                f[r] = test_function(fname, x);
                for (int a = d - 1; a >= 0 && ++idx[a] == m; --a) idx[a] = 0;
            }
            Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(n));
            SolveInfo info;
            double v = 0.0;
            run.stage(format("green h=1/%d", N), [&] {
                BoxBilaplacianSolver s(extent, kappa2, tolerance, 20000);
                Eigen::VectorXd g = s.solve(Eigen::VectorXd(fv), &info);
                v = kappa2 * std::pow(h, d + 4) * fv.dot(g);
            });
            double vt = std::nan(""), rel = std::nan("");
            if (cross_check) {
                run.stage(format("thomee h=1/%d", N), [&] {
                    Eigen::VectorXd H = thomee::solve_box(extent, h, f, tolerance);
                    vt = std::pow(h, d) * fv.dot(H);
                });
                rel = std::abs(v - vt) / std::abs(vt);
                cross = std::max(cross, rel);
            }
            csv.row(h, N, n, v, vt, rel, info.iterations);
            var.push_back(v);
        }
        for (std::size_t i = 2; i < var.size(); ++i) {
            const double r = std::abs(var[i] - var[i - 1]) / std::abs(var[i - 1] - var[i - 2]);
            run.check(format("difference ratio h=1/%d", Ns[i]), r < 0.7, format("%.4f (< 0.7)", r));
        }
        if (cross_check) run.check("Green vs finite-difference solver", cross <= 1e-8, format("max relative %.2e (<= 1e-8)", cross));
    });
}

int run_thomee(int d, const std::string& h_text) {
    const auto hs = cli::parse_h_list(h_text);
    auto problem = thomee::manufactured_disk(d);
    auto run = open_run("thomee");
    return execute(run, [&] {
        auto study = run.stage("solve", [&] { return thomee::convergence_study(problem, hs); });
        auto csv = run.csv("convergence.csv",
                           {"h", "interior_points", "near_boundary_points", "error", "bound", "boundary_error", "residual"});
        for (const auto& r : study.rows)
            csv.row(r.h, r.interior_points, r.near_boundary_points, r.error, r.bound, r.boundary_error, r.residual);
        run.write_json("summary.json", {{"problem", study.label},
                                        {"fitted_order", study.fitted_order},
                                        {"fitted_constant", study.fitted_constant},
                                        {"monotone", study.monotone},
                                        {"within_bound", study.within_bound},
                                        {"pass", study.pass}});
        run.check("strictly decreasing", study.monotone, "error decreases with every halving of h");
        run.check("fitted order", study.fitted_order >= 0.5, format("%.4f (>= 0.5)", study.fitted_order));
        run.check("bound curve", study.within_bound,
                  format("error^2 <= C [M5^2 h^2 + h(M5^2 h^6 + M2^2)] with C = %.4e at every h", study.fitted_constant));
    });
}

int run_b2star(DomainOptions& o, int K) {
    auto rd = resolve_domain(o);
    const auto hs = cli::parse_h_list(rd.h);
    const int d = rd.shape.dim();
    auto run = open_run("b2star");
    run.result("domain", rd.spec);
    return execute(run, [&] {
        auto witnesses = run.csv("witnesses.csv", concat(concat({"h", "point"}, axis_columns("x_", d)), {"axis", "direction", "step"}));
        auto failures = run.csv("failures.csv", concat({"h", "point"}, axis_columns("x_", d)));
        for (double h : hs) {
            auto dom = lattice::classify(rd.shape, h);
            auto rep = lattice::verify_b2star(dom, K);
            for (const auto& w : rep.witnesses) {
                std::vector<double> row{h, static_cast<double>(w.point)};
                for (double v : dom.position(w.point)) row.push_back(v);
                row.insert(row.end(), {static_cast<double>(w.axis), static_cast<double>(w.direction), static_cast<double>(w.step)});
                witnesses.row(row);
            }
            for (auto p : rep.failures) {
                std::vector<double> row{h, static_cast<double>(p)};
                for (double v : dom.position(p)) row.push_back(v);
                failures.row(row);
            }
            run.check(format("B2* h=%.6g", h), rep.pass,
                      format("%zu near-boundary points checked, %zu without a witness (K=%d)", rep.checked, rep.failures.size(), K));
        }
    });
}

int run_infvol_green(int d, const std::string& x_text, const std::string& method, std::uint64_t walks, int max_steps,
                     double tail_tolerance) {
    auto x = cli::parse_int_list(x_text);
    if (static_cast<int>(x.size()) != d) throw ConfigError("--x must have d coordinates");
    if (d < 5) throw DomainError("the infinite-volume covariance integral diverges for d <= 4");
    auto run = open_run("infvol-green");
    return execute(run, [&] {
        auto csv = run.csv("infvol_green.csv", {"method", "value", "std_error", "quadrature_error", "tail_bound"});
        infvol::Estimate fourier;
        if (method != "walk") {
            fourier = run.stage("fourier", [&] { return infvol::green_infinite_fourier(x); });
            csv.row("fourier", fourier.value, 0.0, fourier.error, 0.0);
            run.check("quadrature error", fourier.error <= 1e-3 * std::abs(fourier.value),
                      format("%.3e (<= 1e-3 |G|)", fourier.error));
        }
        if (method != "fourier") {
            infvol::WalkConfig cfg;
            cfg.dim = d;
            cfg.walks = walks;
            cfg.max_steps = max_steps;
            cfg.seed = globals.seed;
            cfg.tail_tolerance = tail_tolerance;
            cfg.radius = 1;
            for (int v : x) cfg.radius = std::max(cfg.radius, std::abs(v));
            auto w = run.stage("walk", [&] { return infvol::walk_estimate(cfg); });
            const auto k = w.target_index(x);
            csv.row("walk", w.mean[k], w.std_error[k], 0.0, w.tail_bound);
            run.result("walk_c_hat", w.c_hat);
            if (method == "both") {
                const double band = 3.0 * w.std_error[k] + fourier.error + w.tail_bound;
                const double diff = std::abs(w.mean[k] - fourier.value);
                run.check("walk vs Fourier", diff <= band, format("|diff| %.3e <= 3 SE + quadrature + tail = %.3e", diff, band));
            }
        }
    });
}

int run_infvol_eta2(int d, const std::string& radii_text) {
    const auto radii = cli::parse_int_list(radii_text);
    auto run = open_run("infvol-eta2");
    return execute(run, [&] {
        auto trend = run.stage("quadrature", [&] { return infvol::eta2_trend(d, radii); });
        auto csv = run.csv("eta2.csv", {"radius", "green", "error", "ratio"});
        bool resolved = true;
        for (const auto& r : trend.rows) {
            csv.row(r.radius, r.green.value, r.green.error, r.ratio);
            resolved = resolved && r.green.error * std::pow(r.radius, d - 4) <= 0.1 * std::abs(r.ratio);
        }
        run.result("spread", trend.spread);
        run.result("last_ratio", trend.rows.back().ratio);
        run.check("quadrature resolved", resolved, format("ratio spread over the upper radii %.4f (reported, not asserted)", trend.spread));
    });
}

int run_infvol_variance(int d, double width, const std::string& N_text) {
    const auto Ns = cli::parse_int_list(N_text);
    auto f = infvol::gaussian_test(d, width);
    auto run = open_run("infvol-variance");
    return execute(run, [&] {
        const double limit = infvol::inv_laplacian_norm(f);
        auto csv = run.csv("variance.csv", {"N", "value", "error", "limit", "abs_difference"});
        std::vector<double> diffs;
        for (int N : Ns) {
            auto e = run.stage(format("N=%d", N), [&] { return infvol::scaling_variance(f, N); });
            diffs.push_back(std::abs(e.value - limit));
            csv.row(N, e.value, e.error, limit, diffs.back());
        }
        run.result("limit", limit);
        run.check("limit within 5%", diffs.back() <= 0.05 * limit,
                  format("|Var - limit| = %.4e at N=%d (<= %.4e)", diffs.back(), Ns.back(), 0.05 * limit));
        bool decreasing = true;
        for (std::size_t i = 1; i < diffs.size(); ++i) decreasing = decreasing && diffs[i] < diffs[i - 1];
        run.check("differences decrease", decreasing, "|Var - limit| shrinks along the N list");
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete membrane model: covariances, samples, spectra and scaling checks", "membrane"};
    globals.app = &app;
    app.set_help_flag("--help", "print help");
    app.config_formatter(std::make_shared<cli::JsonConfig>());
    app.set_config("--config", "", "JSON file of option values; flags on the command line win");
    app.option_defaults()->always_capture_default();
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--seed", globals.seed, "master seed for every random stream");
    app.add_option("--threads", globals.threads, "OpenMP threads (0 = runtime default, 1 = bit-exact serial order)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--out", globals.out, "output directory (default $MEMBRANE_OUT/<recipe> or membrane_out/<recipe>)");

    std::function<int()> action;

    DomainOptions green_dom;
    std::string columns = "all";
    auto* green = app.add_subcommand("green", "Green columns G(x,.) on a domain");
    add_domain_options(green, green_dom, "1/16", false);
    green->add_option("--columns", columns, "all, or lattice points as k1,k2;k1,k2;...");
    green->callback([&] { action = [&] { return run_green(green_dom, columns); }; });

    DomainOptions sample_dom;
    std::size_t count = 1;
    std::uint64_t first_stream = 0;
    auto* sample = app.add_subcommand("sample", "independent field samples as raw arrays");
    add_domain_options(sample, sample_dom, "1/16", false);
    sample->add_option("--count", count, "number of samples")->check(CLI::PositiveNumber);
    sample->add_option("--first-stream", first_stream, "stream index of the first sample");
    sample->callback([&] { action = [&] { return run_sample(sample_dom, count, first_stream); }; });

    int interp_d = 2, interp_N = 16, grid = 0;
    std::uint64_t stream = 0;
    auto* interp = app.add_subcommand("interpolate", "simplex interpolation of one sample on [0,1]^d");
    interp->add_option("--d", interp_d, "dimension (2 or 3)")->check(CLI::IsMember({2, 3}));
    interp->add_option("--N", interp_N, "lattice scale, h = 1/N")->check(CLI::Range(4, 1 << 20));
    interp->add_option("--stream", stream, "sample stream");
    interp->add_option("--grid", grid, "evaluation grid resolution per axis (0 = 4N)")->check(CLI::NonNegativeNumber);
    interp->callback([&] { action = [&] { return run_interpolate(interp_d, interp_N, stream, grid); }; });

    int max_d = 2;
    std::string max_N = "32,64";
    std::size_t max_count = 500;
    double ks_max = 0.1;
    auto* maxs = app.add_subcommand("max-scaling", "rescaled maxima across N and their KS distance");
    maxs->add_option("--d", max_d, "dimension")->check(CLI::IsMember({2, 3}));
    maxs->add_option("--N", max_N, "box scales");
    maxs->add_option("--count", max_count, "samples per scale")->check(CLI::PositiveNumber);
    maxs->add_option("--ks-max", ks_max, "largest accepted KS distance between the first and last scale");
    maxs->callback([&] { action = [&] { return run_max_scaling(max_d, max_N, max_count, ks_max); }; });

    int mom_d = 2, mom_N = 32;
    std::size_t mom_pairs = 200;
    double min_distance = 0.0, max_distance = 0.25, margin = 0.25;
    std::string mom_range;
    auto* mom = app.add_subcommand("moment-check", "exact increment variances against distance");
    mom->add_option("--d", mom_d, "dimension")->check(CLI::IsMember({2, 3}));
    mom->add_option("--N", mom_N, "box scale")->check(CLI::Range(4, 1 << 20));
    mom->add_option("--pairs", mom_pairs, "random pairs")->check(CLI::PositiveNumber);
    mom->add_option("--min-distance", min_distance, "smallest |t-s| (0 = 1/(2N))");
    mom->add_option("--max-distance", max_distance, "largest |t-s|");
    mom->add_option("--margin", margin, "distance of both points from the boundary along every axis");
    mom->add_option("--exponent-range", mom_range, "accepted exponent interval lo,hi (defaults for d=2,3)");
    mom->callback([&] {
        action = [&] { return run_moment_check(mom_d, mom_N, mom_pairs, min_distance, max_distance, margin, mom_range); };
    });

    DomainOptions spec_dom;
    std::size_t k = 20;
    double weyl_target = 0.0, weyl_tol = 0.1;
    bool vectors = true;
    auto* spec = app.add_subcommand("spectrum", "lowest eigenpairs of the discrete bilaplacian");
    add_domain_options(spec, spec_dom, "1/16", false);
    spec->add_option("--k", k, "number of eigenpairs")->check(CLI::PositiveNumber);
    spec->add_option("--weyl-target", weyl_target, "assert the Weyl slope against this value (needs k >= 60)");
    spec->add_option("--weyl-tol", weyl_tol, "relative tolerance of the Weyl slope");
    spec->add_flag("--vectors,!--no-vectors", vectors, "write eigenvectors");
    spec->callback([&] { action = [&] { return run_spectrum(spec_dom, k, weyl_target, weyl_tol, vectors); }; });

    int pair_d = 4;
    std::string pair_f = "bump", pair_h = "1/16,1/32,1/64";
    double pair_tol = 1e-12;
    bool cross_check = true;
    auto* pair = app.add_subcommand("pair", "variance of the field paired with a test function on [0,1]^d");
    pair->add_option("--d", pair_d, "dimension")->check(CLI::Range(2, 6));
    pair->add_option("--f", pair_f, "test function: bump, gaussian or sine")->check(CLI::IsMember({"bump", "gaussian", "sine"}));
    pair->add_option("--h-list", pair_h, "spacings 1/N");
    pair->add_option("--tolerance", pair_tol, "relative residual of the iterative solves");
    pair->add_flag("--cross-check,!--no-cross-check", cross_check, "repeat with the finite-difference solver");
    pair->callback([&] { action = [&] { return run_pair(pair_d, pair_f, pair_h, pair_tol, cross_check); }; });

    std::string th_shape = "ball", th_h = "1/8,1/16,1/32,1/64";
    int th_d = 2;
    auto* th = app.add_subcommand("thomee", "finite-difference convergence on the manufactured disk problem");
    th->add_option("--shape", th_shape, "domain (ball)")->check(CLI::IsMember({"ball"}));
    th->add_option("--d", th_d, "dimension")->check(CLI::Range(2, 5));
    th->add_option("--h", th_h, "decreasing spacings, at least three");
    th->callback([&] { action = [&] { return run_thomee(th_d, th_h); }; });

    auto* inf = app.add_subcommand("infvol", "infinite-volume covariance and scaling checks, d >= 5");
    inf->require_subcommand(1);

    int ig_d = 5, ig_steps = 200;
    std::string ig_x = "1,0,0,0,0", ig_method = "both";
    std::uint64_t ig_walks = 1'000'000;
    double ig_tail = 0.1;
    auto* ig = inf->add_subcommand("green", "G(0,x) by Fourier quadrature and by random walks");
    ig->add_option("--d", ig_d, "dimension")->check(CLI::Range(5, 12));
    ig->add_option("--x", ig_x, "lattice point");
    ig->add_option("--method", ig_method, "fourier, walk or both")->check(CLI::IsMember({"fourier", "walk", "both"}));
    ig->add_option("--walks", ig_walks, "walks")->check(CLI::PositiveNumber);
    ig->add_option("--max-steps", ig_steps, "walk length M")->check(CLI::PositiveNumber);
    ig->add_option("--tail-tolerance", ig_tail, "largest accepted tail bound");
    ig->callback([&] { action = [&] { return run_infvol_green(ig_d, ig_x, ig_method, ig_walks, ig_steps, ig_tail); }; });

    int ie_d = 5;
    std::string ie_radii = "5..15";
    auto* ie = inf->add_subcommand("eta2", "G(0, r e_1) r^(d-4) over radii");
    ie->add_option("--d", ie_d, "dimension")->check(CLI::Range(5, 12));
    ie->add_option("--radii", ie_radii, "radii, e.g. 5..15");
    ie->callback([&] { action = [&] { return run_infvol_eta2(ie_d, ie_radii); }; });

    int iv_d = 5;
    std::string iv_f = "gaussian", iv_N = "4,8,16";
    double iv_width = 1.0;
    auto* iv = inf->add_subcommand("variance", "Var(psi_N, f) against its limit");
    iv->add_option("--d", iv_d, "dimension")->check(CLI::Range(5, 12));
    iv->add_option("--f", iv_f, "test function (gaussian)")->check(CLI::IsMember({"gaussian"}));
    iv->add_option("--width", iv_width, "Gaussian width")->check(CLI::PositiveNumber);
    iv->add_option("--N", iv_N, "scales");
    iv->callback([&] { action = [&] { return run_infvol_variance(iv_d, iv_width, iv_N); }; });

    DomainOptions b2_dom;
    int K = 4;
    auto* b2 = app.add_subcommand("b2star", "B2* verification with witnesses");
    add_domain_options(b2, b2_dom, "1/16", true);
    b2->add_option("--K", K, "search radius in lattice steps")->check(CLI::PositiveNumber);
    b2->callback([&] { action = [&] { return run_b2star(b2_dom, K); }; });

    auto* rec = app.add_subcommand("recipes", "list recipes and the claims they check");
    rec->callback([&] {
        action = [] {
            for (const auto& r : catalog) std::printf("%s → %s: %s\n", r.name, r.anchor, r.summary);
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (globals.threads > 0) kernels::set_threads(globals.threads);
    try {
        return action();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
