#include "blowup/classifier.hpp"
#include "blowup/kernel.hpp"
#include "blowup/physical.hpp"
#include "blowup/shooting.hpp"
#include "blowup/trajectory_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

using namespace blowup;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double slope_of(const std::vector<double>& x, const std::vector<double>& y)
{
    return linear_fit(x, y).second;
}

// van der Corput radical inverse
double halton(int i, int base)
{
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

struct Shared {
    std::string cache;
    std::string artifacts;
    ModelParams p3 = ModelParams::make(3.0, 1);
    Trajectory ref;
    bool have_ref = false;
    ShootResult shot;
    Trajectory wa;
    bool have_shot = false;

    const Trajectory& reference()
    {
        if (have_ref) return ref;
        if (!cache.empty() && std::filesystem::exists(cache)) {
            ref = load_trajectory(cache);
        } else {
            ref = generate_reference(p3, WeightedGrid::make_default(1), ReferenceOptions{});
            if (!cache.empty()) save_trajectory(cache, ref);
        }
        have_ref = true;
        return ref;
    }

    ShootingProblem problem(double target)
    {
        ShootingProblem prob;
        prob.params = p3;
        prob.grid = reference().grid;
        prob.reference = &ref;
        prob.box.va.A = 30.0;
        prob.box.va.eta = 0.25;
        prob.box.va.target = SymmetricMatrix::scalar(target);
        prob.box.s0 = 10.0;
        prob.config.horizon = 40.0;
        return prob;
    }

    const ShootResult& shooting()
    {
        if (have_shot) return shot;
        const ShootingProblem prob = problem(0.3);
        shot = shoot(prob);
        exit_time(prob, shot.best, true, &wa);
        have_shot = true;
        return shot;
    }
};

Outcome c1_orthogonality(Shared&)
{
    const auto g = WeightedGrid::make_default(1);
    double worst = 0.0;
    for (int k = 0; k <= 8; ++k)
        for (int n = 0; n <= 8; ++n) {
            const double ip = inner_rho(phi_field(g, {k}), phi_field(g, {n}));
            const double nk = phi_norm_sq({k}), nn = phi_norm_sq({n});
            const double err = k == n ? std::abs(ip / nk - 1.0) : std::abs(ip) / std::sqrt(nk * nn);
            worst = std::max(worst, err);
        }
    return {worst < 1e-8, fmt("max relative error %.2e", worst)};
}

Outcome c2_mehler(Shared&)
{
    double eig = 0.0;
    for (int N : {1, 2}) {
        const auto g = WeightedGrid::make_default(N);
        for (double t : {0.25, 1.0}) {
            const Semigroup S(g, t);
            for (int m = 0; m <= 4; ++m)
                for (const auto& b : enumerate_multi_indices(m, N)) {
                    const FieldState f = phi_field(g, b);
                    const FieldState e(g, S.apply(f.values));
                    const FieldState d(g, e.values - std::exp((1.0 - 0.5 * m) * t) * f.values);
                    eig = std::max(eig, norm_rho(d) / norm_rho(f));
                }
        }
    }
    double bal = 0.0;
    for (int i = 1; i <= 1000; ++i) {
        const double t = 0.05 + 3.0 * halton(i, 2);
        const double y = -6.0 + 12.0 * halton(i, 3), x = -6.0 + 12.0 * halton(i, 5);
        const double a = std::exp(-y * y / 4.0) * mehler(t, y, x);
        const double b = std::exp(-x * x / 4.0) * mehler(t, x, y);
        bal = std::max(bal, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
    }
    return {eig < 1e-6 && bal < 1e-12, fmt("eigenrelation %.2e, detailed balance %.2e", eig, bal)};
}

Outcome c3_steady(Shared&)
{
    double worst = 0.0;
    for (double p : {2.0, 3.0, 5.0})
        for (int N : {1, 2}) {
            const auto P = ModelParams::make(p, N);
            const auto g = WeightedGrid::make_default(N);
            SolverConfig cfg;
            cfg.s_end = 11.0;
            cfg.store_fields = false;
            double dev = 0.0;
            simulate(P, FieldState(g, Vec::Constant(g->size(), P.kappa), 10.0), cfg, [&](double, const Vec& w) {
                dev = std::max(dev, (w.array() - P.kappa).abs().maxCoeff());
                return true;
            });
            worst = std::max(worst, dev);
        }
    return {worst < 1e-10, fmt("max |w - kappa| over one unit %.2e", worst)};
}

Outcome c4_reference(Shared& sh)
{
    const Trajectory& ref = sh.reference();
    const ModelParams& P = ref.params;
    const auto& g = *ref.grid;
    const Eigen::Index o = g.origin_index();
    const double target = P.kappa / 6.0;
    const double got = 50.0 * (ref.sample(50.0)[o] - P.kappa);
    const double rel = std::abs(got / target - 1.0);
    bool mono = true;
    double prev = INFINITY, top = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double s = ref.s[i];
        if (s < 20.0 - 1e-9 || s > 60.0 + 1e-9) continue;
        const double e = std::sqrt(s) * (ref.fields[i] - varphi_field(P, g, s)).cwiseAbs().maxCoeff();
        if (e > prev * (1.0 + 1e-12)) mono = false;
        prev = e;
        top = std::max(top, e);
    }
    return {rel < 0.25 && mono && std::isfinite(top),
            fmt("s(w(0)-kappa) = %.5f vs %.5f (%.1f%%), sqrt(s) sup|w-varphi| max %.4f, non-increasing %s", got, target,
                100.0 * rel, top, mono ? "yes" : "no")};
}

Outcome c5_dilation(Shared& sh)
{
    const Trajectory& ref = sh.reference();
    const Trajectory g = difference(dilation_shift(ref, std::numbers::e), ref);
    const Classification c = classify(g, {30.0, 60.0});
    const double target = ref.params.kappa / ref.params.p;
    const double B = c.variant == Variant::Case1 ? c.B(0, 0) : NAN;
    const double rel = std::abs(B / target - 1.0);
    return {c.variant == Variant::Case1 && rel < 0.10,
            fmt("%s, B = %.5f vs %.5f (%.1f%%)", to_string(c.variant).c_str(), B, target, 100.0 * rel)};
}

Outcome c6_shooting(Shared& sh)
{
    const ShootResult& r = sh.shooting();
    const ExitResult& best = r.best_run;
    ShootingProblem prob = sh.problem(0.3);
    const auto rows = sweep_points(prob, prob.box.boundary_samples(1));
    bool boundary = true, transversal = true;
    double latest = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].survived || rows[i].s_star > prob.box.s0 + 2.0) boundary = false;
        if (!rows[i].transversal) transversal = false;
        latest = std::max(latest, rows[i].s_star - prob.box.s0);
    }
    const bool ok = best.survived && best.max_margin <= 1.0 && boundary && transversal;
    return {ok, fmt("survived %s to %.1f, max margin %.3f, boundary exits within %.2f, transversal %s",
                    best.survived ? "yes" : "no", best.end_s, best.max_margin, latest, transversal ? "yes" : "no")};
}

Outcome c7_null_ode(Shared& sh)
{
    const ShootResult& r = sh.shooting();
    const ShootingProblem prob = sh.problem(0.3);
    const ResidualSeries res = ode_residuals(r.best_run.modes, prob.box.va);
    const double hi = r.best_run.quiet_s;
    std::vector<double> ls, lh, l0, l1;
    double r1max = 0.0;
    for (std::size_t i = 0; i < res.s.size(); ++i) {
        if (res.s[i] > hi + 1e-9) continue;
        ls.push_back(std::log(res.s[i]));
        lh.push_back(std::log(std::abs(res.rh[i](0, 0))));
        l0.push_back(std::log(std::abs(res.r0[i])));
        l1.push_back(std::log(std::abs(res.r1[i][0]) + 1e-300));
        r1max = std::max(r1max, std::abs(res.r1[i][0]));
    }
    const double sh_ = slope_of(ls, lh), s0 = slope_of(ls, l0);
    // v1 vanishes by symmetry for radial data; its residual is round-off
    const bool floor1 = r1max < 1e-12;
    const double s1 = floor1 ? NAN : slope_of(ls, l1);
    const bool ok = sh_ >= -3.5 && sh_ <= -2.5 && s0 <= -2.5 && (floor1 || s1 <= -2.5);
    return {ok, fmt("slopes over [10, %.1f]: h %.3f, v0 %.3f, v1 %s", hi, sh_, s0,
                    floor1 ? fmt("at round-off (max %.1e)", r1max).c_str() : fmt("%.3f", s1).c_str())};
}

Outcome c8_refinement(Shared& sh)
{
    const ShootResult& r = sh.shooting();
    const FitB f = fit_B(difference(sh.wa, sh.ref), {20.0, r.best_run.quiet_s});
    const double rel = std::abs(f.B(0, 0) / 0.3 - 1.0);
    return {rel < 0.15, fmt("B = %.5f +- %.1e over [20, %.1f] vs 0.3 (%.2f%%)", f.B(0, 0), f.err(0, 0),
                            r.best_run.quiet_s, 100.0 * rel)};
}

Outcome c9_antiderivative(Shared&)
{
    const auto g = WeightedGrid::make_default(1);
    const double pi = std::numbers::pi;
    auto rho = [pi](double y) { return std::exp(-y * y / 4.0) / std::sqrt(4.0 * pi); };
    const std::vector<std::pair<ScalarFunction, std::function<double(double)>>> cases = {
        {[&](const Point& y) { return (y[0] * y[0] - 2.0) * rho(y[0]); }, [&](double y) { return -2.0 * y * rho(y); }},
        {[&](const Point& y) { return y[0] * std::exp(-y[0] * y[0]); }, [](double y) { return -0.5 * std::exp(-y * y); }},
        {[&](const Point& y) { return std::sin(y[0]) * std::exp(-y[0] * y[0] / 2.0); }, {}},
    };
    double div_err = 0.0, oracle = 0.0, cum = 0.0;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto& gfun = cases[c].first;
        // cumulative trapezoid on a fine mesh from -20
        const double h = 1e-4;
        double acc = 0.0, yprev = -20.0;
        for (double y : {-3.0, -1.5, -0.4, 0.3, 1.1, 2.5}) {
            const long n = std::lround((y - yprev) / h);
            for (long k = 0; k < n; ++k) {
                const double a = yprev + k * h, b = a + h;
                acc += 0.5 * h * (gfun(Point::Constant(1, a)) + gfun(Point::Constant(1, b)));
            }
            yprev = y;
            const Point P = Point::Constant(1, y);
            const double G = antiderivative_at(gfun, P)[0];
            cum = std::max(cum, std::abs(G - acc));
            if (cases[c].second) oracle = std::max(oracle, std::abs(G - cases[c].second(y)));
            const double div = divergence_at([&](const Point& q) { return antiderivative_at(gfun, q); }, P, 1e-3);
            div_err = std::max(div_err, std::abs(div - gfun(P)));
        }
    }
    // moment-free: int g = int y g = int y^2 g = 0, so three nested applications stay mean-zero
    ScalarFunction g0 = [&](const Point& y) { return phi1(3, y[0]) * rho(y[0]); };
    auto step = [](ScalarFunction f) {
        return ScalarFunction([f](const Point& y) { return antiderivative_at(f, y, {.quadrature_points = 96})[0]; });
    };
    bool nested = true;
    try {
        ScalarFunction f = g0;
        for (int k = 0; k < 3; ++k) {
            const VectorField G = antiderivative(f, g, {.quadrature_points = 96, .mean_tol = 1e-6});
            if (!G.components[0].values.allFinite()) nested = false;
            f = step(f);
        }
    } catch (const std::exception&) {
        nested = false;
    }
    const bool ok = div_err < 1e-6 && std::max(oracle, cum) < 1e-8 && nested;
    return {ok, fmt("div residual %.2e, closed-form %.2e, cumulative %.2e, nested triple %s", div_err, oracle, cum,
                    nested ? "ok" : "failed")};
}

Outcome c10_kernel(Shared&)
{
    const auto P = ModelParams::make(3.0, 1);
    const double sigma = 20.0;
    // wide enough that the transported support stays on the grid up to s - sigma = 5
    const auto wide = std::make_shared<const WeightedGrid>(1, 600.0, 4001);
    const FieldState f(wide, (1.0 - chi_field(CutoffSpec{}, *wide, sigma).array()).matrix(), sigma);
    KernelConfig cfg;
    cfg.grid = wide;
    std::vector<double> t, l;
    for (double d = 0.5; d <= 5.0 + 1e-9; d += 0.25) {
        cfg.substeps = static_cast<int>(std::ceil(d / 0.25 - 1e-9));
        const FieldState k = apply_K(P, sigma + d, sigma, f, cfg);
        t.push_back(d);
        l.push_back(std::log(k.values.cwiseAbs().maxCoeff()));
    }
    const double rate = -slope_of(t, l);
    const double need = 1.0 / P.p - 0.2;
    return {rate >= need, fmt("decay rate %.4f (need >= %.4f)", rate, need)};
}

Outcome c11_case2(Shared& sh)
{
    const ShootResult& first = sh.shooting();
    const Trajectory& ref = sh.ref;
    const Trajectory u = dilation_shift(ref, std::numbers::e);
    const FitWindow win{20.0, 37.0};
    double target = fit_B(difference(u, ref), win).B(0, 0);
    double prev = 0.3;
    Vec start = first.best.flat();
    Trajectory wa;
    double mismatch = INFINITY;
    int it = 0;
    for (; it < 4 && std::abs(mismatch) > 0.01; ++it) {
        ShootingProblem prob = sh.problem(target);
        // the null parameter moves with the target roughly as -s0^eta dA / A^2
        start[2] -= (target - prev) * std::pow(prob.box.s0, prob.box.va.eta) / (prob.box.va.A * prob.box.va.A);
        prob.config.start = start;
        prob.config.outer_half_width = it == 0 ? 2e-5 : 2e-6;
        const ShootResult r = shoot(prob);
        exit_time(prob, r.best, true, &wa);
        mismatch = fit_B(difference(u, wa), win).B(0, 0);
        start = r.best.flat();
        prev = target;
        target += mismatch;
    }
    if (!sh.artifacts.empty()) {
        std::filesystem::create_directories(sh.artifacts);
        save_trajectory(sh.artifacts + "/u.traj", u);
        save_trajectory(sh.artifacts + "/ua.traj", wa);
    }
    const Trajectory g = difference(u, wa);
    const ModeNormSeries m = mode_norms(g);
    std::vector<double> s, l;
    for (std::size_t i = 0; i < m.s.size(); ++i)
        if (m.s[i] <= 15.0 + 1e-9) {
            s.push_back(m.s[i]);
            l.push_back(std::log(m.I[i]));
        }
    const double slope = slope_of(s, l);
    return {slope <= -0.4, fmt("after %d matching rounds (B residue %.1e), log I slope over [10, 15] %.3f", it,
                               mismatch, slope)};
}

Outcome c12_t_tilde(Shared&)
{
    const BlowupFrame frame{1.0, {}};
    const double K = 5.0;
    const double top = t_tilde_max(K, frame);
    double worst = 0.0;
    bool mono = true;
    double prev = INFINITY;
    double prev_gap = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double x = top * std::pow(10.0, -6.0 + 6.0 * i / 99.0);
        const double gap = t_tilde_gap(x, K, frame);
        const double t = t_tilde(x, K, frame);
        worst = std::max(worst, std::abs(x - t_tilde_relation(gap, K)) / x);
        if (!(gap > prev_gap) || t > prev) mono = false;
        prev = t;
        prev_gap = gap;
    }
    return {worst < 1e-12 && mono, fmt("max relative residual %.2e, monotone %s", worst, mono ? "yes" : "no")};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance checks"};
    std::vector<int> only, expect_fail;
    Shared sh;
    app.add_option("--only", only, "run only these criteria");
    app.add_option("--expect-fail", expect_fail, "criteria whose failure does not change the exit code");
    app.add_option("--reference-cache", sh.cache, "load or store the reference trajectory here");
    app.add_option("--artifacts", sh.artifacts, "store the matched case-2 pair (u.traj, ua.traj) here");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome(Shared&)>>> checks = {
        {"orthogonality", c1_orthogonality},   {"mehler", c2_mehler},
        {"steady-state", c3_steady},           {"reference", c4_reference},
        {"dilation", c5_dilation},             {"shooting", c6_shooting},
        {"null-mode-ode", c7_null_ode},        {"refinement", c8_refinement},
        {"antiderivative", c9_antiderivative}, {"kernel-decay", c10_kernel},
        {"case2", c11_case2},                  {"t-tilde", c12_t_tilde},
    };
    const std::set<int> selected(only.begin(), only.end()), tolerated(expect_fail.begin(), expect_fail.end());
    int bad = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = checks[i].second(sh);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2d %-15s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, checks[i].first.c_str(), o.detail.c_str(),
                    dt);
        std::fflush(stdout);
        if (!o.pass && !tolerated.count(id)) ++bad;
    }
    return bad == 0 ? 0 : 1;
}
