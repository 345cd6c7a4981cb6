#include "blowup/kernel.hpp"

#include <Eigen/Eigenvalues>

#include <map>
#include <mutex>

namespace blowup {

GaussLegendre GaussLegendre::compute(int n)
{
    require(n >= 1, "GaussLegendre: need at least one node");
    Mat J = Mat::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    GaussLegendre r;
    r.nodes = es.eigenvalues();
    r.weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
    return r;
}

const GaussLegendre& GaussLegendre::rule(int n)
{
    static std::mutex mu;
    static std::map<int, GaussLegendre> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute(n)).first;
    return it->second;
}

void KernelConfig::validate() const
{
    require(grid != nullptr, "KernelConfig: grid required");
    require(substeps >= 1, "KernelConfig: substep count must be at least 1");
    require(quadrature_points >= 2, "KernelConfig: need at least two quadrature points");
}

Semigroup::Semigroup(GridPtr grid, double t) : grid_(std::move(grid)), t_(t)
{
    require(grid_ != nullptr, "Semigroup: grid required");
    if (!(t > 0.0)) throw InvalidInput("apply_semigroup: t must be positive");
    const Vec& ax = grid_->axis();
    const int n = grid_->axis_size();
    const double h = grid_->spacing();
    const double var = t < kShortTime ? t : -std::expm1(-t);
    const double shrink = std::exp(-0.5 * t);
    const double norm = 1.0 / std::sqrt(4.0 * std::numbers::pi * var);
    M_.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = ax[i] * shrink - ax[j];
            const double w = (j == 0 || j == n - 1) ? 0.5 * h : h;
            M_(i, j) = norm * std::exp(-d * d / (4.0 * var)) * w;
        }
}

Vec Semigroup::apply(const Vec& f) const
{
    require(f.size() == grid_->size(), "Semigroup: sample count differs from grid");
    const double et = std::exp(t_);
    if (grid_->dim() == 1) return et * (M_ * f);
    const int n = grid_->axis_size();
    // k = i * n + j: row-major n x n, i along axis 0
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> F(f.data(), n, n);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> G = M_ * F * M_.transpose();
    return et * Eigen::Map<const Vec>(G.data(), f.size());
}

FieldState apply_semigroup(double t, const FieldState& f)
{
    require(f.grid != nullptr, "apply_semigroup: field without grid");
    const Semigroup S(f.grid, t);
    return FieldState(f.grid, S.apply(f.values), f.s + t);
}

FieldState apply_K(const ModelParams& params, double s, double sigma, const FieldState& f, const KernelConfig& cfg)
{
    cfg.validate();
    require(f.grid != nullptr && f.grid->same_as(*cfg.grid), "apply_K: field grid differs from kernel grid");
    require(sigma > 0.0 && s > sigma, "apply_K: need s > sigma > 0");
    const double dt = (s - sigma) / cfg.substeps;
    const Semigroup S(f.grid, dt);
    Vec v = f.values;
    auto half = [&](double tau) {
        if (cfg.zero_potential) return;
        v.array() *= (0.5 * dt * alpha_field(params, *f.grid, tau).array()).exp();
    };
    for (int k = 0; k < cfg.substeps; ++k) {
        half(sigma + k * dt);
        v = S.apply(v);
        half(sigma + (k + 1) * dt);
    }
    return FieldState(f.grid, v, s);
}

Point antiderivative_at(const ScalarFunction& g, const Point& y, const AntiderivativeOptions& opt)
{
    const int N = static_cast<int>(y.size());
    require(N >= 1, "antiderivative: empty point");
    const double r = y.norm();
    Point dir = r > 0.0 ? Point(y / r) : Point(Point::Unit(N, 0));
    Point out = Point::Zero(N);
    const double a = 0.5 * r, b = 0.5 * opt.reach;
    if (a >= b) return out;
    const GaussLegendre& gl = GaussLegendre::rule(opt.quadrature_points);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (Eigen::Index q = 0; q < gl.nodes.size(); ++q) {
        const double eta = mid + half * gl.nodes[q];
        acc += gl.weights[q] * std::pow(eta, N - 1) * g(Point(2.0 * eta * dir));
    }
    acc *= half * std::pow(2.0, N);
    if (N > 1) {
        require(r > 0.0, "antiderivative: undefined at the origin for N > 1");
        acc /= std::pow(r, N - 1);
    }
    return -acc * dir;
}

namespace {

void check_mean_zero(const Vec& samples, const WeightedGrid& grid, double tol)
{
    const int n = grid.axis_size();
    const double h = grid.spacing();
    Vec trap = Vec::Constant(n, h);
    trap[0] = trap[n - 1] = 0.5 * h;
    double mean = 0.0, mass = 0.0;
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
        double w = 1.0;
        if (grid.dim() == 1)
            w = trap[k];
        else
            w = trap[k / n] * trap[k % n];
        mean += w * samples[k];
        mass += w * std::abs(samples[k]);
    }
    if (mass > 0.0 && std::abs(mean) > tol * mass)
        throw InvalidInput("antiderivative: g does not have zero mean (relative mean " + std::to_string(mean / mass) + ")");
}

VectorField evaluate(const ScalarFunction& g, const GridPtr& grid, const AntiderivativeOptions& opt)
{
    VectorField out;
    const int N = grid->dim();
    for (int d = 0; d < N; ++d) out.components.emplace_back(grid, Vec::Zero(grid->size()));
    for (Eigen::Index k = 0; k < grid->size(); ++k) {
        const Point y = grid->point(k);
        if (N > 1 && y.norm() == 0.0) continue;
        const Point v = antiderivative_at(g, y, opt);
        for (int d = 0; d < N; ++d) out.components[static_cast<std::size_t>(d)].values[k] = v[d];
    }
    return out;
}

double lagrange4(const Vec& ax, const double* vals, long stride, double x)
{
    const long n = ax.size();
    const double h = ax[1] - ax[0];
    const double u = (x - ax[0]) / h;
    long base = static_cast<long>(std::floor(u)) - 1;
    base = std::clamp(base, 0L, n - 4);
    const double t = u - static_cast<double>(base);
    double out = 0.0;
    for (int a = 0; a < 4; ++a) {
        double l = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a) l *= (t - b) / static_cast<double>(a - b);
        out += l * vals[(base + a) * stride];
    }
    return out;
}

} // namespace

VectorField antiderivative(const ScalarFunction& g, const GridPtr& grid, const AntiderivativeOptions& opt)
{
    require(grid != nullptr, "antiderivative: grid required");
    Vec samples(grid->size());
    for (Eigen::Index k = 0; k < grid->size(); ++k) samples[k] = g(grid->point(k));
    check_mean_zero(samples, *grid, opt.mean_tol);
    return evaluate(g, grid, opt);
}

ScalarFunction interpolant(const FieldState& f)
{
    require(f.grid != nullptr, "interpolant: field without grid");
    const GridPtr grid = f.grid;
    const Vec vals = f.values;
    return [grid, vals](const Point& y) {
        const double L = grid->half_width();
        for (Eigen::Index d = 0; d < y.size(); ++d)
            if (std::abs(y[d]) > L) return 0.0;
        const Vec& ax = grid->axis();
        if (grid->dim() == 1) return lagrange4(ax, vals.data(), 1, y[0]);
        const int n = grid->axis_size();
        Vec col(n);
        for (int i = 0; i < n; ++i) col[i] = lagrange4(ax, vals.data() + static_cast<long>(i) * n, 1, y[1]);
        return lagrange4(ax, col.data(), 1, y[0]);
    };
}

VectorField antiderivative(const FieldState& g, const AntiderivativeOptions& opt)
{
    require(g.grid != nullptr, "antiderivative: field without grid");
    check_mean_zero(g.values, *g.grid, opt.mean_tol);
    AntiderivativeOptions o = opt;
    o.reach = std::min(opt.reach, g.grid->half_width());
    return evaluate(interpolant(g), g.grid, o);
}

double divergence_at(const std::function<Point(const Point&)>& G, const Point& y, double delta)
{
    double div = 0.0;
    for (Eigen::Index d = 0; d < y.size(); ++d) {
        Point a = y, b = y;
        a[d] += delta;
        b[d] -= delta;
        div += (G(a)[d] - G(b)[d]) / (2.0 * delta);
    }
    return div;
}

} // namespace blowup
