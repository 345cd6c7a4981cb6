#include "blowup/physical.hpp"
#include "blowup/errors.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <ostream>

namespace blowup {

void BlowupFrame::validate(int N) const
{
    require(T > 0.0, "BlowupFrame: T must be positive");
    require(a.size() == 0 || a.size() == N, "BlowupFrame: blow-up point dimension differs from model");
}

double BlowupFrame::s_of(double t) const
{
    if (!(t < T)) throw InvalidInput("BlowupFrame: t must be below the blow-up time");
    return -std::log(T - t);
}

Point PhysicalField::point(Eigen::Index k) const
{
    const Eigen::Index n = axis.size();
    Point x(dim);
    if (dim == 1)
        x[0] = axis[k] + frame.at(0);
    else {
        x[0] = axis[k / n] + frame.at(0);
        x[1] = axis[k % n] + frame.at(1);
    }
    return x;
}

namespace {

double lagrange_axis(const Vec& ax, const double* vals, long stride, double x)
{
    const long n = ax.size();
    const double h = ax[1] - ax[0];
    const double u = (x - ax[0]) / h;
    const long nearest = std::lround(u);
    if (std::abs(u - static_cast<double>(nearest)) < 1e-12 && nearest >= 0 && nearest < n) return vals[nearest * stride];
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

double tensor_sample(int dim, const Vec& ax, const Vec& vals, const Point& off)
{
    if (dim == 1) return lagrange_axis(ax, vals.data(), 1, off[0]);
    const long n = ax.size();
    Vec col(n);
    for (long i = 0; i < n; ++i) col[i] = lagrange_axis(ax, vals.data() + i * n, 1, off[1]);
    return lagrange_axis(ax, col.data(), 1, off[0]);
}

} // namespace

bool PhysicalField::covers(const Point& x) const
{
    const double lo = axis[0], hi = axis[axis.size() - 1];
    const double tol = 1e-12 * std::max(1.0, hi - lo);
    for (int d = 0; d < dim; ++d) {
        const double o = x[d] - frame.at(d);
        if (o < lo - tol || o > hi + tol) return false;
    }
    return true;
}

double PhysicalField::sample(const Point& x) const
{
    require(x.size() == dim, "PhysicalField: point dimension differs");
    if (!covers(x)) throw InvalidInput("PhysicalField: point outside the covered region");
    Point off(dim);
    for (int d = 0; d < dim; ++d) off[d] = x[d] - frame.at(d);
    return tensor_sample(dim, axis, values, off);
}

PhysicalField to_physical(const ModelParams& params, const FieldState& w, const BlowupFrame& frame)
{
    require(w.grid != nullptr, "to_physical: field without grid");
    frame.validate(w.grid->dim());
    const double tau = std::exp(-w.s);
    const double t = frame.T - tau;
    PhysicalField u;
    u.dim = w.grid->dim();
    u.axis = std::sqrt(tau) * w.grid->axis();
    u.values = std::pow(tau, -1.0 / (params.p - 1.0)) * w.values;
    u.t = t;
    u.frame = frame;
    return u;
}

PhysicalField to_physical(const ModelParams& params, const FieldState& w, const BlowupFrame& frame, const Vec& x_axis)
{
    const PhysicalField native = to_physical(params, w, frame);
    require(x_axis.size() >= 4, "to_physical: target axis needs at least 4 nodes");
    PhysicalField u = native;
    u.axis = x_axis;
    const Eigen::Index n = x_axis.size();
    u.values.resize(u.dim == 1 ? n : n * n);
    for (Eigen::Index k = 0; k < u.values.size(); ++k) u.values[k] = native.sample(u.point(k));
    return u;
}

FieldState to_similarity(const ModelParams& params, const PhysicalField& u, const GridPtr& grid)
{
    require(grid != nullptr && grid->dim() == u.dim, "to_similarity: grid dimension differs from field");
    const double s = u.frame.s_of(u.t);
    const double tau = u.frame.T - u.t;
    const double sq = std::sqrt(tau);
    Vec out(grid->size());
    for (Eigen::Index k = 0; k < grid->size(); ++k) {
        Point x = grid->point(k) * sq;
        for (int d = 0; d < u.dim; ++d) x[d] += u.frame.at(d);
        if (!u.covers(x)) throw InvalidInput("to_similarity: grid reaches outside the physical field");
        out[k] = u.sample(x);
    }
    return FieldState(grid, std::pow(tau, 1.0 / (params.p - 1.0)) * out, s);
}

PhysicalField dilate(const ModelParams& params, const PhysicalField& u, double lambda)
{
    require(lambda > 0.0, "dilate: lambda must be positive");
    PhysicalField out = u;
    out.axis = lambda * u.axis;
    out.values = std::pow(lambda, -2.0 / (params.p - 1.0)) * u.values;
    out.t = u.frame.T - lambda * lambda * (u.frame.T - u.t);
    return out;
}

double u_star(const ModelParams& params, double x_norm)
{
    if (!(x_norm > 0.0 && x_norm < 1.0)) throw InvalidInput("u_star: need 0 < |x| < 1");
    const double p = params.p;
    return std::pow(8.0 * p * std::abs(std::log(x_norm)) / ((p - 1.0) * (p - 1.0) * x_norm * x_norm), 1.0 / (p - 1.0));
}

double u_star(const ModelParams& params, const Point& x)
{
    return u_star(params, x.norm());
}

double t_tilde_relation(double tau, double K)
{
    return K * std::sqrt(tau * std::abs(std::log(tau)));
}

double t_tilde_max(double K, const BlowupFrame& frame)
{
    return t_tilde_relation(std::min(frame.T, std::exp(-1.0)), K);
}

double t_tilde_gap(double x_norm, double K, const BlowupFrame& frame)
{
    require(frame.T > 0.0 && K > 0.0, "t_tilde: need T > 0 and K > 0");
    const double top = std::min(frame.T, std::exp(-1.0));
    if (!(x_norm > 0.0 && x_norm <= t_tilde_relation(top, K)))
        throw InvalidInput("t_tilde: |x| outside (0, K sqrt(tau |log tau|)] on the admissible branch");
    // bisection in log tau; the relation is increasing there
    double lo = std::log(std::numeric_limits<double>::min()), hi = std::log(top);
    for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (t_tilde_relation(std::exp(mid), K) < x_norm)
            lo = mid;
        else
            hi = mid;
    }
    const double a = std::exp(lo), b = std::exp(hi);
    const double ra = std::abs(t_tilde_relation(a, K) - x_norm), rb = std::abs(t_tilde_relation(b, K) - x_norm);
    return ra <= rb ? a : b;
}

double t_tilde(double x_norm, double K, const BlowupFrame& frame)
{
    return frame.T - t_tilde_gap(x_norm, K, frame);
}

BoundReport difference_bound_report(const ModelParams& params, const Trajectory& u, const Trajectory& uA,
                                    const BlowupFrame& frame, const BoundOptions& opt)
{
    require(u.has_fields() && uA.has_fields(), "difference_bound_report: trajectories need stored fields");
    require(u.grid->same_as(*uA.grid), "difference_bound_report: trajectories on different grids");
    require(opt.K > 0.0 && opt.x_max > 0.0 && opt.x_max < 1.0, "difference_bound_report: need K > 0, 0 < x_max < 1");
    frame.validate(params.N);
    const WeightedGrid& g = *u.grid;
    const double p = params.p;
    BoundReport rep;
    rep.branch = p < 3.0 ? "min" : "max";
    const double lo = opt.s_lo > 0.0 ? opt.s_lo : std::max(u.first_s(), uA.first_s());
    const double hi = opt.s_hi > 0.0 ? opt.s_hi : std::min(u.last_s(), uA.last_s());
    const double e_in = 0.5 - 1.0 / (p - 1.0);
    const double e_x = 1.0 - 2.0 / (p - 1.0), e_l = 2.0 - 1.0 / (p - 1.0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double s = u.s[i];
        if (s < lo - 1e-9 || s > hi + 1e-9) continue;
        if (!uA.covers(s)) {
            rep.gaps.push_back(s);
            continue;
        }
        const Vec diff = u.fields[i] - uA.sample(s);
        const double tau = std::exp(-s);
        const double scale = std::pow(tau, -1.0 / (p - 1.0));
        const double edge = opt.K * std::sqrt(s);

        BoundRow in{frame.t_of(s), s, "inner", 0.0, std::pow(tau, e_in) / std::pow(s, 1.5), 0.0};
        BoundRow mid{frame.t_of(s), s, "intermediate", 0.0, 0.0, 0.0};
        bool have_mid = false;
        for (Eigen::Index k = 0; k < g.size(); ++k) {
            const double r = g.radius()[k];
            const double d = scale * std::abs(diff[k]);
            if (r <= edge) {
                in.measured = std::max(in.measured, d);
                continue;
            }
            const double x = std::sqrt(tau) * r;
            if (x > opt.x_max) continue;
            const double shape = std::pow(x, e_x) / std::pow(std::abs(std::log(x)), e_l);
            have_mid = true;
            mid.measured = std::max(mid.measured, d);
            mid.shape = std::max(mid.shape, shape);
            mid.ratio = std::max(mid.ratio, d / shape);
        }
        in.ratio = in.measured / in.shape;
        rep.inner_prefactor = std::max(rep.inner_prefactor, in.ratio);
        rep.rows.push_back(in);
        if (have_mid) {
            rep.intermediate_prefactor = std::max(rep.intermediate_prefactor, mid.ratio);
            rep.rows.push_back(mid);
        }
    }
    return rep;
}

void write_bound_csv(std::ostream& os, const BoundReport& r)
{
    os << "t,s,band,measured,shape,ratio\n";
    os.precision(17);
    for (const auto& row : r.rows)
        os << row.t << ',' << row.s << ',' << row.band << ',' << row.measured << ',' << row.shape << ',' << row.ratio << '\n';
}

} // namespace blowup
