#include "blowup/profile.hpp"
#include "blowup/errors.hpp"

namespace blowup {

ModelParams ModelParams::make(double p, int N)
{
    require(N == 1 || N == 2, "ModelParams: N must be 1 or 2");
    require(p > 1.0, "ModelParams: p must exceed 1");
    ModelParams m;
    m.p = p;
    m.N = N;
    m.kappa = std::pow(p - 1.0, -1.0 / (p - 1.0));
    return m;
}

namespace {
double bump_psi(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
}

double chi0(double r)
{
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    const double a = bump_psi(2.0 - r);
    const double b = bump_psi(r - 1.0);
    return a / (a + b);
}

double f_profile(const ModelParams& m, const Point& xi)
{
    return f_radial(m, xi.squaredNorm());
}

double varphi(const ModelParams& m, const Point& y, double s)
{
    require(s > 0.0, "varphi: s must be positive");
    return f_radial(m, y.squaredNorm() / s) + m.N * m.kappa / (2.0 * m.p * s);
}

double alpha_potential(const ModelParams& m, const Point& y, double s)
{
    const double phi = varphi(m, y, s);
    return m.p * (std::pow(std::abs(phi), m.p - 1.0) - 1.0 / (m.p - 1.0));
}

double chi_cutoff(const CutoffSpec& c, const Point& y, double s)
{
    require(s > 0.0, "chi_cutoff: s must be positive");
    return chi0(y.norm() / (c.K * std::sqrt(s)));
}

Vec varphi_field(const ModelParams& m, const WeightedGrid& g, double s)
{
    require(s > 0.0, "varphi: s must be positive");
    const double shift = m.N * m.kappa / (2.0 * m.p * s);
    Vec out(g.size());
    for (Eigen::Index k = 0; k < g.size(); ++k) {
        const double r = g.radius()[k];
        out[k] = f_radial(m, r * r / s) + shift;
    }
    return out;
}

Vec alpha_field(const ModelParams& m, const WeightedGrid& g, double s)
{
    Vec phi = varphi_field(m, g, s);
    return (m.p * (phi.array().abs().pow(m.p - 1.0) - 1.0 / (m.p - 1.0))).matrix();
}

Vec chi_field(const CutoffSpec& c, const WeightedGrid& g, double s, double scale)
{
    require(s > 0.0, "chi_cutoff: s must be positive");
    const double denom = c.K * std::sqrt(s);
    Vec out(g.size());
    for (Eigen::Index k = 0; k < g.size(); ++k) out[k] = chi0(scale * g.radius()[k] / denom);
    return out;
}

} // namespace blowup
