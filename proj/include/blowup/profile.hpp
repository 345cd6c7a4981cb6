#pragma once

#include "blowup/spectral.hpp"

namespace blowup {

struct ModelParams {
    double p = 3.0;
    int N = 1;
    double kappa = 0.0;

    /// Validates p > 1, N in {1, 2} and fills kappa = (p-1)^{-1/(p-1)}.
    static ModelParams make(double p, int N);
};

/// Smooth monotone bump: 1 on [0,1], 0 on [2,inf), C-infinity in between.
double chi0(double r);

struct CutoffSpec {
    double K = 5.0;
};

/// |x|^{p-1} x, with the integer exponents done by multiplication.
inline double signed_power(double x, double p)
{
    if (p == 3.0) return x * x * x;
    if (p == 2.0) return std::abs(x) * x;
    if (p == 5.0) { const double x2 = x * x; return x2 * x2 * x; }
    return std::pow(std::abs(x), p - 1.0) * x;
}

/// f as a function of |xi|^2.
template <typename Scalar>
Scalar f_radial(const ModelParams& m, Scalar xi_sq)
{
    using std::pow;
    return Scalar(m.kappa) * pow(Scalar(1) + Scalar((m.p - 1.0) / (4.0 * m.p)) * xi_sq, Scalar(-1.0 / (m.p - 1.0)));
}

double f_profile(const ModelParams& m, const Point& xi);
double varphi(const ModelParams& m, const Point& y, double s);
double alpha_potential(const ModelParams& m, const Point& y, double s);
double chi_cutoff(const CutoffSpec& c, const Point& y, double s);

/// The same quantities sampled on a grid.
Vec varphi_field(const ModelParams& m, const WeightedGrid& g, double s);
Vec alpha_field(const ModelParams& m, const WeightedGrid& g, double s);
/// chi(scale * y, s); scale = 2 gives the cutoff used for initial data.
Vec chi_field(const CutoffSpec& c, const WeightedGrid& g, double s, double scale = 1.0);

} // namespace blowup
