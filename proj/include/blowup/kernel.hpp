#pragma once

#include "blowup/errors.hpp"
#include "blowup/profile.hpp"
#include "blowup/spectral.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace blowup {

inline constexpr double kShortTime = 1e-8;

/// Kernel of e^{tL}: e^t (4 pi (1 - e^-t))^{-N/2} exp(-|y e^{-t/2} - x|^2 / (4 (1 - e^-t))).
/// Below kShortTime the variance 1 - e^-t is replaced by t.
template <typename Scalar, typename DerivedY, typename DerivedX>
Scalar mehler(Scalar t, const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedX>& x)
{
    using std::exp;
    using std::expm1;
    using std::pow;
    if (!(t > Scalar(0))) throw InvalidInput("mehler: t must be positive");
    require(y.size() == x.size(), "mehler: points of different dimension");
    const Scalar var = t < Scalar(kShortTime) ? t : -expm1(-t);
    const Scalar shrink = exp(-t / Scalar(2));
    Scalar d2(0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const Scalar d = Scalar(y[i]) * shrink - Scalar(x[i]);
        d2 += d * d;
    }
    const Scalar n = Scalar(y.size());
    return exp(t) * pow(Scalar(4) * Scalar(std::numbers::pi) * var, -n / Scalar(2)) * exp(-d2 / (Scalar(4) * var));
}

inline double mehler(double t, double y, double x)
{
    return mehler(t, Point::Constant(1, y), Point::Constant(1, x));
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
struct GaussLegendre {
    Vec nodes;
    Vec weights;
    static const GaussLegendre& rule(int n);
    static GaussLegendre compute(int n);
};

struct KernelConfig {
    GridPtr grid;
    int substeps = 16;
    int quadrature_points = 64;
    bool zero_potential = false;   // drop alpha from K (reduces to the semigroup)

    void validate() const;
};

/// e^{tL} on a fixed grid as a dense one-dimensional quadrature matrix, applied per axis.
class Semigroup {
public:
    Semigroup(GridPtr grid, double t);
    Vec apply(const Vec& f) const;
    double t() const { return t_; }

private:
    GridPtr grid_;
    double t_;
    Mat M_;
};

FieldState apply_semigroup(double t, const FieldState& f);

/// K(s, sigma) f by Strang splitting of d/ds K = (L + alpha) K.
FieldState apply_K(const ModelParams& params, double s, double sigma, const FieldState& f, const KernelConfig& cfg);

using ScalarFunction = std::function<double(const Point&)>;

struct VectorField {
    std::vector<FieldState> components;
    int dim() const { return static_cast<int>(components.size()); }
};

struct AntiderivativeOptions {
    int quadrature_points = 64;
    double mean_tol = 1e-8;      // |int g| / int |g| above this: rejected
    double reach = 40.0;         // g is taken as 0 beyond |x| = reach
};

/// g^{(-1)}(y) = -int_0^1 y / tau^{N+1} g(y / tau) dtau (sign chosen so that div g^{(-1)} = g),
/// evaluated after eta = |y| / (2 tau) by Gauss-Legendre on [|y|/2, reach/2].
Point antiderivative_at(const ScalarFunction& g, const Point& y, const AntiderivativeOptions& opt = {});

/// Mean-zero check by trapezoid on the grid, then antiderivative_at at every node.
VectorField antiderivative(const ScalarFunction& g, const GridPtr& grid, const AntiderivativeOptions& opt = {});
/// Grid version: g is interpolated (cubic per axis) between nodes.
VectorField antiderivative(const FieldState& g, const AntiderivativeOptions& opt = {});

/// Cubic (4-point Lagrange per axis) interpolant of grid samples, 0 outside the grid.
ScalarFunction interpolant(const FieldState& f);

/// Centered-difference divergence of a vector-valued callable at y.
double divergence_at(const std::function<Point(const Point&)>& G, const Point& y, double delta = 1e-3);

} // namespace blowup
