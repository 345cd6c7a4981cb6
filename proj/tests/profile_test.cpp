#include "blowup/profile.hpp"

#include <doctest.h>

#include <cmath>

using namespace blowup;

TEST_CASE("kappa values")
{
    CHECK(ModelParams::make(3.0, 1).kappa == doctest::Approx(std::sqrt(0.5)));
    CHECK(ModelParams::make(2.0, 2).kappa == doctest::Approx(1.0));
    CHECK(ModelParams::make(5.0, 1).kappa == doctest::Approx(std::pow(4.0, -0.25)));
    CHECK_THROWS_AS(ModelParams::make(1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(ModelParams::make(3.0, 3), std::invalid_argument);
}

TEST_CASE("kappa is a root of the ODE right-hand side")
{
    for (double p : {2.0, 3.0, 5.0, 1.7}) {
        const auto m = ModelParams::make(p, 1);
        CHECK(signed_power(m.kappa, p) - m.kappa / (p - 1.0) == doctest::Approx(0.0).epsilon(1e-14));
    }
    CHECK(signed_power(-2.0, 3.0) == -8.0);
    CHECK(signed_power(-2.0, 2.0) == -4.0);
}

TEST_CASE("profile shape")
{
    const auto m = ModelParams::make(3.0, 1);
    CHECK(f_profile(m, Point::Zero(1)) == doctest::Approx(m.kappa));
    // f(xi) = kappa (1 + xi^2 / 6)^{-1/2} for p = 3
    const double xi = 1.7;
    CHECK(f_profile(m, Point::Constant(1, xi)) == doctest::Approx(m.kappa / std::sqrt(1.0 + xi * xi / 6.0)));
    const double s = 12.0;
    CHECK(varphi(m, Point::Zero(1), s) == doctest::Approx(m.kappa + m.kappa / (6.0 * s)));
}

TEST_CASE("profile solves the leading-order ODE")
{
    // -xi/2 f' - f/(p-1) + f^p = 0
    for (double p : {2.0, 3.0, 5.0}) {
        const auto m = ModelParams::make(p, 1);
        for (double xi : {0.3, 1.0, 2.5}) {
            const double h = 1e-5;
            const double f = f_radial(m, xi * xi);
            const double fp = (f_radial(m, (xi + h) * (xi + h)) - f_radial(m, (xi - h) * (xi - h))) / (2.0 * h);
            CHECK(-0.5 * xi * fp - f / (p - 1.0) + std::pow(f, p) == doctest::Approx(0.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("potential tends to zero near the origin for large s")
{
    const auto m = ModelParams::make(3.0, 2);
    CHECK(std::abs(alpha_potential(m, Point::Zero(2), 1e8)) < 1e-7);
    const auto g = WeightedGrid::make_default(2);
    const Vec a = alpha_field(m, *g, 20.0);
    CHECK(a[g->origin_index()] == doctest::Approx(alpha_potential(m, Point::Zero(2), 20.0)));
}

TEST_CASE("cutoff")
{
    CHECK(chi0(0.0) == 1.0);
    CHECK(chi0(1.0) == 1.0);
    CHECK(chi0(2.0) == 0.0);
    CHECK(chi0(1.5) == doctest::Approx(0.5));
    double prev = 1.0;
    for (double r = 1.0; r <= 2.0; r += 0.01) {
        CHECK(chi0(r) <= prev);
        prev = chi0(r);
    }
    const CutoffSpec c{5.0};
    const double s = 16.0;
    CHECK(chi_cutoff(c, Point::Constant(1, 19.9), s) == 1.0);
    CHECK(chi_cutoff(c, Point::Constant(1, 40.1), s) == 0.0);
    const auto g = WeightedGrid::make_default(1);
    const Vec chi2 = chi_field(c, *g, s, 2.0);
    for (Eigen::Index k = 0; k < g->size(); k += 97)
        CHECK(chi2[k] == doctest::Approx(chi_cutoff(c, Point(2.0 * g->point(k)), s)));
}
