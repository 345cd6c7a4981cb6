#include "blowup/modes.hpp"

#include <doctest.h>

#include <sstream>

using namespace blowup;

namespace {

VASpec spec_for(int N)
{
    VASpec va;
    va.target = SymmetricMatrix::identity(N, 0.3);
    return va;
}

} // namespace

TEST_CASE("decomposition recovers polynomial modes inside the cutoff")
{
    const auto g = WeightedGrid::make_default(2);
    const VASpec va = spec_for(2);
    const double s = 100.0;   // cutoff radius 50 exceeds the grid
    Mat m(2, 2);
    m << 0.02, 0.005, 0.005, -0.01;
    Vec v = Vec::Constant(g->size(), 0.003) + quadratic_form_field(*g, SymmetricMatrix(m));
    v += 0.004 * g->coord(0) - 0.002 * g->coord(1);
    const ModeDecomposition d = decompose(*g, v, s, va);
    CHECK(d.v0 == doctest::Approx(0.003).epsilon(1e-9));
    CHECK(d.v1[0] == doctest::Approx(0.004).epsilon(1e-9));
    CHECK(d.v1[1] == doctest::Approx(-0.002).epsilon(1e-9));
    CHECK((d.v2.matrix() - m).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(d.minus_sup < 1e-10);
    CHECK(d.e_sup == 0.0);
    CHECK((reconstruct_inner(*g, d) - v).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("reconstruction identity with cutoff and stable part")
{
    const auto g = WeightedGrid::make_default(1);
    const VASpec va = spec_for(1);
    const double s = 10.0;
    Vec v(g->size());
    for (Eigen::Index k = 0; k < g->size(); ++k) {
        const double y = g->axis()[k];
        v[k] = 0.01 * std::cos(y) + 1e-3 * y * y * y / (1.0 + y * y);
    }
    const ModeDecomposition d = decompose(*g, v, s, va);
    const Vec chi = chi_field(va.cutoff, *g, s);
    CHECK((reconstruct_inner(*g, d) + d.v_e - v).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((reconstruct_inner(*g, d) - chi.cwiseProduct(v)).cwiseAbs().maxCoeff() < 1e-14);
    // v_- has no component on the modes 0, 1, 2
    for (int m = 0; m <= 2; ++m) CHECK(project_mode(*g, d.v_minus, m).norm_rho() < 1e-12);
}

TEST_CASE("membership margins")
{
    VASpec va = spec_for(1);
    va.A = 10.0;
    va.eta = 0.25;
    ModeDecomposition d;
    d.s = 16.0;
    d.v0 = 0.5 * 10.0 / std::pow(16.0, 2.25);
    d.v1 = Vec::Constant(1, -2.0 * 10.0 / std::pow(16.0, 2.25));
    d.v2 = SymmetricMatrix::scalar(0.3 / 256.0 + 0.25 * 100.0 / std::pow(16.0, 2.25));
    d.minus_sup = 0.0;
    d.e_sup = 0.0;
    const MembershipReport r = check_VA(d, 16.0, va);
    REQUIRE(r.margins.size() == 5);
    CHECK(r.margins[0].value == doctest::Approx(0.5));
    CHECK(r.margins[0].sign == 1.0);
    CHECK(r.margins[1].value == doctest::Approx(2.0));
    CHECK(r.margins[1].sign == -1.0);
    CHECK(r.margins[2].value == doctest::Approx(0.25));
    CHECK(r.margins[2].sign == 1.0);
    CHECK_FALSE(r.inside);
    CHECK(r.exiting_margin().id.name() == "v1_0");
    CHECK(r.find({ModeKind::V2, 0, 0}).value == doctest::Approx(0.25));
}

TEST_CASE("zero field sits at the centre of the shrinking set")
{
    const auto g = WeightedGrid::make_default(1);
    VASpec va = spec_for(1);
    va.target = SymmetricMatrix::scalar(0.0);
    const ModeDecomposition d = decompose(*g, Vec::Zero(g->size()), 10.0, va);
    const MembershipReport r = check_VA(d, 10.0, va);
    CHECK(r.inside);
    CHECK(r.max_margin() == 0.0);
}

TEST_CASE("spec validation")
{
    VASpec va = spec_for(1);
    CHECK_NOTHROW(va.validate(1));
    CHECK_THROWS_AS(va.validate(2), std::invalid_argument);
    va.eta = 0.9;
    CHECK_THROWS_AS(va.validate(1), std::invalid_argument);
    va.eta = 0.25;
    va.A = 0.5;
    CHECK_THROWS_AS(va.validate(1), std::invalid_argument);
}

TEST_CASE("null-mode residual vanishes on the exact solution")
{
    VASpec va = spec_for(1);
    std::vector<ModeDecomposition> series;
    // h = c / s^2 solves h' = -2h/s; v0 = e^s solves v0' = v0
    for (int k = 0; k <= 40; ++k) {
        ModeDecomposition d;
        d.s = 10.0 + 0.01 * k;
        d.v0 = 1e-8 * std::exp(d.s);
        d.v1 = Vec::Constant(1, 1e-6 * std::exp(0.5 * d.s));
        d.v2 = SymmetricMatrix::scalar((0.3 + 0.05) / (d.s * d.s));
        series.push_back(d);
    }
    const ResidualSeries r = ode_residuals(series, va);
    REQUIRE(r.s.size() == series.size() - 2);
    for (std::size_t i = 0; i < r.s.size(); ++i) {
        CHECK(std::abs(r.rh[i](0, 0)) < 1e-7);
        CHECK(std::abs(r.r0[i]) < 1e-4 * std::abs(series[i + 1].v0));
        CHECK(std::abs(r.r1[i][0]) < 1e-4 * std::abs(series[i + 1].v1[0]));
    }
    std::ostringstream os;
    write_modes_csv(os, series, va);
    CHECK(os.str().rfind("s,v0,v1_0,v2_00,minus_sup,e_sup,m_v0,m_v1_0,m_v2_00,m_v_minus,m_v_e\n", 0) == 0);
}
