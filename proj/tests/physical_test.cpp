#include "blowup/errors.hpp"
#include "blowup/physical.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace blowup;

namespace {

FieldState bump(const GridPtr& g, double s)
{
    return FieldState(g, (0.7 + 0.2 * (-(g->radius().array().square()) / 9.0).exp()).matrix(), s);
}

} // namespace

TEST_CASE("kappa maps to the ODE blow-up solution")
{
    const auto P = ModelParams::make(3.0, 1);
    const auto g = std::make_shared<const WeightedGrid>(1, 10.0, 101);
    const BlowupFrame frame{2.0, {}};
    const double s = 5.0;
    const PhysicalField u = to_physical(P, FieldState(g, Vec::Constant(g->size(), P.kappa), s), frame);
    CHECK(u.t == doctest::Approx(2.0 - std::exp(-s)));
    const double expected = P.kappa * std::pow(frame.T - u.t, -0.5);
    CHECK((u.values.array() - expected).abs().maxCoeff() < 1e-12 * expected);
    CHECK(u.axis[0] == doctest::Approx(-10.0 * std::exp(-0.5 * s)));
}

TEST_CASE("physical round trip")
{
    for (int N : {1, 2}) {
        const auto P = ModelParams::make(3.0, N);
        const auto g = std::make_shared<const WeightedGrid>(N, 12.0, N == 1 ? 241 : 81);
        const auto inner = std::make_shared<const WeightedGrid>(N, N == 1 ? 8.0 : 6.0, N == 1 ? 161 : 41);
        Point a = Point::Constant(N, 0.25);
        const BlowupFrame frame{1.0, a};
        const PhysicalField u = to_physical(P, bump(g, 3.0), frame);
        const FieldState back = to_similarity(P, u, inner);
        CHECK(back.s == doctest::Approx(3.0));
        const FieldState direct = bump(inner, 3.0);
        CHECK((back.values - direct.values).cwiseAbs().maxCoeff() < 1e-12);
        CHECK_THROWS_AS(to_similarity(P, u, std::make_shared<const WeightedGrid>(N, 20.0, 41)), InvalidInput);
    }
}

TEST_CASE("dilation is a shift in similarity time")
{
    const auto P = ModelParams::make(3.0, 1);
    const auto g = std::make_shared<const WeightedGrid>(1, 12.0, 241);
    const auto inner = std::make_shared<const WeightedGrid>(1, 8.0, 161);
    const BlowupFrame frame{1.0, {}};
    const double lambda = 1.7, s = 4.0;
    const PhysicalField d = dilate(P, to_physical(P, bump(g, s), frame), lambda);
    const FieldState w = to_similarity(P, d, inner);
    CHECK(w.s == doctest::Approx(s - 2.0 * std::log(lambda)));
    CHECK((w.values - bump(inner, s).values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(dilate(P, d, 0.0), InvalidInput);
}

TEST_CASE("u_star closed form for p = 3")
{
    const auto P = ModelParams::make(3.0, 2);
    for (double x : {1e-4, 0.01, 0.3, 0.9})
        CHECK(u_star(P, x) == doctest::Approx(std::sqrt(6.0 * std::abs(std::log(x))) / x).epsilon(1e-13));
    Point x(2);
    x << 0.3, 0.4;
    CHECK(u_star(P, x) == doctest::Approx(u_star(P, 0.5)));
    CHECK_THROWS_AS(u_star(P, 1.0), InvalidInput);
    CHECK_THROWS_AS(u_star(P, 0.0), InvalidInput);
}

TEST_CASE("t_tilde inverts its relation and is monotone")
{
    const BlowupFrame frame{1.0, {}};
    const double K = 5.0, top = t_tilde_max(K, frame);
    double prev_gap = 0.0, prev_t = frame.T;
    for (int i = 0; i <= 100; ++i) {
        const double x = top * std::pow(10.0, -6.0 + 6.0 * i / 100.0);
        const double gap = t_tilde_gap(x, K, frame);
        CHECK(std::abs(t_tilde_relation(gap, K) - x) <= 1e-12 * x);
        CHECK(gap > prev_gap);
        const double t = t_tilde(x, K, frame);
        CHECK(t <= prev_t);
        prev_gap = gap;
        prev_t = t;
    }
    CHECK(t_tilde_gap(top, K, frame) == doctest::Approx(std::exp(-1.0)));
    CHECK_THROWS_AS(t_tilde(1.01 * top, K, frame), InvalidInput);
    CHECK_THROWS_AS(t_tilde(0.0, K, frame), InvalidInput);
}

TEST_CASE("bound report of identical trajectories is zero")
{
    const auto P = ModelParams::make(3.0, 1);
    Trajectory t;
    t.params = P;
    t.grid = WeightedGrid::make_default(1);
    t.stride = 0.5;
    for (double s = 10.0; s <= 12.0 + 1e-9; s += 0.5) {
        t.s.push_back(s);
        t.fields.push_back(varphi_field(P, *t.grid, s));
    }
    const BoundReport r = difference_bound_report(P, t, t, BlowupFrame{1.0, {}});
    REQUIRE(!r.rows.empty());
    CHECK(r.branch == "max");
    CHECK(r.gaps.empty());
    for (const BoundRow& row : r.rows) {
        CHECK(row.measured == 0.0);
        CHECK(row.shape > 0.0);
        CHECK((row.band == "inner" || row.band == "intermediate"));
    }
    CHECK(r.inner_prefactor == 0.0);
    std::ostringstream os;
    write_bound_csv(os, r);
    CHECK(os.str().find("inner") != std::string::npos);
}
