#include "blowup/solver.hpp"
#include "blowup/trajectory_io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace blowup;

namespace {

GridPtr small_grid(int N)
{
    return std::make_shared<const WeightedGrid>(N, 20.0, N == 1 ? 201 : 81);
}

SolverConfig quick(double s_end, double ds = 1e-2)
{
    SolverConfig c;
    c.ds = ds;
    c.stride = 0.1;
    c.s_end = s_end;
    return c;
}

} // namespace

TEST_CASE("kappa is a steady state")
{
    for (double p : {2.0, 3.0, 5.0})
        for (int N : {1, 2}) {
            const auto P = ModelParams::make(p, N);
            const auto g = small_grid(N);
            const FieldState w(g, Vec::Constant(g->size(), P.kappa), 10.0);
            CHECK(rhs_w(P, w).values.cwiseAbs().maxCoeff() < 1e-14);
            const Trajectory t = simulate(P, w, quick(11.0, 1e-3));
            CHECK(t.termination == Termination::Horizon);
            CHECK((t.fields.back().array() - P.kappa).abs().maxCoeff() < 1e-12);
        }
}

TEST_CASE("spatially flat data follow the ODE")
{
    // w' = -w/2 + w^3 for p = 3; w(s) = kappa / sqrt(1 - c e^s) with c from w(s0)
    const auto P = ModelParams::make(3.0, 1);
    const auto g = small_grid(1);
    const double w0 = 0.7;
    auto exact = [&](double s) {
        const double c = (1.0 - P.kappa * P.kappa / (w0 * w0)) * std::exp(-10.0);
        return P.kappa / std::sqrt(1.0 - c * std::exp(s));
    };
    double prev = 0.0;
    for (double ds : {4e-3, 2e-3, 1e-3}) {
        const Trajectory t = simulate(P, FieldState(g, Vec::Constant(g->size(), w0), 10.0), quick(12.0, ds));
        const double err = std::abs(t.fields.back()[g->origin_index()] - exact(12.0));
        if (prev > 0.0) CHECK(prev / err == doctest::Approx(2.0).epsilon(0.05));
        prev = err;
    }
}

TEST_CASE("large data blow up and the run stops")
{
    const auto P = ModelParams::make(3.0, 1);
    const auto g = small_grid(1);
    const Trajectory t = simulate(P, FieldState(g, Vec::Constant(g->size(), 2.0 * P.kappa), 10.0), quick(20.0));
    CHECK(t.termination == Termination::Blowup);
    CHECK(t.end_s < 12.0);
}

TEST_CASE("observer can stop a run")
{
    const auto P = ModelParams::make(3.0, 1);
    const auto g = small_grid(1);
    int calls = 0;
    const Trajectory t = simulate(P, FieldState(g, Vec::Constant(g->size(), P.kappa), 10.0), quick(20.0),
                                  [&](double s, const Vec&) {
                                      ++calls;
                                      return s < 10.45;
                                  });
    CHECK(t.termination == Termination::Stopped);
    CHECK(calls == 6);
}

TEST_CASE("solver config validation")
{
    SolverConfig c = quick(20.0);
    CHECK_NOTHROW(c.validate(10.0));
    CHECK(c.steps_per_stride() == 10);
    c.stride = 0.105;
    CHECK_THROWS_AS(c.validate(10.0), std::invalid_argument);
    c = quick(5.0);
    CHECK_THROWS_AS(c.validate(10.0), std::invalid_argument);
}

TEST_CASE("initial data families")
{
    const auto P = ModelParams::make(3.0, 1);
    const auto g = small_grid(1);
    const FieldState mz = make_initial(InitialDataSpec::mz(1, 0.0, 10.0), g, P);
    for (Eigen::Index k = 0; k < g->size(); k += 17)
        CHECK(mz.values[k] == doctest::Approx(f_profile(P, Point(g->point(k) / std::sqrt(10.0)))));

    VASpec va;
    va.target = SymmetricMatrix::scalar(0.0);
    const FieldState zero = make_initial(InitialDataSpec::va_family(va, 10.0, 0.0, Vec::Zero(1), SymmetricMatrix(1)), g, P);
    CHECK(zero.values.cwiseAbs().maxCoeff() == 0.0);
    const FieldState odd = make_initial(InitialDataSpec::va_family(va, 10.0, 0.0, Vec::Constant(1, 1.0), SymmetricMatrix(1)), g, P);
    for (Eigen::Index k = 0; k < g->size(); ++k) CHECK(odd.values[k] == doctest::Approx(-odd.values[g->size() - 1 - k]));
    CHECK_THROWS_AS(make_initial(InitialDataSpec::mz(2, 0.0, 10.0), g, P), std::invalid_argument);
}

TEST_CASE("trajectory sampling, shifting and differences")
{
    const auto P = ModelParams::make(3.0, 1);
    const auto g = small_grid(1);
    const Trajectory t = simulate(P, make_initial(InitialDataSpec::mz(1, 0.0, 10.0), g, P), quick(14.0));
    REQUIRE(t.size() == 41);
    CHECK(t.index_of(12.0) == 20);
    CHECK((t.sample(12.0) - t.fields[20]).cwiseAbs().maxCoeff() == 0.0);
    // cubic in time between strides
    const Vec mid = t.sample(12.05);
    const Vec lin = 0.5 * (t.fields[20] + t.fields[21]);
    CHECK((mid - lin).cwiseAbs().maxCoeff() < 1e-3 * t.fields[20].cwiseAbs().maxCoeff());
    CHECK_FALSE(t.covers(14.5));

    const Trajectory sh = dilation_shift(t, std::exp(0.5));
    CHECK(sh.first_s() == doctest::Approx(10.0));
    CHECK(sh.last_s() == doctest::Approx(13.0));
    CHECK((sh.fields[0] - t.sample(11.0)).cwiseAbs().maxCoeff() < 1e-12);

    const Trajectory d = difference(t, t);
    for (const auto& f : d.fields) CHECK(f.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trajectory file round trip")
{
    const auto P = ModelParams::make(3.0, 1);
    const auto g = small_grid(1);
    Trajectory t = simulate(P, make_initial(InitialDataSpec::mz(1, 0.01, 10.0), g, P), quick(11.0));
    t.corrections.push_back({10.5, 1e-3});
    const std::string path = (std::filesystem::temp_directory_path() / "blowup_roundtrip.traj").string();
    save_trajectory(path, t);
    const Trajectory u = load_trajectory(path);
    std::remove(path.c_str());
    REQUIRE(u.size() == t.size());
    CHECK(u.grid->same_as(*t.grid));
    CHECK(u.params.p == t.params.p);
    CHECK(u.stride == t.stride);
    CHECK(u.initial.d0 == t.initial.d0);
    REQUIRE(u.corrections.size() == 1);
    CHECK(u.corrections[0].delta == 1e-3);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(u.s[i] == t.s[i]);
        CHECK((u.fields[i] - t.fields[i]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS(load_trajectory(path));
}
