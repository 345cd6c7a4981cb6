#include "blowup/modes.hpp"
#include "blowup/errors.hpp"

#include <cmath>
#include <ostream>

namespace blowup {

void VASpec::validate(int N) const
{
    require(A > 1.0, "VASpec.A must exceed 1");
    require(eta > 0.0 && eta < 0.5, "VASpec.eta must lie in (0, 1/2)");
    require(target.dim() == N, "VASpec.target must be an N x N matrix");
    require(cutoff.K > 0.0, "VASpec.cutoff.K must be positive");
}

ModeDecomposition decompose(const WeightedGrid& grid, const Vec& v, double s, const VASpec& spec, bool keep_fields)
{
    require(s > 0.0, "decompose: s must be positive");
    require(v.size() == grid.size(), "decompose: sample count differs from grid");
    const int N = grid.dim();
    const Vec chi = chi_field(spec.cutoff, grid, s);
    const Vec vb = chi.cwiseProduct(v);

    ModeDecomposition d;
    d.s = s;
    const Eigen::ArrayXd wb = grid.weights().array() * vb.array();
    d.v0 = wb.sum();
    d.v1.resize(N);
    for (int i = 0; i < N; ++i) d.v1[i] = 0.5 * (wb * grid.coord(i).array()).sum();
    d.v2 = project_v2(grid, vb);

    Eigen::ArrayXd quad = Eigen::ArrayXd::Constant(grid.size(), d.v0) + quadratic_form_field(grid, d.v2).array();
    for (int i = 0; i < N; ++i) quad += d.v1[i] * grid.coord(i).array();
    Eigen::ArrayXd minus = vb.array() - quad;
    Eigen::ArrayXd ext = (1.0 - chi.array()) * v.array();

    d.minus_sup = (minus / (1.0 + grid.radius().array().cube())).abs().maxCoeff();
    d.e_sup = ext.abs().maxCoeff();
    if (keep_fields) {
        d.v_minus = minus.matrix();
        d.v_e = ext.matrix();
    }
    return d;
}

ModeDecomposition decompose(const FieldState& v, double s, const VASpec& spec, bool keep_fields)
{
    require(v.grid != nullptr, "decompose: field without grid");
    return decompose(*v.grid, v.values, s, spec, keep_fields);
}

Vec reconstruct_inner(const WeightedGrid& grid, const ModeDecomposition& d)
{
    require(d.v_minus.size() == grid.size(), "reconstruct_inner: decomposition was computed without fields");
    Eigen::ArrayXd out = Eigen::ArrayXd::Constant(grid.size(), d.v0) + quadratic_form_field(grid, d.v2).array();
    for (int i = 0; i < grid.dim(); ++i) out += d.v1[i] * grid.coord(i).array();
    return (out + d.v_minus.array()).matrix();
}

std::string ComponentId::name() const
{
    switch (kind) {
    case ModeKind::V0: return "v0";
    case ModeKind::V1: return "v1_" + std::to_string(i);
    case ModeKind::V2: return "v2_" + std::to_string(i) + std::to_string(j);
    case ModeKind::Minus: return "v_minus";
    case ModeKind::Exterior: return "v_e";
    }
    return "?";
}

const Margin& MembershipReport::find(const ComponentId& id) const
{
    for (const auto& m : margins)
        if (m.id == id) return m;
    throw InvalidInput("MembershipReport: unknown component " + id.name());
}

namespace {
double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }
}

MembershipReport check_VA(const ModeDecomposition& d, double s, const VASpec& spec)
{
    require(s > 0.0, "check_VA: s must be positive");
    const int N = static_cast<int>(d.v1.size());
    require(spec.target.dim() == N, "check_VA: target dimension differs from decomposition");
    const double A = spec.A;
    const double scale = std::pow(s, 2.0 + spec.eta);

    MembershipReport r;
    r.s = s;
    r.margins.push_back({{ModeKind::V0, 0, 0}, std::abs(d.v0) * scale / A, sgn(d.v0)});
    for (int i = 0; i < N; ++i)
        r.margins.push_back({{ModeKind::V1, i, 0}, std::abs(d.v1[i]) * scale / A, sgn(d.v1[i])});
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) {
            const double h = d.v2(i, j) - spec.target(i, j) / (s * s);
            r.margins.push_back({{ModeKind::V2, i, j}, std::abs(h) * scale / (A * A), sgn(h)});
        }
    r.margins.push_back({{ModeKind::Minus, 0, 0}, d.minus_sup * scale / A, 0.0});
    r.margins.push_back({{ModeKind::Exterior, 0, 0}, d.e_sup * std::pow(s, 0.5 + spec.eta) / (A * A), 0.0});

    r.exiting = 0;
    for (std::size_t k = 1; k < r.margins.size(); ++k)
        if (r.margins[k].value > r.margins[r.exiting].value) r.exiting = k;
    r.inside = r.margins[r.exiting].value <= 1.0;
    return r;
}

ResidualSeries ode_residuals(const std::vector<ModeDecomposition>& series, const VASpec& spec)
{
    if (series.size() < 3) throw InvalidInput("ode_residuals: need at least 3 stored decompositions");
    const int N = static_cast<int>(series.front().v1.size());
    ResidualSeries out;
    for (std::size_t k = 1; k + 1 < series.size(); ++k) {
        const auto& a = series[k - 1];
        const auto& b = series[k];
        const auto& c = series[k + 1];
        const double dt = c.s - a.s;
        require(dt > 0.0, "ode_residuals: times must increase");
        const double s = b.s;
        out.s.push_back(s);
        out.r0.push_back((c.v0 - a.v0) / dt - b.v0);
        out.r1.push_back(((c.v1 - a.v1) / dt - 0.5 * b.v1).eval());
        SymmetricMatrix rh(N);
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                auto h = [&](const ModeDecomposition& d) { return d.v2(i, j) - spec.target(i, j) / (d.s * d.s); };
                rh.set(i, j, (h(c) - h(a)) / dt + 2.0 * h(b) / s);
            }
        out.rh.push_back(rh);
    }
    return out;
}

void write_modes_csv(std::ostream& os, const std::vector<ModeDecomposition>& series, const VASpec& spec)
{
    if (series.empty()) return;
    const int N = static_cast<int>(series.front().v1.size());
    os << "s,v0";
    for (int i = 0; i < N; ++i) os << ",v1_" << i;
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) os << ",v2_" << i << j;
    os << ",minus_sup,e_sup";
    const MembershipReport probe = check_VA(series.front(), series.front().s, spec);
    for (const auto& m : probe.margins) os << ",m_" << m.id.name();
    os << '\n';
    os.precision(17);
    for (const auto& d : series) {
        os << d.s << ',' << d.v0;
        for (int i = 0; i < N; ++i) os << ',' << d.v1[i];
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) os << ',' << d.v2(i, j);
        os << ',' << d.minus_sup << ',' << d.e_sup;
        for (const auto& m : check_VA(d, d.s, spec).margins) os << ',' << m.value;
        os << '\n';
    }
}

void write_residuals_csv(std::ostream& os, const ResidualSeries& r)
{
    if (r.s.empty()) return;
    const int N = static_cast<int>(r.r1.front().size());
    os << "s,r0";
    for (int i = 0; i < N; ++i) os << ",r1_" << i;
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) os << ",rh_" << i << j;
    os << '\n';
    os.precision(17);
    for (std::size_t k = 0; k < r.s.size(); ++k) {
        os << r.s[k] << ',' << r.r0[k];
        for (int i = 0; i < N; ++i) os << ',' << r.r1[k][i];
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) os << ',' << r.rh[k](i, j);
        os << '\n';
    }
}

} // namespace blowup
