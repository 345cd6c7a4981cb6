#pragma once

#include "blowup/profile.hpp"
#include "blowup/spectral.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace blowup {

struct VASpec {
    double A = 30.0;
    double eta = 0.25;
    SymmetricMatrix target;   // the matrix written calligraphic A in the notes
    CutoffSpec cutoff;

    /// A > 1, eta in (0, 1/2), target of dimension N.
    void validate(int N) const;
};

struct ModeDecomposition {
    double s = 0.0;
    double v0 = 0.0;
    Vec v1;
    SymmetricMatrix v2;
    Vec v_minus;   // may be left empty by compact decompositions
    Vec v_e;
    double minus_sup = 0.0;   // ||v_- / (1 + |y|^3)||_inf
    double e_sup = 0.0;       // ||v_e||_inf
};

/// v_b = chi v is split as v0 + v1.y + 1/2 y^T v2 y - tr v2 + v_-, and v_e = (1 - chi) v.
ModeDecomposition decompose(const FieldState& v, double s, const VASpec& spec, bool keep_fields = true);
ModeDecomposition decompose(const WeightedGrid& grid, const Vec& v, double s, const VASpec& spec,
                            bool keep_fields = true);

/// v0 + v1.y + 1/2 y^T v2 y - tr(v2) + v_-
Vec reconstruct_inner(const WeightedGrid& grid, const ModeDecomposition& d);

enum class ModeKind { V0, V1, V2, Minus, Exterior };

struct ComponentId {
    ModeKind kind = ModeKind::V0;
    int i = 0;
    int j = 0;

    std::string name() const;
    bool operator==(const ComponentId& o) const { return kind == o.kind && i == o.i && j == o.j; }
};

struct Margin {
    ComponentId id;
    double value = 0.0;   // normalized margin, inside iff <= 1
    double sign = 0.0;    // sign of v0, v1_i or h_ij = (v2 - target/s^2)_ij; 0 for v_- and v_e
};

struct MembershipReport {
    double s = 0.0;
    std::vector<Margin> margins;   // fixed order: v0, v1 entries, v2 upper triangle row-major, v_-, v_e
    bool inside = true;
    std::size_t exiting = 0;       // argmax margin, first on ties

    const Margin& exiting_margin() const { return margins[exiting]; }
    double max_margin() const { return margins[exiting].value; }
    const Margin& find(const ComponentId& id) const;
};

MembershipReport check_VA(const ModeDecomposition& d, double s, const VASpec& spec);

struct ResidualSeries {
    std::vector<double> s;
    std::vector<double> r0;
    std::vector<Vec> r1;
    std::vector<SymmetricMatrix> rh;
};

/// Centered differences of the mode series: r0 = v0' - v0, r1 = v1' - v1/2, rh = h' + 2h/s.
ResidualSeries ode_residuals(const std::vector<ModeDecomposition>& series, const VASpec& spec);

void write_modes_csv(std::ostream& os, const std::vector<ModeDecomposition>& series, const VASpec& spec);
void write_residuals_csv(std::ostream& os, const ResidualSeries& r);

} // namespace blowup
