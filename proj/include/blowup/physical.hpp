#pragma once

#include "blowup/profile.hpp"
#include "blowup/solver.hpp"
#include "blowup/spectral.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace blowup {

struct BlowupFrame {
    double T = 1.0;
    Point a;   // blow-up point; empty means the origin

    void validate(int N) const;
    double at(int d) const { return a.size() == 0 ? 0.0 : a[d]; }
    /// s = -log(T - t); requires t < T.
    double s_of(double t) const;
    double t_of(double s) const { return T - std::exp(-s); }
};

/// u on a uniform tensor grid in x (same layout as WeightedGrid) at time t.
struct PhysicalField {
    int dim = 1;
    Vec axis;        // per-axis offsets x - a
    Vec values;
    double t = 0.0;
    BlowupFrame frame;

    Point point(Eigen::Index k) const;
    Eigen::Index size() const { return values.size(); }
    /// Cubic (4-point per axis) interpolation; throws outside the covered box.
    double sample(const Point& x) const;
    bool covers(const Point& x) const;
};

/// Native nodes: x = a + sqrt(T - t) y on the grid of w, t = T - e^{-s}.
PhysicalField to_physical(const ModelParams& params, const FieldState& w, const BlowupFrame& frame);
/// Values on the given offset axis (cubic interpolation in y).
PhysicalField to_physical(const ModelParams& params, const FieldState& w, const BlowupFrame& frame, const Vec& x_axis);
/// w(y, s) = (T - t)^{1/(p-1)} u(a + sqrt(T - t) y, t) on the nodes of grid.
FieldState to_similarity(const ModelParams& params, const PhysicalField& u, const GridPtr& grid);

/// D_lambda u at the time t with T - t = lambda^2 (T - t_u): lambda^{-2/(p-1)} u(a + (x - a) / lambda, t_u).
/// In similarity variables this is the shift s -> s + 2 log lambda.
PhysicalField dilate(const ModelParams& params, const PhysicalField& u, double lambda);

/// [8p |log|x|| / ((p-1)^2 |x|^2)]^{1/(p-1)} for 0 < |x| < 1.
double u_star(const ModelParams& params, double x_norm);
double u_star(const ModelParams& params, const Point& x);

/// |x| = K sqrt(tau |log tau|), tau = T - t_tilde on the increasing branch 0 < tau <= min(T, 1/e).
double t_tilde(double x_norm, double K, const BlowupFrame& frame);
/// T - t_tilde, kept separately since it underflows T - t for small |x|.
double t_tilde_gap(double x_norm, double K, const BlowupFrame& frame);
/// |x| at t_tilde = t (the same relation, forward).
double t_tilde_relation(double tau, double K);
/// Largest admissible |x|.
double t_tilde_max(double K, const BlowupFrame& frame);

struct BoundRow {
    double t = 0.0;
    double s = 0.0;
    std::string band;       // "inner" or "intermediate"
    double measured = 0.0;  // sup |u - u_A| over the band
    double shape = 0.0;     // bound shape (intermediate: at the band's outer edge)
    double ratio = 0.0;     // sup of measured / shape over the band
};

struct BoundReport {
    std::vector<BoundRow> rows;
    double inner_prefactor = 0.0;          // max ratio over inner rows
    double intermediate_prefactor = 0.0;
    std::string branch;                    // "min" for 1 < p < 3, "max" for p >= 3
    std::vector<double> gaps;              // requested times not covered by both trajectories
};

struct BoundOptions {
    double K = 5.0;
    double s_lo = 0.0;      // 0: from the first common stride
    double s_hi = 0.0;      // 0: to the last common stride
    double x_max = 0.5;     // intermediate band ends at min(x_max, edge of the similarity grid)
};

/// Measured |u - u_A| against the inner shape (T-t)^{1/2-1/(p-1)} / |log(T-t)|^{3/2} on |y| <= K sqrt(s)
/// and the intermediate shape |x|^{1-2/(p-1)} / |log|x||^{2-1/(p-1)} on K sqrt(s) < |y|, |x| <= x_max.
BoundReport difference_bound_report(const ModelParams& params, const Trajectory& u, const Trajectory& uA,
                                    const BlowupFrame& frame, const BoundOptions& opt = {});

void write_bound_csv(std::ostream& os, const BoundReport& r);

} // namespace blowup
