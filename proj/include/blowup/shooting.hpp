#pragma once

#include "blowup/modes.hpp"
#include "blowup/solver.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blowup {

/// Parameters (d0, d1, d2) of the VA-family data. Flattened order matches the
/// first margins of a MembershipReport: d0, d1 entries, d2 upper triangle row-major.
struct ParamPoint {
    double d0 = 0.0;
    Vec d1;
    SymmetricMatrix d2;

    static ParamPoint zero(int N);
    static int count(int N) { return 1 + N + N * (N + 1) / 2; }
    int dim() const { return static_cast<int>(d1.size()); }
    Vec flat() const;
    static ParamPoint from_flat(const Vec& x, int N);
    double abs_max() const;
};

struct SearchBox {
    VASpec va;
    double s0 = 10.0;
    double half_width = 2.0;

    void validate(int N) const;
    bool contains(const ParamPoint& d) const;
    /// Points with one coordinate at +-half_width and the rest 0.
    std::vector<ParamPoint> boundary_samples(int N) const;
};

struct ExitEvent {
    double s_exit = 0.0;
    ComponentId component;
    double sign = 0.0;
    MembershipReport report;
};

struct ShootConfig {
    double horizon = 40.0;
    SolverConfig solver;
    int probe_strides = 5;
    /// Null-mode signs are read at the last stride where every expanding margin is below this.
    double quiet_margin = 0.005;
    /// The sign is that of the extrapolated limit of s^2 h over this many time units before
    /// the quiet stride (regression against s^-null_exponent); shorter runs use the sign of h there.
    double null_window = 10.0;
    double null_exponent = 1.0;
    int max_outer = 30;
    int max_inner = 64;
    int max_sweeps = 4;
    double outer_tol = 1e-9;
    /// Optional flattened start point; with outer_half_width > 0 the null brackets are centered on it.
    Vec start;
    double outer_half_width = 0.0;
    int threads = 1;
};

struct ExitResult {
    ParamPoint d;
    bool survived = false;
    double end_s = 0.0;
    std::optional<ExitEvent> exit;
    bool blowup = false;
    std::vector<ModeDecomposition> modes;     // one per stride up to the exit (or horizon)
    double max_margin = 0.0;                  // over the strides up to the exit
    std::vector<double> probe;                // margins of the exiting component after the exit
    bool probe_diverged = false;              // the probe ended in numerical blow-up
    Vec signs;                                // per flattened parameter: sign of its own mode
    double quiet_s = 0.0;                     // last stride with all expanding margins quiet

    double s_star() const { return exit ? exit->s_exit : end_s; }
    /// Margins of the exiting component strictly increase over the probe (blow-up counts as growth).
    bool transversal(int strides) const;
};

struct ShootingProblem {
    ModelParams params;
    GridPtr grid;
    const Trajectory* reference = nullptr;
    SearchBox box;
    ShootConfig config;

    void validate() const;
};

/// Runs VA-family data d on top of the reference and checks membership at every stride.
ExitResult exit_time(const ShootingProblem& prob, const ParamPoint& d, bool store_fields = false,
                     Trajectory* fields_out = nullptr);

struct ShootStep {
    int outer = 0;           // outer (null-mode) iteration, -1 for endpoint checks
    int inner = 0;
    int coordinate = 0;      // flattened null coordinate bisected by the outer loop
    double width = 0.0;      // outer bracket width before this step
    ParamPoint d;
    double s_star = 0.0;
    bool survived = false;
    std::string component;
    double sign = 0.0;
    double best_s_star = 0.0;
};

struct ShootResult {
    ParamPoint best;
    ExitResult best_run;
    std::vector<ShootStep> history;
    std::vector<double> outer_widths;   // bracket width after each outer bisection
    bool survived() const { return best_run.survived; }
};

class BracketFailure : public std::runtime_error {
public:
    BracketFailure(const std::string& msg, std::vector<ShootStep> table)
        : std::runtime_error(msg), table_(std::move(table)) {}
    const std::vector<ShootStep>& table() const { return table_; }

private:
    std::vector<ShootStep> table_;
};

/// Null-mode parameters are bisected in the outer loop (coordinate sweeps when N = 2);
/// for every outer candidate the expanding parameters (d0, d1) are bisected jointly.
ShootResult shoot(const ShootingProblem& prob);

struct SweepRow {
    ParamPoint d;
    double s_star = 0.0;
    bool survived = false;
    std::string component;
    double sign = 0.0;
    bool transversal = false;
};

/// Exit map over an explicit list of points (parallel over points, output in input order).
std::vector<SweepRow> sweep_points(const ShootingProblem& prob, const std::vector<ParamPoint>& points);
/// Lattice of `resolution` points per flattened coordinate over the box (resolution >= 2).
std::vector<SweepRow> sweep(const ShootingProblem& prob, int resolution);
/// Points along one flattened coordinate through `center`.
std::vector<ParamPoint> slice(const ParamPoint& center, int coordinate, double lo, double hi, int count);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_history_csv(std::ostream& os, const std::vector<ShootStep>& history);

} // namespace blowup
