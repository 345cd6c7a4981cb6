#pragma once

#include "blowup/modes.hpp"
#include "blowup/profile.hpp"
#include "blowup/spectral.hpp"

#include <functional>
#include <string>
#include <vector>

namespace blowup {

enum class Scheme { ImexEuler };
enum class BoundaryHandling { UpwindOutflow };

struct SolverConfig {
    double ds = 1e-3;
    double s_end = 40.0;
    double stride = 0.1;
    double blowup_factor = 1e3;   // ||w||_inf > blowup_factor * kappa ends the run
    Scheme scheme = Scheme::ImexEuler;
    BoundaryHandling boundary = BoundaryHandling::UpwindOutflow;
    bool store_fields = true;

    void validate(double s0) const;
    /// stride / ds, required to be a positive integer.
    int steps_per_stride() const;
};

/// Explicit right-hand side of the rescaled equation (diffusion by centered differences,
/// convection second-order upwind, nothing at the two boundary nodes of each axis).
FieldState rhs_w(const ModelParams& params, const FieldState& state);

/// One implicit-diffusion / explicit-rest step for a fixed grid and time step.
/// Holds scratch storage, so one instance per thread.
class Stepper {
public:
    Stepper(const ModelParams& params, GridPtr grid, double ds);

    /// Advances w in place; returns false when ||w||_inf exceeds the guard (values left as computed).
    bool advance(Vec& w, double guard);
    double ds() const { return ds_; }
    const GridPtr& grid() const { return grid_; }

private:
    void explicit_part(const Vec& w, Vec& out) const;
    void solve_axis_1d(double* x, Eigen::Index stride_between, int count) const;

    ModelParams params_;
    GridPtr grid_;
    double ds_;
    Vec cprime_;   // Thomas factors of the constant tridiagonal matrix
    Vec denom_inv_;
    Vec rhs_;
    Vec half_y_;
};

struct StepResult {
    FieldState state;
    bool blowup = false;
};

StepResult step(const ModelParams& params, const FieldState& state, double ds, double blowup_factor = 1e3);

enum class InitialFamily { MZ, VA, Custom };

struct InitialDataSpec {
    InitialFamily family = InitialFamily::MZ;
    double d0 = 0.0;
    Vec d1;
    SymmetricMatrix d2;
    double s0 = 10.0;
    VASpec va;          // VA-family only
    Vec custom;         // Custom only: w (or v) samples at s0

    static InitialDataSpec mz(int N, double d0, double s0);
    static InitialDataSpec va_family(const VASpec& va, double s0, double d0, const Vec& d1, const SymmetricMatrix& d2);

    void validate(int N) const;
};

/// MZ-family: the w-field at s0. VA-family: the v-field at s0. Custom: the stored samples.
FieldState make_initial(const InitialDataSpec& spec, const GridPtr& grid, const ModelParams& params);

enum class Termination { Horizon, Blowup, Stopped };

std::string to_string(Termination t);

struct StageCorrection {
    double s = 0.0;
    double delta = 0.0;
};

struct Trajectory {
    ModelParams params;
    GridPtr grid;
    double stride = 0.1;
    std::vector<double> s;
    std::vector<Vec> fields;                   // empty when fields were not stored
    std::vector<ModeDecomposition> modes;      // optional per-stride decompositions
    Termination termination = Termination::Horizon;
    double end_s = 0.0;
    InitialDataSpec initial;
    SolverConfig config;
    std::vector<StageCorrection> corrections;  // reference stabilization log

    std::size_t size() const { return s.size(); }
    bool has_fields() const { return !fields.empty(); }
    double first_s() const { return s.front(); }
    double last_s() const { return s.back(); }
    FieldState at(std::size_t i) const;
    /// Index of the stored record at time t (must coincide with a stride point).
    std::size_t index_of(double t) const;
    bool covers(double t) const;
    /// Field at time t: the stored record if t is on the stride, else cubic interpolation in s.
    Vec sample(double t) const;
};

/// Called at every stride with (s, w); return false to stop the run.
using StrideObserver = std::function<bool(double, const Vec&)>;

Trajectory simulate(const ModelParams& params, const FieldState& w0, const SolverConfig& config,
                    const StrideObserver& observer = {});

/// MZ-family / custom data evolve as w; VA-family data are added to reference(s0) first.
Trajectory simulate(const ModelParams& params, const InitialDataSpec& spec, const GridPtr& grid,
                    const SolverConfig& config, const Trajectory* reference = nullptr);

struct ReferenceOptions {
    double s0 = 10.0;
    double s_end = 64.0;
    SolverConfig solver;
    /// Exit band: |P0(chi (w - varphi))| > exit_c / s.
    double exit_c = 0.05;
    CutoffSpec cutoff;
    /// A stage keeps the best run up to (its exit time - keep_margin).
    double keep_margin = 12.0;
    int max_bisections = 80;
    int max_stages = 20;
};

/// Tuned radial MZ-family trajectory, re-tuned in stages along the unstable direction.
Trajectory generate_reference(const ModelParams& params, const GridPtr& grid, const ReferenceOptions& opt);

/// s -> traj(s + 2 log lambda) on the stride points covered by both.
Trajectory dilation_shift(const Trajectory& traj, double lambda);

/// g(s) = a(s) - b(s) on common stride points.
Trajectory difference(const Trajectory& a, const Trajectory& b);

} // namespace blowup
