#include "blowup/solver.hpp"
#include "blowup/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace blowup {

void SolverConfig::validate(double s0) const
{
    require(ds > 0.0, "SolverConfig.ds must be positive");
    require(stride > 0.0, "SolverConfig.stride must be positive");
    require(s_end > s0, "SolverConfig.s_end must exceed the initial time");
    require(blowup_factor > 1.0, "SolverConfig.blowup_factor must exceed 1");
    (void)steps_per_stride();
}

int SolverConfig::steps_per_stride() const
{
    const double r = stride / ds;
    const long k = std::lround(r);
    require(k >= 1 && std::abs(r - static_cast<double>(k)) < 1e-9 * r, "SolverConfig: stride must be an integer multiple of ds");
    return static_cast<int>(k);
}

namespace {

/// Second-order upwind derivative along an axis; characteristics move away from 0.
inline double upwind(const double* w, Eigen::Index k, Eigen::Index st, double y, double inv2h)
{
    if (y > 0.0) return (3.0 * (w[k] - w[k - st]) - (w[k - st] - w[k - 2 * st])) * inv2h;
    if (y < 0.0) return (3.0 * (w[k + st] - w[k]) - (w[k + 2 * st] - w[k + st])) * inv2h;
    return 0.0;
}

} // namespace

Stepper::Stepper(const ModelParams& params, GridPtr grid, double ds) : params_(params), grid_(std::move(grid)), ds_(ds)
{
    require(grid_ != nullptr, "Stepper: grid required");
    require(ds > 0.0, "Stepper: ds must be positive");
    const int n = grid_->axis_size();
    const double h = grid_->spacing();
    const double r = ds / (h * h);
    cprime_.resize(n);
    denom_inv_.resize(n);
    // rows 0 and n-1 are identity rows
    cprime_[0] = 0.0;
    denom_inv_[0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const bool edge = (i == n - 1);
        const double a = edge ? 0.0 : -r;
        const double b = edge ? 1.0 : 1.0 + 2.0 * r;
        const double c = edge ? 0.0 : -r;
        const double m = b - a * cprime_[i - 1];
        if (!(std::abs(m) > 0.0)) throw NumericalFault("Stepper: singular tridiagonal factor");
        denom_inv_[i] = 1.0 / m;
        cprime_[i] = c / m;
    }
    rhs_.resize(grid_->size());
    half_y_ = 0.5 * grid_->axis();
}

void Stepper::explicit_part(const Vec& w, Vec& out) const
{
    const int n = grid_->axis_size();
    const double inv2h = 1.0 / (2.0 * grid_->spacing());
    const double p = params_.p;
    const double q = 1.0 / (p - 1.0);
    const double* wp = w.data();
    double* o = out.data();
    if (grid_->dim() == 1) {
        for (int i = 0; i < n; ++i) {
            const double y2 = half_y_[i];
            o[i] = -y2 * upwind(wp, i, 1, y2, inv2h) - q * wp[i] + signed_power(wp[i], p);
        }
        return;
    }
    for (int i = 0; i < n; ++i) {
        const double y1 = half_y_[i];
        for (int j = 0; j < n; ++j) {
            const Eigen::Index k = static_cast<Eigen::Index>(i) * n + j;
            const double y2 = half_y_[j];
            o[k] = -y1 * upwind(wp, k, n, y1, inv2h) - y2 * upwind(wp, k, 1, y2, inv2h) - q * wp[k] +
                   signed_power(wp[k], p);
        }
    }
}

void Stepper::solve_axis_1d(double* x, Eigen::Index st, int count) const
{
    const double r = ds_ / (grid_->spacing() * grid_->spacing());
    // forward sweep: interior rows have a = -r, row count-1 has a = 0
    x[0] = x[0] * denom_inv_[0];
    for (int i = 1; i < count; ++i) {
        const double a = (i == count - 1) ? 0.0 : -r;
        x[i * st] = (x[i * st] - a * x[(i - 1) * st]) * denom_inv_[i];
    }
    for (int i = count - 2; i >= 0; --i) x[i * st] -= cprime_[i] * x[(i + 1) * st];
}

bool Stepper::advance(Vec& w, double guard)
{
    explicit_part(w, rhs_);
    rhs_ = w + ds_ * rhs_;
    const int n = grid_->axis_size();
    if (grid_->dim() == 1) {
        solve_axis_1d(rhs_.data(), 1, n);
    } else {
        for (int i = 0; i < n; ++i) solve_axis_1d(rhs_.data() + static_cast<Eigen::Index>(i) * n, 1, n);
        for (int j = 0; j < n; ++j) solve_axis_1d(rhs_.data() + j, n, n);
    }
    w.swap(rhs_);
    const double m = w.cwiseAbs().maxCoeff();
    return std::isfinite(m) && m <= guard;
}

FieldState rhs_w(const ModelParams& params, const FieldState& state)
{
    require(state.grid != nullptr, "rhs_w: field without grid");
    const WeightedGrid& g = *state.grid;
    require(state.values.size() == g.size(), "rhs_w: sample count differs from grid");
    for (Eigen::Index k = 0; k < g.size(); ++k)
        if (!std::isfinite(state.values[k])) {
            std::ostringstream os;
            os << "rhs_w: non-finite value at node " << k << " (y = " << g.point(k).transpose() << ")";
            throw NumericalFault(os.str());
        }
    const int n = g.axis_size();
    const double h = g.spacing();
    const double inv_h2 = 1.0 / (h * h);
    const double inv2h = 1.0 / (2.0 * h);
    const double q = 1.0 / (params.p - 1.0);
    const double* w = state.values.data();
    Vec out(g.size());
    auto lap = [&](Eigen::Index k, Eigen::Index st, int i) {
        if (i == 0 || i == n - 1) return 0.0;
        return (w[k - st] - 2.0 * w[k] + w[k + st]) * inv_h2;
    };
    const Vec& ax = g.axis();
    if (g.dim() == 1) {
        for (int i = 0; i < n; ++i) {
            const double y2 = 0.5 * ax[i];
            out[i] = lap(i, 1, i) - y2 * upwind(w, i, 1, y2, inv2h) - q * w[i] + signed_power(w[i], params.p);
        }
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Eigen::Index k = static_cast<Eigen::Index>(i) * n + j;
                const double y1 = 0.5 * ax[i], y2 = 0.5 * ax[j];
                out[k] = lap(k, n, i) + lap(k, 1, j) - y1 * upwind(w, k, n, y1, inv2h) -
                         y2 * upwind(w, k, 1, y2, inv2h) - q * w[k] + signed_power(w[k], params.p);
            }
    }
    return FieldState(state.grid, out, state.s);
}

StepResult step(const ModelParams& params, const FieldState& state, double ds, double blowup_factor)
{
    Stepper st(params, state.grid, ds);
    StepResult r;
    r.state = state;
    r.blowup = !st.advance(r.state.values, blowup_factor * params.kappa);
    r.state.s = state.s + ds;
    return r;
}

InitialDataSpec InitialDataSpec::mz(int N, double d0, double s0)
{
    InitialDataSpec s;
    s.family = InitialFamily::MZ;
    s.d0 = d0;
    s.d1 = Vec::Zero(N);
    s.d2 = SymmetricMatrix(N);
    s.s0 = s0;
    return s;
}

InitialDataSpec InitialDataSpec::va_family(const VASpec& va, double s0, double d0, const Vec& d1,
                                           const SymmetricMatrix& d2)
{
    InitialDataSpec s;
    s.family = InitialFamily::VA;
    s.va = va;
    s.s0 = s0;
    s.d0 = d0;
    s.d1 = d1;
    s.d2 = d2;
    return s;
}

void InitialDataSpec::validate(int N) const
{
    require(s0 > 0.0, "InitialDataSpec.s0 must be positive");
    switch (family) {
    case InitialFamily::MZ:
        require(d1.size() == N, "InitialDataSpec.d1 must have N entries");
        break;
    case InitialFamily::VA:
        va.validate(N);
        require(d1.size() == N, "InitialDataSpec.d1 must have N entries");
        require(d2.dim() == N, "InitialDataSpec.d2 must be N x N");
        break;
    case InitialFamily::Custom:
        require(custom.size() > 0, "InitialDataSpec.custom samples missing");
        break;
    }
}

FieldState make_initial(const InitialDataSpec& spec, const GridPtr& grid, const ModelParams& params)
{
    require(grid != nullptr, "make_initial: grid required");
    const int N = grid->dim();
    require(params.N == N, "make_initial: model dimension differs from grid");
    spec.validate(N);
    const double s0 = spec.s0;
    Vec out(grid->size());
    switch (spec.family) {
    case InitialFamily::MZ: {
        const double sq = std::sqrt(s0);
        for (Eigen::Index k = 0; k < grid->size(); ++k) {
            const double r = grid->radius()[k];
            const double f = f_radial(params, r * r / s0);
            double lin = spec.d0;
            for (int i = 0; i < N; ++i) lin += spec.d1[i] * grid->coord(i)[k] / sq;
            // (p-1 + (p-1)^2/(4p)|xi|^2)^{-1} = f^{p-1}
            out[k] = f + lin * std::pow(f, params.p);
        }
        break;
    }
    case InitialFamily::VA: {
        const VASpec& va = spec.va;
        const double amp = va.A / std::pow(s0, 2.0 + va.eta);
        const SymmetricMatrix d2hat = va.target * (1.0 / (s0 * s0)) + spec.d2 * (va.A * va.A / std::pow(s0, 2.0 + va.eta));
        const Vec chi = chi_field(va.cutoff, *grid, s0, 2.0);
        Eigen::ArrayXd v = Eigen::ArrayXd::Constant(grid->size(), amp * spec.d0 - 2.0 * d2hat.trace());
        for (int i = 0; i < N; ++i) {
            v += amp * spec.d1[i] * grid->coord(i).array();
            for (int j = 0; j < N; ++j) v += 0.5 * d2hat(i, j) * grid->coord(i).array() * grid->coord(j).array();
        }
        out = (v * chi.array()).matrix();
        break;
    }
    case InitialFamily::Custom:
        require(spec.custom.size() == grid->size(), "make_initial: custom samples differ from grid size");
        out = spec.custom;
        break;
    }
    return FieldState(grid, out, s0);
}

std::string to_string(Termination t)
{
    switch (t) {
    case Termination::Horizon: return "horizon";
    case Termination::Blowup: return "blowup";
    case Termination::Stopped: return "stopped";
    }
    return "?";
}

FieldState Trajectory::at(std::size_t i) const
{
    require(i < fields.size(), "Trajectory::at: record index out of range or fields not stored");
    return FieldState(grid, fields[i], s[i]);
}

std::size_t Trajectory::index_of(double t) const
{
    require(!s.empty(), "Trajectory: empty");
    const double x = (t - s.front()) / stride;
    const long k = std::lround(x);
    if (k < 0 || static_cast<std::size_t>(k) >= s.size() || std::abs(x - static_cast<double>(k)) > 1e-6)
        throw InvalidInput("Trajectory: time " + std::to_string(t) + " is not a stored stride point");
    return static_cast<std::size_t>(k);
}

bool Trajectory::covers(double t) const
{
    return !s.empty() && t >= s.front() - 1e-9 * stride && t <= s.back() + 1e-9 * stride;
}

Vec Trajectory::sample(double t) const
{
    require(has_fields(), "Trajectory::sample: fields not stored");
    if (!covers(t)) throw InvalidInput("Trajectory::sample: time " + std::to_string(t) + " not covered");
    const double x = (t - s.front()) / stride;
    const long k = std::lround(x);
    if (std::abs(x - static_cast<double>(k)) < 1e-9) return fields[static_cast<std::size_t>(k)];
    require(s.size() >= 4, "Trajectory::sample: cubic interpolation needs 4 records");
    long base = static_cast<long>(std::floor(x)) - 1;
    base = std::clamp(base, 0L, static_cast<long>(s.size()) - 4);
    const double u = x - static_cast<double>(base);
    Vec out = Vec::Zero(fields.front().size());
    for (int a = 0; a < 4; ++a) {
        double l = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a) l *= (u - b) / static_cast<double>(a - b);
        out += l * fields[static_cast<std::size_t>(base + a)];
    }
    return out;
}

Trajectory simulate(const ModelParams& params, const FieldState& w0, const SolverConfig& config,
                    const StrideObserver& observer)
{
    require(w0.grid != nullptr, "simulate: initial field without grid");
    require(params.N == w0.grid->dim(), "simulate: model dimension differs from grid");
    config.validate(w0.s);
    const int per = config.steps_per_stride();
    const long strides = static_cast<long>(std::floor((config.s_end - w0.s) / config.stride + 1e-9));

    Trajectory tr;
    tr.params = params;
    tr.grid = w0.grid;
    tr.stride = config.stride;
    tr.config = config;
    tr.end_s = w0.s;

    Stepper st(params, w0.grid, config.ds);
    const double guard = config.blowup_factor * params.kappa;
    Vec w = w0.values;
    auto record = [&](double s) {
        tr.s.push_back(s);
        if (config.store_fields) tr.fields.push_back(w);
        tr.end_s = s;
        return observer ? observer(s, w) : true;
    };
    if (!record(w0.s)) {
        tr.termination = Termination::Stopped;
        return tr;
    }
    for (long j = 1; j <= strides; ++j) {
        for (int k = 0; k < per; ++k) {
            if (!st.advance(w, guard)) {
                tr.termination = Termination::Blowup;
                tr.end_s = w0.s + (j - 1) * config.stride + (k + 1) * config.ds;
                return tr;
            }
        }
        if (!record(w0.s + j * config.stride)) {
            tr.termination = Termination::Stopped;
            return tr;
        }
    }
    tr.termination = Termination::Horizon;
    return tr;
}

Trajectory simulate(const ModelParams& params, const InitialDataSpec& spec, const GridPtr& grid,
                    const SolverConfig& config, const Trajectory* reference)
{
    FieldState w0 = make_initial(spec, grid, params);
    if (spec.family == InitialFamily::VA) {
        require(reference != nullptr, "simulate: VA-family data need the reference trajectory");
        w0.values += reference->sample(spec.s0);
    }
    Trajectory tr = simulate(params, w0, config);
    tr.initial = spec;
    return tr;
}

Trajectory dilation_shift(const Trajectory& traj, double lambda)
{
    require(lambda > 0.0, "dilation_shift: lambda must be positive");
    require(traj.has_fields(), "dilation_shift: trajectory without stored fields");
    const double shift = 2.0 * std::log(lambda);
    if (std::abs(shift) >= traj.last_s() - traj.first_s())
        throw InvalidInput("dilation_shift: shift 2 log(lambda) exceeds the stored range");
    Trajectory out = traj;
    out.s.clear();
    out.fields.clear();
    out.modes.clear();
    for (double t : traj.s) {
        if (!traj.covers(t + shift)) continue;
        out.s.push_back(t);
        out.fields.push_back(traj.sample(t + shift));
    }
    out.end_s = out.s.back();
    return out;
}

Trajectory difference(const Trajectory& a, const Trajectory& b)
{
    require(a.grid && b.grid && a.grid->same_as(*b.grid), "difference: trajectories on different grids");
    require(a.has_fields() && b.has_fields(), "difference: fields not stored");
    require(std::abs(a.stride - b.stride) < 1e-12, "difference: strides differ");
    Trajectory g;
    g.params = a.params;
    g.grid = a.grid;
    g.stride = a.stride;
    g.config = a.config;
    for (std::size_t i = 0; i < a.s.size(); ++i) {
        const double t = a.s[i];
        if (!b.covers(t)) continue;
        g.s.push_back(t);
        g.fields.push_back(a.fields[i] - b.fields[b.index_of(t)]);
    }
    require(!g.s.empty(), "difference: no common stride points");
    g.end_s = g.s.back();
    return g;
}

namespace {

struct StageRun {
    Trajectory traj;
    double exit_s = 0.0;
    double sign = 0.0;
    double param = 0.0;
};

/// Runs from w0 until the P0 deviation from varphi leaves the band exit_c / s.
StageRun reference_run(const ModelParams& params, const FieldState& w0, const ReferenceOptions& opt, double horizon)
{
    SolverConfig cfg = opt.solver;
    cfg.s_end = horizon;
    cfg.store_fields = true;
    const WeightedGrid& g = *w0.grid;
    StageRun run;
    run.traj = simulate(params, w0, cfg, [&](double s, const Vec& w) {
        const Vec chi = chi_field(opt.cutoff, g, s);
        const double D = (g.weights().array() * chi.array() * (w - varphi_field(params, g, s)).array()).sum();
        run.sign = D > 0 ? 1.0 : (D < 0 ? -1.0 : 0.0);
        return std::abs(D) <= opt.exit_c / s;
    });
    run.exit_s = run.traj.end_s;
    if (run.traj.termination == Termination::Blowup) run.sign = 1.0;
    return run;
}

/// Bisection on a scalar parameter x entering the data through make(x); returns the best run.
template <typename Make>
StageRun bisect_stage(const ModelParams& params, const ReferenceOptions& opt, double horizon, double lo, double hi,
                      Make make)
{
    StageRun best;
    best.exit_s = -1.0;
    auto consider = [&](StageRun&& r) {
        const double sign = r.sign;
        if (r.exit_s > best.exit_s) best = std::move(r);
        return sign;
    };
    auto eval = [&](double x) {
        StageRun r = reference_run(params, make(x), opt, horizon);
        r.param = x;
        return consider(std::move(r));
    };
    const double slo = eval(lo);
    const double shi = eval(hi);
    if (!(slo < 0 && shi > 0)) {
        std::ostringstream os;
        os << "generate_reference: bracket [" << lo << ", " << hi << "] has exit signs (" << slo << ", " << shi << ")";
        throw NumericalFault(os.str());
    }
    for (int it = 0; it < opt.max_bisections; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (eval(mid) > 0)
            hi = mid;
        else
            lo = mid;
        if (best.exit_s >= horizon) break;
    }
    return best;
}

} // namespace

Trajectory generate_reference(const ModelParams& params, const GridPtr& grid, const ReferenceOptions& opt)
{
    require(grid != nullptr && grid->dim() == params.N, "generate_reference: grid dimension differs from model");
    require(opt.s_end > opt.s0 && opt.s0 > 0.0, "generate_reference: need 0 < s0 < s_end");
    require(opt.keep_margin > 0.0, "generate_reference: keep_margin must be positive");
    opt.solver.validate(opt.s0);
    const double horizon = opt.s_end + opt.keep_margin;

    const InitialDataSpec base = InitialDataSpec::mz(params.N, 0.0, opt.s0);
    StageRun run = bisect_stage(params, opt, horizon, -0.5, 0.5, [&](double d0) {
        InitialDataSpec sp = base;
        sp.d0 = d0;
        return make_initial(sp, grid, params);
    });

    Trajectory out;
    out.params = params;
    out.grid = grid;
    out.stride = opt.solver.stride;
    out.config = opt.solver;
    out.config.s_end = opt.s_end;
    out.initial = base;
    out.initial.d0 = run.param;

    auto append = [&](const Trajectory& t, double keep) {
        for (std::size_t i = 0; i < t.size() && t.s[i] <= keep + 1e-9 * out.stride; ++i) {
            if (!out.s.empty() && t.s[i] <= out.s.back() + 1e-9 * out.stride) {
                out.fields.back() = t.fields[i];   // stage start: keep the corrected state
                continue;
            }
            out.s.push_back(t.s[i]);
            out.fields.push_back(t.fields[i]);
        }
    };

    for (int stage = 0;; ++stage) {
        const double keep = std::min(run.exit_s - opt.keep_margin, opt.s_end);
        const double start = out.s.empty() ? opt.s0 : out.s.back();
        if (keep < start + 2.0 * out.stride) {
            std::ostringstream os;
            os << "generate_reference: stage " << stage << " made no progress past s = " << start;
            throw NumericalFault(os.str());
        }
        append(run.traj, keep);
        if (out.s.back() >= opt.s_end - 1e-9 * out.stride) break;
        if (stage + 1 >= opt.max_stages) throw NumericalFault("generate_reference: stage budget exhausted");

        const double s_j = out.s.back();
        const Vec W = out.fields.back();
        Vec psi(grid->size());
        for (Eigen::Index k = 0; k < grid->size(); ++k) {
            const double r = grid->radius()[k];
            psi[k] = std::pow(f_radial(params, r * r / s_j), params.p);
        }
        auto make = [&](double delta) { return FieldState(grid, Vec(W + delta * psi), s_j); };
        double width = 1e-12;
        for (;; width *= 16.0) {
            if (width > 1e-2) throw NumericalFault("generate_reference: no correction bracket found");
            const double a = reference_run(params, make(-width), opt, horizon).sign;
            const double b = reference_run(params, make(width), opt, horizon).sign;
            if (a < 0 && b > 0) break;
        }
        run = bisect_stage(params, opt, horizon, -width, width, make);
        out.corrections.push_back({s_j, run.param});
    }
    out.termination = Termination::Horizon;
    out.end_s = out.s.back();
    return out;
}

} // namespace blowup
