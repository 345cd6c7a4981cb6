#include "blowup/shooting.hpp"
#include "blowup/classifier.hpp"
#include "blowup/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <sstream>
#include <thread>

namespace blowup {

ParamPoint ParamPoint::zero(int N)
{
    ParamPoint d;
    d.d1 = Vec::Zero(N);
    d.d2 = SymmetricMatrix(N);
    return d;
}

Vec ParamPoint::flat() const
{
    const int N = dim();
    Vec x(count(N));
    int k = 0;
    x[k++] = d0;
    for (int i = 0; i < N; ++i) x[k++] = d1[i];
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) x[k++] = d2(i, j);
    return x;
}

ParamPoint ParamPoint::from_flat(const Vec& x, int N)
{
    require(x.size() == count(N), "ParamPoint: flattened size differs from 1 + N + N(N+1)/2");
    ParamPoint d = zero(N);
    int k = 0;
    d.d0 = x[k++];
    for (int i = 0; i < N; ++i) d.d1[i] = x[k++];
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) d.d2.set(i, j, x[k++]);
    return d;
}

double ParamPoint::abs_max() const
{
    return flat().cwiseAbs().maxCoeff();
}

void SearchBox::validate(int N) const
{
    va.validate(N);
    require(s0 > 0.0, "SearchBox.s0 must be positive");
    require(half_width > 0.0, "SearchBox.half_width must be positive");
}

bool SearchBox::contains(const ParamPoint& d) const
{
    return d.abs_max() <= half_width * (1.0 + 1e-12);
}

std::vector<ParamPoint> SearchBox::boundary_samples(int N) const
{
    std::vector<ParamPoint> out;
    for (int k = 0; k < ParamPoint::count(N); ++k)
        for (double sgn : {-1.0, 1.0}) {
            Vec x = Vec::Zero(ParamPoint::count(N));
            x[k] = sgn * half_width;
            out.push_back(ParamPoint::from_flat(x, N));
        }
    return out;
}

bool ExitResult::transversal(int strides) const
{
    if (!exit) return false;
    for (std::size_t k = 1; k < probe.size(); ++k)
        if (!(probe[k] > probe[k - 1])) return false;
    if (probe_diverged) return true;
    return static_cast<int>(probe.size()) >= strides + 1;
}

void ShootingProblem::validate() const
{
    require(grid != nullptr && grid->dim() == params.N, "ShootingProblem: grid dimension differs from model");
    box.validate(params.N);
    require(reference != nullptr && reference->has_fields(), "ShootingProblem: reference trajectory with fields required");
    require(reference->grid->same_as(*grid), "ShootingProblem: reference lives on a different grid");
    require(config.horizon > box.s0, "ShootingProblem: horizon must exceed s0");
    require(reference->covers(box.s0) && reference->covers(config.horizon),
            "ShootingProblem: reference does not cover [s0, horizon]");
    require(config.probe_strides >= 0 && config.max_inner >= 1 && config.max_outer >= 1,
            "ShootingProblem: iteration counts must be positive");
    require(std::abs(config.solver.stride - reference->stride) < 1e-12,
            "ShootingProblem: solver stride differs from the reference stride");
}

ExitResult exit_time(const ShootingProblem& prob, const ParamPoint& d, bool store_fields, Trajectory* fields_out)
{
    prob.validate();
    const int N = prob.params.N;
    require(d.dim() == N, "exit_time: parameter dimension differs from model");
    require(prob.box.contains(d), "exit_time: parameter point outside the search box");
    const WeightedGrid& g = *prob.grid;
    const VASpec& va = prob.box.va;

    const InitialDataSpec spec = InitialDataSpec::va_family(va, prob.box.s0, d.d0, d.d1, d.d2);
    FieldState w0 = make_initial(spec, prob.grid, prob.params);
    w0.values += prob.reference->sample(prob.box.s0);

    SolverConfig cfg = prob.config.solver;
    cfg.s_end = prob.config.horizon;
    cfg.store_fields = store_fields;

    ExitResult r;
    r.d = d;
    std::vector<MembershipReport> reports;
    int probe_left = 0;
    Trajectory tr = simulate(prob.params, w0, cfg, [&](double s, const Vec& w) {
        const ModeDecomposition dec = decompose(g, w - prob.reference->sample(s), s, va, false);
        MembershipReport rep = check_VA(dec, s, va);
        if (r.exit) {
            r.probe.push_back(rep.find(r.exit->component).value);
            return --probe_left > 0;
        }
        r.max_margin = std::max(r.max_margin, rep.max_margin());
        r.modes.push_back(dec);
        reports.push_back(rep);
        if (!rep.inside) {
            const Margin& m = rep.exiting_margin();
            r.exit = ExitEvent{s, m.id, m.sign, rep};
            r.probe.push_back(m.value);
            probe_left = prob.config.probe_strides;
            return probe_left > 0;
        }
        return true;
    });
    r.end_s = tr.end_s;
    if (tr.termination == Termination::Blowup) {
        if (r.exit) {
            r.probe_diverged = true;
        } else {
            r.blowup = true;
            const MembershipReport& last = reports.back();
            const Margin& m = last.exiting_margin();
            r.exit = ExitEvent{tr.end_s, m.id, m.sign, last};
        }
    } else if (!r.exit) {
        r.survived = true;
    }

    const int P = ParamPoint::count(N);
    r.signs = Vec::Zero(P);
    const MembershipReport& at_exit = reports.back();
    for (int k = 0; k <= N; ++k) r.signs[k] = at_exit.margins[static_cast<std::size_t>(k)].sign;
    std::size_t quiet = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        bool ok = true;
        for (int k = 0; k <= N; ++k) ok = ok && reports[i].margins[static_cast<std::size_t>(k)].value <= prob.config.quiet_margin;
        if (ok) quiet = i;
    }
    for (int k = N + 1; k < P; ++k) r.signs[k] = reports[quiet].margins[static_cast<std::size_t>(k)].sign;
    const double s_q = r.modes[quiet].s;
    r.quiet_s = s_q;
    if (s_q - prob.box.s0 >= prob.config.null_window - 1e-9) {
        int k = N + 1;
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j, ++k) {
                std::vector<double> ss, y;
                for (std::size_t t = 0; t <= quiet; ++t) {
                    const double s = r.modes[t].s;
                    if (s < s_q - prob.config.null_window - 1e-9) continue;
                    ss.push_back(s);
                    y.push_back(s * s * r.modes[t].v2(i, j) - va.target(i, j));
                }
                const double lim = richardson_limit(ss, y, prob.config.null_exponent).limit;
                if (lim != 0.0) r.signs[k] = lim > 0 ? 1.0 : -1.0;
            }
    }

    if (fields_out) *fields_out = std::move(tr);
    return r;
}

namespace {

bool better(const ExitResult& a, const ExitResult& b)
{
    if (a.s_star() != b.s_star()) return a.s_star() > b.s_star();
    if (a.survived != b.survived) return a.survived;
    return true;
}

class Shooter {
public:
    explicit Shooter(const ShootingProblem& prob) : prob_(prob), N_(prob.params.N), P_(ParamPoint::count(N_)) {}

    ShootResult run()
    {
        const double H = prob_.box.half_width;
        const double R = prob_.config.outer_half_width > 0.0 ? std::min(prob_.config.outer_half_width, H) : H;
        Vec x = Vec::Zero(P_);
        if (prob_.config.start.size() > 0) {
            require(prob_.config.start.size() == P_, "shoot: start point has the wrong size");
            require(prob_.box.contains(ParamPoint::from_flat(prob_.config.start, N_)), "shoot: start point outside the box");
            x = prob_.config.start;
            warm_ = true;
            warm_center_ = x.head(N_ + 1);
            last_shift_ = 1e-9;
        }
        const int nulls = P_ - (N_ + 1);
        for (int sweep = 0; sweep < (N_ == 1 ? 1 : prob_.config.max_sweeps); ++sweep) {
            double change = 0.0;
            for (int c = N_ + 1; c < P_; ++c) {
                const double before = x[c];
                const double center = R < H ? x[c] : 0.0;
                bisect_null(x, c, std::max(-H, center - R), std::min(H, center + R));
                change = std::max(change, std::abs(x[c] - before));
            }
            if (nulls == 1 || change < prob_.config.outer_tol) break;
        }
        return std::move(out_);
    }

private:
    void log(const ExitResult& r, int outer, int inner, int coord, double width)
    {
        ShootStep st;
        st.outer = outer;
        st.inner = inner;
        st.coordinate = coord;
        st.width = width;
        st.d = r.d;
        st.s_star = r.s_star();
        st.survived = r.survived;
        st.component = r.exit ? r.exit->component.name() : "survived";
        st.sign = r.exit ? r.exit->sign : 0.0;
        if (!have_best_ || better(r, out_.best_run)) {
            out_.best_run = r;
            out_.best = r.d;
            have_best_ = true;
        }
        st.best_s_star = out_.best_run.s_star();
        out_.history.push_back(std::move(st));
    }

    ExitResult eval(const Vec& x, int outer, int inner, int coord, double width)
    {
        ExitResult r = exit_time(prob_, ParamPoint::from_flat(x, N_));
        log(r, outer, inner, coord, width);
        return r;
    }

    /// Joint bisection of the expanding coordinates with the null ones held at x.
    ExitResult tune_expanding(Vec& x, int outer, int coord, double width)
    {
        const double H = prob_.box.half_width;
        Vec lo = Vec::Constant(N_ + 1, -H), hi = Vec::Constant(N_ + 1, H);
        if (warm_) {
            double w = std::clamp(8.0 * last_shift_, 1e-13, H);
            for (;; w *= 16.0) {
                if (w >= H) {
                    lo.setConstant(-H);
                    hi.setConstant(H);
                    break;
                }
                Vec a = x, b = x;
                for (int k = 0; k <= N_; ++k) {
                    lo[k] = std::max(-H, warm_center_[k] - w);
                    hi[k] = std::min(H, warm_center_[k] + w);
                    a[k] = lo[k];
                    b[k] = hi[k];
                }
                const ExitResult ra = eval(a, outer, -1, coord, width);
                const ExitResult rb = eval(b, outer, -1, coord, width);
                bool ok = true;
                for (int k = 0; k <= N_; ++k) ok = ok && !(ra.signs[k] > 0) && rb.signs[k] > 0;
                if (ok) break;
            }
        }
        std::optional<ExitResult> best;
        for (int it = 0; it < prob_.config.max_inner; ++it) {
            bool any = false;
            for (int k = 0; k <= N_; ++k) {
                const double mid = 0.5 * (lo[k] + hi[k]);
                x[k] = mid;
                any = any || (mid > lo[k] && mid < hi[k]);
            }
            if (!any) break;
            ExitResult r = eval(x, outer, it, coord, width);
            for (int k = 0; k <= N_; ++k) {
                if (r.signs[k] > 0)
                    hi[k] = x[k];
                else
                    lo[k] = x[k];
            }
            if (!best || better(r, *best)) best = std::move(r);
        }
        const Vec center = best->d.flat().head(N_ + 1);
        if (warm_) last_shift_ = (center - warm_center_).cwiseAbs().maxCoeff();
        warm_center_ = center;
        warm_ = true;
        x.head(N_ + 1) = center;
        return std::move(*best);
    }

    void bisect_null(Vec& x, int c, double lo, double hi)
    {
        Vec a = x, b = x;
        if (!warm_) {
            a.head(N_ + 1).setZero();
            b.head(N_ + 1).setZero();
        }
        a[c] = lo;
        b[c] = hi;
        const bool narrow = hi - lo < 2.0 * prob_.box.half_width;
        const ExitResult ra = narrow ? tune_expanding(a, -1, c, hi - lo) : eval(a, -1, 0, c, hi - lo);
        const ExitResult rb = narrow ? tune_expanding(b, -1, c, hi - lo) : eval(b, -1, 0, c, hi - lo);
        if (narrow && !(ra.signs[c] < 0 && rb.signs[c] > 0)) {
            const double H = prob_.box.half_width;
            const double mid = 0.5 * (lo + hi), r = 4.0 * (hi - lo);
            bisect_null(x, c, std::max(-H, mid - r), std::min(H, mid + r));
            return;
        }
        if (!(ra.signs[c] < 0 && rb.signs[c] > 0)) {
            std::ostringstream os;
            os << "shoot: no sign change of null coordinate " << c << " over [" << lo << ", " << hi
               << "]: signs " << ra.signs[c] << ", " << rb.signs[c];
            throw BracketFailure(os.str(), out_.history);
        }
        for (int k = 0; k < prob_.config.max_outer && hi - lo > prob_.config.outer_tol; ++k) {
            x[c] = 0.5 * (lo + hi);
            const ExitResult r = tune_expanding(x, outer_count_, c, hi - lo);
            if (r.signs[c] > 0)
                hi = x[c];
            else
                lo = x[c];
            out_.outer_widths.push_back(hi - lo);
            ++outer_count_;
        }
        x[c] = out_.best.flat()[c];
    }

    const ShootingProblem& prob_;
    int N_;
    int P_;
    ShootResult out_;
    bool have_best_ = false;
    bool warm_ = false;
    Vec warm_center_;
    double last_shift_ = 0.0;
    int outer_count_ = 0;
};

} // namespace

ShootResult shoot(const ShootingProblem& prob)
{
    prob.validate();
    return Shooter(prob).run();
}

std::vector<SweepRow> sweep_points(const ShootingProblem& prob, const std::vector<ParamPoint>& points)
{
    prob.validate();
    std::vector<SweepRow> rows(points.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            const ExitResult r = exit_time(prob, points[i]);
            SweepRow& row = rows[i];
            row.d = points[i];
            row.s_star = r.s_star();
            row.survived = r.survived;
            row.component = r.exit ? r.exit->component.name() : "survived";
            row.sign = r.exit ? r.exit->sign : 0.0;
            row.transversal = r.transversal(prob.config.probe_strides);
        }
    };
    const int threads = std::max(1, std::min<int>(prob.config.threads, static_cast<int>(points.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return rows;
}

std::vector<SweepRow> sweep(const ShootingProblem& prob, int resolution)
{
    require(resolution >= 2, "sweep: resolution must be at least 2 per axis");
    const int N = prob.params.N;
    const int P = ParamPoint::count(N);
    const double H = prob.box.half_width;
    std::vector<ParamPoint> pts;
    std::vector<int> idx(static_cast<std::size_t>(P), 0);
    for (;;) {
        Vec x(P);
        for (int k = 0; k < P; ++k) x[k] = -H + 2.0 * H * idx[static_cast<std::size_t>(k)] / (resolution - 1);
        pts.push_back(ParamPoint::from_flat(x, N));
        int k = P - 1;
        while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == resolution) idx[static_cast<std::size_t>(k--)] = 0;
        if (k < 0) break;
    }
    return sweep_points(prob, pts);
}

std::vector<ParamPoint> slice(const ParamPoint& center, int coordinate, double lo, double hi, int count)
{
    const int N = center.dim();
    require(coordinate >= 0 && coordinate < ParamPoint::count(N), "slice: coordinate out of range");
    require(count >= 1, "slice: need at least one point");
    std::vector<ParamPoint> out;
    for (int i = 0; i < count; ++i) {
        Vec x = center.flat();
        x[coordinate] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
        out.push_back(ParamPoint::from_flat(x, N));
    }
    return out;
}

namespace {

void write_point(std::ostream& os, const ParamPoint& d)
{
    const Vec x = d.flat();
    for (Eigen::Index k = 0; k < x.size(); ++k) os << x[k] << ',';
}

void point_header(std::ostream& os, int N)
{
    os << "d0,";
    for (int i = 0; i < N; ++i) os << "d1_" << i << ',';
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) os << "d2_" << i << j << ',';
}

} // namespace

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    if (rows.empty()) return;
    point_header(os, rows.front().d.dim());
    os << "s_star,survived,component,sign,transversal\n";
    os.precision(17);
    for (const auto& r : rows) {
        write_point(os, r.d);
        os << r.s_star << ',' << r.survived << ',' << r.component << ',' << r.sign << ',' << r.transversal << '\n';
    }
}

void write_history_csv(std::ostream& os, const std::vector<ShootStep>& history)
{
    if (history.empty()) return;
    os << "outer,inner,coordinate,width,";
    point_header(os, history.front().d.dim());
    os << "s_star,survived,component,sign,best_s_star\n";
    os.precision(17);
    for (const auto& h : history) {
        os << h.outer << ',' << h.inner << ',' << h.coordinate << ',' << h.width << ',';
        write_point(os, h.d);
        os << h.s_star << ',' << h.survived << ',' << h.component << ',' << h.sign << ',' << h.best_s_star << '\n';
    }
}

} // namespace blowup
