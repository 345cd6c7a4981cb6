#include "blowup/harness.hpp"
#include "blowup/kernel.hpp"
#include "blowup/trajectory_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

namespace blowup {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v, const std::string& sep)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

const std::vector<std::pair<Experiment, std::string>> kTags = {
    {Experiment::Reference, "reference"},   {Experiment::Shoot, "shoot"},
    {Experiment::Dilation, "dilation"},     {Experiment::Classify, "classify"},
    {Experiment::KernelSuite, "kernel-suite"}, {Experiment::Theorem2Report, "theorem2-report"},
};

class Reader {
public:
    explicit Reader(std::vector<std::string>& errs) : errs_(errs) {}

    const json* section(const json& root, const std::string& key, const std::set<std::string>& known)
    {
        if (!root.contains(key)) return nullptr;
        const json& s = root.at(key);
        if (!s.is_object()) {
            errs_.push_back(key + ": expected an object");
            return nullptr;
        }
        for (const auto& [k, v] : s.items())
            if (!known.count(k)) errs_.push_back(key + "." + k + ": unknown field");
        return &s;
    }

    template <typename T>
    void get(const json* obj, const std::string& sec, const std::string& key, T& out)
    {
        if (obj == nullptr || !obj->contains(key)) return;
        const json& v = obj->at(key);
        if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) return bad(sec, key, "expected a string");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) return bad(sec, key, "expected an integer");
        } else {
            if (!v.is_number()) return bad(sec, key, "expected a number");
        }
        out = v.get<T>();
    }

    void window(const json* obj, const std::string& sec, const std::string& key, FitWindow& out)
    {
        if (obj == nullptr || !obj->contains(key)) return;
        const json& v = obj->at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            return bad(sec, key, "expected [lo, hi]");
        out = {v[0].get<double>(), v[1].get<double>()};
        if (!(out.lo < out.hi)) bad(sec, key, "need lo < hi");
    }

    void check(bool ok, const std::string& path, const std::string& why)
    {
        if (!ok) errs_.push_back(path + ": " + why);
    }

    void bad(const std::string& sec, const std::string& key, const std::string& why)
    {
        errs_.push_back((sec.empty() ? key : sec + "." + key) + ": " + why);
    }

private:
    std::vector<std::string>& errs_;
};

json window_json(const FitWindow& w)
{
    return json::array({w.lo, w.hi});
}

json matrix_json(const SymmetricMatrix& m)
{
    json rows = json::array();
    for (int i = 0; i < m.dim(); ++i) {
        json r = json::array();
        for (int j = 0; j < m.dim(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

json number_or_null(double x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : InvalidInput("invalid config: " + join(errors, "; ")), errors_(std::move(errors))
{
}

std::string to_string(Experiment e)
{
    for (const auto& [k, name] : kTags)
        if (k == e) return name;
    return "unknown";
}

RunConfig RunConfig::from_json(const json& j)
{
    std::vector<std::string> errs;
    Reader r(errs);
    RunConfig c;
    if (!j.is_object()) throw ConfigError({"<root>: expected an object"});
    const std::set<std::string> top = {"experiment", "model", "grid", "solver", "va", "reference", "shoot",
                                       "dilation", "classify", "theorem2", "output", "threads"};
    for (const auto& [k, v] : j.items())
        if (!top.count(k)) errs.push_back(k + ": unknown field");

    if (!j.contains("experiment") || !j.at("experiment").is_string()) {
        errs.push_back("experiment: required string tag");
    } else {
        const std::string tag = j.at("experiment").get<std::string>();
        bool found = false;
        for (const auto& [k, name] : kTags)
            if (name == tag) {
                c.experiment = k;
                found = true;
            }
        if (!found) {
            std::vector<std::string> names;
            for (const auto& kv : kTags) names.push_back(kv.second);
            errs.push_back("experiment: unknown tag '" + tag + "' (one of " + join(names, ", ") + ")");
        }
    }

    const json* model = r.section(j, "model", {"p", "N"});
    r.get(model, "model", "p", c.p);
    r.get(model, "model", "N", c.N);
    r.check(c.p > 1.0, "model.p", "p must exceed 1");
    r.check(c.N == 1 || c.N == 2, "model.N", "N must be 1 or 2");

    const json* grid = r.section(j, "grid", {"half_width", "nodes"});
    r.get(grid, "grid", "half_width", c.grid_half_width);
    r.get(grid, "grid", "nodes", c.grid_nodes);
    if (grid != nullptr) {
        r.check(c.grid_half_width > 0.0, "grid.half_width", "must be positive");
        r.check(c.grid_nodes >= 5 && c.grid_nodes % 2 == 1, "grid.nodes", "must be odd and at least 5");
    }

    const json* solver = r.section(j, "solver", {"ds", "stride", "blowup_factor"});
    r.get(solver, "solver", "ds", c.solver.ds);
    r.get(solver, "solver", "stride", c.solver.stride);
    r.get(solver, "solver", "blowup_factor", c.solver.blowup_factor);
    r.check(c.solver.ds > 0.0, "solver.ds", "must be positive");
    r.check(c.solver.stride > 0.0, "solver.stride", "must be positive");
    if (c.solver.ds > 0.0 && c.solver.stride > 0.0) {
        const double q = c.solver.stride / c.solver.ds;
        r.check(std::abs(q - std::round(q)) < 1e-9 * q && q >= 1.0, "solver.stride", "must be a multiple of ds");
    }

    const json* va = r.section(j, "va", {"A", "eta", "target", "K"});
    r.get(va, "va", "A", c.va.A);
    r.get(va, "va", "eta", c.va.eta);
    r.get(va, "va", "K", c.va.cutoff.K);
    r.check(c.va.A > 1.0, "va.A", "A must exceed 1");
    r.check(c.va.eta > 0.0 && c.va.eta < 0.5, "va.eta", "\xce\xb7 must lie in (0, \xc2\xbd)");
    r.check(c.va.cutoff.K > 0.0, "va.K", "must be positive");
    c.va.target = SymmetricMatrix::identity(c.N == 2 ? 2 : 1, 0.3);
    if (va != nullptr && va->contains("target")) {
        const json& t = va->at("target");
        const int n = c.N == 2 ? 2 : 1;
        if (t.is_number()) {
            c.va.target = SymmetricMatrix::identity(n, t.get<double>());
        } else if (t.is_array() && static_cast<int>(t.size()) == n) {
            Mat m(n, n);
            bool ok = true;
            for (int i = 0; i < n && ok; ++i) {
                ok = t[i].is_array() && static_cast<int>(t[i].size()) == n;
                for (int k = 0; k < n && ok; ++k) {
                    ok = t[i][k].is_number();
                    if (ok) m(i, k) = t[i][k].get<double>();
                }
            }
            if (!ok)
                r.bad("va", "target", "expected a number or an N x N matrix");
            else if ((m - m.transpose()).cwiseAbs().maxCoeff() > 0.0)
                r.bad("va", "target", "matrix must be symmetric");
            else
                c.va.target = SymmetricMatrix(m);
        } else {
            r.bad("va", "target", "expected a number or an N x N matrix");
        }
    }

    const json* ref = r.section(j, "reference", {"s0", "s_end", "cache"});
    r.get(ref, "reference", "s0", c.ref_s0);
    r.get(ref, "reference", "s_end", c.ref_s_end);
    r.get(ref, "reference", "cache", c.reference_cache);
    r.check(c.ref_s0 > 0.0, "reference.s0", "must be positive");
    r.check(c.ref_s_end > c.ref_s0, "reference.s_end", "must exceed reference.s0");

    const json* sh = r.section(j, "shoot", {"s0", "horizon", "half_width", "max_outer", "sweep_resolution", "slice_points"});
    r.get(sh, "shoot", "s0", c.shoot_s0);
    r.get(sh, "shoot", "horizon", c.horizon);
    r.get(sh, "shoot", "half_width", c.half_width);
    r.get(sh, "shoot", "max_outer", c.max_outer);
    r.get(sh, "shoot", "sweep_resolution", c.sweep_resolution);
    r.get(sh, "shoot", "slice_points", c.slice_points);
    r.check(c.shoot_s0 >= c.ref_s0, "shoot.s0", "must not precede reference.s0");
    r.check(c.horizon > c.shoot_s0, "shoot.horizon", "must exceed shoot.s0");
    r.check(c.half_width > 0.0, "shoot.half_width", "must be positive");
    r.check(c.max_outer >= 1, "shoot.max_outer", "must be at least 1");
    r.check(c.sweep_resolution >= 2, "shoot.sweep_resolution", "must be at least 2");
    r.check(c.slice_points >= 0, "shoot.slice_points", "must not be negative");

    const json* dil = r.section(j, "dilation", {"lambda", "window"});
    r.get(dil, "dilation", "lambda", c.lambda);
    r.window(dil, "dilation", "window", c.dilation_window);
    r.check(c.lambda > 0.0, "dilation.lambda", "must be positive");

    const json* cl = r.section(j, "classify", {"a", "b", "window"});
    r.get(cl, "classify", "a", c.traj_a);
    r.get(cl, "classify", "b", c.traj_b);
    r.window(cl, "classify", "window", c.classify_window);

    const json* t2 = r.section(j, "theorem2", {"u", "ua", "K", "x_max", "T", "s_lo", "s_hi"});
    r.get(t2, "theorem2", "u", c.traj_u);
    r.get(t2, "theorem2", "ua", c.traj_ua);
    r.get(t2, "theorem2", "K", c.bound.K);
    r.get(t2, "theorem2", "x_max", c.bound.x_max);
    r.get(t2, "theorem2", "T", c.T);
    r.get(t2, "theorem2", "s_lo", c.bound.s_lo);
    r.get(t2, "theorem2", "s_hi", c.bound.s_hi);
    r.check(c.bound.K > 0.0, "theorem2.K", "must be positive");
    r.check(c.bound.x_max > 0.0 && c.bound.x_max < 1.0, "theorem2.x_max", "must lie in (0, 1)");
    r.check(c.T > 0.0, "theorem2.T", "must be positive");

    if (j.contains("output")) {
        if (j.at("output").is_string())
            c.output = j.at("output").get<std::string>();
        else
            errs.push_back("output: expected a string");
    }
    if (j.contains("threads")) {
        if (j.at("threads").is_number_integer() && j.at("threads").get<int>() >= 1)
            c.threads = j.at("threads").get<int>();
        else
            errs.push_back("threads: expected a positive integer");
    }

    if (c.experiment == Experiment::Classify) {
        r.check(!c.traj_a.empty(), "classify.a", "trajectory path required");
        r.check(!c.traj_b.empty(), "classify.b", "trajectory path required");
    }
    if (c.experiment == Experiment::Theorem2Report) {
        r.check(!c.traj_u.empty(), "theorem2.u", "trajectory path required");
        r.check(!c.traj_ua.empty(), "theorem2.ua", "trajectory path required");
    }
    if (!errs.empty()) throw ConfigError(errs);
    return c;
}

RunConfig RunConfig::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError({std::string("<root>: not valid JSON (") + e.what() + ")"});
    }
    return from_json(j);
}

nlohmann::json RunConfig::to_json() const
{
    json j;
    j["experiment"] = to_string(experiment);
    j["model"] = {{"p", p}, {"N", N}};
    j["grid"] = {{"half_width", grid()->half_width()}, {"nodes", grid()->axis_size()}};
    j["solver"] = {{"ds", solver.ds}, {"stride", solver.stride}, {"blowup_factor", solver.blowup_factor}};
    j["va"] = {{"A", va.A}, {"eta", va.eta}, {"target", matrix_json(va.target)}, {"K", va.cutoff.K}};
    j["reference"] = {{"s0", ref_s0}, {"s_end", ref_s_end}};
    switch (experiment) {
    case Experiment::Shoot:
        j["shoot"] = {{"s0", shoot_s0},         {"horizon", horizon},
                      {"half_width", half_width}, {"max_outer", max_outer},
                      {"sweep_resolution", sweep_resolution}, {"slice_points", slice_points}};
        break;
    case Experiment::Dilation:
        j["dilation"] = {{"lambda", lambda}, {"window", window_json(dilation_window)}};
        break;
    case Experiment::Classify:
        j["classify"] = {{"a", traj_a}, {"b", traj_b}, {"window", window_json(classify_window)}};
        break;
    case Experiment::Theorem2Report:
        j["theorem2"] = {{"u", traj_u},         {"ua", traj_ua},         {"K", bound.K},
                         {"x_max", bound.x_max}, {"T", T}, {"s_lo", bound.s_lo}, {"s_hi", bound.s_hi}};
        break;
    default:
        break;
    }
    return j;
}

GridPtr RunConfig::grid() const
{
    if (grid_half_width > 0.0) return std::make_shared<const WeightedGrid>(N, grid_half_width, grid_nodes);
    return WeightedGrid::make_default(N);
}

std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash(const RunConfig& c)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(c.to_json().dump());
    return os.str();
}

bool RunManifest::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const auto& kv) { return kv.second; });
}

nlohmann::json RunManifest::to_json() const
{
    json m = json::object();
    for (const auto& [k, v] : metrics) m[k] = number_or_null(v);
    return {{"experiment", experiment}, {"config_hash", config_hash}, {"code_version", code_version},
            {"config", config},         {"metrics", m},               {"checks", checks},
            {"files", files},           {"passed", passed()}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j)
{
    RunManifest m;
    try {
        m.experiment = j.at("experiment").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.code_version = j.at("code_version").get<std::string>();
        m.config = j.at("config");
        for (const auto& [k, v] : j.at("metrics").items()) m.metrics[k] = v.is_null() ? NAN : v.get<double>();
        m.checks = j.at("checks").get<std::map<std::string, bool>>();
        m.files = j.at("files").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("manifest: ") + e.what());
    }
    return m;
}

RunManifest RunManifest::load(const std::string& path)
{
    fs::path p(path);
    if (fs::is_directory(p)) p /= "manifest.json";
    std::ifstream in(p);
    if (!in) throw InvalidInput("cannot open manifest " + p.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidInput("manifest " + p.string() + ": " + e.what());
    }
    return from_json(j);
}

namespace {

class Context {
public:
    explicit Context(const RunConfig& c) : cfg(c), params(c.model()), dir(c.output)
    {
        fs::create_directories(dir);
        man.experiment = to_string(c.experiment);
        man.config_hash = config_hash(c);
        man.code_version = kCodeVersion;
        man.config = c.to_json();
    }

    std::ofstream open(const std::string& name)
    {
        man.files.push_back(name);
        std::ofstream os(dir / name);
        if (!os) throw NumericalFault("cannot write " + (dir / name).string());
        os.precision(17);
        return os;
    }

    void save(const std::string& name, const Trajectory& tr)
    {
        man.files.push_back(name);
        save_trajectory((dir / name).string(), tr);
    }

    void finish()
    {
        std::sort(man.files.begin(), man.files.end());
        std::ofstream os(dir / "manifest.json");
        os << man.to_json().dump(2) << '\n';
    }

    Trajectory reference()
    {
        const GridPtr g = cfg.grid();
        if (!cfg.reference_cache.empty() && fs::exists(cfg.reference_cache)) {
            Trajectory t = load_trajectory(cfg.reference_cache);
            require(t.grid->same_as(*g), "reference cache " + cfg.reference_cache + " was made on a different grid");
            require(t.params.p == params.p && t.params.N == params.N,
                    "reference cache " + cfg.reference_cache + " was made for a different model");
            require(t.first_s() <= cfg.ref_s0 + 1e-9 && t.last_s() >= cfg.ref_s_end - 1e-9,
                    "reference cache " + cfg.reference_cache + " does not cover [s0, s_end]");
            return t;
        }
        ReferenceOptions opt;
        opt.s0 = cfg.ref_s0;
        opt.s_end = cfg.ref_s_end;
        opt.solver = cfg.solver;
        opt.cutoff = cfg.va.cutoff;
        Trajectory t = generate_reference(params, g, opt);
        if (!cfg.reference_cache.empty()) save_trajectory(cfg.reference_cache, t);
        return t;
    }

    ShootingProblem problem(const Trajectory& ref) const
    {
        ShootingProblem prob;
        prob.params = params;
        prob.grid = ref.grid;
        prob.reference = &ref;
        prob.box.va = cfg.va;
        prob.box.s0 = cfg.shoot_s0;
        prob.box.half_width = cfg.half_width;
        prob.config.horizon = cfg.horizon;
        prob.config.solver = cfg.solver;
        prob.config.max_outer = cfg.max_outer;
        prob.config.threads = cfg.threads;
        return prob;
    }

    void classification(const Classification& c, const ModeNormSeries& m)
    {
        open("classification.json") << classification_json(c) << '\n';
        auto os = open("mode_norms.csv");
        write_mode_norms_csv(os, m);
        man.metrics["dominance"] = c.dominance;
        man.metrics["log_slope"] = c.log_slope;
        man.metrics["variant_case1"] = c.variant == Variant::Case1;
        man.metrics["variant_case2"] = c.variant == Variant::Case2;
        man.metrics["exact_match"] = c.variant == Variant::ExactMatch;
        if (c.variant == Variant::Case1)
            for (int i = 0; i < c.B.dim(); ++i)
                for (int k = i; k < c.B.dim(); ++k) {
                    const std::string ij = std::to_string(i) + std::to_string(k);
                    man.metrics["B_" + ij] = c.B(i, k);
                    man.metrics["B_err_" + ij] = c.fit.err(i, k);
                }
        if (c.variant == Variant::Case2) man.metrics["decay_rate"] = c.decay_rate;
    }

    const RunConfig& cfg;
    ModelParams params;
    fs::path dir;
    RunManifest man;
};

void run_reference(Context& ctx)
{
    const Trajectory ref = ctx.reference();
    ctx.save("reference.traj", ref);
    const ModelParams& P = ctx.params;
    const WeightedGrid& g = *ref.grid;
    auto os = ctx.open("profile_error.csv");
    os << "s,s_w0_minus_kappa,sqrt_s_sup_error\n";
    bool mono = true;
    double prev = INFINITY, top = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double s = ref.s[i];
        const double off = s * (ref.fields[i][g.origin_index()] - P.kappa);
        const double e = std::sqrt(s) * (ref.fields[i] - varphi_field(P, g, s)).cwiseAbs().maxCoeff();
        os << s << ',' << off << ',' << e << '\n';
        if (s < 20.0 - 1e-9 || s > 60.0 + 1e-9) continue;
        if (e > prev * (1.0 + 1e-12)) mono = false;
        prev = e;
        top = std::max(top, e);
    }
    ctx.man.metrics["s_end"] = ref.last_s();
    ctx.man.metrics["stages"] = static_cast<double>(ref.corrections.size());
    ctx.man.metrics["sup_error_max"] = top;
    ctx.man.checks["sup_error_non_increasing"] = mono;
    const double probe = std::min(50.0, ref.last_s());
    const double target = P.N * P.kappa / (2.0 * P.p);
    const double got = probe * (ref.sample(probe)[g.origin_index()] - P.kappa);
    ctx.man.metrics["profile_offset"] = got;
    ctx.man.metrics["profile_offset_target"] = target;
    ctx.man.metrics["profile_offset_rel_err"] = std::abs(got / target - 1.0);
    ctx.man.checks["profile_offset_within_25pct"] = std::abs(got / target - 1.0) < 0.25;
}

void run_kernel_suite(Context& ctx)
{
    auto& m = ctx.man;
    const GridPtr g = ctx.cfg.grid();
    const int N = g->dim();
    double orth = 0.0;
    for (int a = 0; a <= 4; ++a)
        for (const auto& ba : enumerate_multi_indices(a, N))
            for (int b = 0; b <= 4; ++b)
                for (const auto& bb : enumerate_multi_indices(b, N)) {
                    const double ip = inner_rho(phi_field(g, ba), phi_field(g, bb));
                    const double na = phi_norm_sq(ba), nb = phi_norm_sq(bb);
                    orth = std::max(orth, ba == bb ? std::abs(ip / na - 1.0) : std::abs(ip) / std::sqrt(na * nb));
                }
    double eig = 0.0;
    for (double t : {0.25, 1.0}) {
        const Semigroup S(g, t);
        for (int k = 0; k <= 4; ++k)
            for (const auto& b : enumerate_multi_indices(k, N)) {
                const FieldState f = phi_field(g, b);
                const FieldState d(g, S.apply(f.values) - std::exp((1.0 - 0.5 * k) * t) * f.values);
                eig = std::max(eig, norm_rho(d) / norm_rho(f));
            }
    }
    double bal = 0.0;
    for (int i = 0; i < 1000; ++i) {
        // deterministic lattice of (t, y, x)
        const double t = 0.05 + 3.0 * ((i * 37) % 1000) / 1000.0;
        const double y = -6.0 + 12.0 * ((i * 211) % 1000) / 1000.0;
        const double x = -6.0 + 12.0 * ((i * 613) % 1000) / 1000.0;
        const double a = std::exp(-y * y / 4.0) * mehler(t, y, x), c = std::exp(-x * x / 4.0) * mehler(t, x, y);
        bal = std::max(bal, std::abs(a - c) / std::max(std::abs(a), std::abs(c)));
    }
    const double pi = std::numbers::pi;
    auto rho = [pi](double y) { return std::exp(-y * y / 4.0) / std::sqrt(4.0 * pi); };
    const ScalarFunction phi2 = [&](const Point& y) { return (y[0] * y[0] - 2.0) * rho(y[0]); };
    double anti = 0.0;
    for (double y = -6.0; y <= 6.0; y += 0.5)
        anti = std::max(anti, std::abs(antiderivative_at(phi2, Point::Constant(1, y))[0] + 2.0 * y * rho(y)));
    const BlowupFrame frame{1.0, {}};
    double tt = 0.0;
    const double top = t_tilde_max(5.0, frame);
    for (int i = 0; i < 100; ++i) {
        const double x = top * std::pow(10.0, -6.0 + 6.0 * i / 99.0);
        tt = std::max(tt, std::abs(x - t_tilde_relation(t_tilde_gap(x, 5.0, frame), 5.0)) / x);
    }
    m.metrics["orthogonality_err"] = orth;
    m.metrics["eigenrelation_err"] = eig;
    m.metrics["detailed_balance_err"] = bal;
    m.metrics["antiderivative_err"] = anti;
    m.metrics["t_tilde_residual"] = tt;
    m.checks["orthogonality"] = orth < 1e-8;
    m.checks["eigenrelation"] = eig < 1e-6;
    m.checks["detailed_balance"] = bal < 1e-12;
    m.checks["antiderivative"] = anti < 1e-8;
    m.checks["t_tilde"] = tt < 1e-12;
    auto os = ctx.open("kernel_suite.csv");
    os << "check,value\n";
    for (const auto& [k, v] : m.metrics) os << k << ',' << v << '\n';
}

void run_dilation(Context& ctx)
{
    const Trajectory ref = ctx.reference();
    const Trajectory g = difference(dilation_shift(ref, ctx.cfg.lambda), ref);
    const Classification c = classify(g, ctx.cfg.dilation_window, {.fit = {.cutoff = ctx.cfg.va.cutoff}});
    ctx.classification(c, mode_norms(g, 5, ctx.cfg.va.cutoff));
    const double target = ctx.params.kappa * std::log(ctx.cfg.lambda) / ctx.params.p;
    ctx.man.metrics["B_target"] = target;
    ctx.man.checks["case1"] = c.variant == Variant::Case1;
    double worst = c.variant == Variant::Case1 ? 0.0 : INFINITY;
    if (c.variant == Variant::Case1)
        for (int i = 0; i < c.B.dim(); ++i)
            for (int k = 0; k < c.B.dim(); ++k) {
                const double want = i == k ? target : 0.0;
                worst = std::max(worst, std::abs(c.B(i, k) - want) / target);
            }
    ctx.man.metrics["B_rel_err"] = worst;
    ctx.man.checks["B_within_10pct"] = worst < 0.10;
}

void run_shoot(Context& ctx)
{
    const Trajectory ref = ctx.reference();
    const ShootingProblem prob = ctx.problem(ref);
    const ShootResult r = shoot(prob);
    {
        auto os = ctx.open("history.csv");
        write_history_csv(os, r.history);
    }
    {
        auto os = ctx.open("modes.csv");
        write_modes_csv(os, r.best_run.modes, prob.box.va);
    }
    if (r.best_run.modes.size() >= 3) {
        auto os = ctx.open("residuals.csv");
        write_residuals_csv(os, ode_residuals(r.best_run.modes, prob.box.va));
    }
    Trajectory wa;
    exit_time(prob, r.best, true, &wa);
    ctx.save("solution.traj", wa);
    const Vec d = r.best.flat();
    json best = {{"d", std::vector<double>(d.data(), d.data() + d.size())},
                 {"survived", r.survived()},
                 {"s_star", r.best_run.s_star()},
                 {"quiet_s", r.best_run.quiet_s}};
    ctx.open("best_point.json") << best.dump(2) << '\n';
    auto& m = ctx.man;
    for (Eigen::Index k = 0; k < d.size(); ++k) m.metrics["d_" + std::to_string(k)] = d[k];
    m.metrics["s_star"] = r.best_run.s_star();
    m.metrics["max_margin"] = r.best_run.max_margin;
    m.metrics["quiet_s"] = r.best_run.quiet_s;
    m.metrics["runs"] = static_cast<double>(r.history.size());
    m.checks["survived"] = r.survived();
    m.checks["margins_within_1"] = r.best_run.max_margin <= 1.0;
    const FitWindow win{std::min(20.0, 0.5 * (prob.box.s0 + r.best_run.quiet_s)), r.best_run.quiet_s};
    if (r.survived() && win.hi - win.lo >= 10 * prob.config.solver.stride) {
        const FitB f = fit_B(difference(wa, ref), win, {.cutoff = prob.box.va.cutoff});
        double worst = 0.0;
        const SymmetricMatrix& T = prob.box.va.target;
        const double scale = std::max(T.max_abs(), 1e-300);
        for (int i = 0; i < T.dim(); ++i)
            for (int k = i; k < T.dim(); ++k) {
                const std::string ij = std::to_string(i) + std::to_string(k);
                m.metrics["B_" + ij] = f.B(i, k);
                worst = std::max(worst, std::abs(f.B(i, k) - T(i, k)) / scale);
            }
        m.metrics["B_rel_err"] = worst;
        m.checks["B_within_15pct"] = worst < 0.15;
    }
}

Trajectory load_checked(const std::string& path, const ModelParams& P)
{
    Trajectory t = load_trajectory(path);
    require(t.params.p == P.p && t.params.N == P.N, path + ": trajectory made for a different model");
    require(t.has_fields(), path + ": trajectory without fields");
    return t;
}

void run_classify(Context& ctx)
{
    const Trajectory a = load_checked(ctx.cfg.traj_a, ctx.params);
    const Trajectory b = load_checked(ctx.cfg.traj_b, ctx.params);
    const Trajectory g = difference(a, b);
    const Classification c = classify(g, ctx.cfg.classify_window, {.fit = {.cutoff = ctx.cfg.va.cutoff}});
    ctx.classification(c, mode_norms(g, 5, ctx.cfg.va.cutoff));
    ctx.man.checks["determined"] = c.variant != Variant::Undetermined;
}

void run_theorem2(Context& ctx)
{
    const Trajectory u = load_checked(ctx.cfg.traj_u, ctx.params);
    const Trajectory ua = load_checked(ctx.cfg.traj_ua, ctx.params);
    const BlowupFrame frame{ctx.cfg.T, {}};
    const BoundReport rep = difference_bound_report(ctx.params, u, ua, frame, ctx.cfg.bound);
    auto os = ctx.open("bounds.csv");
    write_bound_csv(os, rep);
    double early = 0.0, late = 0.0;
    std::vector<const BoundRow*> inner;
    for (const auto& row : rep.rows)
        if (row.band == "inner") inner.push_back(&row);
    for (std::size_t i = 0; i < inner.size(); ++i) {
        double& slot = 2 * i < inner.size() ? early : late;
        slot = std::max(slot, inner[i]->ratio);
    }
    auto& m = ctx.man;
    m.metrics["inner_prefactor"] = rep.inner_prefactor;
    m.metrics["intermediate_prefactor"] = rep.intermediate_prefactor;
    m.metrics["inner_ratio_early"] = early;
    m.metrics["inner_ratio_late"] = late;
    m.metrics["gaps"] = static_cast<double>(rep.gaps.size());
    m.metrics["branch_min"] = rep.branch == "min";
    m.checks["inner_ratio_bounded"] = std::isfinite(rep.inner_prefactor) && !inner.empty() && late <= early;
    m.checks["covered"] = rep.gaps.empty();
}

} // namespace

RunManifest run(const RunConfig& config)
{
    Context ctx(config);
    try {
        switch (config.experiment) {
        case Experiment::Reference: run_reference(ctx); break;
        case Experiment::Shoot: run_shoot(ctx); break;
        case Experiment::Dilation: run_dilation(ctx); break;
        case Experiment::Classify: run_classify(ctx); break;
        case Experiment::KernelSuite: run_kernel_suite(ctx); break;
        case Experiment::Theorem2Report: run_theorem2(ctx); break;
        }
    } catch (const InvalidInput& e) {
        throw InvalidInput(to_string(config.experiment) + ": " + e.what());
    } catch (const std::exception& e) {
        throw NumericalFault(to_string(config.experiment) + ": " + e.what());
    }
    ctx.finish();
    return ctx.man;
}

RunManifest run_sweep(const RunConfig& config)
{
    require(config.experiment == Experiment::Shoot, "sweep: config must carry the shoot experiment tag");
    Context ctx(config);
    ctx.man.experiment = "sweep";
    const Trajectory ref = ctx.reference();
    const ShootingProblem prob = ctx.problem(ref);
    std::vector<SweepRow> rows;
    if (config.slice_points > 0) {
        const ShootResult r = shoot(prob);
        const Vec d = r.best.flat();
        // along the null coordinate, where the exit sign flips across the solution
        const int coord = static_cast<int>(d.size()) - 1;
        const double w = std::max(1e-6, 50.0 * std::abs(d[coord]));
        rows = sweep_points(prob, slice(r.best, coord, d[coord] - w, d[coord] + w, config.slice_points));
    } else {
        rows = sweep(prob, config.sweep_resolution);
    }
    auto os = ctx.open("exit_map.csv");
    write_sweep_csv(os, rows);
    int violations = 0, survived = 0;
    for (const auto& r : rows) {
        if (r.survived) ++survived;
        if (r.component == "v_minus" || r.component == "v_e") ++violations;
    }
    ctx.man.metrics["points"] = static_cast<double>(rows.size());
    ctx.man.metrics["survived"] = survived;
    ctx.man.metrics["attribution_violations"] = violations;
    ctx.man.checks["attribution_sane"] = violations == 0;
    ctx.finish();
    return ctx.man;
}

std::string diff_runs(const RunManifest& a, const RunManifest& b)
{
    if (a.experiment != b.experiment)
        throw InvalidInput("diff: experiment tags differ (" + a.experiment + " vs " + b.experiment + ")");
    std::ostringstream os;
    os.precision(10);
    const json fa = a.config.flatten(), fb = b.config.flatten();
    std::set<std::string> keys;
    for (const auto& [k, v] : fa.items()) keys.insert(k);
    for (const auto& [k, v] : fb.items()) keys.insert(k);
    for (const auto& k : keys) {
        const std::string va = fa.contains(k) ? fa.at(k).dump() : "-", vb = fb.contains(k) ? fb.at(k).dump() : "-";
        if (va != vb) os << "config " << k << ": " << va << " -> " << vb << '\n';
    }
    const double dsa = a.config.value("/solver/ds"_json_pointer, NAN), dsb = b.config.value("/solver/ds"_json_pointer, NAN);
    std::set<std::string> names;
    for (const auto& kv : a.metrics) names.insert(kv.first);
    for (const auto& kv : b.metrics) names.insert(kv.first);
    for (const auto& n : names) {
        const auto ia = a.metrics.find(n), ib = b.metrics.find(n);
        if (ia == a.metrics.end() || ib == b.metrics.end()) {
            os << "metric " << n << ": " << (ia == a.metrics.end() ? "-" : std::to_string(ia->second)) << " -> "
               << (ib == b.metrics.end() ? "-" : std::to_string(ib->second)) << '\n';
            continue;
        }
        const double x = ia->second, y = ib->second;
        if (x == y || (std::isnan(x) && std::isnan(y))) continue;
        os << "metric " << n << ": " << x << " -> " << y;
        if (n.find("err") != std::string::npos && x > 0.0 && y > 0.0 && std::isfinite(dsa) && std::isfinite(dsb) &&
            dsa != dsb)
            os << " (" << (y < x ? "reduced" : "increased") << ", order " << std::log(x / y) / std::log(dsa / dsb) << ")";
        os << '\n';
    }
    std::set<std::string> checks;
    for (const auto& kv : a.checks) checks.insert(kv.first);
    for (const auto& kv : b.checks) checks.insert(kv.first);
    auto show = [](const std::map<std::string, bool>& m, const std::string& k) {
        const auto it = m.find(k);
        return it == m.end() ? std::string("-") : it->second ? std::string("pass") : std::string("fail");
    };
    for (const auto& k : checks)
        if (show(a.checks, k) != show(b.checks, k)) os << "check " << k << ": " << show(a.checks, k) << " -> " << show(b.checks, k) << '\n';
    if (a.code_version != b.code_version) os << "code_version: " << a.code_version << " -> " << b.code_version << '\n';
    return os.str();
}

std::string report(const RunManifest& m)
{
    std::ostringstream os;
    os.precision(10);
    os << "experiment   " << m.experiment << '\n' << "config hash  " << m.config_hash << '\n'
       << "code version " << m.code_version << '\n';
    for (const auto& [k, v] : m.metrics) os << "  " << std::left << std::setw(28) << k << v << '\n';
    for (const auto& [k, v] : m.checks) os << (v ? "PASS " : "FAIL ") << k << '\n';
    for (const auto& f : m.files) os << "  file " << f << '\n';
    os << (m.passed() ? "all checks passed" : "checks failed") << '\n';
    return os.str();
}

} // namespace blowup
