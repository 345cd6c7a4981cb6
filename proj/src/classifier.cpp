#include "blowup/classifier.hpp"
#include "blowup/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace blowup {

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    require(x.size() == y.size() && x.size() >= 2, "linear_fit: need at least two matching samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, "linear_fit: abscissae are all equal");
    const double b = sxy / sxx;
    return {my - b * mx, b};
}

LimitFit richardson_limit(const std::vector<double>& s, const std::vector<double>& y, double exponent)
{
    require(exponent > 0.0, "richardson_limit: exponent must be positive");
    require(s.size() == y.size() && s.size() >= 3, "richardson_limit: need at least three samples");
    std::vector<double> x(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        require(s[i] > 0.0, "richardson_limit: times must be positive");
        x[i] = std::pow(s[i], -exponent);
    }
    const auto [a, b] = linear_fit(x, y);
    const double n = static_cast<double>(s.size());
    double mx = 0.0;
    for (double v : x) mx += v;
    mx /= n;
    double sxx = 0.0, sse = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        const double r = y[i] - a - b * x[i];
        sse += r * r;
    }
    LimitFit f;
    f.limit = a;
    f.slope = b;
    f.count = static_cast<int>(s.size());
    f.rms = std::sqrt(sse / n);
    const double sigma2 = sse / (n - 2.0);
    f.limit_err = std::sqrt(sigma2 * (1.0 / n + mx * mx / sxx));
    return f;
}

ModeNormSeries mode_norms(const Trajectory& g, int k_max, const CutoffSpec& cutoff)
{
    require(g.has_fields(), "mode_norms: trajectory without fields");
    require(k_max >= 0, "mode_norms: k_max must be non-negative");
    ModeNormSeries out;
    out.k_max = k_max;
    const WeightedGrid& grid = *g.grid;
    for (std::size_t i = 0; i < g.size(); ++i) {
        require(g.fields[i].size() == grid.size(), "mode_norms: field size differs from grid");
        const Vec gb = chi_field(cutoff, grid, g.s[i]).cwiseProduct(g.fields[i]);
        Vec ell(k_max + 1);
        for (int k = 0; k <= k_max; ++k) ell[k] = project_mode(grid, gb, k).norm_rho();
        out.s.push_back(g.s[i]);
        out.ell.push_back(ell);
        out.I.push_back(std::sqrt(inner_rho(grid, g.fields[i], g.fields[i])));
    }
    return out;
}

std::vector<SymmetricMatrix> scaled_null_mode(const Trajectory& g, const FitWindow& w, std::vector<double>& s_out,
                                              const CutoffSpec& cutoff)
{
    require(g.has_fields(), "fit_B: trajectory without fields");
    std::vector<SymmetricMatrix> out;
    s_out.clear();
    const double tol = 1e-9 * g.stride;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = g.s[i];
        if (s < w.lo - tol || s > w.hi + tol) continue;
        const Vec gb = chi_field(cutoff, *g.grid, s).cwiseProduct(g.fields[i]);
        out.push_back(project_v2(*g.grid, gb) * (s * s));
        s_out.push_back(s);
    }
    return out;
}

FitB fit_B_series(const std::vector<double>& s, const std::vector<SymmetricMatrix>& s2g2, const FitBOptions& opt)
{
    require(s.size() == s2g2.size() && s.size() >= 3, "fit_B: need at least three samples in the window");
    const int N = s2g2.front().dim();
    FitB out;
    out.B = SymmetricMatrix(N);
    out.err = SymmetricMatrix(N);
    out.spread = SymmetricMatrix(N);
    out.count = static_cast<int>(s.size());
    double scale = 0.0;
    for (const auto& m : s2g2) scale = std::max(scale, m.max_abs());
    double sse = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) {
            std::vector<double> y;
            for (const auto& m : s2g2) y.push_back(m(i, j));
            const LimitFit f = richardson_limit(s, y, opt.exponent);
            out.B.set(i, j, f.limit);
            out.err.set(i, j, f.limit_err);
            sse += f.rms * f.rms;
            const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
            double mean = 0.0;
            for (double v : y) mean += v;
            mean /= static_cast<double>(y.size());
            // entries at round-off level relative to the largest one carry no limit
            if (std::abs(mean) <= 1e-8 * scale) continue;
            const double spread = (*hi - *lo) / std::abs(mean);
            out.spread.set(i, j, spread);
            if (spread > opt.max_spread) {
                std::ostringstream os;
                os << "fit_B: s^2 g2(" << i << "," << j << ") does not settle: relative spread " << spread
                   << " over the window";
                throw NumericalFault(os.str());
            }
        }
    out.rms = std::sqrt(sse);
    return out;
}

FitB fit_B(const Trajectory& g, const FitWindow& w, const FitBOptions& opt)
{
    std::vector<double> s;
    const auto series = scaled_null_mode(g, w, s, opt.cutoff);
    return fit_B_series(s, series, opt);
}

std::string to_string(Variant v)
{
    switch (v) {
    case Variant::Case1: return "case1";
    case Variant::Case2: return "case2";
    case Variant::Undetermined: return "undetermined";
    case Variant::ExactMatch: return "exact-match";
    }
    return "?";
}

Classification classify(const Trajectory& g, const FitWindow& w, const ClassifyOptions& opt)
{
    require(g.has_fields(), "classify: trajectory without fields");
    Trajectory win = g;
    win.s.clear();
    win.fields.clear();
    const double tol = 1e-9 * g.stride;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.s[i] >= w.lo - tol && g.s[i] <= w.hi + tol) {
            win.s.push_back(g.s[i]);
            win.fields.push_back(g.fields[i]);
        }
    Classification c;
    c.B = SymmetricMatrix(g.grid->dim());
    if (static_cast<int>(win.size()) < opt.min_strides) {
        c.diagnostics = "window holds " + std::to_string(win.size()) + " strides, need " + std::to_string(opt.min_strides);
        return c;
    }

    const ModeNormSeries m = mode_norms(win, opt.k_max, opt.fit.cutoff);
    const double Imax = *std::max_element(m.I.begin(), m.I.end());
    if (Imax < opt.noise_floor) {
        c.variant = Variant::ExactMatch;
        c.diagnostics = "difference below the noise floor over the whole window";
        return c;
    }

    std::vector<double> logI;
    for (double v : m.I) logI.push_back(std::log(std::max(v, 1e-300)));
    c.log_slope = linear_fit(m.s, logI).second;
    const std::size_t half = m.s.size() / 2;
    double dom = 0.0;
    for (std::size_t i = half; i < m.s.size(); ++i) dom += m.I[i] > 0 ? m.ell[i][2] / m.I[i] : 0.0;
    c.dominance = dom / static_cast<double>(m.s.size() - half);

    std::ostringstream diag;
    diag << "d log I/ds = " << c.log_slope << ", ell2/I = " << c.dominance;
    if (c.dominance >= opt.dominance) {
        try {
            c.fit = fit_B(win, w, opt.fit);
            c.B = c.fit.B;
            c.fit_residual = c.fit.rms;
            const double noise = opt.noise_floor * win.s.back() * win.s.back();
            if (c.B.max_abs() > std::max(noise, 3.0 * c.fit.err.max_abs())) {
                c.variant = Variant::Case1;
                c.diagnostics = diag.str();
                return c;
            }
            diag << "; fitted B within noise";
        } catch (const NumericalFault& e) {
            diag << "; " << e.what();
        }
    }
    if (c.log_slope <= opt.case2_slope) {
        c.variant = Variant::Case2;
        c.decay_rate = -c.log_slope;
        double sse = 0.0;
        const auto [a, b] = linear_fit(m.s, logI);
        for (std::size_t i = 0; i < m.s.size(); ++i) sse += std::pow(logI[i] - a - b * m.s[i], 2);
        c.fit_residual = std::sqrt(sse / static_cast<double>(m.s.size()));
    }
    c.diagnostics = diag.str();
    return c;
}

void write_mode_norms_csv(std::ostream& os, const ModeNormSeries& m)
{
    os << "s";
    for (int k = 0; k <= m.k_max; ++k) os << ",ell" << k;
    os << ",I\n";
    os.precision(17);
    for (std::size_t i = 0; i < m.s.size(); ++i) {
        os << m.s[i];
        for (int k = 0; k <= m.k_max; ++k) os << ',' << m.ell[i][k];
        os << ',' << m.I[i] << '\n';
    }
}

namespace {
nlohmann::json matrix_rows(const SymmetricMatrix& m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.dim(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (int j = 0; j < m.dim(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}
} // namespace

std::string classification_json(const Classification& c)
{
    nlohmann::json j;
    j["variant"] = to_string(c.variant);
    j["log_slope"] = c.log_slope;
    j["dominance"] = c.dominance;
    j["fit_residual"] = c.fit_residual;
    j["diagnostics"] = c.diagnostics;
    if (c.variant == Variant::Case1) {
        j["B"] = matrix_rows(c.B);
        j["B_err"] = matrix_rows(c.fit.err);
        j["spread"] = matrix_rows(c.fit.spread);
    }
    if (c.variant == Variant::Case2) j["decay_rate"] = c.decay_rate;
    return j.dump(2);
}

} // namespace blowup
