#include "blowup/spectral.hpp"
#include "blowup/errors.hpp"

#include <numbers>

namespace blowup {

MultiIndex::MultiIndex(std::vector<int> entries) : e_(std::move(entries))
{
    for (int v : e_) require(v >= 0, "multi-index entries must be non-negative");
}

int MultiIndex::degree() const
{
    int d = 0;
    for (int v : e_) d += v;
    return d;
}

namespace {

void enumerate_rec(int remaining, int slot, std::vector<int>& cur, std::vector<MultiIndex>& out)
{
    const int N = static_cast<int>(cur.size());
    if (slot == N - 1) {
        cur[static_cast<std::size_t>(slot)] = remaining;
        out.emplace_back(cur);
        return;
    }
    for (int v = 0; v <= remaining; ++v) {
        cur[static_cast<std::size_t>(slot)] = v;
        enumerate_rec(remaining - v, slot + 1, cur, out);
    }
}

} // namespace

std::vector<MultiIndex> enumerate_multi_indices(int m, int N)
{
    require(m >= 0 && N >= 1, "enumerate_multi_indices: need m >= 0, N >= 1");
    std::vector<MultiIndex> out;
    std::vector<int> cur(static_cast<std::size_t>(N), 0);
    enumerate_rec(m, 0, cur, out);
    return out;
}

SymmetricMatrix::SymmetricMatrix(const Mat& a)
{
    require(a.rows() == a.cols(), "SymmetricMatrix: matrix must be square");
    m_ = Mat(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) m_(i, j) = 0.5 * (a(i, j) + a(j, i));
}

WeightedGrid::WeightedGrid(int dim, double half_width, int nodes_per_axis)
    : dim_(dim), L_(half_width), n_(nodes_per_axis)
{
    require(dim == 1 || dim == 2, "WeightedGrid: dimension must be 1 or 2");
    require(half_width > 0, "WeightedGrid: half width must be positive");
    require(nodes_per_axis >= 5 && nodes_per_axis % 2 == 1, "WeightedGrid: need an odd node count >= 5");

    h_ = 2.0 * L_ / (n_ - 1);
    axis_.resize(n_);
    const int c = (n_ - 1) / 2;
    for (int i = 0; i < n_; ++i) axis_[i] = (i - c) * h_;   // exact symmetry about 0

    Vec rho1 = (-axis_.array().square() / 4.0).exp() / std::sqrt(4.0 * std::numbers::pi);
    Vec trap = Vec::Constant(n_, h_);
    trap[0] = trap[n_ - 1] = 0.5 * h_;

    size_ = dim_ == 1 ? n_ : static_cast<Eigen::Index>(n_) * n_;
    coords_.assign(static_cast<std::size_t>(dim_), Vec(size_));
    rho_.resize(size_);
    w_.resize(size_);
    r_.resize(size_);
    if (dim_ == 1) {
        coords_[0] = axis_;
        rho_ = rho1;
        w_ = trap.cwiseProduct(rho1);
        r_ = axis_.cwiseAbs();
    } else {
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) {
                const Eigen::Index k = static_cast<Eigen::Index>(i) * n_ + j;
                coords_[0][k] = axis_[i];
                coords_[1][k] = axis_[j];
                rho_[k] = rho1[i] * rho1[j];
                w_[k] = trap[i] * trap[j] * rho_[k];
                r_[k] = std::hypot(axis_[i], axis_[j]);
            }
    }
}

std::shared_ptr<const WeightedGrid> WeightedGrid::make_default(int dim)
{
    if (dim == 1) return std::make_shared<const WeightedGrid>(1, 40.0, 2001);
    return std::make_shared<const WeightedGrid>(2, 20.0, 401);
}

Point WeightedGrid::point(Eigen::Index k) const
{
    Point y(dim_);
    for (int d = 0; d < dim_; ++d) y[d] = coords_[static_cast<std::size_t>(d)][k];
    return y;
}

Eigen::Index WeightedGrid::origin_index() const
{
    const Eigen::Index c = (n_ - 1) / 2;
    return dim_ == 1 ? c : c * n_ + c;
}

bool WeightedGrid::same_as(const WeightedGrid& o) const
{
    return this == &o || (dim_ == o.dim_ && n_ == o.n_ && L_ == o.L_);
}

void require_same_grid(const FieldState& a, const FieldState& b)
{
    require(a.grid && b.grid, "field without grid");
    require(a.grid->same_as(*b.grid), "fields live on different grids");
}

double phi_norm_sq(const MultiIndex& beta)
{
    double n = 1.0;
    for (int k : beta.entries())
        for (int j = 1; j <= k; ++j) n *= 2.0 * j;
    return n;
}

double eval_phi(const MultiIndex& beta, const Point& y)
{
    require(beta.dim() == y.size(), "eval_phi: multi-index length differs from point dimension");
    double v = 1.0;
    for (int d = 0; d < beta.dim(); ++d) v *= phi1(beta[d], y[d]);
    return v;
}

FieldState phi_field(const GridPtr& grid, const MultiIndex& beta)
{
    require(beta.dim() == grid->dim(), "phi_field: multi-index length differs from grid dimension");
    Eigen::ArrayXd v = Eigen::ArrayXd::Ones(grid->size());
    for (int d = 0; d < grid->dim(); ++d) v *= phi1_array(beta[d], grid->coord(d).array());
    return FieldState(grid, v.matrix());
}

double inner_rho(const WeightedGrid& grid, const Vec& f, const Vec& g)
{
    require(f.size() == grid.size() && g.size() == grid.size(), "inner_rho: sample count differs from grid");
    return (grid.weights().array() * f.array() * g.array()).sum();
}

double inner_rho(const FieldState& f, const FieldState& g)
{
    require_same_grid(f, g);
    return inner_rho(*f.grid, f.values, g.values);
}

double norm_rho(const FieldState& f)
{
    return std::sqrt(inner_rho(*f.grid, f.values, f.values));
}

Vec ModeCoefficients::reconstruct(const WeightedGrid& grid) const
{
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(grid.size());
    for (std::size_t b = 0; b < betas.size(); ++b) {
        Eigen::ArrayXd term = Eigen::ArrayXd::Constant(grid.size(), coeffs[static_cast<Eigen::Index>(b)]);
        for (int d = 0; d < grid.dim(); ++d) term *= phi1_array(betas[b][d], grid.coord(d).array());
        out += term;
    }
    return out.matrix();
}

double ModeCoefficients::norm_rho() const
{
    double s = 0.0;
    for (std::size_t b = 0; b < betas.size(); ++b) {
        const double c = coeffs[static_cast<Eigen::Index>(b)];
        s += c * c * phi_norm_sq(betas[b]);
    }
    return std::sqrt(s);
}

ModeCoefficients project_mode(const WeightedGrid& grid, const Vec& f, int m)
{
    require(m >= 0, "project_mode: m must be non-negative");
    require(f.size() == grid.size(), "project_mode: sample count differs from grid");
    ModeCoefficients out;
    out.m = m;
    out.betas = enumerate_multi_indices(m, grid.dim());
    out.coeffs.resize(static_cast<Eigen::Index>(out.betas.size()));
    const Eigen::ArrayXd wf = grid.weights().array() * f.array();
    for (std::size_t b = 0; b < out.betas.size(); ++b) {
        Eigen::ArrayXd phi = Eigen::ArrayXd::Ones(grid.size());
        for (int d = 0; d < grid.dim(); ++d) phi *= phi1_array(out.betas[b][d], grid.coord(d).array());
        out.coeffs[static_cast<Eigen::Index>(b)] = (wf * phi).sum() / phi_norm_sq(out.betas[b]);
    }
    return out;
}

ModeCoefficients project_mode(const FieldState& f, int m)
{
    require(f.grid != nullptr, "project_mode: field without grid");
    return project_mode(*f.grid, f.values, m);
}

SymmetricMatrix project_v2(const WeightedGrid& grid, const Vec& f)
{
    require(f.size() == grid.size(), "project_v2: sample count differs from grid");
    const int N = grid.dim();
    const Eigen::ArrayXd wf = grid.weights().array() * f.array();
    const double mass = wf.sum();
    SymmetricMatrix out(N);
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) {
            double v = 0.25 * (wf * grid.coord(i).array() * grid.coord(j).array()).sum();
            if (i == j) v -= 0.5 * mass;
            out.set(i, j, v);
        }
    return out;
}

SymmetricMatrix project_v2(const FieldState& f)
{
    require(f.grid != nullptr, "project_v2: field without grid");
    return project_v2(*f.grid, f.values);
}

Vec quadratic_form_field(const WeightedGrid& grid, const SymmetricMatrix& B)
{
    require(B.dim() == grid.dim(), "quadratic_form_field: matrix dimension differs from grid");
    Eigen::ArrayXd out = Eigen::ArrayXd::Constant(grid.size(), -B.trace());
    for (int i = 0; i < grid.dim(); ++i)
        for (int j = 0; j < grid.dim(); ++j)
            out += 0.5 * B(i, j) * grid.coord(i).array() * grid.coord(j).array();
    return out.matrix();
}

} // namespace blowup
