#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <memory>
#include <vector>

namespace blowup {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Point = Eigen::VectorXd;

class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> entries);
    MultiIndex(std::initializer_list<int> entries) : MultiIndex(std::vector<int>(entries)) {}

    int dim() const { return static_cast<int>(e_.size()); }
    int degree() const;
    int operator[](int i) const { return e_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& entries() const { return e_; }

    bool operator==(const MultiIndex& o) const { return e_ == o.e_; }

private:
    std::vector<int> e_;
};

/// All multi-indices of length N with |beta| = m in lexicographic order
/// ((0,2), (1,1), (2,0) for N=2, m=2).
std::vector<MultiIndex> enumerate_multi_indices(int m, int N);

/// Symmetric N x N matrix; every write keeps (i,j) and (j,i) identical.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;
    explicit SymmetricMatrix(int n) : m_(Mat::Zero(n, n)) {}
    /// Symmetrizes: entries become (a_ij + a_ji)/2, which is exactly symmetric.
    explicit SymmetricMatrix(const Mat& a);

    static SymmetricMatrix scalar(double a) { return SymmetricMatrix(Mat::Constant(1, 1, a)); }
    static SymmetricMatrix identity(int n, double a = 1.0) { return SymmetricMatrix(Mat(a * Mat::Identity(n, n))); }

    int dim() const { return static_cast<int>(m_.rows()); }
    double operator()(int i, int j) const { return m_(i, j); }
    void set(int i, int j, double v) { m_(i, j) = v; m_(j, i) = v; }
    const Mat& matrix() const { return m_; }
    double trace() const { return m_.trace(); }
    double max_abs() const { return m_.size() ? m_.cwiseAbs().maxCoeff() : 0.0; }

    SymmetricMatrix operator+(const SymmetricMatrix& o) const { return SymmetricMatrix(Mat(m_ + o.m_)); }
    SymmetricMatrix operator-(const SymmetricMatrix& o) const { return SymmetricMatrix(Mat(m_ - o.m_)); }
    SymmetricMatrix operator*(double c) const { return SymmetricMatrix(Mat(c * m_)); }

private:
    Mat m_;
};

/// Uniform tensor grid on [-L, L]^N carrying the Gaussian weight rho.
/// Flattened layout for N = 2: k = i * n + j  <->  (y1, y2) = (x_i, x_j).
class WeightedGrid {
public:
    WeightedGrid(int dim, double half_width, int nodes_per_axis);

    /// N=1: [-40,40] with 2001 nodes; N=2: [-20,20]^2 with 401^2 nodes.
    static std::shared_ptr<const WeightedGrid> make_default(int dim);

    int dim() const { return dim_; }
    double half_width() const { return L_; }
    int axis_size() const { return n_; }
    Eigen::Index size() const { return size_; }
    double spacing() const { return h_; }

    const Vec& axis() const { return axis_; }
    const Vec& rho() const { return rho_; }
    /// Trapezoid weights times rho; sum approximates 1.
    const Vec& weights() const { return w_; }
    /// |y| at every node.
    const Vec& radius() const { return r_; }
    /// Coordinate d of node k.
    const Vec& coord(int d) const { return coords_[static_cast<std::size_t>(d)]; }
    Point point(Eigen::Index k) const;
    /// Index of the node at the origin (grids are symmetric with an odd node count).
    Eigen::Index origin_index() const;

    bool same_as(const WeightedGrid& o) const;

private:
    int dim_;
    double L_;
    int n_;
    Eigen::Index size_;
    double h_;
    Vec axis_;
    Vec rho_;
    Vec w_;
    Vec r_;
    std::vector<Vec> coords_;
};

using GridPtr = std::shared_ptr<const WeightedGrid>;

/// Grid samples of a function of y at similarity time s.
struct FieldState {
    GridPtr grid;
    Vec values;
    double s = 0.0;

    FieldState() = default;
    FieldState(GridPtr g, Vec v, double time = 0.0) : grid(std::move(g)), values(std::move(v)), s(time) {}
};

void require_same_grid(const FieldState& a, const FieldState& b);

/// 1-D eigenfunction with leading coefficient one: phi_{k+1} = xi phi_k - 2k phi_{k-1}.
template <typename Scalar>
Scalar phi1(int k, Scalar xi)
{
    if (k == 0) return Scalar(1);
    Scalar prev(1), cur = xi;
    for (int j = 1; j < k; ++j) {
        Scalar next = xi * cur - Scalar(2 * j) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

template <typename Derived>
Eigen::ArrayXd phi1_array(int k, const Eigen::ArrayBase<Derived>& xi)
{
    Eigen::ArrayXd prev = Eigen::ArrayXd::Ones(xi.size());
    if (k == 0) return prev;
    Eigen::ArrayXd cur = xi;
    for (int j = 1; j < k; ++j) {
        Eigen::ArrayXd next = xi * cur - double(2 * j) * prev;
        prev.swap(cur);
        cur.swap(next);
    }
    return cur;
}

/// ||phi_beta||^2_rho = prod 2^{b_i} b_i!
double phi_norm_sq(const MultiIndex& beta);

double eval_phi(const MultiIndex& beta, const Point& y);
FieldState phi_field(const GridPtr& grid, const MultiIndex& beta);

double inner_rho(const FieldState& f, const FieldState& g);
double norm_rho(const FieldState& f);
double inner_rho(const WeightedGrid& grid, const Vec& f, const Vec& g);

struct ModeCoefficients {
    int m = 0;
    std::vector<MultiIndex> betas;
    Vec coeffs;

    /// P_m(f) sampled on the grid.
    Vec reconstruct(const WeightedGrid& grid) const;
    /// ||P_m f||_rho computed from the coefficients.
    double norm_rho() const;
};

ModeCoefficients project_mode(const FieldState& f, int m);
ModeCoefficients project_mode(const WeightedGrid& grid, const Vec& f, int m);

/// v2 = int f M rho with M_ij = y_i y_j / 4 - delta_ij / 2.
SymmetricMatrix project_v2(const FieldState& f);
SymmetricMatrix project_v2(const WeightedGrid& grid, const Vec& f);

/// 1/2 y^T B y - tr(B) on the grid.
Vec quadratic_form_field(const WeightedGrid& grid, const SymmetricMatrix& B);

} // namespace blowup
