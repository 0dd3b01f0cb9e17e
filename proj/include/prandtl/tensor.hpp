// Symmetric and trace-free tensors in dimension 2 or 3.
//
// Only the n(n+1)/2 independent entries are stored, diagonal first and then
// the off-diagonal entries in Voigt order:
//   n = 2: (xx, yy, xy)
//   n = 3: (xx, yy, zz, yz, xz, xy)
// The double contraction weights off-diagonal entries by 2, so ddot(a, b)
// equals the Frobenius product of the full matrices.
#ifndef PRANDTL_TENSOR_HPP
#define PRANDTL_TENSOR_HPP

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace prandtl {

inline int sym_size(int dim) { return dim * (dim + 1) / 2; }

inline void check_dim(int dim)
{
    if (dim != 2 && dim != 3)
        throw std::invalid_argument("tensor dimension must be 2 or 3, got " + std::to_string(dim));
}

namespace detail {
// (row, col) of the k-th stored component.
inline std::array<int, 2> voigt_index(int dim, int k)
{
    static constexpr int i2[3][2] = {{0, 0}, {1, 1}, {0, 1}};
    static constexpr int i3[6][2] = {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
    return dim == 2 ? std::array<int, 2>{i2[k][0], i2[k][1]} : std::array<int, 2>{i3[k][0], i3[k][1]};
}

inline int voigt_slot(int dim, int i, int j)
{
    if (i == j)
        return i;
    if (dim == 2)
        return 2;
    const int lo = std::min(i, j), hi = std::max(i, j);
    if (lo == 1 && hi == 2)
        return 3;
    if (lo == 0 && hi == 2)
        return 4;
    return 5;
}
} // namespace detail

template <typename Scalar>
class SymTensor {
public:
    using Components = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, 6, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

    SymTensor() : SymTensor(2) {}

    explicit SymTensor(int dim) : dim_(dim)
    {
        check_dim(dim);
        c_ = Components::Zero(sym_size(dim));
    }

    SymTensor(int dim, const Components& components) : dim_(dim), c_(components)
    {
        check_dim(dim);
        if (c_.size() != sym_size(dim))
            throw std::invalid_argument("wrong number of symmetric tensor components");
    }

    static SymTensor zero(int dim) { return SymTensor(dim); }

    static SymTensor identity(int dim)
    {
        SymTensor t(dim);
        for (int i = 0; i < dim; ++i)
            t.c_[i] = Scalar(1);
        return t;
    }

    static SymTensor from_components(int dim, std::span<const Scalar> values)
    {
        check_dim(dim);
        if (static_cast<int>(values.size()) != sym_size(dim))
            throw std::invalid_argument("wrong number of symmetric tensor components");
        SymTensor t(dim);
        for (int k = 0; k < sym_size(dim); ++k)
            t.c_[k] = values[k];
        return t;
    }

    /// Build from a full matrix; rejects matrices that are not symmetric to `tol`.
    template <typename Derived>
    static SymTensor from_matrix(const Eigen::MatrixBase<Derived>& m, Scalar tol = Scalar(1e-12))
    {
        if (m.rows() != m.cols())
            throw std::invalid_argument("matrix is not square");
        const int dim = static_cast<int>(m.rows());
        SymTensor t(dim);
        for (int k = 0; k < sym_size(dim); ++k) {
            const auto [i, j] = detail::voigt_index(dim, k);
            using std::abs;
            if (abs(m(i, j) - m(j, i)) > tol * (Scalar(1) + abs(m(i, j))))
                throw std::invalid_argument("matrix is not symmetric");
            t.c_[k] = (m(i, j) + m(j, i)) / Scalar(2);
        }
        return t;
    }

    int dim() const { return dim_; }
    int size() const { return static_cast<int>(c_.size()); }
    const Components& components() const { return c_; }
    Scalar component(int k) const { return c_[k]; }

    Scalar operator()(int i, int j) const { return c_[detail::voigt_slot(dim_, i, j)]; }

    Matrix full() const
    {
        Matrix m(dim_, dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j)
                m(i, j) = (*this)(i, j);
        return m;
    }

    bool is_finite() const { return c_.allFinite(); }

    SymTensor& operator+=(const SymTensor& o)
    {
        same_dim(o);
        c_ += o.c_;
        return *this;
    }
    SymTensor& operator-=(const SymTensor& o)
    {
        same_dim(o);
        c_ -= o.c_;
        return *this;
    }
    SymTensor& operator*=(Scalar s)
    {
        c_ *= s;
        return *this;
    }
    SymTensor& operator/=(Scalar s)
    {
        c_ /= s;
        return *this;
    }

    friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
    friend SymTensor operator-(SymTensor a, const SymTensor& b) { return a -= b; }
    friend SymTensor operator-(SymTensor a)
    {
        a.c_ = -a.c_;
        return a;
    }
    friend SymTensor operator*(SymTensor a, Scalar s) { return a *= s; }
    friend SymTensor operator*(Scalar s, SymTensor a) { return a *= s; }
    friend SymTensor operator/(SymTensor a, Scalar s) { return a /= s; }

    friend bool operator==(const SymTensor& a, const SymTensor& b)
    {
        return a.dim_ == b.dim_ && a.c_ == b.c_;
    }

private:
    void same_dim(const SymTensor& o) const
    {
        if (o.dim_ != dim_)
            throw std::invalid_argument("tensor dimension mismatch");
    }

    int dim_;
    Components c_;
};

template <typename Scalar>
Scalar trace(const SymTensor<Scalar>& xi)
{
    return xi.components().head(xi.dim()).sum();
}

template <typename Scalar>
Scalar ddot(const SymTensor<Scalar>& a, const SymTensor<Scalar>& b)
{
    if (a.dim() != b.dim())
        throw std::invalid_argument("tensor dimension mismatch");
    const int n = a.dim();
    const auto& ca = a.components();
    const auto& cb = b.components();
    return ca.head(n).dot(cb.head(n)) + Scalar(2) * ca.tail(a.size() - n).dot(cb.tail(b.size() - n));
}

template <typename Scalar>
Scalar squared_norm(const SymTensor<Scalar>& xi)
{
    return ddot(xi, xi);
}

template <typename Scalar>
Scalar norm(const SymTensor<Scalar>& xi)
{
    using std::sqrt;
    return sqrt(squared_norm(xi));
}

/// Trace-free symmetric tensor. Closed under linear combinations; can only be
/// produced by deviator(), from_sym() or the zero/basis factories.
template <typename Scalar>
class DevTensor {
public:
    DevTensor() : DevTensor(2) {}
    explicit DevTensor(int dim) : t_(dim) {}

    static DevTensor zero(int dim) { return DevTensor(dim); }

    /// Accepts `xi` if its trace is below `tol * |xi|`; the residual trace is removed.
    static DevTensor from_sym(const SymTensor<Scalar>& xi, Scalar tol = Scalar(1e-12))
    {
        using std::abs;
        if (abs(trace(xi)) > tol * (Scalar(1) + norm(xi)))
            throw std::invalid_argument("tensor is not trace-free");
        return strip(xi);
    }

    int dim() const { return t_.dim(); }
    const SymTensor<Scalar>& sym() const { return t_; }
    operator const SymTensor<Scalar>&() const { return t_; }
    Scalar operator()(int i, int j) const { return t_(i, j); }
    bool is_finite() const { return t_.is_finite(); }

    DevTensor& operator+=(const DevTensor& o)
    {
        t_ += o.t_;
        return *this;
    }
    DevTensor& operator-=(const DevTensor& o)
    {
        t_ -= o.t_;
        return *this;
    }
    DevTensor& operator*=(Scalar s)
    {
        t_ *= s;
        return *this;
    }
    DevTensor& operator/=(Scalar s)
    {
        t_ /= s;
        return *this;
    }

    friend DevTensor operator+(DevTensor a, const DevTensor& b) { return a += b; }
    friend DevTensor operator-(DevTensor a, const DevTensor& b) { return a -= b; }
    friend DevTensor operator-(DevTensor a)
    {
        a.t_ = -a.t_;
        return a;
    }
    friend DevTensor operator*(DevTensor a, Scalar s) { return a *= s; }
    friend DevTensor operator*(Scalar s, DevTensor a) { return a *= s; }
    friend DevTensor operator/(DevTensor a, Scalar s) { return a /= s; }
    friend bool operator==(const DevTensor& a, const DevTensor& b) { return a.t_ == b.t_; }

private:
    template <typename S>
    friend DevTensor<S> deviator(const SymTensor<S>& xi);

    static DevTensor strip(const SymTensor<Scalar>& xi)
    {
        DevTensor d(xi.dim());
        d.t_ = xi - (trace(xi) / Scalar(xi.dim())) * SymTensor<Scalar>::identity(xi.dim());
        return d;
    }

    SymTensor<Scalar> t_;
};

/// xi_D = xi - (tr xi / n) I.
template <typename Scalar>
DevTensor<Scalar> deviator(const SymTensor<Scalar>& xi)
{
    return DevTensor<Scalar>::strip(xi);
}

template <typename Scalar>
Scalar ddot(const DevTensor<Scalar>& a, const DevTensor<Scalar>& b)
{
    return ddot(a.sym(), b.sym());
}
template <typename Scalar>
Scalar ddot(const DevTensor<Scalar>& a, const SymTensor<Scalar>& b)
{
    return ddot(a.sym(), b);
}
template <typename Scalar>
Scalar ddot(const SymTensor<Scalar>& a, const DevTensor<Scalar>& b)
{
    return ddot(a, b.sym());
}
template <typename Scalar>
Scalar norm(const DevTensor<Scalar>& xi)
{
    return norm(xi.sym());
}
template <typename Scalar>
Scalar squared_norm(const DevTensor<Scalar>& xi)
{
    return squared_norm(xi.sym());
}
template <typename Scalar>
Scalar trace(const DevTensor<Scalar>& xi)
{
    return trace(xi.sym());
}

/// Symmetrized tensor product (a_i b_j + a_j b_i) / 2.
template <typename DerivedA, typename DerivedB>
SymTensor<typename DerivedA::Scalar> sym_dyad(const Eigen::MatrixBase<DerivedA>& a,
                                              const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename DerivedA::Scalar;
    if (a.size() != b.size())
        throw std::invalid_argument("sym_dyad: vector lengths differ");
    const int dim = static_cast<int>(a.size());
    check_dim(dim);
    typename SymTensor<Scalar>::Components c(sym_size(dim));
    for (int k = 0; k < sym_size(dim); ++k) {
        const auto [i, j] = detail::voigt_index(dim, k);
        c[k] = (a[i] * b[j] + a[j] * b[i]) / Scalar(2);
    }
    return SymTensor<Scalar>(dim, c);
}

/// Orthonormal basis of the trace-free symmetric tensors (2 elements for n = 2, 5 for n = 3).
template <typename Scalar>
std::vector<DevTensor<Scalar>> deviatoric_basis(int dim)
{
    check_dim(dim);
    using std::sqrt;
    using Sym = SymTensor<Scalar>;
    std::vector<DevTensor<Scalar>> basis;
    const Scalar h = Scalar(1) / sqrt(Scalar(2));
    auto make = [&](std::initializer_list<Scalar> comps) {
        std::vector<Scalar> v(comps);
        return DevTensor<Scalar>::from_sym(Sym::from_components(dim, v));
    };
    if (dim == 2) {
        basis.push_back(make({h, -h, Scalar(0)}));
        basis.push_back(make({Scalar(0), Scalar(0), h}));
    } else {
        const Scalar s = Scalar(1) / sqrt(Scalar(6));
        basis.push_back(make({h, -h, 0, 0, 0, 0}));
        basis.push_back(make({s, s, -2 * s, 0, 0, 0}));
        basis.push_back(make({0, 0, 0, h, 0, 0}));
        basis.push_back(make({0, 0, 0, 0, h, 0}));
        basis.push_back(make({0, 0, 0, 0, 0, h}));
    }
    return basis;
}

inline int deviatoric_size(int dim) { return sym_size(dim) - 1; }

/// Coordinates of a deviator in the basis returned by deviatoric_basis().
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> to_coordinates(const DevTensor<Scalar>& xi)
{
    const auto basis = deviatoric_basis<Scalar>(xi.dim());
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> c(basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k)
        c[k] = ddot(xi, basis[k]);
    return c;
}

template <typename Derived>
DevTensor<typename Derived::Scalar> from_coordinates(int dim, const Eigen::MatrixBase<Derived>& c)
{
    using Scalar = typename Derived::Scalar;
    const auto basis = deviatoric_basis<Scalar>(dim);
    if (c.size() != static_cast<Eigen::Index>(basis.size()))
        throw std::invalid_argument("wrong number of deviatoric coordinates");
    DevTensor<Scalar> xi(dim);
    for (std::size_t k = 0; k < basis.size(); ++k)
        xi += c[k] * basis[k];
    return xi;
}

using Sym = SymTensor<double>;
using Dev = DevTensor<double>;

} // namespace prandtl

#endif // PRANDTL_TENSOR_HPP
