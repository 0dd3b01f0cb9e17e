#include "prandtl/constitutive.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace prandtl {

namespace {

constexpr double kGeomTol = 1e-10;

// Calls fn(indices) for every k-subset of {0, ..., n-1} in lexicographic order.
void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& fn)
{
    if (k > n || k <= 0)
        return;
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i)
        idx[i] = i;
    while (true) {
        fn(idx);
        int i = k - 1;
        while (i >= 0 && idx[i] == n - k + i)
            --i;
        if (i < 0)
            return;
        ++idx[i];
        for (int j = i + 1; j < k; ++j)
            idx[j] = idx[j - 1] + 1;
    }
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<int>& rows)
{
    Eigen::MatrixXd out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(i) = m.row(rows[i]);
    return out;
}

// Closest point of {z : N z <= c} to x by a primal active-set method started
// at the interior point z = 0. The working set stays linearly independent
// because a constraint whose normal lies in the span of the working set can
// never block a step taken inside that span's orthogonal complement.
Eigen::VectorXd project_polytope(const Eigen::MatrixXd& N, const Eigen::VectorXd& c, const Eigen::VectorXd& x,
                                 int max_iterations)
{
    const int m = static_cast<int>(N.rows());
    const int d = static_cast<int>(N.cols());
    Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
    if (((N * x) - c).maxCoeff() <= 0.0)
        return x;

    std::vector<int> working;
    std::vector<char> in_working(m, 0);
    const double scale = 1.0 + x.norm();

    for (int iter = 0; iter < max_iterations; ++iter) {
        Eigen::VectorXd step = x - z;
        Eigen::VectorXd lambda;
        if (!working.empty()) {
            const Eigen::MatrixXd A = rows_of(N, working);
            lambda = A.transpose().colPivHouseholderQr().solve(x - z);
            step = (x - z) - A.transpose() * lambda;
        }

        if (step.norm() <= 1e-14 * scale) {
            if (working.empty())
                return z;
            Eigen::Index worst = 0;
            const double most_negative = lambda.minCoeff(&worst);
            if (most_negative >= -1e-14 * scale)
                return z;
            in_working[working[worst]] = 0;
            working.erase(working.begin() + worst);
            continue;
        }

        double alpha = 1.0;
        int blocking = -1;
        for (int j = 0; j < m; ++j) {
            if (in_working[j])
                continue;
            const double nd = N.row(j).dot(step);
            if (nd <= 1e-14 * step.norm())
                continue;
            const double slack = std::max(0.0, c[j] - N.row(j).dot(z));
            const double a = slack / nd;
            if (a < alpha) {
                alpha = a;
                blocking = j;
            }
        }
        z += alpha * step;
        if (blocking >= 0) {
            working.push_back(blocking);
            in_working[blocking] = 1;
        }
    }
    throw NonConvergence("closest-point projection onto polyhedral yield set did not converge");
}

// Wolfe's minimum-norm-point algorithm over the convex hull of the rows of P.
Eigen::VectorXd min_norm_point(const Eigen::MatrixXd& P)
{
    const int np = static_cast<int>(P.rows());
    const double scale = P.rowwise().squaredNorm().maxCoeff();
    const double tol = 1e-12 * std::max(scale, 1e-300);

    Eigen::Index first = 0;
    P.rowwise().squaredNorm().minCoeff(&first);
    std::vector<int> S{static_cast<int>(first)};
    std::vector<double> lam{1.0};
    Eigen::VectorXd x = P.row(first).transpose();

    auto combine = [&](const std::vector<double>& w) {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(P.cols());
        for (std::size_t i = 0; i < S.size(); ++i)
            y += w[i] * P.row(S[i]).transpose();
        return y;
    };

    for (int major = 0; major < 10 * np + 10; ++major) {
        Eigen::Index j = 0;
        const double best = (P * x).minCoeff(&j);
        if (x.squaredNorm() - best <= tol || std::find(S.begin(), S.end(), static_cast<int>(j)) != S.end())
            return x;
        S.push_back(static_cast<int>(j));
        lam.push_back(0.0);

        for (int minor = 0; minor < 10 * np + 10; ++minor) {
            const int k = static_cast<int>(S.size());
            Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(k + 1, k + 1);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
            for (int a = 0; a < k; ++a) {
                for (int b = 0; b < k; ++b)
                    sys(a, b) = P.row(S[a]).dot(P.row(S[b]));
                sys(a, k) = 1.0;
                sys(k, a) = 1.0;
            }
            rhs[k] = 1.0;
            const Eigen::VectorXd sol = sys.colPivHouseholderQr().solve(rhs);
            std::vector<double> mu(sol.data(), sol.data() + k);

            if (*std::min_element(mu.begin(), mu.end()) > 1e-14) {
                lam = mu;
                x = combine(lam);
                break;
            }
            double theta = 1.0;
            for (int a = 0; a < k; ++a)
                if (mu[a] <= 1e-14)
                    theta = std::min(theta, lam[a] / (lam[a] - mu[a]));
            for (int a = 0; a < k; ++a)
                lam[a] += theta * (mu[a] - lam[a]);
            std::vector<int> S2;
            std::vector<double> lam2;
            for (int a = 0; a < k; ++a) {
                if (lam[a] > 1e-14) {
                    S2.push_back(S[a]);
                    lam2.push_back(lam[a]);
                }
            }
            S = std::move(S2);
            lam = std::move(lam2);
            x = combine(lam);
        }
    }
    return x;
}

} // namespace

YieldSurface YieldSurface::von_mises(int dim, double radius)
{
    check_dim(dim);
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("von Mises radius must be positive");
    YieldSurface k;
    k.kind_ = Kind::VonMises;
    k.dim_ = dim;
    k.r_inner_ = radius;
    k.r_outer_ = radius;
    return k;
}

YieldSurface YieldSurface::polyhedral(int dim, const std::vector<Dev>& normals, const std::vector<double>& offsets)
{
    check_dim(dim);
    if (normals.size() != offsets.size())
        throw std::invalid_argument("polyhedral yield: normals and offsets differ in length");
    const int d = deviatoric_size(dim);
    const int m = static_cast<int>(normals.size());
    if (m < d + 1)
        throw std::invalid_argument("polyhedral yield: at least d+1 facets are needed for a bounded set");

    YieldSurface k;
    k.kind_ = Kind::Polyhedral;
    k.dim_ = dim;
    k.normal_coords_.resize(m, d);
    for (int j = 0; j < m; ++j) {
        if (normals[j].dim() != dim)
            throw std::invalid_argument("polyhedral yield: normal has wrong dimension");
        const double len = norm(normals[j]);
        if (!(len > 0.0))
            throw std::invalid_argument("polyhedral yield: zero normal");
        if (!(offsets[j] > 0.0))
            throw std::invalid_argument("polyhedral yield: offsets must be positive (0 must be interior)");
        k.normals_.push_back(normals[j] / len);
        k.offsets_.push_back(offsets[j] / len);
        k.normal_coords_.row(j) = to_coordinates(k.normals_.back()).transpose();
    }
    const Eigen::Map<const Eigen::VectorXd> c(k.offsets_.data(), m);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(k.normal_coords_);
    if (lu.rank() < d)
        throw std::invalid_argument("polyhedral yield: set is unbounded (facet normals do not span)");

    // Recession cone {z : N z <= 0} must be {0}; since N has full rank the cone
    // is pointed, so it suffices to test its candidate extreme rays.
    bool unbounded = false;
    for_each_subset(m, d - 1, [&](const std::vector<int>& s) {
        if (unbounded)
            return;
        const Eigen::MatrixXd A = rows_of(k.normal_coords_, s);
        Eigen::FullPivLU<Eigen::MatrixXd> sub(A);
        if (sub.rank() != d - 1)
            return;
        Eigen::VectorXd ray = sub.kernel().col(0);
        ray.normalize();
        for (double sign : {1.0, -1.0}) {
            if ((sign * (k.normal_coords_ * ray)).maxCoeff() <= kGeomTol)
                unbounded = true;
        }
    });
    if (unbounded)
        throw std::invalid_argument("polyhedral yield: set is unbounded");

    for_each_subset(m, d, [&](const std::vector<int>& s) {
        const Eigen::MatrixXd A = rows_of(k.normal_coords_, s);
        Eigen::FullPivLU<Eigen::MatrixXd> sub(A);
        if (sub.rank() != d)
            return;
        Eigen::VectorXd rhs(d);
        for (int i = 0; i < d; ++i)
            rhs[i] = c[s[i]];
        const Eigen::VectorXd v = sub.solve(rhs);
        if (((k.normal_coords_ * v) - c).maxCoeff() > kGeomTol * (1.0 + v.norm()))
            return;
        for (const auto& w : k.vertices_)
            if ((to_coordinates(w) - v).norm() <= 1e-9 * (1.0 + v.norm()))
                return;
        k.vertices_.push_back(from_coordinates(dim, v));
    });

    k.vertex_coords_.resize(static_cast<Eigen::Index>(k.vertices_.size()), d);
    k.r_outer_ = 0.0;
    for (std::size_t i = 0; i < k.vertices_.size(); ++i) {
        k.vertex_coords_.row(i) = to_coordinates(k.vertices_[i]).transpose();
        k.r_outer_ = std::max(k.r_outer_, norm(k.vertices_[i]));
    }
    k.r_inner_ = *std::min_element(k.offsets_.begin(), k.offsets_.end());
    return k;
}

double YieldSurface::constraint_violation(const Dev& xi) const
{
    if (kind_ == Kind::VonMises)
        return norm(xi) - r_inner_;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < normals_.size(); ++j)
        worst = std::max(worst, ddot(normals_[j], xi) - offsets_[j]);
    return worst;
}

Eigen::VectorXd YieldSurface::coordinate_extent() const
{
    const int d = deviatoric_size(dim_);
    if (kind_ == Kind::VonMises)
        return Eigen::VectorXd::Constant(2 * d, r_inner_);
    Eigen::VectorXd ext(2 * d);
    for (int i = 0; i < d; ++i) {
        ext[2 * i] = vertex_coords_.col(i).maxCoeff();
        ext[2 * i + 1] = (-vertex_coords_.col(i)).maxCoeff();
    }
    return ext;
}

ElasticModuli::ElasticModuli(double shear, double compression) : mu(shear), kappa(compression)
{
    if (!(mu > 0.0) || !(kappa > 0.0) || !std::isfinite(mu) || !std::isfinite(kappa))
        throw std::invalid_argument("elastic moduli must be positive and finite");
}

double ElasticModuli::alpha_C(int dim) const { return std::min(2.0 * mu, dim * kappa) / 2.0; }
double ElasticModuli::beta_C(int dim) const { return std::max(2.0 * mu, dim * kappa) / 2.0; }

double support_H(const YieldSurface& yield, const Dev& xi)
{
    if (yield.kind() == YieldSurface::Kind::VonMises)
        return yield.radius() * norm(xi);
    double best = 0.0; // 0 is in K
    for (const auto& v : yield.vertices())
        best = std::max(best, ddot(xi, v));
    return best;
}

Dev project_K(const YieldSurface& yield, const Dev& xi, int max_iterations)
{
    if (yield.kind() == YieldSurface::Kind::VonMises) {
        const double n = norm(xi);
        if (n <= yield.radius())
            return xi;
        return xi * (yield.radius() / n);
    }
    const int d = deviatoric_size(yield.dim());
    Eigen::MatrixXd N(yield.normals().size(), d);
    for (std::size_t j = 0; j < yield.normals().size(); ++j)
        N.row(j) = to_coordinates(yield.normals()[j]).transpose();
    const Eigen::Map<const Eigen::VectorXd> c(yield.offsets().data(), static_cast<Eigen::Index>(yield.offsets().size()));
    return from_coordinates(yield.dim(), project_polytope(N, c, to_coordinates(xi), max_iterations));
}

double distance_to_K(const YieldSurface& yield, const Dev& xi)
{
    if (yield.kind() == YieldSurface::Kind::VonMises)
        return std::max(0.0, norm(xi) - yield.radius());
    return norm(xi - project_K(yield, xi));
}

bool in_normal_cone(const YieldSurface& yield, const Dev& sigma_D, const Dev& q, double tol)
{
    const double qn = norm(q);
    if (qn == 0.0)
        return true;
    if (!yield.contains(sigma_D, tol))
        return false;
    return support_H(yield, q) - ddot(q, sigma_D) <= tol * qn;
}

Dev min_norm_subgradient(const YieldSurface& yield, const Dev& q, double face_tol)
{
    const double qn = norm(q);
    if (qn == 0.0)
        return Dev::zero(yield.dim());
    if (yield.kind() == YieldSurface::Kind::VonMises)
        return q * (yield.radius() / qn);

    const double h = support_H(yield, q);
    std::vector<int> face;
    for (std::size_t i = 0; i < yield.vertices().size(); ++i)
        if (ddot(q, yield.vertices()[i]) >= h - face_tol * qn * (1.0 + yield.outer_radius()))
            face.push_back(static_cast<int>(i));
    const int d = deviatoric_size(yield.dim());
    Eigen::MatrixXd P(face.size(), d);
    for (std::size_t i = 0; i < face.size(); ++i)
        P.row(i) = to_coordinates(yield.vertices()[face[i]]).transpose();
    return from_coordinates(yield.dim(), min_norm_point(P));
}

Sym stress(const ElasticModuli& moduli, const Sym& e)
{
    return 2.0 * moduli.mu * deviator(e).sym() + (moduli.kappa * trace(e)) * Sym::identity(e.dim());
}

double quad_Q(const ElasticModuli& moduli, const Sym& e)
{
    const double tr = trace(e);
    return moduli.mu * squared_norm(deviator(e)) + 0.5 * moduli.kappa * tr * tr;
}

PointUpdate incremental_update(const Material& material, const Sym& eps_total, const Dev& p_prev, int max_iterations)
{
    if (!eps_total.is_finite())
        throw std::invalid_argument("incremental_update: total strain is not finite");
    if (eps_total.dim() != p_prev.dim() || eps_total.dim() != material.yield.dim())
        throw std::invalid_argument("incremental_update: dimension mismatch");
    const double two_mu = 2.0 * material.moduli.mu;
    const Dev trial = two_mu * (deviator(eps_total) - p_prev);

    PointUpdate out;
    out.p = p_prev;
    if (material.yield.kind() == YieldSurface::Kind::VonMises) {
        const double s = norm(trial);
        const double r = material.yield.radius();
        if (s > r) {
            out.p = p_prev + ((s - r) / two_mu) * (trial / s);
            out.plastic = true;
        }
    } else if (!material.yield.contains(trial, 0.0)) {
        const Dev sigma_D = project_K(material.yield, trial, max_iterations);
        out.p = p_prev + (trial - sigma_D) / two_mu;
        out.plastic = true;
    }
    out.e = eps_total - out.p.sym();
    out.sigma = stress(material.moduli, out.e);
    out.dissipation = out.plastic ? support_H(material.yield, out.p - p_prev) : 0.0;
    return out;
}

double pointwise_energy(const Material& material, const Sym& eps_total, const Dev& p, const Dev& p_prev)
{
    return quad_Q(material.moduli, eps_total - p.sym()) + support_H(material.yield, p - p_prev);
}

} // namespace prandtl
