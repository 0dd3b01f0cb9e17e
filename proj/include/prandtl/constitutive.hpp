// Yield sets, elastic moduli and the pointwise incremental minimization.
#ifndef PRANDTL_CONSTITUTIVE_HPP
#define PRANDTL_CONSTITUTIVE_HPP

#include "prandtl/tensor.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace prandtl {

/// Raised when an iterative solve hits its iteration cap.
class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Closed convex set K of admissible deviatoric stresses, with 0 in its interior.
///
/// Two kinds are supported: the von Mises ball {|xi| <= r} and bounded
/// polytopes {xi : n_j : xi <= c_j} given by unit deviatoric normals n_j and
/// offsets c_j > 0. For a polytope the vertices are enumerated once at
/// construction; the support function is then a maximum over vertices.
class YieldSurface {
public:
    enum class Kind { VonMises, Polyhedral };

    static YieldSurface von_mises(int dim, double radius);

    /// Normals need not be normalized on input; they are scaled to unit length
    /// (and the offsets with them). Throws if the set is unbounded or an offset is not positive.
    static YieldSurface polyhedral(int dim, const std::vector<Dev>& normals, const std::vector<double>& offsets);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    /// Largest ball centred at 0 contained in K.
    double inner_radius() const { return r_inner_; }
    /// Smallest ball centred at 0 containing K.
    double outer_radius() const { return r_outer_; }
    double radius() const { return r_inner_; }

    const std::vector<Dev>& normals() const { return normals_; }
    const std::vector<double>& offsets() const { return offsets_; }
    const std::vector<Dev>& vertices() const { return vertices_; }

    /// max over facets of (n_j : xi - c_j), or |xi| - r for the ball; <= 0 iff xi in K.
    double constraint_violation(const Dev& xi) const;
    bool contains(const Dev& xi, double tol = 1e-10) const { return constraint_violation(xi) <= tol; }

    /// Coordinate-direction extent of K, i.e. max of +-xi_k over K in the deviatoric basis.
    Eigen::VectorXd coordinate_extent() const;

private:
    YieldSurface() = default;

    Kind kind_ = Kind::VonMises;
    int dim_ = 2;
    double r_inner_ = 0.0;
    double r_outer_ = 0.0;
    std::vector<Dev> normals_;
    std::vector<double> offsets_;
    std::vector<Dev> vertices_;
    Eigen::MatrixXd normal_coords_; // m x d, rows are facet normals in basis coordinates
    Eigen::MatrixXd vertex_coords_; // v x d
};

/// Isotropic elasticity: C xi = 2 mu xi_D + kappa (tr xi) I.
struct ElasticModuli {
    double mu = 1.0;
    double kappa = 1.0;

    ElasticModuli() = default;
    ElasticModuli(double shear, double compression);

    /// Ellipticity constants of Q for dimension `dim`: alpha |xi|^2 <= Q(xi) <= beta |xi|^2.
    double alpha_C(int dim) const;
    double beta_C(int dim) const;
};

struct Material {
    ElasticModuli moduli;
    YieldSurface yield;
};

/// Support function H(xi) = sup over zeta in K of xi : zeta.
double support_H(const YieldSurface& yield, const Dev& xi);

/// Nearest point of K to xi (Frobenius distance).
Dev project_K(const YieldSurface& yield, const Dev& xi, int max_iterations = 10000);

/// Distance from xi to K.
double distance_to_K(const YieldSurface& yield, const Dev& xi);

/// True iff sigma_D is in K (to tol) and q lies in the normal cone N_K(sigma_D) (to tol |q|).
/// q = 0 is accepted trivially.
bool in_normal_cone(const YieldSurface& yield, const Dev& sigma_D, const Dev& q, double tol);

/// Minimum-norm element of the subdifferential of H at q (the exposed face of K in direction q).
Dev min_norm_subgradient(const YieldSurface& yield, const Dev& q, double face_tol = 1e-10);

Sym stress(const ElasticModuli& moduli, const Sym& e);

/// Q(e) = (1/2) C e : e = mu |e_D|^2 + (kappa / 2) (tr e)^2.
double quad_Q(const ElasticModuli& moduli, const Sym& e);

struct PointUpdate {
    Dev p;
    Sym e;
    Sym sigma;
    double dissipation = 0.0;
    bool plastic = false;
};

/// Minimizes Q(eps_total - p) + H(p - p_prev) over trace-free p.
///
/// With isotropic elasticity the minimizer is p = p_prev + (s - P_K(s)) / (2 mu)
/// where s = 2 mu (eps_D - p_prev) is the trial deviatoric stress and P_K the
/// closest-point projection; for the ball this is the classical radial return.
PointUpdate incremental_update(const Material& material, const Sym& eps_total, const Dev& p_prev,
                               int max_iterations = 10000);

/// Pointwise incremental energy Q(eps - p) + H(p - p_prev).
double pointwise_energy(const Material& material, const Sym& eps_total, const Dev& p, const Dev& p_prev);

} // namespace prandtl

#endif // PRANDTL_CONSTITUTIVE_HPP
