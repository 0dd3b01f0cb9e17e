// P1 displacements, elementwise strains, load functionals and safe-load data.
#ifndef PRANDTL_FEM_HPP
#define PRANDTL_FEM_HPP

#include "prandtl/constitutive.hpp"
#include "prandtl/mesh.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

namespace prandtl {

/// Scalar function of time, piecewise linear between samples and constant beyond them.
class PiecewiseLinear {
public:
    PiecewiseLinear() : t_{0.0}, v_{1.0} {}
    PiecewiseLinear(std::vector<double> times, std::vector<double> values);
    static PiecewiseLinear constant(double value) { return PiecewiseLinear({0.0}, {value}); }

    double operator()(double t) const;
    /// One-sided derivative at t: the slope of the piece to the left (from_left) or right of t.
    double slope(double t, bool from_left) const;
    const std::vector<double>& times() const { return t_; }
    const std::vector<double>& values() const { return v_; }

private:
    std::vector<double> t_;
    std::vector<double> v_;
};

/// w(x, t) = amplitude(t) (A x + b), defined on the whole body.
struct DisplacementLoad {
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
    PiecewiseLinear amplitude;
};

/// Uniform body force on the non-collar elements.
struct BodyForce {
    Eigen::Vector2d f = Eigen::Vector2d::Zero();
    PiecewiseLinear amplitude;
};

/// Uniform traction on the gamma1 edges carrying `tag`.
struct EdgeTraction {
    int tag = 0;
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    PiecewiseLinear amplitude;
};

/// Uniform safe-load stress contribution amplitude(t) * stress.
struct SafeLoadStress {
    Sym stress = Sym::zero(2);
    PiecewiseLinear amplitude;
};

enum class DirichletMode { Hard, Collar };

/// Immutable problem data. In Hard mode the displacement equals w on gamma0
/// nodes; in Collar mode it equals w on collar_outer nodes and the gamma0
/// interface is free, so boundary slip shows up as collar plastic strain.
struct Scenario {
    std::string name = "scenario";
    Mesh mesh;
    std::vector<Material> materials; // indexed by region id
    DirichletMode mode = DirichletMode::Hard;
    std::vector<DisplacementLoad> w;
    std::vector<BodyForce> f;
    std::vector<EdgeTraction> g;
    std::vector<SafeLoadStress> rho;
    double alpha = 0.0;
    double T = 1.0;
    double tol_eq = 1e-8; // relative to max(1, |F|)

    /// Throws std::invalid_argument on inconsistent data.
    void validate() const;
    const Material& material(int element) const { return materials[mesh.region()[element]]; }
    std::vector<int> dirichlet_nodes() const;
    /// Sorted amplitude breakpoints strictly inside (a, b).
    std::vector<double> breakpoints(double a, double b) const;
    /// max over materials of beta_C and min of alpha_C; max outer and min inner yield radius.
    double beta_C() const;
    double alpha_C() const;
    double outer_radius() const;
};

/// Displacement vectors are interleaved: u[2a] = x-component of node a, u[2a + 1] = y-component.
std::vector<Sym> strain(const Mesh& mesh, const Eigen::VectorXd& u);

/// Element-area-weighted pairing sum_el area (a : b).
template <typename A, typename B>
double pairing(const Mesh& mesh, const std::vector<A>& a, const std::vector<B>& b)
{
    double s = 0.0;
    for (int el = 0; el < mesh.num_elements(); ++el)
        s += mesh.area(el) * ddot(a[el], b[el]);
    return s;
}

template <typename A>
double l2_norm(const Mesh& mesh, const std::vector<A>& a)
{
    return std::sqrt(pairing(mesh, a, a));
}

template <typename A>
double l1_norm(const Mesh& mesh, const std::vector<A>& a)
{
    double s = 0.0;
    for (int el = 0; el < mesh.num_elements(); ++el)
        s += mesh.area(el) * norm(a[el]);
    return s;
}

/// Nodal vector F with F . v = sum_el area sigma : E v.
Eigen::VectorXd internal_force(const Mesh& mesh, const std::vector<Sym>& sigma);

/// w(t) interpolated at every node.
Eigen::VectorXd displacement_datum(const Scenario& s, double t);
Eigen::VectorXd displacement_rate(const Scenario& s, double t, bool from_left);

/// F(t) with F . u = sum area f . u(centroid) + sum length g . u(midpoint).
Eigen::VectorXd assemble_load(const Scenario& s, double t);
Eigen::VectorXd assemble_load_rate(const Scenario& s, double t, bool from_left);

std::vector<Sym> safe_load_field(const Scenario& s, double t);

/// 1 for constrained degrees of freedom, 0 for free ones.
std::vector<char> dirichlet_mask(const Scenario& s);

/// Euclidean norm of v restricted to the free degrees of freedom.
double free_norm(const std::vector<char>& mask, const Eigen::VectorXd& v);

struct SafeLoadReport {
    bool ok = true;
    double min_margin = 0.0;                // min over elements of dist(rho_D, complement of K) - alpha
    std::vector<int> margin_violations;     // elements with negative margin
    double equilibrium_residual = 0.0;      // |B^T rho - F| on free dofs
    double equilibrium_tolerance = 0.0;
    double worst_coercivity_gap = 0.0;      // min over samples of H(p) - <rho_D|p> - alpha |p|_1
    int samples = 0;
    std::string summary() const;
};

/// Verifies the margin, the discrete equilibrium of rho with (f, g), and
/// samples random plastic-strain fields for the coercivity inequality.
SafeLoadReport check_safe_load(const Scenario& s, double t, int samples = 50, unsigned seed = 1);

} // namespace prandtl

#endif // PRANDTL_FEM_HPP
