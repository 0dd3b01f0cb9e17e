// One incremental minimization over the discrete admissible set.
#ifndef PRANDTL_SOLVER_HPP
#define PRANDTL_SOLVER_HPP

#include "prandtl/fem.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace prandtl {

/// The Dirichlet set leaves rigid motions unconstrained.
class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The scenario fails the safe-load check and the caller did not force the solve.
class SafeLoadViolation : public std::runtime_error {
public:
    SafeLoadViolation(const std::string& what, SafeLoadReport report)
        : std::runtime_error(what), report(std::move(report))
    {
    }
    SafeLoadReport report;
};

struct SolverConfig {
    double tol_energy = 1e-12; // relative energy decrease between outer iterations
    double tol_res = 1e-9;     // equilibrium residual, relative to max(1, |F|)
    int max_outer = 10000;
    double relaxation = 1.0;   // over-relaxation of the plastic update, in [1, 2)
    int threads = 1;
    bool force = false;        // solve even if the safe-load check fails

    void validate() const;
};

/// u: nodal displacements; p, e: elementwise plastic and elastic strains.
struct DiscreteTriple {
    Eigen::VectorXd u;
    std::vector<Dev> p;
    std::vector<Sym> e;

    static DiscreteTriple zero(const Mesh& mesh);
};

struct StepReport {
    int iterations = 0;
    bool converged = true;
    double energy = 0.0;                // Q(e) + H(p - p_prev) - <L|u>
    double equilibrium_residual = 0.0;  // |B^T sigma - F| on free dofs / max(1, |F|)
    double traction_residual = 0.0;     // same, restricted to free dofs of gamma1 nodes
    double admissibility_margin = 0.0;  // max over elements of dist(sigma_D, K)
    double flow_residual = 0.0;         // max over elements of |H(dp) - sigma_D : dp|
    double plastic_residual = 0.0;      // max over elements of |p - argmin_p given u|
    double dirichlet_residual = 0.0;    // max |u - w| at Dirichlet nodes
    double compatibility_residual = 0.0;
};

/// Elastic stresses sigma = C e per element.
std::vector<Sym> stresses(const Scenario& s, const std::vector<Sym>& e);

/// Incremental energy Q(e) + H(p - p_prev) - F(t) . u.
double incremental_energy(const Scenario& s, double t, const DiscreteTriple& x, const std::vector<Dev>& p_prev);

/// Residuals of the Euler conditions at time t. With p_prev the flow-rule and
/// plastic-optimality residuals refer to dp = p - p_prev; otherwise they are zero.
StepReport euler_residuals(const Scenario& s, double t, const DiscreteTriple& x,
                           const std::vector<Dev>* p_prev = nullptr);

struct IncrementResult {
    DiscreteTriple triple;
    std::vector<Sym> sigma;
    StepReport report;
    std::vector<double> energy_history; // energy after each outer iteration
};

/// Alternating minimization: an exact elastic solve in u at fixed p, then the
/// closed-form elementwise update of p at fixed u, until the relative energy
/// decrease and the equilibrium residual are below tolerance. The stiffness
/// restricted to the free dofs is factorized once per solver.
class IncrementSolver {
public:
    IncrementSolver(const Scenario& scenario, SolverConfig cfg);

    const Scenario& scenario() const { return s_; }
    const SolverConfig& config() const { return cfg_; }

    /// Refuses with SafeLoadViolation if check_safe_load(t) fails and cfg.force is false.
    /// On hitting max_outer the best iterate is returned with report.converged = false.
    IncrementResult solve(double t, const std::vector<Dev>& p_prev,
                          const std::optional<std::vector<Dev>>& warm_start = std::nullopt) const;

    /// Exact minimizer in u of Q(Eu - p) - F . u with u = w(t) on Dirichlet nodes.
    Eigen::VectorXd solve_displacement(double t, const std::vector<Dev>& p) const;

private:
    void plastic_step(const std::vector<Sym>& eps, const std::vector<Dev>& p_prev, std::vector<Dev>& p,
                      std::vector<double>& dissipation) const;

    const Scenario& s_;
    SolverConfig cfg_;
    std::vector<char> mask_;
    std::vector<int> free_index_; // dof -> free index or -1
    std::vector<int> free_dofs_;
    Eigen::SparseMatrix<double> K_fd_;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

} // namespace prandtl

#endif // PRANDTL_SOLVER_HPP
