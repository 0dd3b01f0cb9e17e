// Time marching of the incremental scheme, energy ledger and refinement studies.
#ifndef PRANDTL_EVOLUTION_HPP
#define PRANDTL_EVOLUTION_HPP

#include "prandtl/solver.hpp"

#include <vector>

namespace prandtl {

struct TimeGrid {
    std::vector<double> t; // 0 = t_0 < t_1 < ... < t_k

    static TimeGrid uniform(double T, int steps);
    int steps() const { return static_cast<int>(t.size()) - 1; }
    double max_step() const;
    /// Throws std::invalid_argument unless t_0 = 0 and the times strictly increase.
    void validate() const;
};

/// Per grid point i. Work terms are cumulative integrals over [0, t_i]:
/// `*_endpoint` are the left-endpoint sums of the discrete energy estimate
/// (sigma_{j-1} : (Ew_j - Ew_{j-1}), L_{j-1} . (w_j - w_{j-1}), (L_j - L_{j-1}) . u_{j-1}),
/// `*_trapezoid` are trapezoidal sums using the one-sided exact data rates.
struct EnergyLedger {
    std::vector<double> Q;
    std::vector<double> D;
    std::vector<double> load_work; // <L(t_i)|u_i>
    std::vector<double> sigma_Ewdot_endpoint, L_wdot_endpoint, Ldot_u_endpoint;
    std::vector<double> sigma_Ewdot_trapezoid, L_wdot_trapezoid, Ldot_u_trapezoid;
    double omega_k = 0.0;
    double delta_k = 0.0;
};

struct EvolutionRecord {
    TimeGrid grid;
    std::vector<DiscreteTriple> triples;
    std::vector<std::vector<Sym>> sigma;
    std::vector<StepReport> reports;
    EnergyLedger ledger;
};

/// A step of run_evolution did not converge.
class EvolutionNonConvergence : public NonConvergence {
public:
    EvolutionNonConvergence(int step, StepReport report);
    int step;
    StepReport report;
};

enum class WarmStart { Previous, Zero };

struct EvolutionOptions {
    WarmStart warm_start = WarmStart::Previous;
    bool force = false; // accept an initial triple that fails the stability check
};

/// Solves the t = 0 increment from p = 0.
DiscreteTriple initial_triple(const Scenario& s, const SolverConfig& cfg);

EvolutionRecord run_evolution(const Scenario& s, const TimeGrid& grid, const DiscreteTriple& initial,
                              const SolverConfig& cfg, const EvolutionOptions& options = {});

/// Rebuilds stresses and the ledger from stored triples (reports are left empty).
EvolutionRecord assemble_record(const Scenario& s, const TimeGrid& grid, std::vector<DiscreteTriple> triples);

struct AuditReport {
    std::vector<double> lhs_minus_rhs; // per grid point, without the remainder
    double delta_k = 0.0;
    double max_violation = 0.0; // max_i (lhs - rhs - delta_k)
};

/// Discrete energy inequality with the safe-load field rho:
/// Q(e_i) - <rho_i|e_i - Ew_i> + sum_{r<=i} [H(dp_r) - <rho_D(t_r)|dp_r>]
///   <= Q(e_0) - <rho_0|e_0 - Ew_0> - sum_{j<=i} <rho_j - rho_{j-1}|e_{j-1} - Ew_{j-1}>
///      + sum_{j<=i} <sigma_{j-1}|Ew_j - Ew_{j-1}> + delta_k.
AuditReport discrete_energy_audit(const EvolutionRecord& record, const Scenario& s);

enum class Quadrature { Trapezoid, Endpoint };

/// [Q_i + D_i - <L_i|u_i>] - [Q_0 - <L_0|u_0>] - int_0^{t_i} (<sigma|Ew'> - <L|w'> - <L'|u>).
std::vector<double> energy_balance_residual(const EvolutionRecord& record, Quadrature q = Quadrature::Trapezoid);

struct StudyRow {
    int steps = 0;
    double max_step = 0.0;
    double sigma_cauchy = 0.0;      // max over probe times of |sigma_k - sigma_2k|_L2 (to the next grid)
    double dissipation_gap = 0.0;   // |D_k(T) - D_2k(T)|
    double dissipation = 0.0;       // D_k(T)
    double energy_residual = 0.0;   // max |trapezoidal balance residual|
    double delta_k = 0.0;
    int total_iterations = 0;
};

struct StudyReport {
    std::vector<StudyRow> rows;       // one per grid; the Cauchy columns of the last row are zero
    std::vector<double> probe_times;  // the coarsest grid's points
    std::vector<EvolutionRecord> records;
    /// True iff sigma_cauchy strictly decreases over consecutive pairs. A pair whose
    /// first norm is already at or below `floor` counts as converged (grid-independent runs).
    bool cauchy_decreasing(double floor = 1e-12) const;
};

/// Runs uniform grids with the given step counts; each count must divide the next.
StudyReport convergence_study(const Scenario& s, const std::vector<int>& steps, const SolverConfig& cfg);

/// max over probe times of |sigma_a(t) - sigma_b(t)|_L2; both grids must contain the probe times.
double sigma_gap(const Mesh& mesh, const EvolutionRecord& a, const EvolutionRecord& b,
                 const std::vector<double>& probe_times);

/// Right-hand sides of the a-priori estimates evaluated from the data of a record.
struct AprioriBounds {
    double sup_elastic = 0.0;     // max_i |e_i|_L2
    double elastic_bound = 0.0;
    double plastic_variation = 0.0; // sum_i |p_i - p_{i-1}|_L1
    double plastic_bound = 0.0;
    bool holds() const { return sup_elastic <= elastic_bound && plastic_variation <= plastic_bound; }
};

AprioriBounds a_priori_bounds(const EvolutionRecord& record, const Scenario& s);

/// max_i |e_i - e_{i-1}|_L2 / (t_i - t_{i-1}).
double strain_rate_bound(const EvolutionRecord& record, const Mesh& mesh);

} // namespace prandtl

#endif // PRANDTL_EVOLUTION_HPP
