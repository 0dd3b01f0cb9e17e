// Post-hoc audits of a finished evolution: flow rule, variational inequality,
// normality, averaged stresses, continuous dependence and power balance.
//
// Rates are represented by increments: every identity that is 1-homogeneous in
// the plastic strain rate is checked with dp = p_i - p_{i-1} in its place.
#ifndef PRANDTL_VERIFICATION_HPP
#define PRANDTL_VERIFICATION_HPP

#include "prandtl/evolution.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace prandtl {

struct CheckRow {
    int step = 0;
    int element = -1; // worst element of the step, -1 for global quantities
    double value = 0.0;
    bool pass = true;
};

struct CheckReport {
    std::string name;
    double tolerance = 0.0;
    std::vector<CheckRow> rows; // one per step
    bool pass() const;
    /// Row with the largest |value| (for one-sided checks, the most violating one).
    CheckRow worst() const;
};

/// Elements with |dp| above this fraction of the largest |dp| of the step count as flowing.
inline constexpr double flowing_threshold = 1e-9;

/// gap = (H(dp) - sigma_D : dp) / (|dp| S) per element, S the largest outer yield radius;
/// passes when -tol <= gap <= tol.
CheckReport check_flow_rule(const EvolutionRecord& record, const Scenario& s, double tol = 1e-10);

/// min over tau of <sigma_D - tau_D | dp> with tau = rho(t_i) and n_samples random
/// convex combinations theta rho + (1 - theta) sigma, theta in (0, 1]; passes when >= -tol.
CheckReport check_variational_inequality(const EvolutionRecord& record, const Scenario& s, int n_samples = 20,
                                         double tol = 1e-9, unsigned seed = 7);

/// Angle between sigma_D and dp on flowing elements (radians), plus membership
/// of dp in the normal cone of K at sigma_D for polyhedral sets.
CheckReport check_normality(const EvolutionRecord& record, const Scenario& s, double tol = 1e-6);

/// Distance of sigma_D from the boundary of K, measured by |constraint_violation|, on flowing elements.
CheckReport check_yield_residence(const EvolutionRecord& record, const Scenario& s, double tol = 1e-9);

/// Per step: <sigma_i|de_i> + H(dp_i) - <sigma_i|dEw_i> + <L_i|dw_i> - <L_i|du_i>,
/// which vanishes for an exact minimizer; passes when |value| <= tol.
CheckReport check_power_balance(const EvolutionRecord& record, const Scenario& s, double tol = 1e-8);

/// Area-weighted average of sigma_D over the elements whose centroids lie within
/// `radius` of each element centroid (always including the element itself).
std::vector<Dev> averaged_stress(const EvolutionRecord& record, const Scenario& s, int step, double radius);

struct PreciseStressDiscrepancy {
    double max = 0.0;
    double mean = 0.0; // area-weighted over flowing elements
    int flowing = 0;
    bool skipped = false; // some flowing element has a polyhedral yield set
};

/// |sigma^r_D - dH(dp / |dp|)| over flowing elements; only defined for von Mises,
/// where the subdifferential at a nonzero direction is the single point r dp / |dp|.
PreciseStressDiscrepancy precise_stress_discrepancy(const EvolutionRecord& record, const Scenario& s, int step,
                                                    double radius);

/// Minimum-norm element of dH(dp / |dp|) on every flowing element of the step (nullopt elsewhere).
std::vector<std::optional<Dev>> precise_stress_candidates(const EvolutionRecord& record, const Scenario& s, int step);

struct ContinuousDependenceReport {
    double delta = 0.0;
    double elastic_gap = 0.0;   // |e2 - e1|_L2
    double datum_gap = 0.0;     // |Ew2 - Ew1|_L2
    double plastic_gap = 0.0;   // |p2 - p1|_L1
    double constant = 0.0;      // C = max(beta_C / alpha_C, sqrt(R_K / alpha_C))
    double bound = 0.0;         // C (datum_gap + plastic_gap + sqrt(plastic_gap))
    bool holds() const { return elastic_gap <= bound * (1 + 1e-12) + 1e-14; }
};

/// Solves the increment at time t from p = 0 for the data and for the data with
/// w scaled by (1 + delta), and compares the two elastic strains.
ContinuousDependenceReport check_continuous_dependence(const Scenario& s, double delta, double t,
                                                       const SolverConfig& cfg);

struct UniquenessProbe {
    double sigma_gap = 0.0; // max over common times of |sigma_a - sigma_b|_L2
    double plastic_gap = 0.0; // max over common times of |p_a - p_b|_L1
    /// Equal stresses with different plastic strains: several minimizers were found.
    bool nonunique(double sigma_tol = 1e-6, double p_tol = 1e-6) const
    {
        return sigma_gap <= sigma_tol && plastic_gap > p_tol;
    }
};

/// Compares two records on the same grid.
UniquenessProbe compare_records(const Mesh& mesh, const EvolutionRecord& a, const EvolutionRecord& b);

/// Standard battery used by the command-line front end.
std::vector<CheckReport> run_checks(const EvolutionRecord& record, const Scenario& s);

/// CSV with header check,step,element,value,tolerance,pass.
void write_verify_csv(std::ostream& out, const std::vector<CheckReport>& reports);

} // namespace prandtl

#endif // PRANDTL_VERIFICATION_HPP
