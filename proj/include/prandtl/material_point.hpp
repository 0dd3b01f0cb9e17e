// Strain-driven evolution of a single material point.
#ifndef PRANDTL_MATERIAL_POINT_HPP
#define PRANDTL_MATERIAL_POINT_HPP

#include "prandtl/constitutive.hpp"

#include <vector>

namespace prandtl {

/// Total strain sampled at increasing times, piecewise linear in between.
struct StrainHistory {
    std::vector<double> times;
    std::vector<Sym> strains;

    int dim() const { return strains.empty() ? 0 : strains.front().dim(); }
    /// Throws std::invalid_argument if empty, non-increasing or of mixed dimension.
    void validate() const;
};

/// Per-sample state and energy ledger of a point run.
struct PointRecord {
    std::vector<double> t;
    std::vector<Dev> p;
    std::vector<Sym> e;
    std::vector<Sym> sigma;
    std::vector<double> Q; // stored energy
    std::vector<double> D; // cumulative dissipation
    std::vector<double> W; // external work, trapezoidal in sigma : d eps
    std::size_t size() const { return t.size(); }
};

/// Applies the incremental minimization at every sample of `history`,
/// starting from plastic strain `p_initial` (zero if omitted).
PointRecord run_point(const Material& material, const StrainHistory& history);
PointRecord run_point(const Material& material, const StrainHistory& history, const Dev& p_initial);

/// residual_i = Q_i + D_i - Q_0 - W_i.
std::vector<double> energy_residual(const PointRecord& record);

} // namespace prandtl

#endif // PRANDTL_MATERIAL_POINT_HPP
