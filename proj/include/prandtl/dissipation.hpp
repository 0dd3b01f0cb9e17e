// Variation and H-variation of sampled plastic-strain paths.
//
// A path is read as the piecewise-constant function that takes the k-th
// sample value on [t_k, t_{k+1}), which is how the incremental scheme
// interpolates in time. Its variation on [a, b] is then the sum of the jumps
// at sample times in (a, b]. For a path that is not piecewise constant this
// is the value on the sample partition, a lower bound for the supremum over
// all partitions.
#ifndef PRANDTL_DISSIPATION_HPP
#define PRANDTL_DISSIPATION_HPP

#include "prandtl/constitutive.hpp"

#include <functional>
#include <vector>

namespace prandtl {

struct SampledPath {
    std::vector<double> times;
    /// values[k][j]: component j (element or single point) at sample k.
    std::vector<std::vector<Dev>> values;
    /// Integration weight per component (element area; 1 for a point path).
    std::vector<double> weights;

    static SampledPath single_point(std::vector<double> times, const std::vector<Dev>& values);

    std::size_t samples() const { return times.size(); }
    std::size_t components() const { return weights.size(); }
    void validate() const;
};

/// Sum over jumps at sample times in (a, b] of sum_j w_j |f_k^j - f_{k-1}^j|.
double total_variation(const SampledPath& path, double a, double b);

/// Sum over jumps in (a, b] of sum_j w_j H(f_k^j - f_{k-1}^j).
double H_variation(const SampledPath& path, const YieldSurface& yield, double a, double b);
/// Per-component yield sets (heterogeneous material).
double H_variation(const SampledPath& path, const std::vector<const YieldSurface*>& yields, double a, double b);

/// |H_variation(path; t_0, t_N) - sum_k H(fdot(m_k)) (t_{k+1} - t_k)| where m_k are the
/// interval midpoints and `derivative` returns the exact time derivative per component.
double check_derivative_formula(const SampledPath& path, const YieldSurface& yield,
                                const std::function<std::vector<Dev>(double)>& derivative);

} // namespace prandtl

#endif // PRANDTL_DISSIPATION_HPP
