#include "prandtl/material_point.hpp"

#include <cmath>
#include <stdexcept>

namespace prandtl {

void StrainHistory::validate() const
{
    if (times.empty() || times.size() != strains.size())
        throw std::invalid_argument("strain history is empty or times/strains differ in length");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !strains[i].is_finite())
            throw std::invalid_argument("strain history contains non-finite values");
        if (strains[i].dim() != strains.front().dim())
            throw std::invalid_argument("strain history mixes dimensions");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw std::invalid_argument("strain history times must be strictly increasing");
    }
}

PointRecord run_point(const Material& material, const StrainHistory& history)
{
    history.validate();
    return run_point(material, history, Dev::zero(history.dim()));
}

PointRecord run_point(const Material& material, const StrainHistory& history, const Dev& p_initial)
{
    history.validate();
    const std::size_t n = history.times.size();
    PointRecord rec;
    rec.t = history.times;
    rec.p.reserve(n);
    rec.e.reserve(n);
    rec.sigma.reserve(n);

    Dev p_prev = p_initial;
    for (std::size_t i = 0; i < n; ++i) {
        const PointUpdate up = incremental_update(material, history.strains[i], p_prev);
        rec.p.push_back(up.p);
        rec.e.push_back(up.e);
        rec.sigma.push_back(up.sigma);
        rec.Q.push_back(quad_Q(material.moduli, up.e));
        if (i == 0) {
            rec.D.push_back(0.0);
            rec.W.push_back(0.0);
        } else {
            rec.D.push_back(rec.D.back() + up.dissipation);
            const Sym deps = history.strains[i] - history.strains[i - 1];
            rec.W.push_back(rec.W.back() + 0.5 * ddot(rec.sigma[i - 1] + rec.sigma[i], deps));
        }
        p_prev = up.p;
    }
    return rec;
}

std::vector<double> energy_residual(const PointRecord& record)
{
    std::vector<double> r(record.size());
    for (std::size_t i = 0; i < record.size(); ++i)
        r[i] = record.Q[i] + record.D[i] - record.Q[0] - record.W[i];
    return r;
}

} // namespace prandtl
