#include "prandtl/dissipation.hpp"

#include <cmath>
#include <stdexcept>

namespace prandtl {

namespace {

void check_interval(const SampledPath& path, double a, double b)
{
    path.validate();
    const double span = path.times.back() - path.times.front();
    const double eps = 1e-12 * (1.0 + std::abs(span));
    if (!(a <= b) || a < path.times.front() - eps || b > path.times.back() + eps)
        throw std::out_of_range("variation interval outside the sampled time range");
}

template <typename Density>
double jump_sum(const SampledPath& path, double a, double b, Density density)
{
    check_interval(path, a, b);
    double total = 0.0;
    for (std::size_t k = 1; k < path.samples(); ++k) {
        if (!(path.times[k] > a && path.times[k] <= b))
            continue;
        for (std::size_t j = 0; j < path.components(); ++j)
            total += path.weights[j] * density(j, path.values[k][j] - path.values[k - 1][j]);
    }
    return total;
}

} // namespace

SampledPath SampledPath::single_point(std::vector<double> times, const std::vector<Dev>& values)
{
    SampledPath path;
    path.times = std::move(times);
    for (const auto& v : values)
        path.values.push_back({v});
    path.weights = {1.0};
    path.validate();
    return path;
}

void SampledPath::validate() const
{
    if (times.empty() || times.size() != values.size())
        throw std::invalid_argument("sampled path: times and values differ in length");
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (values[k].size() != weights.size())
            throw std::invalid_argument("sampled path: inconsistent number of components");
        if (k > 0 && !(times[k] > times[k - 1]))
            throw std::invalid_argument("sampled path: times must be strictly increasing");
    }
}

double total_variation(const SampledPath& path, double a, double b)
{
    return jump_sum(path, a, b, [](std::size_t, const Dev& d) { return norm(d); });
}

double H_variation(const SampledPath& path, const YieldSurface& yield, double a, double b)
{
    return jump_sum(path, a, b, [&](std::size_t, const Dev& d) { return support_H(yield, d); });
}

double H_variation(const SampledPath& path, const std::vector<const YieldSurface*>& yields, double a, double b)
{
    if (yields.size() != path.components())
        throw std::invalid_argument("H_variation: one yield set per component required");
    return jump_sum(path, a, b, [&](std::size_t j, const Dev& d) { return support_H(*yields[j], d); });
}

double check_derivative_formula(const SampledPath& path, const YieldSurface& yield,
                                const std::function<std::vector<Dev>(double)>& derivative)
{
    path.validate();
    const double variation = H_variation(path, yield, path.times.front(), path.times.back());
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < path.samples(); ++k) {
        const double dt = path.times[k + 1] - path.times[k];
        const auto rate = derivative(0.5 * (path.times[k] + path.times[k + 1]));
        if (rate.size() != path.components())
            throw std::invalid_argument("derivative callback returned wrong number of components");
        for (std::size_t j = 0; j < path.components(); ++j)
            integral += path.weights[j] * support_H(yield, rate[j]) * dt;
    }
    return std::abs(variation - integral);
}

} // namespace prandtl
