#include "prandtl/fem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>

namespace prandtl {

PiecewiseLinear::PiecewiseLinear(std::vector<double> times, std::vector<double> values)
    : t_(std::move(times)), v_(std::move(values))
{
    if (t_.empty() || t_.size() != v_.size())
        throw std::invalid_argument("amplitude: times and values must be nonempty and of equal length");
    for (std::size_t k = 0; k < t_.size(); ++k) {
        if (!std::isfinite(t_[k]) || !std::isfinite(v_[k]))
            throw std::invalid_argument("amplitude: non-finite sample");
        if (k > 0 && !(t_[k] > t_[k - 1]))
            throw std::invalid_argument("amplitude: times must be strictly increasing");
    }
}

double PiecewiseLinear::operator()(double t) const
{
    if (t <= t_.front())
        return v_.front();
    if (t >= t_.back())
        return v_.back();
    const auto j = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin());
    const double s = (t - t_[j - 1]) / (t_[j] - t_[j - 1]);
    return (1.0 - s) * v_[j - 1] + s * v_[j];
}

double PiecewiseLinear::slope(double t, bool from_left) const
{
    if (t_.size() < 2)
        return 0.0;
    std::size_t j;
    if (from_left) {
        if (t <= t_.front() || t > t_.back())
            return 0.0;
        j = static_cast<std::size_t>(std::lower_bound(t_.begin(), t_.end(), t) - t_.begin());
    } else {
        if (t < t_.front() || t >= t_.back())
            return 0.0;
        j = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin());
    }
    return (v_[j] - v_[j - 1]) / (t_[j] - t_[j - 1]);
}

void Scenario::validate() const
{
    if (materials.empty())
        throw std::invalid_argument("scenario '" + name + "': no materials");
    for (const auto& m : materials)
        if (m.yield.dim() != 2)
            throw std::invalid_argument("scenario '" + name + "': yield sets must be two-dimensional");
    for (int r : mesh.region())
        if (r >= static_cast<int>(materials.size()))
            throw std::invalid_argument("scenario '" + name + "': region " + std::to_string(r) + " has no material");
    if (!(alpha > 0.0))
        throw std::invalid_argument("scenario '" + name + "': safe-load margin alpha must be positive");
    if (!(T > 0.0))
        throw std::invalid_argument("scenario '" + name + "': final time must be positive");
    if (!(tol_eq > 0.0))
        throw std::invalid_argument("scenario '" + name + "': tol_eq must be positive");
    if (mode == DirichletMode::Hard && mesh.has_collar())
        throw std::invalid_argument("scenario '" + name + "': hard Dirichlet mode on a mesh with a collar");
    if (mode == DirichletMode::Collar && !mesh.has_collar())
        throw std::invalid_argument("scenario '" + name + "': collar mode needs a mesh with collar elements");
    if (dirichlet_nodes().empty())
        throw std::invalid_argument("scenario '" + name + "': no Dirichlet nodes");
    for (const auto& tr : g)
        if (tr.tag < 0)
            throw std::invalid_argument("scenario '" + name + "': traction tags must be non-negative");
    for (const auto& r : rho)
        if (r.stress.dim() != 2)
            throw std::invalid_argument("scenario '" + name + "': safe-load stress must be two-dimensional");
}

std::vector<int> Scenario::dirichlet_nodes() const
{
    return mesh.nodes_with_label(mode == DirichletMode::Hard ? EdgeLabel::Gamma0 : EdgeLabel::CollarOuter);
}

std::vector<double> Scenario::breakpoints(double a, double b) const
{
    std::vector<double> out;
    auto add = [&](const PiecewiseLinear& amp) {
        for (double t : amp.times())
            if (t > a && t < b)
                out.push_back(t);
    };
    for (const auto& x : w)
        add(x.amplitude);
    for (const auto& x : f)
        add(x.amplitude);
    for (const auto& x : g)
        add(x.amplitude);
    for (const auto& x : rho)
        add(x.amplitude);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double Scenario::beta_C() const
{
    double b = 0.0;
    for (const auto& m : materials)
        b = std::max(b, m.moduli.beta_C(2));
    return b;
}

double Scenario::alpha_C() const
{
    double a = INFINITY;
    for (const auto& m : materials)
        a = std::min(a, m.moduli.alpha_C(2));
    return a;
}

double Scenario::outer_radius() const
{
    double r = 0.0;
    for (const auto& m : materials)
        r = std::max(r, m.yield.outer_radius());
    return r;
}

std::vector<Sym> strain(const Mesh& mesh, const Eigen::VectorXd& u)
{
    if (u.size() != mesh.num_dofs())
        throw std::invalid_argument("strain: displacement vector has the wrong size");
    std::vector<Sym> e;
    e.reserve(mesh.num_elements());
    Sym::Components c(3);
    for (int el = 0; el < mesh.num_elements(); ++el) {
        const auto& t = mesh.elements()[el];
        const auto& G = mesh.gradients(el);
        double exx = 0, eyy = 0, exy = 0;
        for (int a = 0; a < 3; ++a) {
            const double ux = u[2 * t[a]], uy = u[2 * t[a] + 1];
            exx += G(a, 0) * ux;
            eyy += G(a, 1) * uy;
            exy += 0.5 * (G(a, 1) * ux + G(a, 0) * uy);
        }
        c << exx, eyy, exy;
        e.emplace_back(2, c);
    }
    return e;
}

Eigen::VectorXd internal_force(const Mesh& mesh, const std::vector<Sym>& sigma)
{
    Eigen::VectorXd F = Eigen::VectorXd::Zero(mesh.num_dofs());
    for (int el = 0; el < mesh.num_elements(); ++el) {
        const auto& t = mesh.elements()[el];
        const auto& G = mesh.gradients(el);
        const Sym& s = sigma[el];
        const double A = mesh.area(el);
        for (int a = 0; a < 3; ++a) {
            F[2 * t[a]] += A * (s(0, 0) * G(a, 0) + s(0, 1) * G(a, 1));
            F[2 * t[a] + 1] += A * (s(0, 1) * G(a, 0) + s(1, 1) * G(a, 1));
        }
    }
    return F;
}

namespace {

Eigen::VectorXd affine_field(const Scenario& s, const std::function<double(const PiecewiseLinear&)>& amp)
{
    Eigen::VectorXd W = Eigen::VectorXd::Zero(s.mesh.num_dofs());
    for (const auto& load : s.w) {
        const double a = amp(load.amplitude);
        if (a == 0.0)
            continue;
        for (int n = 0; n < s.mesh.num_nodes(); ++n)
            W.segment<2>(2 * n) += a * (load.A * s.mesh.nodes()[n] + load.b);
    }
    return W;
}

Eigen::VectorXd load_vector(const Scenario& s, const std::function<double(const PiecewiseLinear&)>& amp)
{
    const Mesh& mesh = s.mesh;
    Eigen::VectorXd F = Eigen::VectorXd::Zero(mesh.num_dofs());
    for (const auto& bf : s.f) {
        const Eigen::Vector2d f = amp(bf.amplitude) * bf.f;
        for (int el = 0; el < mesh.num_elements(); ++el) {
            if (mesh.collar()[el])
                continue;
            for (int n : mesh.elements()[el])
                F.segment<2>(2 * n) += mesh.area(el) / 3.0 * f;
        }
    }
    for (const auto& tr : s.g) {
        const Eigen::Vector2d g = amp(tr.amplitude) * tr.g;
        for (const auto& e : mesh.edges()) {
            if (e.label != EdgeLabel::Gamma1 || e.tag != tr.tag)
                continue;
            const double len = (mesh.nodes()[e.a] - mesh.nodes()[e.b]).norm();
            F.segment<2>(2 * e.a) += 0.5 * len * g;
            F.segment<2>(2 * e.b) += 0.5 * len * g;
        }
    }
    return F;
}

} // namespace

Eigen::VectorXd displacement_datum(const Scenario& s, double t)
{
    return affine_field(s, [t](const PiecewiseLinear& a) { return a(t); });
}

Eigen::VectorXd displacement_rate(const Scenario& s, double t, bool from_left)
{
    return affine_field(s, [=](const PiecewiseLinear& a) { return a.slope(t, from_left); });
}

Eigen::VectorXd assemble_load(const Scenario& s, double t)
{
    return load_vector(s, [t](const PiecewiseLinear& a) { return a(t); });
}

Eigen::VectorXd assemble_load_rate(const Scenario& s, double t, bool from_left)
{
    return load_vector(s, [=](const PiecewiseLinear& a) { return a.slope(t, from_left); });
}

std::vector<Sym> safe_load_field(const Scenario& s, double t)
{
    Sym r = Sym::zero(2);
    for (const auto& part : s.rho)
        r = r + part.amplitude(t) * part.stress;
    return std::vector<Sym>(s.mesh.num_elements(), r);
}

std::vector<char> dirichlet_mask(const Scenario& s)
{
    std::vector<char> mask(s.mesh.num_dofs(), 0);
    for (int n : s.dirichlet_nodes())
        mask[2 * n] = mask[2 * n + 1] = 1;
    return mask;
}

double free_norm(const std::vector<char>& mask, const Eigen::VectorXd& v)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!mask[i])
            s += v[i] * v[i];
    return std::sqrt(s);
}

std::string SafeLoadReport::summary() const
{
    std::ostringstream out;
    out << (ok ? "safe load ok" : "safe load violated") << ": min margin " << min_margin << " ("
        << margin_violations.size() << " elements below alpha), equilibrium residual " << equilibrium_residual
        << " (tol " << equilibrium_tolerance << "), worst coercivity gap " << worst_coercivity_gap << " over "
        << samples << " samples";
    if (!margin_violations.empty()) {
        out << "; first violating elements:";
        for (std::size_t k = 0; k < std::min<std::size_t>(5, margin_violations.size()); ++k)
            out << ' ' << margin_violations[k];
    }
    return out.str();
}

SafeLoadReport check_safe_load(const Scenario& s, double t, int samples, unsigned seed)
{
    const Mesh& mesh = s.mesh;
    SafeLoadReport rep;
    const auto rho = safe_load_field(s, t);
    std::vector<Dev> rho_D;
    rho_D.reserve(rho.size());
    rep.min_margin = INFINITY;
    for (int el = 0; el < mesh.num_elements(); ++el) {
        rho_D.push_back(deviator(rho[el]));
        const double margin = -s.material(el).yield.constraint_violation(rho_D.back()) - s.alpha;
        rep.min_margin = std::min(rep.min_margin, margin);
        if (margin < -1e-12)
            rep.margin_violations.push_back(el);
    }

    const Eigen::VectorXd F = assemble_load(s, t);
    const auto mask = dirichlet_mask(s);
    rep.equilibrium_residual = free_norm(mask, internal_force(mesh, rho) - F);
    rep.equilibrium_tolerance = s.tol_eq * std::max(1.0, F.norm());

    // Random fields mix isotropic noise with directions aligned to rho_D, where the inequality is tightest.
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    rep.samples = samples;
    rep.worst_coercivity_gap = INFINITY;
    std::vector<Dev> p(mesh.num_elements(), Dev::zero(2));
    const auto basis = deviatoric_basis<double>(2);
    for (int k = 0; k < samples; ++k) {
        const double aligned = (k % 2 == 0) ? 0.0 : unit(rng);
        for (int el = 0; el < mesh.num_elements(); ++el) {
            Dev q = gauss(rng) * basis[0] + gauss(rng) * basis[1];
            const double r = norm(rho_D[el]);
            if (aligned > 0.0 && r > 0.0)
                q = (1.0 - aligned) * q + (aligned * std::abs(gauss(rng)) / r) * rho_D[el];
            p[el] = q;
        }
        const double scale = l1_norm(mesh, p);
        if (scale == 0.0)
            continue;
        double gap = 0.0;
        for (int el = 0; el < mesh.num_elements(); ++el) {
            const Dev q = (1.0 / scale) * p[el];
            gap += mesh.area(el) * (support_H(s.material(el).yield, q) - ddot(rho_D[el], q) - s.alpha * norm(q));
        }
        rep.worst_coercivity_gap = std::min(rep.worst_coercivity_gap, gap);
    }
    if (samples <= 0)
        rep.worst_coercivity_gap = 0.0;

    rep.ok = rep.margin_violations.empty() && rep.equilibrium_residual <= rep.equilibrium_tolerance &&
             rep.worst_coercivity_gap >= -1e-10;
    return rep;
}

} // namespace prandtl
