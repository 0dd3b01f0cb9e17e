#include "prandtl/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

namespace prandtl {

bool CheckReport::pass() const
{
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

CheckRow CheckReport::worst() const
{
    CheckRow w;
    bool any_fail = false;
    for (const auto& r : rows) {
        if (!r.pass && !any_fail) {
            w = r;
            any_fail = true;
        } else if (r.pass == !any_fail && std::abs(r.value) > std::abs(w.value)) {
            w = r;
        }
    }
    return w;
}

namespace {

double stress_scale(const Scenario& s) { return std::max(1e-300, s.outer_radius()); }

/// Flowing elements of step i with their increments.
struct Flow {
    std::vector<Dev> dp;
    std::vector<char> flowing;
};

Flow flow_of(const EvolutionRecord& rec, int i)
{
    const auto& p1 = rec.triples[i].p;
    const auto& p0 = rec.triples[i - 1].p;
    Flow f;
    double largest = 0.0;
    for (std::size_t el = 0; el < p1.size(); ++el) {
        f.dp.push_back(p1[el] - p0[el]);
        largest = std::max(largest, norm(f.dp.back()));
    }
    for (const auto& d : f.dp) {
        const double n = norm(d);
        f.flowing.push_back(n > 0.0 && n > flowing_threshold * largest);
    }
    return f;
}

std::vector<Sym> difference(const std::vector<Sym>& a, const std::vector<Sym>& b)
{
    std::vector<Sym> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        d.push_back(a[i] - b[i]);
    return d;
}

double angle_between(const Dev& a, const Dev& b)
{
    const double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0)
        return M_PI;
    const double chord = norm((1.0 / na) * a - (1.0 / nb) * b);
    return 2.0 * std::asin(std::min(1.0, 0.5 * chord));
}

/// Applies `value(i, el)` to elements selected by `use` and records the worst per step.
template <typename Select, typename Value, typename Pass>
CheckReport per_element(const std::string& name, double tol, const EvolutionRecord& rec, Select use, Value value,
                        Pass ok)
{
    CheckReport rep;
    rep.name = name;
    rep.tolerance = tol;
    for (int i = 1; i < static_cast<int>(rec.triples.size()); ++i) {
        const Flow f = flow_of(rec, i);
        CheckRow row;
        row.step = i;
        for (int el = 0; el < static_cast<int>(f.dp.size()); ++el) {
            if (!use(f, el))
                continue;
            const double v = value(i, el, f.dp[el]);
            const bool good = ok(v);
            const bool worse = row.element < 0 || (!good && row.pass) ||
                               (good == row.pass && std::abs(v) > std::abs(row.value));
            if (worse)
                row = {i, el, v, good};
        }
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace

CheckReport check_flow_rule(const EvolutionRecord& record, const Scenario& s, double tol)
{
    const double S = stress_scale(s);
    return per_element(
        "flow_rule", tol, record, [](const Flow& f, int el) { return norm(f.dp[el]) > 0.0; },
        [&](int i, int el, const Dev& dp) {
            const Dev sD = deviator(record.sigma[i][el]);
            return (support_H(s.material(el).yield, dp) - ddot(sD, dp)) / (norm(dp) * S);
        },
        [tol](double v) { return v >= -tol && v <= tol; });
}

CheckReport check_variational_inequality(const EvolutionRecord& record, const Scenario& s, int n_samples, double tol,
                                         unsigned seed)
{
    const Mesh& mesh = s.mesh;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> theta(0.0, 1.0);
    CheckReport rep;
    rep.name = "variational_inequality";
    rep.tolerance = tol;
    for (int i = 1; i < static_cast<int>(record.triples.size()); ++i) {
        const Flow f = flow_of(record, i);
        const auto rho = safe_load_field(s, record.grid.t[i]);
        CheckRow row;
        row.step = i;
        row.value = INFINITY;
        for (int k = 0; k <= n_samples; ++k) {
            const double th = k == 0 ? 1.0 : 1.0 - theta(rng); // (0, 1]
            double pair = 0.0;
            for (int el = 0; el < mesh.num_elements(); ++el) {
                const Sym tau = th * rho[el] + (1.0 - th) * record.sigma[i][el];
                pair += mesh.area(el) * ddot(deviator(record.sigma[i][el] - tau), f.dp[el]);
            }
            row.value = std::min(row.value, pair);
        }
        row.pass = row.value >= -tol;
        rep.rows.push_back(row);
    }
    return rep;
}

CheckReport check_normality(const EvolutionRecord& record, const Scenario& s, double tol)
{
    const double S = stress_scale(s);
    return per_element(
        "normality", tol, record, [](const Flow& f, int el) { return f.flowing[el] != 0; },
        [&](int i, int el, const Dev& dp) {
            const Dev sD = deviator(record.sigma[i][el]);
            const YieldSurface& K = s.material(el).yield;
            if (K.kind() == YieldSurface::Kind::VonMises)
                return angle_between(sD, dp);
            return std::max((support_H(K, dp) - ddot(sD, dp)) / (norm(dp) * S),
                            K.constraint_violation(sD) / S);
        },
        [tol](double v) { return v <= tol; });
}

CheckReport check_yield_residence(const EvolutionRecord& record, const Scenario& s, double tol)
{
    return per_element(
        "yield_residence", tol, record, [](const Flow& f, int el) { return f.flowing[el] != 0; },
        [&](int i, int el, const Dev&) {
            return std::abs(s.material(el).yield.constraint_violation(deviator(record.sigma[i][el])));
        },
        [tol](double v) { return v <= tol; });
}

CheckReport check_power_balance(const EvolutionRecord& record, const Scenario& s, double tol)
{
    const Mesh& mesh = s.mesh;
    CheckReport rep;
    rep.name = "power_balance";
    rep.tolerance = tol;
    Eigen::VectorXd W0 = displacement_datum(s, record.grid.t[0]);
    for (int i = 1; i < static_cast<int>(record.triples.size()); ++i) {
        const double t = record.grid.t[i];
        const Eigen::VectorXd W1 = displacement_datum(s, t);
        const Eigen::VectorXd F = assemble_load(s, t);
        const auto& x1 = record.triples[i];
        const auto& x0 = record.triples[i - 1];
        double v = pairing(mesh, record.sigma[i], difference(x1.e, x0.e)) -
                   pairing(mesh, record.sigma[i], strain(mesh, W1 - W0)) + F.dot(W1 - W0) - F.dot(x1.u - x0.u);
        for (int el = 0; el < mesh.num_elements(); ++el)
            v += mesh.area(el) * support_H(s.material(el).yield, x1.p[el] - x0.p[el]);
        rep.rows.push_back({i, -1, v, std::abs(v) <= tol});
        W0 = W1;
    }
    return rep;
}

std::vector<Dev> averaged_stress(const EvolutionRecord& record, const Scenario& s, int step, double radius)
{
    if (!(radius > 0.0))
        throw std::invalid_argument("averaged_stress: radius must be positive");
    const Mesh& mesh = s.mesh;
    const int ne = mesh.num_elements();
    std::vector<Eigen::Vector2d> c(ne);
    std::vector<Dev> sD(ne, Dev::zero(2));
    for (int el = 0; el < ne; ++el) {
        c[el] = mesh.centroid(el);
        sD[el] = deviator(record.sigma[step][el]);
    }
    std::vector<Dev> out;
    out.reserve(ne);
    for (int el = 0; el < ne; ++el) {
        Dev sum = mesh.area(el) * sD[el];
        double area = mesh.area(el);
        for (int other = 0; other < ne; ++other) {
            if (other == el || (c[other] - c[el]).norm() > radius)
                continue;
            sum = sum + mesh.area(other) * sD[other];
            area += mesh.area(other);
        }
        out.push_back((1.0 / area) * sum);
    }
    return out;
}

PreciseStressDiscrepancy precise_stress_discrepancy(const EvolutionRecord& record, const Scenario& s, int step,
                                                    double radius)
{
    PreciseStressDiscrepancy d;
    if (step < 1)
        return d;
    const Flow f = flow_of(record, step);
    for (int el = 0; el < s.mesh.num_elements(); ++el)
        if (f.flowing[el] && s.material(el).yield.kind() != YieldSurface::Kind::VonMises)
            d.skipped = true;
    if (d.skipped)
        return d;
    const auto avg = averaged_stress(record, s, step, radius);
    double area = 0.0;
    for (int el = 0; el < s.mesh.num_elements(); ++el) {
        if (!f.flowing[el])
            continue;
        const double r = s.material(el).yield.radius();
        const double gap = norm(avg[el] - (r / norm(f.dp[el])) * f.dp[el]);
        d.max = std::max(d.max, gap);
        d.mean += s.mesh.area(el) * gap;
        area += s.mesh.area(el);
        ++d.flowing;
    }
    if (area > 0.0)
        d.mean /= area;
    return d;
}

std::vector<std::optional<Dev>> precise_stress_candidates(const EvolutionRecord& record, const Scenario& s, int step)
{
    std::vector<std::optional<Dev>> out(s.mesh.num_elements());
    if (step < 1)
        return out;
    const Flow f = flow_of(record, step);
    for (int el = 0; el < s.mesh.num_elements(); ++el)
        if (f.flowing[el])
            out[el] = min_norm_subgradient(s.material(el).yield, (1.0 / norm(f.dp[el])) * f.dp[el]);
    return out;
}

ContinuousDependenceReport check_continuous_dependence(const Scenario& s, double delta, double t,
                                                       const SolverConfig& cfg)
{
    Scenario perturbed = s;
    for (auto& w : perturbed.w) {
        w.A *= 1.0 + delta;
        w.b *= 1.0 + delta;
    }
    const std::vector<Dev> p0(s.mesh.num_elements(), Dev::zero(2));
    const auto a = IncrementSolver(s, cfg).solve(t, p0);
    const auto b = IncrementSolver(perturbed, cfg).solve(t, p0);
    if (!a.report.converged || !b.report.converged)
        throw NonConvergence("continuous dependence: increment did not converge");

    const Mesh& mesh = s.mesh;
    ContinuousDependenceReport rep;
    rep.delta = delta;
    rep.elastic_gap = l2_norm(mesh, difference(b.triple.e, a.triple.e));
    rep.datum_gap = l2_norm(mesh, strain(mesh, displacement_datum(perturbed, t) - displacement_datum(s, t)));
    std::vector<Dev> dp;
    for (int el = 0; el < mesh.num_elements(); ++el)
        dp.push_back(b.triple.p[el] - a.triple.p[el]);
    rep.plastic_gap = l1_norm(mesh, dp);
    rep.constant = std::max(s.beta_C() / s.alpha_C(), std::sqrt(s.outer_radius() / s.alpha_C()));
    rep.bound = rep.constant * (rep.datum_gap + rep.plastic_gap + std::sqrt(rep.plastic_gap));
    return rep;
}

UniquenessProbe compare_records(const Mesh& mesh, const EvolutionRecord& a, const EvolutionRecord& b)
{
    if (a.grid.t != b.grid.t)
        throw std::invalid_argument("compare_records: records must share their grid");
    UniquenessProbe u;
    for (std::size_t i = 0; i < a.triples.size(); ++i) {
        u.sigma_gap = std::max(u.sigma_gap, l2_norm(mesh, difference(a.sigma[i], b.sigma[i])));
        std::vector<Dev> dp;
        for (int el = 0; el < mesh.num_elements(); ++el)
            dp.push_back(a.triples[i].p[el] - b.triples[i].p[el]);
        u.plastic_gap = std::max(u.plastic_gap, l1_norm(mesh, dp));
    }
    return u;
}

std::vector<CheckReport> run_checks(const EvolutionRecord& record, const Scenario& s)
{
    std::vector<CheckReport> out{check_flow_rule(record, s), check_variational_inequality(record, s),
                                 check_normality(record, s), check_yield_residence(record, s),
                                 check_power_balance(record, s)};

    const AuditReport audit = discrete_energy_audit(record, s);
    CheckReport ineq;
    ineq.name = "discrete_energy_inequality";
    ineq.tolerance = 1e-12;
    for (std::size_t i = 1; i < audit.lhs_minus_rhs.size(); ++i) {
        const double v = audit.lhs_minus_rhs[i] - audit.delta_k;
        ineq.rows.push_back({static_cast<int>(i), -1, v, v <= ineq.tolerance});
    }
    out.push_back(ineq);

    CheckReport eq;
    eq.name = "equilibrium";
    eq.tolerance = 1e-8;
    for (std::size_t i = 1; i < record.triples.size(); ++i) {
        const StepReport r = euler_residuals(s, record.grid.t[i], record.triples[i], &record.triples[i - 1].p);
        const double v = std::max({r.equilibrium_residual, r.compatibility_residual, r.dirichlet_residual,
                                   r.admissibility_margin});
        eq.rows.push_back({static_cast<int>(i), -1, v, v <= eq.tolerance});
    }
    out.push_back(eq);
    return out;
}

void write_verify_csv(std::ostream& out, const std::vector<CheckReport>& reports)
{
    out << "check,step,element,value,tolerance,pass\n";
    char buf[128];
    for (const auto& rep : reports)
        for (const auto& r : rep.rows) {
            std::snprintf(buf, sizeof buf, ",%d,%d,%.17g,%.17g,%d\n", r.step, r.element, r.value, rep.tolerance,
                          r.pass ? 1 : 0);
            out << rep.name << buf;
        }
}

} // namespace prandtl
