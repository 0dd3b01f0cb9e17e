#include "prandtl/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prandtl {

TimeGrid TimeGrid::uniform(double T, int steps)
{
    if (steps < 1 || !(T > 0.0))
        throw std::invalid_argument("time grid: need T > 0 and at least one step");
    TimeGrid g;
    for (int i = 0; i <= steps; ++i)
        g.t.push_back(T * i / steps);
    g.t.back() = T;
    return g;
}

double TimeGrid::max_step() const
{
    double h = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i)
        h = std::max(h, t[i] - t[i - 1]);
    return h;
}

void TimeGrid::validate() const
{
    if (t.size() < 2 || t.front() != 0.0)
        throw std::invalid_argument("time grid: must start at 0 and have at least one step");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1]))
            throw std::invalid_argument("time grid: times must be strictly increasing");
}

EvolutionNonConvergence::EvolutionNonConvergence(int step_, StepReport report_)
    : NonConvergence("solver did not converge at step " + std::to_string(step_) + " after " +
                     std::to_string(report_.iterations) + " iterations (equilibrium residual " +
                     std::to_string(report_.equilibrium_residual) + ")"),
      step(step_), report(report_)
{
}

DiscreteTriple initial_triple(const Scenario& s, const SolverConfig& cfg)
{
    const IncrementSolver solver(s, cfg);
    auto r = solver.solve(0.0, std::vector<Dev>(s.mesh.num_elements(), Dev::zero(2)));
    if (!r.report.converged)
        throw EvolutionNonConvergence(0, r.report);
    return r.triple;
}

namespace {

/// Integral of |E w'|_L2 over [a, b], exact for data piecewise linear in time.
double strain_rate_integral(const Scenario& s, double a, double b)
{
    std::vector<double> cuts{a};
    for (double t : s.breakpoints(a, b))
        cuts.push_back(t);
    cuts.push_back(b);
    double total = 0.0;
    for (std::size_t k = 1; k < cuts.size(); ++k) {
        const double mid = 0.5 * (cuts[k - 1] + cuts[k]);
        total += l2_norm(s.mesh, strain(s.mesh, displacement_rate(s, mid, false))) * (cuts[k] - cuts[k - 1]);
    }
    return total;
}

std::vector<Sym> difference(const std::vector<Sym>& a, const std::vector<Sym>& b)
{
    std::vector<Sym> d;
    d.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        d.push_back(a[i] - b[i]);
    return d;
}

} // namespace

EvolutionRecord assemble_record(const Scenario& s, const TimeGrid& grid, std::vector<DiscreteTriple> triples)
{
    grid.validate();
    if (triples.size() != grid.t.size())
        throw std::invalid_argument("record: one triple per grid point required");
    const Mesh& mesh = s.mesh;
    const int n = static_cast<int>(grid.t.size());
    EvolutionRecord rec;
    rec.grid = grid;
    rec.triples = std::move(triples);
    EnergyLedger& L = rec.ledger;

    std::vector<Eigen::VectorXd> F(n), W(n);
    std::vector<std::vector<Sym>> Ew(n);
    for (int i = 0; i < n; ++i) {
        rec.sigma.push_back(stresses(s, rec.triples[i].e));
        F[i] = assemble_load(s, grid.t[i]);
        W[i] = displacement_datum(s, grid.t[i]);
        Ew[i] = strain(mesh, W[i]);
    }

    double D = 0.0;
    double se = 0, lw = 0, lu = 0, st = 0, lwt = 0, lut = 0;
    for (int i = 0; i < n; ++i) {
        const auto& x = rec.triples[i];
        double Q = 0.0;
        for (int el = 0; el < mesh.num_elements(); ++el) {
            Q += mesh.area(el) * quad_Q(s.material(el).moduli, x.e[el]);
            if (i > 0)
                D += mesh.area(el) * support_H(s.material(el).yield, x.p[el] - rec.triples[i - 1].p[el]);
        }
        if (i > 0) {
            const auto& prev = rec.triples[i - 1];
            const double t0 = grid.t[i - 1], t1 = grid.t[i], dt = t1 - t0;
            se += pairing(mesh, rec.sigma[i - 1], difference(Ew[i], Ew[i - 1]));
            lw += F[i - 1].dot(W[i] - W[i - 1]);
            lu += (F[i] - F[i - 1]).dot(prev.u);

            const auto Ewdot0 = strain(mesh, displacement_rate(s, t0, false));
            const auto Ewdot1 = strain(mesh, displacement_rate(s, t1, true));
            st += 0.5 * dt * (pairing(mesh, rec.sigma[i - 1], Ewdot0) + pairing(mesh, rec.sigma[i], Ewdot1));
            lwt += 0.5 * dt *
                   (F[i - 1].dot(displacement_rate(s, t0, false)) + F[i].dot(displacement_rate(s, t1, true)));
            lut += 0.5 * dt *
                   (assemble_load_rate(s, t0, false).dot(prev.u) + assemble_load_rate(s, t1, true).dot(x.u));
        }
        L.Q.push_back(Q);
        L.D.push_back(D);
        L.load_work.push_back(F[i].dot(x.u));
        L.sigma_Ewdot_endpoint.push_back(se);
        L.L_wdot_endpoint.push_back(lw);
        L.Ldot_u_endpoint.push_back(lu);
        L.sigma_Ewdot_trapezoid.push_back(st);
        L.L_wdot_trapezoid.push_back(lwt);
        L.Ldot_u_trapezoid.push_back(lut);
    }

    double total = 0.0, largest = 0.0;
    for (int i = 1; i < n; ++i) {
        const double step = strain_rate_integral(s, grid.t[i - 1], grid.t[i]);
        total += step;
        largest = std::max(largest, step);
    }
    L.omega_k = s.beta_C() * largest;
    L.delta_k = L.omega_k * total;
    return rec;
}

EvolutionRecord run_evolution(const Scenario& s, const TimeGrid& grid, const DiscreteTriple& initial,
                              const SolverConfig& cfg, const EvolutionOptions& options)
{
    grid.validate();
    const IncrementSolver solver(s, cfg);
    const int ne = s.mesh.num_elements();

    if (!options.force) {
        const StepReport r0 = euler_residuals(s, grid.t.front(), initial, &initial.p);
        const bool stable = r0.compatibility_residual <= 1e-10 && r0.admissibility_margin <= 1e-8 &&
                            r0.equilibrium_residual <= std::max(1e-8, 10 * cfg.tol_res) &&
                            r0.dirichlet_residual <= 1e-12;
        if (!stable)
            throw std::invalid_argument("initial triple is not compatible and stable at t = 0");
    }

    std::vector<DiscreteTriple> triples{initial};
    std::vector<StepReport> reports{euler_residuals(s, grid.t.front(), initial, &initial.p)};
    for (int i = 1; i <= grid.steps(); ++i) {
        const auto& p_prev = triples.back().p;
        std::optional<std::vector<Dev>> warm;
        if (options.warm_start == WarmStart::Zero)
            warm = std::vector<Dev>(ne, Dev::zero(2));
        auto r = solver.solve(grid.t[i], p_prev, warm);
        if (!r.report.converged)
            throw EvolutionNonConvergence(i, r.report);
        triples.push_back(std::move(r.triple));
        reports.push_back(r.report);
    }
    EvolutionRecord rec = assemble_record(s, grid, std::move(triples));
    rec.reports = std::move(reports);
    return rec;
}

AuditReport discrete_energy_audit(const EvolutionRecord& record, const Scenario& s)
{
    const Mesh& mesh = s.mesh;
    const auto& g = record.grid.t;
    const int n = static_cast<int>(g.size());
    AuditReport rep;
    rep.delta_k = record.ledger.delta_k;
    rep.max_violation = -INFINITY;

    std::vector<std::vector<Sym>> rho(n), Ew(n);
    for (int i = 0; i < n; ++i) {
        rho[i] = safe_load_field(s, g[i]);
        Ew[i] = strain(mesh, displacement_datum(s, g[i]));
    }
    auto elastic_part = [&](int i, int j) {
        // Q(e_j) - <rho_i|e_j - Ew_j>
        return record.ledger.Q[j] - pairing(mesh, rho[i], difference(record.triples[j].e, Ew[j]));
    };

    double dissipation_gap = 0.0; // sum_r H(dp_r) - <rho_D(t_r)|dp_r>
    double rhs_sums = 0.0;
    const double rhs0 = elastic_part(0, 0);
    for (int i = 0; i < n; ++i) {
        if (i > 0) {
            const auto& p1 = record.triples[i].p;
            const auto& p0 = record.triples[i - 1].p;
            for (int el = 0; el < mesh.num_elements(); ++el) {
                const Dev dp = p1[el] - p0[el];
                dissipation_gap += mesh.area(el) * (support_H(s.material(el).yield, dp) - ddot(rho[i][el], dp));
            }
            rhs_sums += -pairing(mesh, difference(rho[i], rho[i - 1]), difference(record.triples[i - 1].e, Ew[i - 1]));
            rhs_sums += pairing(mesh, record.sigma[i - 1], difference(Ew[i], Ew[i - 1]));
        }
        const double lhs = elastic_part(i, i) + dissipation_gap;
        const double rhs = rhs0 + rhs_sums;
        rep.lhs_minus_rhs.push_back(lhs - rhs);
        rep.max_violation = std::max(rep.max_violation, lhs - rhs - rep.delta_k);
    }
    return rep;
}

std::vector<double> energy_balance_residual(const EvolutionRecord& record, Quadrature q)
{
    const EnergyLedger& L = record.ledger;
    const bool trap = q == Quadrature::Trapezoid;
    std::vector<double> r;
    for (std::size_t i = 0; i < L.Q.size(); ++i) {
        const double work = trap ? L.sigma_Ewdot_trapezoid[i] - L.L_wdot_trapezoid[i] - L.Ldot_u_trapezoid[i]
                                 : L.sigma_Ewdot_endpoint[i] - L.L_wdot_endpoint[i] - L.Ldot_u_endpoint[i];
        r.push_back((L.Q[i] + L.D[i] - L.load_work[i]) - (L.Q[0] - L.load_work[0]) - work);
    }
    return r;
}

double sigma_gap(const Mesh& mesh, const EvolutionRecord& a, const EvolutionRecord& b,
                 const std::vector<double>& probe_times)
{
    auto index_of = [](const TimeGrid& g, double t) {
        const double tol = 1e-12 * std::max(1.0, g.t.back());
        for (std::size_t i = 0; i < g.t.size(); ++i)
            if (std::abs(g.t[i] - t) <= tol)
                return i;
        throw std::invalid_argument("sigma_gap: probe time " + std::to_string(t) + " is not a grid point");
    };
    double gap = 0.0;
    for (double t : probe_times)
        gap = std::max(gap, l2_norm(mesh, difference(a.sigma[index_of(a.grid, t)], b.sigma[index_of(b.grid, t)])));
    return gap;
}

bool StudyReport::cauchy_decreasing(double floor) const
{
    if (rows.size() < 3)
        return false;
    for (std::size_t k = 1; k + 1 < rows.size(); ++k)
        if (!(rows[k].sigma_cauchy < rows[k - 1].sigma_cauchy) && rows[k - 1].sigma_cauchy > floor)
            return false;
    return true;
}

StudyReport convergence_study(const Scenario& s, const std::vector<int>& steps, const SolverConfig& cfg)
{
    if (steps.size() < 2)
        throw std::invalid_argument("convergence study: need at least two grids");
    for (std::size_t k = 1; k < steps.size(); ++k)
        if (steps[k] <= steps[k - 1] || steps[k] % steps[k - 1] != 0)
            throw std::invalid_argument("convergence study: each step count must be a multiple of the previous one");

    StudyReport rep;
    const DiscreteTriple init = initial_triple(s, cfg);
    for (int k : steps) {
        rep.records.push_back(run_evolution(s, TimeGrid::uniform(s.T, k), init, cfg));
        const auto& rec = rep.records.back();
        StudyRow row;
        row.steps = k;
        row.max_step = rec.grid.max_step();
        row.dissipation = rec.ledger.D.back();
        for (double r : energy_balance_residual(rec))
            row.energy_residual = std::max(row.energy_residual, std::abs(r));
        row.delta_k = rec.ledger.delta_k;
        for (const auto& r : rec.reports)
            row.total_iterations += r.iterations;
        rep.rows.push_back(row);
    }
    rep.probe_times = rep.records.front().grid.t;
    for (std::size_t k = 0; k + 1 < rep.records.size(); ++k) {
        rep.rows[k].sigma_cauchy = sigma_gap(s.mesh, rep.records[k], rep.records[k + 1], rep.probe_times);
        rep.rows[k].dissipation_gap = std::abs(rep.rows[k].dissipation - rep.rows[k + 1].dissipation);
    }
    return rep;
}

AprioriBounds a_priori_bounds(const EvolutionRecord& record, const Scenario& s)
{
    const Mesh& mesh = s.mesh;
    const auto& g = record.grid.t;
    const int n = static_cast<int>(g.size());
    const double beta = s.beta_C(), alphaC = s.alpha_C();

    double S_Ew = 0, S_rho = 0, I_rho = 0, I_w = 0;
    std::vector<Sym> rho_prev, Ew_prev;
    AprioriBounds b;
    for (int i = 0; i < n; ++i) {
        const auto rho = safe_load_field(s, g[i]);
        const auto Ew = strain(mesh, displacement_datum(s, g[i]));
        S_Ew = std::max(S_Ew, l2_norm(mesh, Ew));
        S_rho = std::max(S_rho, l2_norm(mesh, rho));
        if (i > 0) {
            I_rho += l2_norm(mesh, difference(rho, rho_prev));
            I_w += l2_norm(mesh, difference(Ew, Ew_prev));
            std::vector<Dev> dp;
            for (int el = 0; el < mesh.num_elements(); ++el)
                dp.push_back(record.triples[i].p[el] - record.triples[i - 1].p[el]);
            b.plastic_variation += l1_norm(mesh, dp);
        }
        b.sup_elastic = std::max(b.sup_elastic, l2_norm(mesh, record.triples[i].e));
        rho_prev = rho;
        Ew_prev = Ew;
    }

    const double e0 = l2_norm(mesh, record.triples[0].e);
    const double rho0 = l2_norm(mesh, safe_load_field(s, g[0]));
    const double Ew0 = l2_norm(mesh, strain(mesh, displacement_datum(s, g[0])));
    // The estimate holds up to the accumulated inexactness of the incremental solves.
    const double slack = 1e-9 * n;
    const double c0 = beta * e0 * e0 + rho0 * (e0 + Ew0) + S_Ew * I_rho + S_rho * S_Ew + record.ledger.delta_k + slack;
    const double bb = I_rho + 2.0 * beta * I_w + S_rho;
    b.elastic_bound = (bb + std::sqrt(bb * bb + 4.0 * alphaC * c0)) / (2.0 * alphaC);
    b.plastic_bound = (c0 + bb * b.elastic_bound) / s.alpha;
    return b;
}

double strain_rate_bound(const EvolutionRecord& record, const Mesh& mesh)
{
    double L = 0.0;
    for (std::size_t i = 1; i < record.triples.size(); ++i)
        L = std::max(L, l2_norm(mesh, difference(record.triples[i].e, record.triples[i - 1].e)) /
                            (record.grid.t[i] - record.grid.t[i - 1]));
    return L;
}

} // namespace prandtl
