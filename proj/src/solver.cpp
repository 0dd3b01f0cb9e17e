#include "prandtl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace prandtl {

void SolverConfig::validate() const
{
    if (!(tol_energy > 0.0) || !(tol_res > 0.0))
        throw std::invalid_argument("solver: tolerances must be positive");
    if (max_outer < 1)
        throw std::invalid_argument("solver: max_outer must be at least 1");
    if (!(relaxation >= 1.0 && relaxation < 2.0))
        throw std::invalid_argument("solver: relaxation must lie in [1, 2)");
    if (threads < 1)
        throw std::invalid_argument("solver: threads must be at least 1");
}

DiscreteTriple DiscreteTriple::zero(const Mesh& mesh)
{
    return {Eigen::VectorXd::Zero(mesh.num_dofs()), std::vector<Dev>(mesh.num_elements(), Dev::zero(2)),
            std::vector<Sym>(mesh.num_elements(), Sym::zero(2))};
}

std::vector<Sym> stresses(const Scenario& s, const std::vector<Sym>& e)
{
    std::vector<Sym> sigma;
    sigma.reserve(e.size());
    for (int el = 0; el < s.mesh.num_elements(); ++el)
        sigma.push_back(stress(s.material(el).moduli, e[el]));
    return sigma;
}

double incremental_energy(const Scenario& s, double t, const DiscreteTriple& x, const std::vector<Dev>& p_prev)
{
    double E = 0.0;
    for (int el = 0; el < s.mesh.num_elements(); ++el) {
        const Material& m = s.material(el);
        E += s.mesh.area(el) * (quad_Q(m.moduli, x.e[el]) + support_H(m.yield, x.p[el] - p_prev[el]));
    }
    return E - assemble_load(s, t).dot(x.u);
}

StepReport euler_residuals(const Scenario& s, double t, const DiscreteTriple& x, const std::vector<Dev>* p_prev)
{
    const Mesh& mesh = s.mesh;
    StepReport rep;
    const auto eps = strain(mesh, x.u);
    for (int el = 0; el < mesh.num_elements(); ++el)
        rep.compatibility_residual =
            std::max(rep.compatibility_residual, norm(x.e[el] + x.p[el].sym() - eps[el]));

    const auto sigma = stresses(s, x.e);
    const Eigen::VectorXd F = assemble_load(s, t);
    const Eigen::VectorXd r = internal_force(mesh, sigma) - F;
    const auto mask = dirichlet_mask(s);
    const double scale = std::max(1.0, F.norm());
    rep.equilibrium_residual = free_norm(mask, r) / scale;

    std::vector<char> not_traction(mask.size(), 1);
    for (int n : mesh.nodes_with_label(EdgeLabel::Gamma1))
        not_traction[2 * n] = not_traction[2 * n + 1] = mask[2 * n];
    rep.traction_residual = free_norm(not_traction, r) / scale;

    const Eigen::VectorXd W = displacement_datum(s, t);
    for (int n : s.dirichlet_nodes())
        rep.dirichlet_residual = std::max(rep.dirichlet_residual, (x.u - W).segment<2>(2 * n).lpNorm<Eigen::Infinity>());

    for (int el = 0; el < mesh.num_elements(); ++el) {
        const Material& m = s.material(el);
        const Dev sD = deviator(sigma[el]);
        rep.admissibility_margin = std::max(rep.admissibility_margin, distance_to_K(m.yield, sD));
        if (p_prev) {
            const Dev dp = x.p[el] - (*p_prev)[el];
            rep.flow_residual = std::max(rep.flow_residual, std::abs(support_H(m.yield, dp) - ddot(sD, dp)));
            const PointUpdate up = incremental_update(m, eps[el], (*p_prev)[el]);
            rep.plastic_residual = std::max(rep.plastic_residual, norm(up.p - x.p[el]));
        }
    }
    if (p_prev)
        rep.energy = incremental_energy(s, t, x, *p_prev);
    return rep;
}

namespace {

/// Element stiffness in engineering strain notation (exx, eyy, 2 exy).
Eigen::Matrix3d elasticity_matrix(const ElasticModuli& m)
{
    Eigen::Matrix3d D;
    D << m.mu + m.kappa, m.kappa - m.mu, 0.0, m.kappa - m.mu, m.mu + m.kappa, 0.0, 0.0, 0.0, m.mu;
    return D;
}

Eigen::Matrix<double, 3, 6> strain_matrix(const Eigen::Matrix<double, 3, 2>& G)
{
    Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
    for (int a = 0; a < 3; ++a) {
        B(0, 2 * a) = G(a, 0);
        B(1, 2 * a + 1) = G(a, 1);
        B(2, 2 * a) = G(a, 1);
        B(2, 2 * a + 1) = G(a, 0);
    }
    return B;
}

template <typename Body>
void parallel_for(int n, int threads, Body body)
{
    if (threads <= 1 || n < 2 * threads) {
        for (int i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (n + threads - 1) / threads;
    for (int k = 0; k < threads; ++k) {
        const int lo = k * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi)
            break;
        pool.emplace_back([=, &body] {
            for (int i = lo; i < hi; ++i)
                body(i);
        });
    }
    for (auto& th : pool)
        th.join();
}

} // namespace

IncrementSolver::IncrementSolver(const Scenario& scenario, SolverConfig cfg) : s_(scenario), cfg_(cfg)
{
    cfg_.validate();
    if (s_.dirichlet_nodes().empty())
        throw SingularSystem("no Dirichlet nodes: rigid motions are unconstrained");
    s_.validate();

    const Mesh& mesh = s_.mesh;
    mask_ = dirichlet_mask(s_);
    free_index_.assign(mesh.num_dofs(), -1);
    for (int d = 0; d < mesh.num_dofs(); ++d)
        if (!mask_[d]) {
            free_index_[d] = static_cast<int>(free_dofs_.size());
            free_dofs_.push_back(d);
        }

    std::vector<Eigen::Triplet<double>> ff, fd;
    for (int el = 0; el < mesh.num_elements(); ++el) {
        const auto B = strain_matrix(mesh.gradients(el));
        const Eigen::Matrix<double, 6, 6> ke =
            mesh.area(el) * B.transpose() * elasticity_matrix(s_.material(el).moduli) * B;
        const auto& t = mesh.elements()[el];
        for (int i = 0; i < 6; ++i) {
            const int fi = free_index_[2 * t[i / 2] + i % 2];
            if (fi < 0)
                continue;
            for (int j = 0; j < 6; ++j) {
                const int dj = 2 * t[j / 2] + j % 2;
                if (free_index_[dj] >= 0)
                    ff.emplace_back(fi, free_index_[dj], ke(i, j));
                else
                    fd.emplace_back(fi, dj, ke(i, j));
            }
        }
    }
    const int nf = static_cast<int>(free_dofs_.size());
    Eigen::SparseMatrix<double> K_ff(nf, nf);
    K_ff.setFromTriplets(ff.begin(), ff.end());
    K_fd_.resize(nf, mesh.num_dofs());
    K_fd_.setFromTriplets(fd.begin(), fd.end());

    ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    if (nf > 0) {
        ldlt_->compute(K_ff);
        if (ldlt_->info() != Eigen::Success)
            throw SingularSystem("stiffness factorization failed");
        const auto D = ldlt_->vectorD();
        const double dmax = D.cwiseAbs().maxCoeff();
        if (!(D.minCoeff() > 1e-12 * dmax))
            throw SingularSystem("stiffness is singular on the free dofs: the Dirichlet set does not fix rigid motions");
    }
}

Eigen::VectorXd IncrementSolver::solve_displacement(double t, const std::vector<Dev>& p) const
{
    const Mesh& mesh = s_.mesh;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(mesh.num_dofs());
    const Eigen::VectorXd W = displacement_datum(s_, t);
    for (int d = 0; d < mesh.num_dofs(); ++d)
        if (mask_[d])
            u[d] = W[d];
    if (free_dofs_.empty())
        return u;

    std::vector<Sym> sigma_p;
    sigma_p.reserve(p.size());
    for (int el = 0; el < mesh.num_elements(); ++el)
        sigma_p.push_back(2.0 * s_.material(el).moduli.mu * p[el].sym());
    const Eigen::VectorXd rhs_full = assemble_load(s_, t) + internal_force(mesh, sigma_p);
    Eigen::VectorXd rhs(free_dofs_.size());
    for (std::size_t i = 0; i < free_dofs_.size(); ++i)
        rhs[i] = rhs_full[free_dofs_[i]];
    rhs -= K_fd_ * u;
    const Eigen::VectorXd uf = ldlt_->solve(rhs);
    for (std::size_t i = 0; i < free_dofs_.size(); ++i)
        u[free_dofs_[i]] = uf[i];
    return u;
}

void IncrementSolver::plastic_step(const std::vector<Sym>& eps, const std::vector<Dev>& p_prev, std::vector<Dev>& p,
                                   std::vector<double>& dissipation) const
{
    parallel_for(s_.mesh.num_elements(), cfg_.threads, [&](int el) {
        const PointUpdate up = incremental_update(s_.material(el), eps[el], p_prev[el]);
        p[el] = up.p;
        dissipation[el] = up.dissipation;
    });
}

IncrementResult IncrementSolver::solve(double t, const std::vector<Dev>& p_prev,
                                       const std::optional<std::vector<Dev>>& warm_start) const
{
    const Mesh& mesh = s_.mesh;
    const int ne = mesh.num_elements();
    if (static_cast<int>(p_prev.size()) != ne || (warm_start && static_cast<int>(warm_start->size()) != ne))
        throw std::invalid_argument("solve: plastic strain arrays must have one entry per element");
    if (!cfg_.force) {
        const SafeLoadReport safe = check_safe_load(s_, t);
        if (!safe.ok)
            throw SafeLoadViolation("safe-load condition fails at t = " + std::to_string(t) + ": " + safe.summary(),
                                    safe);
    }

    const Eigen::VectorXd F = assemble_load(s_, t);
    const double scale = std::max(1.0, F.norm());
    std::vector<Dev> p = warm_start ? *warm_start : p_prev;
    std::vector<Dev> p_new(ne, Dev::zero(2));
    std::vector<double> diss(ne, 0.0);

    IncrementResult out;
    double previous = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= cfg_.max_outer; ++it) {
        const Eigen::VectorXd u = solve_displacement(t, p);
        const auto eps = strain(mesh, u);
        plastic_step(eps, p_prev, p_new, diss);

        double change = 0.0;
        for (int el = 0; el < ne; ++el)
            change = std::max(change, norm(p_new[el] - p[el]));

        std::vector<Sym> e(ne, Sym::zero(2));
        double energy = -F.dot(u);
        for (int el = 0; el < ne; ++el) {
            e[el] = eps[el] - p_new[el].sym();
            energy += mesh.area(el) * (quad_Q(s_.material(el).moduli, e[el]) + diss[el]);
        }
        auto sigma = stresses(s_, e);
        const double res = free_norm(mask_, internal_force(mesh, sigma) - F) / scale;

        out.triple = {u, p_new, std::move(e)};
        out.sigma = std::move(sigma);
        out.report.iterations = it;
        out.report.energy = energy;
        out.report.equilibrium_residual = res;
        out.energy_history.push_back(energy);

        const bool fixed_point = change == 0.0;
        const bool stalled = previous - energy <= cfg_.tol_energy * std::max(1.0, std::abs(energy));
        if (fixed_point || (stalled && res <= cfg_.tol_res)) {
            out.report.converged = true;
            break;
        }
        out.report.converged = false;
        previous = energy;
        if (cfg_.relaxation == 1.0) {
            p.swap(p_new);
        } else {
            for (int el = 0; el < ne; ++el)
                p[el] = p[el] + cfg_.relaxation * (p_new[el] - p[el]);
        }
    }

    const StepReport full = euler_residuals(s_, t, out.triple, &p_prev);
    const int iterations = out.report.iterations;
    const bool converged = out.report.converged;
    out.report = full;
    out.report.iterations = iterations;
    out.report.converged = converged;
    return out;
}

} // namespace prandtl
