#include "doctest.h"
#include "scenarios.hpp"
#include "test_support.hpp"

#include "prandtl/solver.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace prandtl;
using namespace prandtl::testing;

namespace {

/// Dense stiffness built by probing the energy pairing with unit displacements.
Eigen::MatrixXd probed_stiffness(const Scenario& s)
{
    const int n = s.mesh.num_dofs();
    std::vector<std::vector<Sym>> unit_strain;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
        v[i] = 1.0;
        unit_strain.push_back(strain(s.mesh, v));
    }
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            K(i, j) = pairing(s.mesh, stresses(s, unit_strain[i]), unit_strain[j]);
    return K;
}

/// Minimizer of Q(Eu - p) - F . u with u = w on Dirichlet dofs, by a dense solve.
Eigen::VectorXd dense_elastic_solution(const Scenario& s, double t, const std::vector<Dev>& p)
{
    const Eigen::MatrixXd K = probed_stiffness(s);
    const auto mask = dirichlet_mask(s);
    const Eigen::VectorXd W = displacement_datum(s, t);
    std::vector<Sym> sp;
    for (int el = 0; el < s.mesh.num_elements(); ++el)
        sp.push_back(2.0 * s.material(el).moduli.mu * p[el].sym());
    const Eigen::VectorXd b = assemble_load(s, t) + internal_force(s.mesh, sp);
    std::vector<int> fr, fx;
    for (int d = 0; d < s.mesh.num_dofs(); ++d)
        (mask[d] ? fx : fr).push_back(d);
    Eigen::MatrixXd Kff(fr.size(), fr.size());
    Eigen::VectorXd rhs(fr.size());
    for (std::size_t i = 0; i < fr.size(); ++i) {
        rhs[i] = b[fr[i]];
        for (std::size_t j = 0; j < fr.size(); ++j)
            Kff(i, j) = K(fr[i], fr[j]);
        for (int d : fx)
            rhs[i] -= K(fr[i], d) * W[d];
    }
    const Eigen::VectorXd uf = Kff.llt().solve(rhs);
    Eigen::VectorXd u = W;
    for (std::size_t i = 0; i < fr.size(); ++i)
        u[fr[i]] = uf[i];
    return u;
}

/// Reduced energy in u after eliminating p by hand: the von Mises density
/// min_q mu |a - q|^2 + r |q| is mu |a|^2 below 2 mu |a| = r and r |a| - r^2 / (4 mu) above.
double reduced_energy(const Scenario& s, const Eigen::VectorXd& u, const std::vector<Dev>& p_prev)
{
    const auto eps = strain(s.mesh, u);
    double E = 0.0;
    for (int el = 0; el < s.mesh.num_elements(); ++el) {
        const auto& m = s.material(el);
        const double mu = m.moduli.mu, k = m.moduli.kappa, r = m.yield.radius();
        const double tr = eps[el](0, 0) + eps[el](1, 1);
        const double dxx = eps[el](0, 0) - 0.5 * tr - p_prev[el](0, 0);
        const double dxy = eps[el](0, 1) - p_prev[el](0, 1);
        const double a = std::sqrt(2 * dxx * dxx + 2 * dxy * dxy);
        const double dev = (2 * mu * a <= r) ? mu * a * a : r * a - r * r / (4 * mu);
        E += s.mesh.area(el) * (dev + 0.5 * k * tr * tr);
    }
    return E;
}

double max_sigma_difference(const std::vector<Sym>& a, const std::vector<Sym>& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, norm(a[i] - b[i]));
    return d;
}

} // namespace

TEST_CASE("zero data gives the zero triple")
{
    Scenario s = uniform_shear(3, 1.0, 2.0, 1.0, 0.0);
    const IncrementSolver solver(s, {});
    const auto r = solver.solve(0.5, std::vector<Dev>(s.mesh.num_elements(), Dev::zero(2)));
    CHECK(r.report.converged);
    CHECK(r.report.iterations == 1);
    CHECK(r.triple.u.norm() == 0.0);
    CHECK(r.report.energy == 0.0);
    for (int el = 0; el < s.mesh.num_elements(); ++el) {
        CHECK(norm(r.triple.p[el]) == 0.0);
        CHECK(norm(r.triple.e[el]) == 0.0);
    }
}

TEST_CASE("elastic regime equals the direct linear solve")
{
    // Small loads and a small residual plastic strain keep every trial stress inside K.
    Scenario s = plastic_ramp(4, 1.0);
    s.f = {BodyForce{Eigen::Vector2d(0.01, -0.02), PiecewiseLinear::constant(1.0)}};
    SolverConfig cfg;
    cfg.force = true; // rho = 0 does not balance f
    const IncrementSolver solver(s, cfg);
    std::mt19937 rng(5);
    std::vector<Dev> p_prev;
    for (int el = 0; el < s.mesh.num_elements(); ++el)
        p_prev.push_back(random_dev(rng, 2, 1e-3));
    const double t = 0.1;
    const auto r = solver.solve(t, p_prev);
    CHECK(r.report.converged);
    CHECK(r.report.iterations == 1);
    const Eigen::VectorXd u = dense_elastic_solution(s, t, p_prev);
    CHECK((r.triple.u - u).norm() <= 1e-12 * (1 + u.norm()));
    for (int el = 0; el < s.mesh.num_elements(); ++el)
        CHECK(r.triple.p[el] == p_prev[el]);
    CHECK(r.report.equilibrium_residual <= 1e-12);
    CHECK(r.report.compatibility_residual <= 1e-14);
    CHECK(r.report.dirichlet_residual == 0.0);
}

TEST_CASE("stretched strip beyond yield against the reduced-energy oracle")
{
    const Scenario s = stretched_strip(2, 1.0);
    const IncrementSolver solver(s, {});
    const std::vector<Dev> p0(s.mesh.num_elements(), Dev::zero(2));
    const auto r = solver.solve(1.0, p0);
    REQUIRE(r.report.converged);
    CHECK(r.report.equilibrium_residual <= 1e-9);

    // Cyclic golden-section descent on the free dofs of the reduced energy.
    const auto mask = dirichlet_mask(s);
    Eigen::VectorXd u = displacement_datum(s, 1.0);
    for (int sweep = 0; sweep < 200; ++sweep)
        for (int d = 0; d < s.mesh.num_dofs(); ++d) {
            if (mask[d])
                continue;
            const double x0 = u[d];
            u[d] = golden_section(
                [&](double x) {
                    Eigen::VectorXd v = u;
                    v[d] = x;
                    return reduced_energy(s, v, p0);
                },
                x0 - 0.5, x0 + 0.5, 1e-12);
        }
    const double oracle = reduced_energy(s, u, p0);
    CHECK(std::abs(r.report.energy - oracle) <= 1e-7);

    for (int el = 0; el < s.mesh.num_elements(); ++el) {
        REQUIRE(norm(r.triple.p[el]) > 0.0);
        CHECK(std::abs(norm(deviator(r.sigma[el])) - 0.3) <= 1e-9);
    }
}

TEST_CASE("Euler residuals detect constructed violations")
{
    const Scenario s = plastic_ramp(4);
    const IncrementSolver solver(s, {});
    const std::vector<Dev> p0(s.mesh.num_elements(), Dev::zero(2));
    const auto r = solver.solve(0.4, p0);
    REQUIRE(r.report.converged);
    CHECK(r.report.admissibility_margin <= 1e-12);
    CHECK(r.report.flow_residual <= 1e-12);
    CHECK(r.report.plastic_residual <= 1e-12);
    CHECK(r.report.equilibrium_residual <= 1e-9);

    // Doubling the deviatoric elastic strain doubles sigma_D; on flowing elements the margin becomes r.
    DiscreteTriple bad = r.triple;
    double worst = 0.0;
    for (int el = 0; el < s.mesh.num_elements(); ++el) {
        bad.e[el] = bad.e[el] + deviator(bad.e[el]).sym();
        bad.p[el] = bad.p[el] - deviator(r.triple.e[el]);
        if (norm(r.triple.p[el]) > 0.0)
            worst = std::max(worst, norm(deviator(r.sigma[el])));
    }
    REQUIRE(worst == doctest::Approx(0.3));
    CHECK(euler_residuals(s, 0.4, bad).admissibility_margin == doctest::Approx(0.3).epsilon(1e-9));

    // Perturbing u along a free direction: the equilibrium residual is linear in the size.
    std::mt19937 rng(9);
    const auto mask = dirichlet_mask(s);
    Eigen::VectorXd v = random_vector(rng, s.mesh.num_dofs());
    for (int d = 0; d < s.mesh.num_dofs(); ++d)
        if (mask[d])
            v[d] = 0.0;
    auto perturbed = [&](double delta) {
        DiscreteTriple x = r.triple;
        x.u += delta * v;
        const auto eps = strain(s.mesh, x.u);
        for (int el = 0; el < s.mesh.num_elements(); ++el)
            x.e[el] = eps[el] - x.p[el].sym();
        return euler_residuals(s, 0.4, x).equilibrium_residual;
    };
    const double r1 = perturbed(1e-3), r2 = perturbed(2e-3), r4 = perturbed(4e-3);
    CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(r4 / r2 == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("energy is non-increasing across outer iterations")
{
    const Scenario s = plastic_ramp(6);
    const IncrementSolver solver(s, {});
    const auto r = solver.solve(0.35, std::vector<Dev>(s.mesh.num_elements(), Dev::zero(2)));
    REQUIRE(r.report.converged);
    REQUIRE(r.energy_history.size() > 5);
    for (std::size_t k = 1; k < r.energy_history.size(); ++k)
        CHECK(r.energy_history[k] <= r.energy_history[k - 1] + 1e-15 * std::abs(r.energy_history[k - 1]));
}

TEST_CASE("warm starts, self-stability and dual feasibility")
{
    const Scenario s = plastic_ramp(6);
    const IncrementSolver solver(s, {});
    const int ne = s.mesh.num_elements();
    const auto first = solver.solve(0.3, std::vector<Dev>(ne, Dev::zero(2)));
    const auto p1 = first.triple.p;
    const auto a = solver.solve(0.45, p1);
    std::mt19937 rng(4);
    std::vector<Dev> random_start;
    for (int el = 0; el < ne; ++el)
        random_start.push_back(random_dev(rng, 2, 0.05));
    const auto b = solver.solve(0.45, p1, random_start);
    const auto c = solver.solve(0.45, p1, std::vector<Dev>(ne, Dev::zero(2)));
    REQUIRE(a.report.converged);
    REQUIRE(b.report.converged);
    REQUIRE(c.report.converged);
    CHECK(max_sigma_difference(a.sigma, b.sigma) <= 1e-6);
    CHECK(max_sigma_difference(a.sigma, c.sigma) <= 1e-6);

    // The new state minimizes its own increment.
    const auto again = solver.solve(0.45, a.triple.p);
    double dp = 0.0;
    for (int el = 0; el < ne; ++el)
        dp = std::max(dp, norm(again.triple.p[el] - a.triple.p[el]));
    CHECK(dp <= 1e-7);

    // <sigma_D - tau_D | dp> >= 0 for tau = rho = 0 and convex combinations with sigma.
    std::uniform_real_distribution<double> theta(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        const double th = k == 0 ? 1.0 : theta(rng);
        double pair = 0.0;
        for (int el = 0; el < ne; ++el) {
            const Dev sD = deviator(a.sigma[el]);
            const Dev tau = (1.0 - th) * sD;
            pair += s.mesh.area(el) * ddot(sD - tau, a.triple.p[el] - p1[el]);
        }
        CHECK(pair >= -1e-9);
    }
}

TEST_CASE("solver failure modes")
{
    SUBCASE("singular system")
    {
        RectangleSpec spec;
        spec.nx = spec.ny = 2;
        spec.collar_width = 0.1;
        spec.sides = {EdgeLabel::Gamma0, EdgeLabel::Gamma1, EdgeLabel::Gamma1, EdgeLabel::Gamma1};
        const Mesh m = make_rectangle(spec);
        auto edges = m.edges();
        for (auto& e : edges)
            if (e.label == EdgeLabel::CollarOuter)
                e.label = EdgeLabel::Gamma1;
        Scenario s;
        s.mesh = Mesh(m.nodes(), m.elements(), m.region(), m.collar(), edges);
        s.materials = {Material{ElasticModuli(1.0, 1.0), YieldSurface::von_mises(2, 1.0)}};
        s.mode = DirichletMode::Collar;
        s.alpha = 0.5;
        CHECK_THROWS_AS(IncrementSolver(s, {}), SingularSystem);
    }
    SUBCASE("iteration cap returns the last iterate")
    {
        const Scenario s = plastic_ramp(6);
        SolverConfig cfg;
        cfg.max_outer = 2;
        const IncrementSolver solver(s, cfg);
        const auto r = solver.solve(0.4, std::vector<Dev>(s.mesh.num_elements(), Dev::zero(2)));
        CHECK_FALSE(r.report.converged);
        CHECK(r.report.iterations == 2);
        CHECK(r.report.compatibility_residual <= 1e-14);
        CHECK(r.report.equilibrium_residual > 1e-9);
    }
    SUBCASE("safe-load violation")
    {
        Scenario s = plastic_ramp(3);
        s.f = {BodyForce{Eigen::Vector2d(0.0, -1.0), PiecewiseLinear::constant(1.0)}};
        const std::vector<Dev> p0(s.mesh.num_elements(), Dev::zero(2));
        CHECK_THROWS_AS(IncrementSolver(s, {}).solve(0.1, p0), SafeLoadViolation);
        SolverConfig cfg;
        cfg.force = true;
        CHECK(IncrementSolver(s, cfg).solve(0.1, p0).report.converged);
    }
    SUBCASE("configuration")
    {
        SolverConfig cfg;
        cfg.relaxation = 2.0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
        cfg = {};
        cfg.max_outer = 0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
}

TEST_CASE("threaded plastic step is bitwise identical")
{
    const Scenario s = plastic_ramp(8);
    SolverConfig cfg;
    cfg.threads = 4;
    const std::vector<Dev> p0(s.mesh.num_elements(), Dev::zero(2));
    const auto serial = IncrementSolver(s, {}).solve(0.4, p0);
    const auto threaded = IncrementSolver(s, cfg).solve(0.4, p0);
    CHECK(serial.triple.u == threaded.triple.u);
    CHECK(serial.report.iterations == threaded.report.iterations);
}

TEST_CASE("over-relaxation reaches the same stress")
{
    const Scenario s = plastic_ramp(6);
    SolverConfig cfg;
    cfg.relaxation = 1.5;
    const std::vector<Dev> p0(s.mesh.num_elements(), Dev::zero(2));
    const auto plain = IncrementSolver(s, {}).solve(0.4, p0);
    const auto relaxed = IncrementSolver(s, cfg).solve(0.4, p0);
    REQUIRE(relaxed.report.converged);
    CHECK(max_sigma_difference(plain.sigma, relaxed.sigma) <= 1e-6);
}

TEST_CASE("collar solutions approach the hard-Dirichlet solution as the width shrinks")
{
    // Elastic loading: the collar only adds compliance of order its width.
    auto make = [](double width) {
        Scenario s = plastic_ramp(4, 10.0);
        if (width > 0.0) {
            RectangleSpec spec;
            spec.nx = spec.ny = 4;
            spec.sides = {EdgeLabel::Gamma1, EdgeLabel::Gamma1, EdgeLabel::Gamma0, EdgeLabel::Gamma0};
            spec.collar_width = width;
            s.mesh = make_rectangle(spec);
            s.mode = DirichletMode::Collar;
        }
        return s;
    };
    const Scenario hard = make(0.0);
    const auto ref = IncrementSolver(hard, {}).solve(0.5, std::vector<Dev>(hard.mesh.num_elements(), Dev::zero(2)));
    auto body_gap = [&](const Scenario& c, const Eigen::VectorXd& u) {
        double gap = 0.0;
        for (int n = 0; n < hard.mesh.num_nodes(); ++n)
            for (int m = 0; m < c.mesh.num_nodes(); ++m)
                if ((c.mesh.nodes()[m] - hard.mesh.nodes()[n]).norm() < 1e-12)
                    gap += (u.segment<2>(2 * m) - ref.triple.u.segment<2>(2 * n)).squaredNorm();
        return std::sqrt(gap);
    };
    double previous = INFINITY;
    for (double width : {0.1, 0.05, 0.025}) {
        const Scenario c = make(width);
        const auto r = IncrementSolver(c, {}).solve(0.5, std::vector<Dev>(c.mesh.num_elements(), Dev::zero(2)));
        REQUIRE(r.report.converged);
        const double gap = body_gap(c, r.triple.u);
        CHECK(gap < previous);
        previous = gap;
    }
}
