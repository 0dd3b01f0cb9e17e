#include "doctest.h"
#include "test_support.hpp"

#include "prandtl/constitutive.hpp"

using namespace prandtl;
using namespace prandtl::testing;

namespace {

Material von_mises_material(int dim, double mu, double kappa, double r)
{
    return Material{ElasticModuli(mu, kappa), YieldSurface::von_mises(dim, r)};
}

Dev unit_dev(int dim, std::mt19937& rng)
{
    const Dev d = random_dev(rng, dim);
    return d / norm(d);
}

} // namespace

TEST_CASE("support function examples")
{
    const auto vm = YieldSurface::von_mises(2, 2.0);
    std::mt19937 rng(1);
    const Dev d = unit_dev(2, rng);
    CHECK(support_H(vm, 5.0 * d) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(support_H(vm, Dev::zero(2)) == 0.0);

    // Square with vertices (+-1, +-1) in deviatoric coordinates: at direction (1, 0) the
    // vertex enumeration oracle gives max over {(1,1),(1,-1),(-1,1),(-1,-1)} of x = 1.
    const auto sq = square_yield();
    CHECK(sq.vertices().size() == 4);
    double oracle = -1e300;
    for (double vx : {-1.0, 1.0})
        for (double vy : {-1.0, 1.0})
            oracle = std::max(oracle, 1.0 * vx + 0.0 * vy);
    CHECK(support_H(sq, from_coordinates(2, Eigen::Vector2d(1, 0))) == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(sq.inner_radius() == doctest::Approx(1.0));
    CHECK(sq.outer_radius() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("support function bounds, homogeneity and convexity")
{
    std::mt19937 rng(2);
    const std::vector<YieldSurface> sets = {YieldSurface::von_mises(2, 1.3), YieldSurface::von_mises(3, 0.7),
                                            square_yield(), hexagon_yield(0.8)};
    for (const auto& k : sets) {
        for (int i = 0; i < 300; ++i) {
            const Dev a = random_dev(rng, k.dim()), b = random_dev(rng, k.dim());
            const double ha = support_H(k, a), hb = support_H(k, b);
            CHECK(ha >= k.inner_radius() * norm(a) * (1 - 1e-12));
            CHECK(ha <= k.outer_radius() * norm(a) * (1 + 1e-12));
            CHECK(support_H(k, 2.5 * a) == doctest::Approx(2.5 * ha).epsilon(1e-13));
            CHECK(support_H(k, a + b) <= ha + hb + 1e-12);
            CHECK(support_H(k, 0.5 * a + 0.5 * b) <= 0.5 * ha + 0.5 * hb + 1e-12);
        }
    }
}

TEST_CASE("polyhedral construction validates boundedness and offsets")
{
    std::vector<Dev> normals = {from_coordinates(2, Eigen::Vector2d(1, 0)), from_coordinates(2, Eigen::Vector2d(0, 1)),
                                from_coordinates(2, Eigen::Vector2d(-1, 0))};
    CHECK_THROWS_AS(YieldSurface::polyhedral(2, normals, {1, 1, 1}), std::invalid_argument);
    normals.push_back(from_coordinates(2, Eigen::Vector2d(0, -1)));
    CHECK_NOTHROW(YieldSurface::polyhedral(2, normals, {1, 1, 1, 1}));
    CHECK_THROWS_AS(YieldSurface::polyhedral(2, normals, {1, 1, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(YieldSurface::von_mises(2, 0.0), std::invalid_argument);

    const auto ext = square_yield().coordinate_extent();
    for (int i = 0; i < ext.size(); ++i)
        CHECK(ext[i] == doctest::Approx(1.0));
}

TEST_CASE("projection onto K")
{
    const auto vm = YieldSurface::von_mises(3, 1.0);
    std::mt19937 rng(4);
    const Dev d = unit_dev(3, rng);
    CHECK(norm(project_K(vm, 0.5 * d) - 0.5 * d) == 0.0);
    CHECK(norm(project_K(vm, 3.0 * d) - d) <= 1e-15);

    // Grid oracle for the hexagon: nearest feasible grid point.
    const auto hex = hexagon_yield(0.8);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Vector2d x = random_vector(rng, 2, 1.5);
        const Dev proj = project_K(hex, from_coordinates(2, x));
        const Eigen::Vector2d pc = to_coordinates(proj);
        CHECK(hex.contains(proj, 1e-12));
        double best = 1e300;
        const int n = 801;
        const double R = hex.outer_radius();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Eigen::Vector2d z(-R + 2 * R * i / (n - 1), -R + 2 * R * j / (n - 1));
                if (hex.constraint_violation(from_coordinates(2, z)) <= 0.0)
                    best = std::min(best, (z - x).norm());
            }
        const double h = 2 * R / (n - 1);
        CHECK((pc - x).norm() <= best + 1e-12);
        CHECK((pc - x).norm() >= best - h);
        // idempotent
        CHECK(norm(project_K(hex, proj) - proj) <= 1e-13);
    }
}

TEST_CASE("normal cone membership")
{
    const auto vm = YieldSurface::von_mises(2, 1.0);
    std::mt19937 rng(8);
    const Dev q = 0.3 * unit_dev(2, rng);
    CHECK(in_normal_cone(vm, 0.2 * q, Dev::zero(2), 1e-10));
    CHECK(in_normal_cone(vm, q / norm(q), q, 1e-10));
    CHECK_FALSE(in_normal_cone(vm, 0.5 * (q / norm(q)), q, 1e-10));
    // Polytope corner: any q in the cone of active normals is accepted.
    const auto sq = square_yield();
    const Dev corner = from_coordinates(2, Eigen::Vector2d(1, 1));
    CHECK(in_normal_cone(sq, corner, from_coordinates(2, Eigen::Vector2d(0.3, 1.0)), 1e-10));
    CHECK(in_normal_cone(sq, corner, from_coordinates(2, Eigen::Vector2d(1.0, 0.0)), 1e-10));
    CHECK_FALSE(in_normal_cone(sq, corner, from_coordinates(2, Eigen::Vector2d(1.0, -0.2)), 1e-10));
}

TEST_CASE("minimum-norm subgradient")
{
    const auto sq = square_yield();
    // Face exposed by (1, 0) is the edge x = 1 between (1,-1) and (1,1): min-norm point (1, 0).
    CHECK((to_coordinates(min_norm_subgradient(sq, from_coordinates(2, Eigen::Vector2d(2, 0)))) -
           Eigen::Vector2d(1, 0))
              .norm() <= 1e-12);
    // Direction (1, 1) exposes the single vertex (1, 1).
    CHECK((to_coordinates(min_norm_subgradient(sq, from_coordinates(2, Eigen::Vector2d(1, 1)))) -
           Eigen::Vector2d(1, 1))
              .norm() <= 1e-12);

    // Hexagon: segment oracle on the exposed edge.
    const auto hex = hexagon_yield(0.8);
    std::mt19937 rng(12);
    for (int k = 0; k < 6; ++k) {
        const Dev nrm = hex.normals()[k];
        const Dev g = min_norm_subgradient(hex, nrm);
        CHECK(norm(g - 0.8 * nrm) <= 1e-10); // foot of the perpendicular lies inside the edge
    }
    const auto vm = YieldSurface::von_mises(2, 2.0);
    const Dev q = random_dev(rng, 2);
    CHECK(norm(min_norm_subgradient(vm, q) - 2.0 * q / norm(q)) <= 1e-14);
}

TEST_CASE("stress and quadratic form")
{
    const ElasticModuli m11(1.0, 1.0);
    CHECK(norm(stress(m11, Sym::zero(2))) == 0.0);
    const Sym s = stress(m11, Sym::identity(2));
    CHECK(s(0, 0) == 2.0);
    CHECK(s(1, 1) == 2.0);
    CHECK(s(0, 1) == 0.0);

    std::mt19937 rng(6);
    const Dev dfree = random_dev(rng, 2);
    CHECK(norm(stress(m11, dfree.sym()) - 2.0 * dfree.sym()) <= 1e-15);

    const ElasticModuli m(1.0, 0.5);
    const double d1[] = {1.0, -1.0, 0.0};
    CHECK(quad_Q(m, Sym::from_components(2, d1)) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(quad_Q(m, Sym::zero(2)) == 0.0);

    for (int dim : {2, 3}) {
        const ElasticModuli mm(0.7, 2.3);
        for (int k = 0; k < 100; ++k) {
            const Sym e = random_sym(rng, dim);
            const double q = quad_Q(mm, e);
            CHECK(q == doctest::Approx(0.5 * ddot(stress(mm, e), e)).epsilon(1e-13));
            CHECK(q >= mm.alpha_C(dim) * squared_norm(e) * (1 - 1e-13));
            CHECK(q <= mm.beta_C(dim) * squared_norm(e) * (1 + 1e-13));
            const Sym sg = stress(mm, e);
            CHECK(norm(deviator(sg) - 2 * mm.mu * deviator(e)) <= 1e-13 * norm(e));
            CHECK(trace(sg) == doctest::Approx(dim * mm.kappa * trace(e)).epsilon(1e-13).scale(1.0));
        }
    }
    CHECK_THROWS_AS(ElasticModuli(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("incremental update examples")
{
    const Material m = von_mises_material(2, 1.0, 1.0, 1.0);
    std::mt19937 rng(9);
    const Dev d = unit_dev(2, rng);

    SUBCASE("elastic step")
    {
        const auto up = incremental_update(m, 0.3 * d.sym(), Dev::zero(2));
        CHECK(norm(up.p) == 0.0);
        CHECK(up.dissipation == 0.0);
        CHECK_FALSE(up.plastic);
    }
    SUBCASE("plastic step against the golden-section ray oracle")
    {
        const Sym eps = 1.5 * d.sym();
        const auto up = incremental_update(m, eps, Dev::zero(2));
        // Along the ray p = s d the energy is (1.5 - s)^2 + |s|. Golden section on values
        // resolves the argmin to ~sqrt(eps); bisection on the one-sided slope
        // -2 (1.5 - s) + sign(s) then pins it to 1e-12.
        const double s_gold = golden_section([](double s) { return (1.5 - s) * (1.5 - s) + std::abs(s); }, -3, 3, 1e-12);
        double lo = s_gold - 1e-6, hi = s_gold + 1e-6;
        while (hi - lo > 1e-13) {
            const double mid = 0.5 * (lo + hi);
            (-2.0 * (1.5 - mid) + (mid > 0 ? 1.0 : -1.0) > 0 ? hi : lo) = mid;
        }
        const double s_star = 0.5 * (lo + hi);
        CHECK(s_gold == doctest::Approx(1.0).epsilon(1e-7));
        CHECK(norm(up.p - s_star * d) <= 1e-10);
        CHECK(norm(deviator(up.sigma) - d) <= 1e-12);
        CHECK(up.dissipation == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("elastic reload from a plastic state")
    {
        const Dev p_prev = 0.2 * d;
        const auto up = incremental_update(m, 0.5 * d.sym(), p_prev);
        // Energy along the ray is (0.5 - s)^2 + |s - 0.2|; its kink at s = 0.2 is the minimizer
        // (slopes -0.6 - 1 < 0 < -0.6 + 1), which golden section locates to its tolerance.
        const double s_star = golden_section(
            [](double s) { return (0.5 - s) * (0.5 - s) + std::abs(s - 0.2); }, -3, 3, 1e-13);
        CHECK(s_star == doctest::Approx(0.2).epsilon(1e-10));
        CHECK(up.p == p_prev);
    }
}

TEST_CASE("incremental update: oracle equivalence, flow rule, yield residence")
{
    std::mt19937 rng(10);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (int k = 0; k < 60; ++k) {
        const Material m = von_mises_material(2, u(rng), u(rng), u(rng));
        const Sym eps = random_sym(rng, 2, 1.5);
        const Dev p_prev = random_dev(rng, 2, 0.5);
        const auto up = incremental_update(m, eps, p_prev);
        const Dev oracle = brute_force_point_minimizer(m, eps, p_prev);
        CHECK(norm(up.p - oracle) <= 1e-6);
        CHECK(pointwise_energy(m, eps, up.p, p_prev) <= pointwise_energy(m, eps, oracle, p_prev) + 1e-8);
        const Dev dp = up.p - p_prev;
        if (norm(dp) > 0) {
            const Dev sD = deviator(up.sigma);
            CHECK(std::abs(ddot(sD, dp) - support_H(m.yield, dp)) <= 1e-10 * support_H(m.yield, dp));
            CHECK(std::abs(norm(sD) - m.yield.radius()) <= 1e-10);
        }
    }
}

TEST_CASE("incremental update: minimizer optimality under perturbation")
{
    std::mt19937 rng(13);
    for (int dim : {2, 3}) {
        for (int k = 0; k < 50; ++k) {
            const Material m = von_mises_material(dim, 1.0, 2.0, 0.8);
            const Sym eps = random_sym(rng, dim, 1.5);
            const Dev p_prev = random_dev(rng, dim, 0.3);
            const auto up = incremental_update(m, eps, p_prev);
            const double e0 = pointwise_energy(m, eps, up.p, p_prev);
            for (int j = 0; j < 20; ++j) {
                const Dev dir = unit_dev(dim, rng);
                CHECK(pointwise_energy(m, eps, up.p + 1e-3 * dir, p_prev) >= e0 - 1e-12);
            }
        }
    }
}

TEST_CASE("polyhedral incremental update matches the brute-force minimizer")
{
    std::mt19937 rng(14);
    const Material m{ElasticModuli(1.0, 1.0), hexagon_yield(0.8)};
    for (int k = 0; k < 30; ++k) {
        const Sym eps = random_sym(rng, 2, 1.5);
        const Dev p_prev = random_dev(rng, 2, 0.3);
        const auto up = incremental_update(m, eps, p_prev);
        const Dev oracle = brute_force_point_minimizer(m, eps, p_prev);
        CHECK(norm(up.p - oracle) <= 1e-6);
        const Dev sD = deviator(up.sigma);
        CHECK(m.yield.contains(sD, 1e-10));
        const Dev dp = up.p - p_prev;
        CHECK(std::abs(ddot(sD, dp) - support_H(m.yield, dp)) <= 1e-10 * (1 + support_H(m.yield, dp)));
        CHECK(in_normal_cone(m.yield, sD, dp, 1e-9));
    }
}

TEST_CASE("load-unload trace")
{
    const Material m = von_mises_material(2, 1.0, 1.0, 1.0);
    std::mt19937 rng(15);
    const Dev d = unit_dev(2, rng);
    const auto up1 = incremental_update(m, 1.5 * d.sym(), Dev::zero(2));
    const auto up2 = incremental_update(m, 0.5 * d.sym(), up1.p);
    // The trial stress lands on the opposite yield surface up to rounding.
    CHECK(norm(up2.p - up1.p) <= 1e-15);
    CHECK(norm(deviator(up2.sigma) + d) <= 1e-12);
    CHECK(norm(deviator(up2.sigma)) <= 1.0 + 1e-12);
}
