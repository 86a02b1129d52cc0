#include <gtest/gtest.h>

#include <numbers>

#include "fixtures.hpp"

using namespace sdfdc;

namespace
{
    SdfGrid edge_grid(double sa, double sb)
    {
        // 2x2x2 unit grid whose x-edge at the origin carries (sa, sb); the rest mirrors it along y and z
        std::vector<double> v(8);
        for (int n = 0; n < 8; ++n) v[n] = (n & 1) ? sb : sa;
        return SdfGrid({2, 2, 2}, Vec3::Zero(), 1.0, v);
    }

    double plane_residual(std::span<const Vec3> pts, const Vec3 & n)
    {
        Vec3 c = Vec3::Zero();
        for (const Vec3 & p : pts) c += p;
        c /= static_cast<double>(pts.size());
        double r = 0.0;
        for (const Vec3 & p : pts) r += std::pow(n.dot(p - c), 2);
        return r;
    }
} // namespace

TEST(HermitePoint, RootOfTheLinearInterpolant)
{
    const EdgeId e {{0, 0, 0}, Axis::X};
    EXPECT_LT((estimate_hermite_point(edge_grid(-1, 1), e) - Vec3(0.5, 0, 0)).norm(), 1e-15);
    EXPECT_LT((estimate_hermite_point(edge_grid(-0.25, 0.75), e) - Vec3(0.25, 0, 0)).norm(), 1e-15);
    const Vec3 snapped = estimate_hermite_point(edge_grid(0.0, 1.0), e);
    EXPECT_GE(snapped.x(), 0.0);
    EXPECT_LT(snapped.x(), 1e-11);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(1e-6, 3.0);
    for (int trial = 0; trial < 100; ++trial)
    {
        const double sa = -u(rng), sb = u(rng);
        const double t = estimate_hermite_point(edge_grid(sa, sb), e).x();
        EXPECT_GT(t, 0.0);
        EXPECT_LT(t, 1.0);
        EXPECT_NEAR((1 - t) * sa + t * sb, 0.0, 1e-12 * (std::abs(sa) + sb));
    }
}

TEST(HermitePoint, RejectsEdgesWithoutSignChange)
{
    EXPECT_THROW(estimate_hermite_point(edge_grid(1, 2), {{0, 0, 0}, Axis::X}), PreconditionError);
    EXPECT_THROW(estimate_hermite_point(edge_grid(-1, 2), {{1, 0, 0}, Axis::X}), PreconditionError);
}

TEST(HermiteNormal, ExactOnLinearFields)
{
    const SdfGrid g = sample_field([](const Vec3 & p) { return p.x() - 0.4; }, GridSampling::unit_cube(5));
    const SurfaceTopology t = find_surface_topology(g);
    const auto hermite = estimate_hermite_data(g, t);
    for (std::size_t e = 0; e < t.edges.size(); ++e)
    {
        EXPECT_LT((hermite[e].normal - Vec3::UnitX()).norm(), 1e-12);
        EXPECT_NEAR(hermite[e].point.x(), 0.4, 1e-12);
        if (!t.is_interior(static_cast<int>(e))) EXPECT_LT(t.incident_cells(static_cast<int>(e)).size(), 4u);
    }
}

TEST(HermiteNormal, CloseToTheSphereNormal)
{
    const ShapeSpec s = fixtures::centered_sphere(0.4);
    const SdfGrid g = sample_to_grid(s, GridSampling::unit_cube(32));
    const SurfaceTopology t = find_surface_topology(g);
    const auto hermite = estimate_hermite_data(g, t);
    double worst = 0.0;
    for (const HermiteSample & h : hermite)
    {
        const Vec3 radial = (h.point - s.center).normalized();
        worst = std::max(worst, std::acos(std::clamp(radial.dot(h.normal), -1.0, 1.0)));
        EXPECT_NEAR(h.normal.norm(), 1.0, 1e-9);
    }
    EXPECT_LT(worst, 5.0 * std::numbers::pi / 180.0);
}

TEST(HermiteNormal, DegenerateGradientFallsBack)
{
    // symmetric saddle: the trilinear gradients around the centre edge cancel
    std::vector<double> v(27);
    const SdfGrid shape({3, 3, 3}, Vec3::Zero(), 1.0, v);
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 3; ++i) v[shape.flat_index(i, j, k)] = (i == 1 && j == 1 && k <= 1) ? -1.0 : 1.0;
    const SdfGrid g({3, 3, 3}, Vec3::Zero(), 1.0, v);
    const EdgeId e {{1, 1, 1}, Axis::Z};
    const Vec3 h = estimate_hermite_point(g, e);
    std::vector<CellId> cells {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    const Vec3 n = estimate_hermite_normal(g, e, h, cells);
    EXPECT_GT(n.z(), 0.99);
    EXPECT_THROW(estimate_hermite_normal(g, e, h, std::span<const CellId> {}), PreconditionError);
    const Vec3 fb = fallback_hermite_normal(g, e, h);
    EXPECT_NEAR(fb.norm(), 1.0, 1e-12);
    EXPECT_GT(fb.z(), 0.0);
}

TEST(PlaneFit, CoplanarAndDegenerate)
{
    const std::vector<Vec3> pts {{0, 0, 2}, {1, 0, 2}, {1, 3, 2}, {-2, 1, 2}};
    const PlaneFit f = fit_plane_pca(pts);
    EXPECT_NEAR(std::abs(f.normal.z()), 1.0, 1e-12);
    EXPECT_NEAR(f.centroid.z(), 2.0, 1e-15);
    const std::vector<Vec3> same(4, Vec3(1, 2, 3));
    EXPECT_THROW(fit_plane_pca(same), DegenerateError);
    const std::vector<Vec3> line {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
    EXPECT_THROW(fit_plane_pca(line), DegenerateError);
}

TEST(PlaneFit, MatchesDirectionSweep)
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial)
    {
        std::vector<Vec3> pts;
        for (int i = 0; i < 4; ++i) pts.push_back(fixtures::random_point(rng));
        const double fitted = plane_residual(pts, fit_plane_pca(pts).normal);
        // coarse sweep, then refine around the best direction
        Vec3 best = Vec3::UnitZ();
        double best_r = plane_residual(pts, best);
        double step = std::numbers::pi / 200.0;
        double theta0 = 0.0, phi0 = 0.0;
        for (int round = 0; round < 6; ++round)
        {
            const double range = round == 0 ? std::numbers::pi : 20 * step;
            const double t_lo = round == 0 ? 0.0 : theta0 - range / 2, p_lo = round == 0 ? 0.0 : phi0 - range;
            const double t_hi = round == 0 ? std::numbers::pi : theta0 + range / 2, p_hi = round == 0 ? 2 * std::numbers::pi : phi0 + range;
            for (double th = t_lo; th <= t_hi; th += step)
                for (double ph = p_lo; ph <= p_hi; ph += step)
                {
                    const Vec3 n(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
                    const double r = plane_residual(pts, n);
                    if (r < best_r)
                    {
                        best_r = r;
                        best = n;
                        theta0 = th;
                        phi0 = ph;
                    }
                }
            step /= 10.0;
        }
        EXPECT_LE(fitted, best_r + 1e-12);
        EXPECT_NEAR(fitted, best_r, 1e-6);
    }
}

TEST(HermiteUpdate, LiteralBlendExamples)
{
    const Vec3 a(0, 0, 0), b(1, 0, 0);
    // plane x = 0.5 through four points, tilted normal guess
    const std::vector<Vec3> quad {{0.5, -1, -1}, {0.5, 1, -1}, {0.5, 1, 1}, {0.5, -1, 1}};
    HermiteSample prev {{{0, 0, 0}, Axis::X}, a, Vec3(1, 1, 0).normalized()};

    const HermiteSample half = update_hermite(prev, a, b, quad, 0.5);
    EXPECT_LT((half.point - Vec3(0.25, 0, 0)).norm(), 1e-12);
    EXPECT_LT((half.normal - (Vec3::UnitX() + 0.5 * prev.normal).normalized()).norm(), 1e-12);

    const HermiteSample zero = update_hermite(prev, a, b, quad, 0.0);
    EXPECT_EQ(zero.point, prev.point);
    EXPECT_LT((zero.normal - Vec3::UnitX()).norm(), 1e-12);

    const HermiteSample one = update_hermite(prev, a, b, quad, 1.0);
    EXPECT_LT((one.point - Vec3(0.5, 0, 0)).norm(), 1e-12);

    // sign alignment: previous normal pointing to -x flips the PCA normal
    prev.normal = -Vec3::UnitX();
    EXPECT_LT((update_hermite(prev, a, b, quad, 0.0).normal + Vec3::UnitX()).norm(), 1e-12);
}

TEST(HermiteUpdate, ClampsParallelAndDegenerateCases)
{
    const Vec3 a(0, 0, 0), b(1, 0, 0);
    const HermiteSample prev {{{0, 0, 0}, Axis::X}, Vec3(0.3, 0, 0), Vec3::UnitX()};
    const std::vector<Vec3> far {{3, -1, -1}, {3, 1, -1}, {3, 1, 1}, {3, -1, 1}};
    EXPECT_LT((update_hermite(prev, a, b, far, 1.0).point - b).norm(), 1e-12);

    const std::vector<Vec3> parallel {{0, 1, -1}, {1, 1, -1}, {1, 1, 1}, {0, 1, 1}};
    const HermiteSample p = update_hermite(prev, a, b, parallel, 0.5);
    EXPECT_EQ(p.point, prev.point);
    EXPECT_NEAR(p.normal.norm(), 1.0, 1e-12);

    const std::vector<Vec3> coincident(4, Vec3(0.5, 0, 0));
    const HermiteSample d = update_hermite(prev, a, b, coincident, 0.5);
    EXPECT_EQ(d.point, prev.point);
    EXPECT_EQ(d.normal, prev.normal);
}

TEST(HermiteUpdate, IdempotentOnAConsistentPlane)
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial)
    {
        const Vec3 n = fixtures::random_unit(rng);
        if (std::abs(n.x()) < 0.2) continue;
        const Vec3 h(0.37, 0, 0);
        const Vec3 t1 = n.unitOrthogonal(), t2 = n.cross(t1);
        const std::vector<Vec3> quad {h + t1, h + t2, h - t1, h - t2};
        const HermiteSample prev {{{0, 0, 0}, Axis::X}, h, n};
        const HermiteSample next = update_hermite(prev, Vec3::Zero(), Vec3::UnitX(), quad, 0.3);
        EXPECT_LT((next.point - h).norm(), 1e-12);
        EXPECT_LT((next.normal - n).norm(), 1e-12);
    }
}

TEST(HermiteUpdate, PlaneGridLandsOnThePlaneInOneStep)
{
    const Vec3 n = Vec3(0.2, 0.9, -0.4).normalized();
    const Vec3 c(0.5, 0.45, 0.52);
    const SdfGrid g = fixtures::plane_grid(7, n, c);
    ReconstructionState s = initialize(g);
    // slide every point to its edge start, then one full update pass from the exact vertices
    for (HermiteSample & h : s.hermite) h.point = g.edge_endpoints(h.edge).first;
    for (std::size_t e = 0; e < s.topology.edges.size(); ++e)
    {
        std::vector<Vec3> pts;
        for (int cell : s.topology.incident_cells(static_cast<int>(e))) pts.push_back(s.vertices[cell]);
        const auto [a, b] = g.edge_endpoints(s.topology.edges[e]);
        const HermiteSample u = update_hermite(s.hermite[e], a, b, pts, 1.0);
        if (pts.size() < 3) continue;
        EXPECT_LT(std::abs(n.dot(u.point - c)), 1e-9 * g.diagonal());
        EXPECT_LT((u.normal - n).norm(), 1e-9);
    }
}
