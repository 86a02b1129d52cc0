#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace sdfdc;

namespace
{
    // dense barycentric grid; good to about edge/steps
    double dense_triangle_distance(const Vec3 & p, const Vec3 & a, const Vec3 & b, const Vec3 & c, int steps)
    {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= steps; ++i)
            for (int j = 0; i + j <= steps; ++j)
            {
                const double u = double(i) / steps, v = double(j) / steps;
                best = std::min(best, (a + u * (b - a) + v * (c - a) - p).norm());
            }
        return best;
    }

    TriMesh random_soup(std::mt19937_64 & rng, int n)
    {
        TriMesh m;
        for (int t = 0; t < n; ++t)
        {
            const Vec3 base = fixtures::random_point(rng);
            for (int c = 0; c < 3; ++c) m.vertices.push_back(base + 0.1 * fixtures::random_point(rng, -1, 1));
            m.triangles.push_back({3 * t, 3 * t + 1, 3 * t + 2});
        }
        return m;
    }
} // namespace

TEST(ClosestPoint, TriangleMatchesDenseSearch)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial)
    {
        const Vec3 a = fixtures::random_point(rng), b = fixtures::random_point(rng), c = fixtures::random_point(rng);
        const Vec3 p = fixtures::random_point(rng, -0.5, 1.5);
        const TriangleHit hit = closest_point_on_triangle(p, a, b, c);
        const double d = (hit.point - p).norm();
        const double dense = dense_triangle_distance(p, a, b, c, 300);
        EXPECT_LE(d, dense + 1e-12);
        EXPECT_GT(d, dense - 0.01);
        const auto & w = hit.barycentric;
        EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-12);
        for (double x : w) EXPECT_GE(x, -1e-12);
        EXPECT_LT((w[0] * a + w[1] * b + w[2] * c - hit.point).norm(), 1e-12);
    }
}

TEST(ClosestPoint, RegionExamples)
{
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    EXPECT_LT((closest_point_on_triangle({0.2, 0.2, 3}, a, b, c).point - Vec3(0.2, 0.2, 0)).norm(), 1e-15);
    EXPECT_LT((closest_point_on_triangle({-1, -1, 0}, a, b, c).point - a).norm(), 1e-15);
    EXPECT_LT((closest_point_on_triangle({1, 1, 0}, a, b, c).point - Vec3(0.5, 0.5, 0)).norm(), 1e-15);
    const TriangleHit edge = closest_point_on_triangle({0.5, -2, 1}, a, b, c);
    EXPECT_DOUBLE_EQ(edge.barycentric[2], 0.0);
}

TEST(ClosestPoint, DegenerateTriangleFallsBackToSegments)
{
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(2, 0, 0);
    const TriangleHit hit = closest_point_on_triangle({1.5, 1, 0}, a, b, c);
    EXPECT_LT((hit.point - Vec3(1.5, 0, 0)).norm(), 1e-12);
    const TriangleHit point = closest_point_on_triangle({0, 0, 1}, a, a, a);
    EXPECT_LT((point.point - a).norm(), 1e-15);
    EXPECT_TRUE(std::isfinite(point.barycentric[0]));
}

TEST(ClosestPoint, IndexAgreesWithBruteForce)
{
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> size(1, 200);
    for (int mesh = 0; mesh < 100; ++mesh)
    {
        const TriMesh m = random_soup(rng, size(rng));
        const ClosestPointIndex index(m);
        EXPECT_EQ(index.num_triangles(), m.num_triangles());
        for (int q = 0; q < 30; ++q)
        {
            const Vec3 p = fixtures::random_point(rng, -0.3, 1.3);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < m.triangles.size(); ++t)
                best = std::min(best, (closest_point_on_triangle(p, m.corner(t, 0), m.corner(t, 1), m.corner(t, 2)).point - p).squaredNorm());
            const ClosestHit hit = index.closest_point(p);
            ASSERT_GE(hit.triangle, 0);
            EXPECT_NEAR(hit.distance(), std::sqrt(best), 1e-12);
            const auto t = static_cast<std::size_t>(hit.triangle);
            const Vec3 rebuilt = hit.barycentric[0] * m.corner(t, 0) + hit.barycentric[1] * m.corner(t, 1) + hit.barycentric[2] * m.corner(t, 2);
            EXPECT_LT((rebuilt - hit.point).norm(), 1e-12);
        }
    }
}

TEST(ClosestPoint, EmptyMeshIsRejected)
{
    EXPECT_THROW(ClosestPointIndex(TriMesh {}), DomainError);
}
