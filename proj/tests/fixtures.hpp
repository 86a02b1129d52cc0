#pragma once

#include <random>

#include <sdfdc/sdfdc.hpp>

namespace fixtures
{
    using namespace sdfdc;

    inline ShapeSpec rotated_cube()
    {
        return ShapeSpec::rotated_box(Vec3::Constant(0.5), Vec3::Constant(0.3), Vec3::UnitZ(), 30.0);
    }

    inline ShapeSpec centered_sphere(double r = 0.35)
    {
        return ShapeSpec::sphere(Vec3::Constant(0.5), r);
    }

    inline SdfGrid sphere_grid(int n, double r = 0.35)
    {
        return sample_to_grid(centered_sphere(r), GridSampling::unit_cube(n));
    }

    inline SdfGrid cube_grid(int n)
    {
        return sample_to_grid(rotated_cube(), GridSampling::unit_cube(n));
    }

    /// Linear field n.(p - c) with unit n.
    inline SdfGrid plane_grid(int n, const Vec3 & normal, const Vec3 & c)
    {
        const Vec3 u = normal.normalized();
        return sample_field([&](const Vec3 & p) { return u.dot(p - c); }, GridSampling::unit_cube(n));
    }

    inline Vec3 random_unit(std::mt19937_64 & rng)
    {
        std::normal_distribution<double> g;
        Vec3 v(g(rng), g(rng), g(rng));
        return v.normalized();
    }

    inline Vec3 random_point(std::mt19937_64 & rng, double lo = 0.0, double hi = 1.0)
    {
        std::uniform_real_distribution<double> u(lo, hi);
        return {u(rng), u(rng), u(rng)};
    }
} // namespace fixtures
