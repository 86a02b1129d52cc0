// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <sdfdc/sdfdc.hpp>

using namespace sdfdc;

namespace
{
    using Clock = std::chrono::steady_clock;

    double seconds_since(Clock::time_point t0)
    {
        return std::chrono::duration<double>(Clock::now() - t0).count();
    }

    constexpr std::size_t metric_samples = 200000;
    constexpr std::size_t edge_samples = 1000000;

    int failures = 0;

    void report(int id, const std::string & name, bool pass, const std::string & detail)
    {
        std::printf("%s  %2d %-34s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }

    std::string fmt(const char * f, auto... args)
    {
        char buf[512];
        std::snprintf(buf, sizeof buf, f, args...);
        return buf;
    }

    ShapeSpec rotated_cube()
    {
        return ShapeSpec::rotated_box(Vec3::Constant(0.5), Vec3::Constant(0.3), Vec3::UnitZ(), 30.0);
    }

    double edge_error(const TriMesh & m, const TriMesh & truth, double spacing)
    {
        EdgeChamferOptions o;
        o.samples = edge_samples;
        o.radius = 0.5 * spacing;
        return edge_chamfer(m, truth, o);
    }

    AnalyticSdf analytic(const ShapeSpec & spec)
    {
        return {[spec](const Vec3 & p) { return eval_sdf(spec, p); }, {}};
    }

    // ---------------------------------------------------------------- 1

    void sharp_box()
    {
        const ShapeSpec spec = ShapeSpec::box(Vec3::Constant(0.5), Vec3(0.30, 0.22, 0.18));
        const auto t0 = Clock::now();
        const SdfGrid grid = sample_to_grid(spec, GridSampling::unit_cube(5));
        const QuadMesh mesh = reconstruct(grid, ReconstructionConfig {});
        const double secs = seconds_since(t0);

        double worst_surface = 0.0;
        for (const Vec3 & v : mesh.vertices) worst_surface = std::max(worst_surface, std::abs(eval_sdf(spec, v)));
        double worst_corner = 0.0;
        for (int c = 0; c < 8; ++c)
        {
            const Vec3 corner = spec.center + Vec3(c & 1 ? 1 : -1, c & 2 ? 1 : -1, c & 4 ? 1 : -1).cwiseProduct(spec.half_extents);
            double nearest = 1e300;
            for (const Vec3 & v : mesh.vertices) nearest = std::min(nearest, (v - corner).norm());
            worst_corner = std::max(worst_corner, nearest);
        }
        report(1, "sharp-box recovery (5^3)", worst_surface <= 0.05 && worst_corner <= 0.08 && secs < 5.0,
               fmt("max |sdf(v)| %.3g (<=0.05), max corner miss %.3g (<=0.08), %.2fs", worst_surface, worst_corner, secs));
    }

    // ---------------------------------------------------------------- 2, 3, 4, 6, 7, 8

    void rotated_cube_suite()
    {
        const ShapeSpec spec = rotated_cube();
        const SdfGrid grid = sample_to_grid(spec, GridSampling::unit_cube(32));
        const double h = grid.spacing();
        const TriMesh truth = box_mesh(spec);

        const auto t0 = Clock::now();
        const ReconstructionResult ours = reconstruct_with_trace(grid, ReconstructionConfig {});
        const double ours_secs = seconds_since(t0);
        const TriMesh ours_tri = triangulate_quads(ours.mesh);
        const SurfaceDistances ours_d = surface_distances(ours_tri, truth, metric_samples, 0);
        const double ours_edge = edge_error(ours_tri, truth, h);

        const TriMesh mc = marching_cubes(grid);
        const double mc_edge = edge_error(mc, truth, h);
        const double t_ours_mc = seconds_since(t0);
        report(2, "grid-misaligned sharpness (32^3)",
               ours_edge <= 0.25 * mc_edge && ours_d.hausdorff() < 0.5 * h && t_ours_mc < 60.0,
               fmt("edge ours %.3g / mc %.3g = %.3f (<=0.25), hausdorff %.3f h (<0.5), %.1fs (reconstruct %.1fs)",
                   ours_edge, mc_edge, ours_edge / mc_edge, ours_d.hausdorff() / h, t_ours_mc, ours_secs));

        const TriMesh exact = triangulate_quads(dc_exact(analytic(spec), grid));
        const double exact_chamfer = chamfer(exact, truth, metric_samples, 0);
        const double exact_edge = edge_error(exact, truth, h);
        const double t_exact = seconds_since(t0);
        report(3, "exact-Hermite parity",
               ours_d.chamfer() <= 2.0 * exact_chamfer && ours_edge <= 3.0 * exact_edge && t_exact < 90.0,
               fmt("chamfer ours %.3g vs 2x exact %.3g; edge ours %.3g vs 3x exact %.3g; %.1fs", ours_d.chamfer(),
                   2.0 * exact_chamfer, ours_edge, 3.0 * exact_edge, t_exact));

        const TriMesh est = triangulate_quads(dc_estimated(grid));
        const double est_edge = edge_error(est, truth, h);
        report(4, "estimated-Hermite DC degradation", est_edge >= 2.0 * ours_edge,
               fmt("edge dc_estimated %.3g vs 2x ours %.3g (ratio %.2f)", est_edge, 2.0 * ours_edge, est_edge / ours_edge));

        const double r_first = ours.trace.front().mean_residual;
        const double r_last = ours.trace.back().mean_residual;
        report(6, "outer-loop improvement", r_last <= 0.5 * r_first,
               fmt("mean residual iter 1 %.3g -> final %.3g (%zu iterations)", r_first, r_last, ours.trace.size()));

        std::vector<double> sweep;
        for (double w : {0.005, 1.0})
        {
            ReconstructionConfig c;
            c.w_hermite = w;
            sweep.push_back(chamfer(triangulate_quads(reconstruct(grid, c)), truth, metric_samples, 0));
        }
        report(7, "ablation monotonicity (w_H)", sweep[1] >= 2.0 * ours_d.chamfer(),
               fmt("chamfer w_H=0.005 %.3g, 0.02 %.3g, 1.0 %.3g (ratio 1.0/0.02 = %.2f, need >=2)", sweep[0],
                   ours_d.chamfer(), sweep[1], sweep[1] / ours_d.chamfer()));

        ReconstructionConfig band;
        band.narrow_band = 2.0;
        const ReconstructionResult nb = reconstruct_with_trace(grid, band);
        const double nb_chamfer = chamfer(triangulate_quads(nb.mesh), truth, metric_samples, 0);
        const std::size_t full_assigned = ours.trace.front().assigned_samples;
        const std::size_t nb_assigned = nb.trace.front().assigned_samples;
        report(8, "narrow band", nb_chamfer <= 1.5 * ours_d.chamfer() && nb_assigned < full_assigned,
               fmt("chamfer band %.3g vs full %.3g (ratio %.2f, <=1.5); assigned %zu < %zu", nb_chamfer, ours_d.chamfer(),
                   nb_chamfer / ours_d.chamfer(), nb_assigned, full_assigned));
    }

    // ---------------------------------------------------------------- 5

    void smooth_sphere()
    {
        const ShapeSpec spec = ShapeSpec::sphere(Vec3::Constant(0.5), 0.4);
        const SdfGrid grid = sample_to_grid(spec, GridSampling::unit_cube(32));
        const TriMesh truth = sphere_mesh(spec.center, spec.radius, 256, 512);
        const double ours = chamfer(triangulate_quads(reconstruct(grid, ReconstructionConfig {})), truth, metric_samples, 0);
        const double mc = chamfer(marching_cubes(grid), truth, metric_samples, 0);
        report(5, "smooth-shape parity (sphere 32^3)", ours <= 1.5 * mc && ours < 0.01 && mc < 0.01,
               fmt("chamfer ours %.3g vs 1.5x mc %.3g", ours, 1.5 * mc));
    }

    // ---------------------------------------------------------------- 9

    void batching()
    {
        auto per_iteration = [](int n) {
            const SdfGrid grid = sample_to_grid(rotated_cube(), GridSampling::unit_cube(n));
            ReconstructionConfig c;
            c.batch_size = 50000;
            c.max_outer = 5;
            c.early_exit = false;
            const auto trace = reconstruct_with_trace(grid, c).trace;
            std::vector<double> secs;
            for (const auto & s : trace) secs.push_back(s.seconds);
            std::ranges::sort(secs);
            return secs[secs.size() / 2];
        };
        const double t48 = per_iteration(48);
        const double t64 = per_iteration(64);
        report(9, "batching complexity (48^3 -> 64^3)", t64 <= 2.5 * t48,
               fmt("median s/iteration %.3f -> %.3f (ratio %.2f, <=2.5; node ratio %.2f)", t48, t64, t64 / t48,
                   std::pow(64.0 / 48.0, 3)));
    }

    // ---------------------------------------------------------------- 10

    void inner_solver()
    {
        const auto t0 = Clock::now();
        const SdfGrid grid = sample_to_grid(rotated_cube(), GridSampling::unit_cube(16));
        ReconstructionConfig config;
        ReconstructionState state = initialize(grid);
        const QuadMesh global = build_global_mesh(grid, state.topology, state.vertices);
        const TriMesh tris = triangulate_quads(global);
        const ClosestPointIndex index(tris);
        const auto batch = select_batch(grid, config.batch_size, std::nullopt, 0, 0);
        const Assignment assignment = assign_samples(batch, grid, tris, index, state.topology.cells.size());

        double worst_gradient = 0.0;
        std::size_t increases = 0, steps = 0;
        for (std::size_t c = 0; c < state.topology.cells.size(); ++c)
        {
            const auto fis = compute_face_intersections(grid, state.topology, static_cast<int>(c), state.vertices);
            const LocalFrame frame = make_local_frame(fis, state.hermite);
            std::vector<HermitePlane> planes;
            for (int e : state.topology.cell_edges[c]) planes.push_back({state.hermite[e].point, state.hermite[e].normal});
            const auto & samples = assignment.per_cell[c];
            InnerOptions opts;
            opts.w_hermite = config.w_hermite;
            opts.mu = config.mu;
            opts.distance_weight = samples.empty() ? 1.0 : 1.0 / static_cast<double>(samples.size());
            const double w = opts.distance_weight;
            Vec3 x = state.vertices[c];
            std::vector<LinearTerm> terms;
            for (int r = 0; r < 20; ++r)
            {
                const InnerStep step = inner_step(frame, x, samples, planes, opts, terms);
                const Vec3 & next = step.x;
                // gradient of the step objective at the returned point, against the size of its parts
                Vec3 g = 2.0 * config.mu * (next - x);
                double scale = 2.0 * config.mu * (next.norm() + x.norm());
                for (const LinearTerm & t : terms)
                {
                    const double res = t.alpha * t.direction.dot(next) - t.rhs;
                    g += 2.0 * w * res * t.alpha * t.direction;
                    scale += 2.0 * w * t.alpha * (std::abs(t.alpha) * next.norm() + std::abs(t.rhs));
                }
                for (const HermitePlane & p : planes)
                {
                    g += 2.0 * config.w_hermite * p.normal.dot(next - p.point) * p.normal;
                    scale += 2.0 * config.w_hermite * (next.norm() + p.point.norm());
                }
                worst_gradient = std::max(worst_gradient, g.norm() / scale);
                ++steps;
                if (step.objective_after > step.objective_before) ++increases;
                if ((next - x).norm() <= 1e-4 * grid.spacing()) break;
                x = next;
            }
        }

        const Vec3 corner(0.31, -0.27, 0.55);
        const std::vector<HermitePlane> planes {{corner + Vec3(0, 0.4, 0.1), Vec3::UnitX()},
                                                {corner + Vec3(0.2, 0, -0.3), Vec3::UnitY()},
                                                {corner + Vec3(-0.1, 0.3, 0), Vec3::UnitZ()}};
        const double corner_err = (solve_qef(planes, Vec3(0.9, 0.1, -0.4), 0.05) - corner).norm();

        double worst_plane = 0.0;
        const Vec3 n = Vec3(0.3, -0.5, 0.8).normalized();
        for (int res : {4, 5, 9, 16})
        {
            const SdfGrid g = sample_field([&](const Vec3 & p) { return n.dot(p) - n.dot(Vec3(0.52, 0.47, 0.5)); },
                                           GridSampling::unit_cube(res));
            ReconstructionConfig pc;
            pc.max_outer = 10;
            for (const Vec3 & v : reconstruct(g, pc).vertices)
            {
                worst_plane = std::max(worst_plane, std::abs(n.dot(v - Vec3(0.52, 0.47, 0.5))) / g.spacing());
            }
        }
        const double secs = seconds_since(t0);
        report(10, "inner-solver correctness",
               worst_gradient < 1e-9 && increases == 0 && corner_err < 1e-6 && worst_plane < 1e-6 && secs < 10.0,
               fmt("(a) rel grad %.2g (b) %zu/%zu increases (c) corner err %.2g (d) plane err %.2g h; %.1fs",
                   worst_gradient, increases, steps, corner_err, worst_plane, secs));
    }

    // ---------------------------------------------------------------- 11

    void determinism()
    {
        const SdfGrid grid = sample_to_grid(rotated_cube(), GridSampling::unit_cube(16));
        const TriMesh truth = box_mesh(rotated_cube());
        auto run = [&](int threads) {
            ReconstructionConfig c;
            c.seed = 7;
            c.threads = threads;
            c.batch_size = 1500; // forces random subsets
            const ReconstructionResult r = reconstruct_with_trace(grid, c);
            MetricOptions mo;
            mo.samples = 20000;
            mo.seed = 7;
            mo.threads = threads;
            std::string text = to_obj_string(r.mesh) + metric_csv_row(evaluate(triangulate_quads(r.mesh), truth, &grid, mo));
            for (const auto & s : r.trace)
            {
                text += fmt("%d,%.17g,%.17g,%.17g\n", s.iteration, s.mean_residual, s.hermite_delta, s.converged_fraction);
            }
            return text;
        };
        const std::string a = run(1), b = run(1), c = run(4), d = run(4);
        report(11, "determinism", a == b && a == c && a == d,
               fmt("outputs identical: repeat %s, threads 1 vs 4 %s", a == b ? "yes" : "no", a == c && c == d ? "yes" : "no"));
    }

    // ---------------------------------------------------------------- 12

    void noise()
    {
        const ShapeSpec spec = rotated_cube();
        const SdfGrid clean = sample_to_grid(spec, GridSampling::unit_cube(32));
        const TriMesh truth = box_mesh(spec);
        std::vector<double> cd;
        bool finite = true;
        for (double eta : {0.001, 0.01})
        {
            const QuadMesh m = reconstruct(add_uniform_noise(clean, eta, 3), ReconstructionConfig {});
            for (const Vec3 & v : m.vertices) finite = finite && v.allFinite();
            cd.push_back(chamfer(triangulate_quads(m), truth, metric_samples, 0));
        }
        report(12, "noise sensitivity direction", finite && cd[1] > cd[0],
               fmt("chamfer eta=0.001 %.3g < eta=0.01 %.3g; finite %s", cd[0], cd[1], finite ? "yes" : "no"));
    }
} // namespace

int main()
{
    const std::vector<std::function<void()>> steps {sharp_box, rotated_cube_suite, smooth_sphere, batching, inner_solver,
                                                    determinism, noise};
    for (const auto & step : steps)
    {
        try
        {
            step();
        }
        catch (const std::exception & e)
        {
            std::printf("FAIL  -- exception: %s\n", e.what());
            ++failures;
        }
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
