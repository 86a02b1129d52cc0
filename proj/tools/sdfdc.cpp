// sdfdc: generate SDF grids, reconstruct meshes, run baselines, score results.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <sdfdc/sdfdc.hpp>

namespace
{
    using namespace sdfdc;

    enum ExitCode { Ok = 0, Usage = 1, Data = 2 };

    /// Thrown for flag combinations CLI11 cannot express.
    struct UsageError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct ConfigFlags
    {
        ReconstructionConfig config;
        double narrow_band = 0.0;
        bool no_early_exit = false;
        double tol = 0.0;
    };

    void add_config_flags(CLI::App & app, ConfigFlags & f)
    {
        ReconstructionConfig & c = f.config;
        app.add_option("--w-hermite", c.w_hermite, "Hermite energy weight")->capture_default_str()->check(CLI::NonNegativeNumber);
        app.add_option("--update-weight", c.update_weight, "Hermite update blend")->capture_default_str()->check(CLI::Range(0.0, 1.0));
        app.add_option("--mu", c.mu, "proximal weight")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--tol", f.tol, "step tolerance (default 1e-4 * spacing)")->check(CLI::NonNegativeNumber);
        app.add_option("--max-outer", c.max_outer, "outer iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
        app.add_option("--max-inner", c.max_inner, "inner iterations per cell")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--batch-size", c.batch_size, "samples per outer iteration")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--narrow-band", f.narrow_band, "use only nodes with |s| < n cell diagonals")->check(CLI::PositiveNumber);
        app.add_option("--seed", c.seed, "random seed")->capture_default_str();
        app.add_flag("--pseudo-sdf-interior", c.pseudo_sdf_interior, "drop interior samples from the distance energy");
        app.add_flag("--no-early-exit", f.no_early_exit, "always run max-outer iterations");
        app.add_flag("!--raw-distance-energy", c.normalize_hermite_by_count,
                     "sum instead of average the distance energy per cell");
        app.add_option("--threads", c.threads, "worker threads, 0 = all cores")->capture_default_str()->check(CLI::NonNegativeNumber);
    }

    ReconstructionConfig resolve(const CLI::App & app, const ConfigFlags & f)
    {
        ReconstructionConfig c = f.config;
        if (app.count("--narrow-band")) c.narrow_band = f.narrow_band;
        if (app.count("--tol")) c.tolerance = f.tol;
        c.early_exit = !f.no_early_exit;
        return c;
    }

    void write_text(const std::string & path, const std::string & text)
    {
        if (path.empty() || path == "-")
        {
            std::cout << text;
            return;
        }
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error("cannot write '" + path + "'");
        out << text;
    }

    void require_file(const std::string & path)
    {
        if (!std::filesystem::is_regular_file(path))
            throw UsageError("no such file: '" + path + "'");
    }

    void require_dir_of(const std::string & path)
    {
        if (path.empty() || path == "-") return;
        const auto parent = std::filesystem::path(path).parent_path();
        if (!parent.empty() && !std::filesystem::is_directory(parent))
            throw UsageError("output directory does not exist: '" + parent.string() + "'");
    }

    std::string trace_csv(const std::vector<IterationStats> & trace)
    {
        std::ostringstream out;
        out.precision(10);
        out << "iter,mean_residual,hermite_delta,converged_frac,seconds\n";
        for (const IterationStats & s : trace)
        {
            out << s.iteration << ',' << s.mean_residual << ',' << s.hermite_delta << ',' << s.converged_fraction << ','
                << s.seconds << '\n';
        }
        return out.str();
    }

    // ---- gen ----

    struct GenArgs
    {
        std::string shape;
        std::string spec_path;
        std::string mesh_path;
        std::vector<double> center {0.5, 0.5, 0.5};
        double radius = 0.4;
        std::vector<double> half_extents {0.3, 0.3, 0.3};
        std::vector<double> axis {0.0, 0.0, 1.0};
        double angle = 0.0;
        int dims = 32;
        double noise = 0.0;
        std::uint64_t seed = 0;
        std::string format = "bin";
        std::string out;
        int threads = 0;
    };

    Vec3 vec(const std::vector<double> & v) { return {v[0], v[1], v[2]}; }

    int run_gen(const GenArgs & a)
    {
        require_dir_of(a.out);
        GridSampling sampling = GridSampling::unit_cube(a.dims);
        auto sample = [&]() {
            if (!a.mesh_path.empty())
            {
                require_file(a.mesh_path);
                return mesh_to_sdf(load_obj(a.mesh_path), sampling, a.threads);
            }
            ShapeSpec spec;
            if (!a.spec_path.empty())
            {
                require_file(a.spec_path);
                spec = load_shape_spec(a.spec_path);
            }
            else if (a.shape == "sphere") spec = ShapeSpec::sphere(vec(a.center), a.radius);
            else if (a.shape == "box") spec = ShapeSpec::box(vec(a.center), vec(a.half_extents));
            else spec = ShapeSpec::rotated_box(vec(a.center), vec(a.half_extents), vec(a.axis), a.angle);
            if (spec.bounds) sampling.bounds = *spec.bounds;
            return sample_to_grid(spec, sampling, a.threads);
        };
        SdfGrid grid = sample();
        if (a.noise > 0.0) grid = add_uniform_noise(grid, a.noise, a.seed);
        save_grid(grid, a.out, a.format == "text" ? GridFormat::Text : GridFormat::Binary);
        return Ok;
    }

    // ---- reconstruct / baseline ----

    struct ReconArgs
    {
        ConfigFlags flags;
        std::string in;
        std::string out;
        std::string method = "ours";
        std::string spec_path;
        double noise = 0.0;
        std::string trace;
    };

    /// OBJ text of the chosen reconstructor's output.
    std::string run_method(const std::string & method, const SdfGrid & grid, const ReconstructionConfig & config,
                           const std::string & spec_path, std::vector<IterationStats> * trace)
    {
        if (method == "ours")
        {
            ReconstructionResult r = reconstruct_with_trace(grid, config);
            if (trace) *trace = std::move(r.trace);
            return to_obj_string(r.mesh);
        }
        if (method == "mc") return to_obj_string(marching_cubes(grid));
        if (method == "dc-est") return to_obj_string(dc_estimated(grid, 0.05, config.threads));
        const ShapeSpec spec = load_shape_spec(spec_path);
        const AnalyticSdf sdf {[&](const Vec3 & p) { return eval_sdf(spec, p); }, {}};
        return to_obj_string(dc_exact(sdf, grid, 0.05, config.threads));
    }

    SdfGrid load_input(const std::string & path, double noise, std::uint64_t seed)
    {
        require_file(path);
        SdfGrid grid = load_grid(path);
        if (noise > 0.0) grid = add_uniform_noise(grid, noise, seed);
        return grid;
    }

    int run_reconstruct(const CLI::App & app, const ReconArgs & a)
    {
        const ReconstructionConfig config = resolve(app, a.flags);
        if (a.method == "dc-exact")
        {
            if (a.spec_path.empty())
                throw UsageError("--method dc-exact needs --spec with the analytic shape");
            require_file(a.spec_path);
        }
        if (!a.trace.empty() && a.method != "ours")
            throw UsageError("--trace is only available with --method ours");
        require_dir_of(a.out);
        require_dir_of(a.trace);
        config.validate();
        const SdfGrid grid = load_input(a.in, a.noise, config.seed);
        std::vector<IterationStats> trace;
        write_text(a.out, run_method(a.method, grid, config, a.spec_path, &trace));
        if (!a.trace.empty()) write_text(a.trace, trace_csv(trace));
        return Ok;
    }

    // ---- metrics ----

    struct MetricArgs
    {
        std::string mesh;
        std::string ref;
        std::string grid;
        std::string csv;
        std::string shape;
        std::string method;
        std::size_t samples = MetricOptions {}.samples;
        std::uint64_t seed = 0;
        double edge_radius = 0.0;
        int threads = 0;
        bool header = true;
    };

    int run_metrics(const CLI::App & app, const MetricArgs & a)
    {
        require_file(a.mesh);
        require_file(a.ref);
        if (!a.grid.empty()) require_file(a.grid);
        require_dir_of(a.csv);
        const TriMesh mesh = load_obj(a.mesh);
        const TriMesh ref = load_obj(a.ref);
        std::optional<SdfGrid> grid;
        if (!a.grid.empty()) grid = load_grid(a.grid);
        MetricOptions opts;
        opts.samples = a.samples;
        opts.seed = a.seed;
        opts.threads = a.threads;
        if (app.count("--edge-radius")) opts.edge_radius = a.edge_radius;
        MetricReport r = evaluate(mesh, ref, grid ? &*grid : nullptr, opts);
        r.shape = a.shape.empty() ? std::filesystem::path(a.ref).stem().string() : a.shape;
        r.method = a.method.empty() ? std::filesystem::path(a.mesh).stem().string() : a.method;
        if (grid) r.resolution = grid->dims()[0];
        std::string text;
        if (a.header) text = std::string(metric_csv_header()) + '\n';
        write_text(a.csv, text + metric_csv_row(r) + '\n');
        return Ok;
    }

    // ---- ablate ----

    struct AblateArgs
    {
        ReconArgs recon;
        std::string ref;
        std::string param;
        std::vector<double> values;
        std::string csv;
        std::size_t samples = MetricOptions {}.samples;
        bool no_timing = false;
    };

    void apply_param(ReconstructionConfig & c, double & noise, const std::string & name, double v)
    {
        if (name == "w-hermite") c.w_hermite = v;
        else if (name == "update-weight") c.update_weight = v;
        else if (name == "mu") c.mu = v;
        else if (name == "tol") c.tolerance = v;
        else if (name == "max-outer") c.max_outer = static_cast<int>(v);
        else if (name == "max-inner") c.max_inner = static_cast<int>(v);
        else if (name == "batch-size") c.batch_size = static_cast<std::size_t>(v);
        else if (name == "narrow-band") c.narrow_band = v;
        else noise = v;
    }

    int run_ablate(const CLI::App & app, const AblateArgs & a)
    {
        const ReconstructionConfig base = resolve(app, a.recon.flags);
        require_file(a.ref);
        require_file(a.recon.in);
        require_dir_of(a.csv);
        const TriMesh ref = load_obj(a.ref);
        const SdfGrid clean = load_grid(a.recon.in);

        std::ostringstream out;
        out.precision(10);
        out << a.param << ",chamfer,hausdorff,edge_chamfer,sdf_energy,vertices,seconds\n";
        for (double v : a.values)
        {
            ReconstructionConfig config = base;
            double noise = a.recon.noise;
            apply_param(config, noise, a.param, v);
            config.validate();
            const SdfGrid grid = noise > 0.0 ? add_uniform_noise(clean, noise, config.seed) : clean;
            const auto t0 = std::chrono::steady_clock::now();
            const QuadMesh mesh = reconstruct(grid, config);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            MetricOptions opts;
            opts.samples = a.samples;
            opts.seed = config.seed;
            opts.threads = config.threads;
            const MetricReport r = evaluate(triangulate_quads(mesh), ref, &clean, opts);
            out << v << ',' << r.chamfer << ',' << r.hausdorff << ',' << r.edge_chamfer << ',' << r.sdf_energy << ','
                << r.vertices << ',' << (a.no_timing ? 0.0 : secs) << '\n';
        }
        write_text(a.csv, out.str());
        return Ok;
    }

    // ---- unknown flag suggestions ----

    std::size_t edit_distance(const std::string & a, const std::string & b)
    {
        std::vector<std::size_t> row(b.size() + 1);
        for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
        for (std::size_t i = 1; i <= a.size(); ++i)
        {
            std::size_t diag = row[0];
            row[0] = i;
            for (std::size_t j = 1; j <= b.size(); ++j)
            {
                const std::size_t up = row[j];
                row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
                diag = up;
            }
        }
        return row[b.size()];
    }

    std::string suggestion(const CLI::App & app, const std::vector<std::string> & extras)
    {
        const CLI::App * scope = &app;
        for (const CLI::App * sub : app.get_subcommands())
        {
            if (sub->parsed()) scope = sub;
        }
        for (const std::string & arg : extras)
        {
            if (arg.rfind("--", 0) != 0) continue;
            const std::string flag = arg.substr(0, arg.find('='));
            std::string best;
            std::size_t best_d = 4;
            for (const CLI::Option * opt : scope->get_options())
            {
                for (const std::string & name : opt->get_lnames())
                {
                    const std::size_t d = edit_distance(flag, "--" + name);
                    if (d < best_d)
                    {
                        best_d = d;
                        best = "--" + name;
                    }
                }
            }
            if (!best.empty()) return "did you mean '" + best + "' instead of '" + flag + "'?";
        }
        return {};
    }
} // namespace

int main(int argc, char ** argv)
{
    CLI::App app {"Iterative dual contouring of sampled signed distance grids"};
    app.require_subcommand(1);
    app.allow_extras(false);

    GenArgs gen;
    CLI::App * gen_cmd = app.add_subcommand("gen", "sample an analytic shape or a watertight mesh onto a grid");
    auto * shape_opt = gen_cmd->add_option("--shape", gen.shape, "built-in shape")->check(CLI::IsMember({"sphere", "box", "rotated-box"}));
    auto * spec_opt = gen_cmd->add_option("--spec", gen.spec_path, "shape spec file");
    auto * mesh_opt = gen_cmd->add_option("--mesh", gen.mesh_path, "watertight OBJ mesh");
    shape_opt->excludes(spec_opt)->excludes(mesh_opt);
    spec_opt->excludes(mesh_opt);
    gen_cmd->add_option("--center", gen.center, "shape center")->expected(3)->capture_default_str();
    gen_cmd->add_option("--radius", gen.radius, "sphere radius")->capture_default_str()->check(CLI::PositiveNumber);
    gen_cmd->add_option("--half-extents", gen.half_extents, "box half extents")->expected(3)->capture_default_str();
    gen_cmd->add_option("--axis", gen.axis, "rotation axis")->expected(3)->capture_default_str();
    gen_cmd->add_option("--angle", gen.angle, "rotation angle in degrees")->capture_default_str();
    gen_cmd->add_option("--dims", gen.dims, "nodes per axis over the unit cube")->capture_default_str()->check(CLI::Range(2, 4096));
    gen_cmd->add_option("--noise", gen.noise, "additive uniform noise amplitude")->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--seed", gen.seed, "noise seed")->capture_default_str();
    gen_cmd->add_option("--format", gen.format, "grid encoding")->capture_default_str()->check(CLI::IsMember({"bin", "text"}));
    gen_cmd->add_option("--out", gen.out, "output SDFG file")->required();
    gen_cmd->add_option("--threads", gen.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);

    ReconArgs recon;
    CLI::App * recon_cmd = app.add_subcommand("reconstruct", "reconstruct a mesh from an SDFG grid");
    ReconArgs base;
    CLI::App * base_cmd = app.add_subcommand("baseline", "run a reference reconstructor");
    for (auto [cmd, args] : {std::pair {recon_cmd, &recon}, std::pair {base_cmd, &base}})
    {
        cmd->add_option("--in", args->in, "input SDFG file")->required();
        cmd->add_option("--out", args->out, "output OBJ file ('-' for stdout)")->required();
        cmd->add_option("--spec", args->spec_path, "analytic shape spec (for dc-exact)");
        cmd->add_option("--noise", args->noise, "additive uniform noise on the input values")->check(CLI::NonNegativeNumber);
        add_config_flags(*cmd, args->flags);
    }
    recon_cmd->add_option("--method", recon.method, "reconstructor")->capture_default_str()
        ->check(CLI::IsMember({"ours", "mc", "dc-est", "dc-exact"}));
    recon_cmd->add_option("--trace", recon.trace, "per-iteration CSV");
    base.method = "mc";
    base_cmd->add_option("--method", base.method, "reconstructor")->capture_default_str()
        ->check(CLI::IsMember({"mc", "dc-est", "dc-exact"}));

    MetricArgs met;
    CLI::App * met_cmd = app.add_subcommand("metrics", "score a mesh against a reference mesh");
    met_cmd->add_option("--mesh", met.mesh, "mesh to score")->required();
    met_cmd->add_option("--ref", met.ref, "reference mesh")->required();
    met_cmd->add_option("--grid", met.grid, "SDFG grid for the sdf energy column");
    met_cmd->add_option("--csv", met.csv, "output CSV ('-' or omitted for stdout)");
    met_cmd->add_option("--shape", met.shape, "shape label");
    met_cmd->add_option("--method", met.method, "method label");
    met_cmd->add_option("--samples", met.samples, "surface samples per mesh")->capture_default_str()->check(CLI::PositiveNumber);
    met_cmd->add_option("--seed", met.seed, "sampling seed")->capture_default_str();
    met_cmd->add_option("--edge-radius", met.edge_radius, "sharp-edge band radius")->check(CLI::PositiveNumber);
    met_cmd->add_option("--threads", met.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    met_cmd->add_flag("!--no-header", met.header, "omit the CSV header");

    AblateArgs abl;
    CLI::App * abl_cmd = app.add_subcommand("ablate", "sweep one parameter and report metrics per value");
    abl_cmd->add_option("--in", abl.recon.in, "input SDFG file")->required();
    abl_cmd->add_option("--ref", abl.ref, "reference mesh")->required();
    abl_cmd->add_option("--param", abl.param, "parameter to sweep")->required()
        ->check(CLI::IsMember({"w-hermite", "update-weight", "mu", "tol", "max-outer", "max-inner", "batch-size", "narrow-band", "noise"}));
    abl_cmd->add_option("--values", abl.values, "values to try")->required();
    abl_cmd->add_option("--csv", abl.csv, "output CSV ('-' or omitted for stdout)");
    abl_cmd->add_option("--noise", abl.recon.noise, "additive uniform noise on the input values")->check(CLI::NonNegativeNumber);
    abl_cmd->add_option("--samples", abl.samples, "surface samples per mesh")->capture_default_str()->check(CLI::PositiveNumber);
    abl_cmd->add_flag("--no-timing", abl.no_timing, "write 0 in the seconds column");
    add_config_flags(*abl_cmd, abl.recon.flags);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp & e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp & e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError & e)
    {
        std::cerr << "error: " << e.what() << '\n';
        if (const std::string hint = suggestion(app, app.remaining()); !hint.empty()) std::cerr << hint << '\n';
        else if (auto * ex = dynamic_cast<const CLI::ExtrasError *>(&e))
        {
            std::vector<std::string> extras;
            std::string msg = ex->what();
            for (std::size_t p = msg.find("--"); p != std::string::npos; p = msg.find("--", p + 2))
            {
                extras.push_back(msg.substr(p, msg.find_first_of(" ,\n", p) - p));
            }
            if (const std::string h = suggestion(app, extras); !h.empty()) std::cerr << h << '\n';
        }
        std::cerr << "run with --help for usage\n";
        return Usage;
    }

    try
    {
        if (gen_cmd->parsed())
        {
            if (gen.shape.empty() && gen.spec_path.empty() && gen.mesh_path.empty())
                throw UsageError("gen needs one of --shape, --spec or --mesh");
            return run_gen(gen);
        }
        if (recon_cmd->parsed()) return run_reconstruct(*recon_cmd, recon);
        if (base_cmd->parsed()) return run_reconstruct(*base_cmd, base);
        if (met_cmd->parsed()) return run_metrics(*met_cmd, met);
        return run_ablate(*abl_cmd, abl);
    }
    catch (const UsageError & e)
    {
        std::cerr << "error: " << e.what() << "\nrun with --help for usage\n";
        return Usage;
    }
    catch (const PreconditionError & e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return Usage;
    }
    catch (const std::exception & e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return Data;
    }
}
