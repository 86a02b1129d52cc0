#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "fixtures.hpp"

using namespace sdfdc;
namespace fs = std::filesystem;

namespace
{
    struct CliResult
    {
        int code;
        std::string output;
    };

    CliResult cli(const std::string & args)
    {
        const std::string cmd = std::string(SDFDC_CLI_PATH) + " " + args + " 2>&1";
        FILE * pipe = popen(cmd.c_str(), "r");
        if (!pipe) return {-1, ""};
        std::string out;
        char buf[4096];
        while (const std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
        const int status = pclose(pipe);
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
    }

    std::string slurp(const fs::path & p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    class Cli : public ::testing::Test
    {
    protected:
        void SetUp() override
        {
            dir = fs::temp_directory_path() / ("sdfdc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
            fs::create_directories(dir);
        }
        void TearDown() override { fs::remove_all(dir); }

        std::string path(const std::string & name) const { return (dir / name).string(); }

        fs::path dir;
    };
} // namespace

TEST_F(Cli, GenWritesTheSampledGrid)
{
    ASSERT_EQ(cli("gen --shape sphere --radius 0.3 --dims 9 --out " + path("s.sdfg")).code, 0);
    const SdfGrid g = load_grid(path("s.sdfg"));
    const SdfGrid expected = sample_to_grid(ShapeSpec::sphere(Vec3::Constant(0.5), 0.3), GridSampling::unit_cube(9));
    EXPECT_EQ(serialize_grid(g, GridFormat::Binary), serialize_grid(expected, GridFormat::Binary));

    ASSERT_EQ(cli("gen --shape sphere --radius 0.3 --dims 9 --format text --out " + path("s.txt")).code, 0);
    EXPECT_EQ(slurp(path("s.txt")), serialize_grid(expected, GridFormat::Text));

    std::ofstream(path("shape.txt")) << "kind=box\ncenter=0.5 0.5 0.5\nhalf_extents=0.2 0.3 0.25\n";
    ASSERT_EQ(cli("gen --spec " + path("shape.txt") + " --dims 7 --out " + path("b.sdfg")).code, 0);
    EXPECT_NEAR(load_grid(path("b.sdfg")).value({3, 3, 3}), -0.2, 1e-15);
}

TEST_F(Cli, ReconstructIsDeterministic)
{
    ASSERT_EQ(cli("gen --shape rotated-box --dims 12 --noise 0.002 --seed 5 --out " + path("c.sdfg")).code, 0);
    const std::string flags = " --max-outer 3 --batch-size 800 --seed 2 --in " + path("c.sdfg");
    ASSERT_EQ(cli("reconstruct" + flags + " --threads 1 --out " + path("a.obj") + " --trace " + path("a.csv")).code, 0);
    ASSERT_EQ(cli("reconstruct" + flags + " --threads 3 --out " + path("b.obj")).code, 0);
    EXPECT_EQ(slurp(path("a.obj")), slurp(path("b.obj")));
    EXPECT_FALSE(slurp(path("a.obj")).empty());

    const std::string trace = slurp(path("a.csv"));
    EXPECT_EQ(trace.substr(0, trace.find('\n')), "iter,mean_residual,hermite_delta,converged_frac,seconds");
    EXPECT_EQ(std::ranges::count(trace, '\n'), 4);

    // stdout output matches the file
    const CliResult to_stdout = cli("reconstruct" + flags + " --out -");
    EXPECT_EQ(to_stdout.output, slurp(path("a.obj")));
}

TEST_F(Cli, BaselinesAndMetricsRow)
{
    ASSERT_EQ(cli("gen --shape box --dims 10 --out " + path("g.sdfg")).code, 0);
    std::ofstream(path("box.txt")) << "kind=box\ncenter=0.5 0.5 0.5\nhalf_extents=0.3 0.3 0.3\n";
    ASSERT_EQ(cli("baseline --method mc --in " + path("g.sdfg") + " --out " + path("mc.obj")).code, 0);
    ASSERT_EQ(cli("baseline --method dc-est --in " + path("g.sdfg") + " --out " + path("dce.obj")).code, 0);
    ASSERT_EQ(cli("baseline --method dc-exact --spec " + path("box.txt") + " --in " + path("g.sdfg") + " --out " + path("dcx.obj")).code, 0);
    EXPECT_EQ(cli("baseline --method dc-exact --in " + path("g.sdfg") + " --out " + path("x.obj")).code, 1);

    save_obj(box_mesh(ShapeSpec::box(Vec3::Constant(0.5), Vec3::Constant(0.3))), path("ref.obj"));
    const CliResult m = cli("metrics --mesh " + path("dcx.obj") + " --ref " + path("ref.obj") + " --grid " + path("g.sdfg") +
                      " --shape box --method dcx --samples 5000");
    ASSERT_EQ(m.code, 0) << m.output;
    std::istringstream lines(m.output);
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    EXPECT_EQ(header, metric_csv_header());
    EXPECT_EQ(row.rfind("box,dcx,10,", 0), 0u) << row;
    std::vector<std::string> cols;
    std::stringstream rs(row);
    for (std::string c; std::getline(rs, c, ',');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 9u);
    EXPECT_LT(std::stod(cols[3]), 1e-9);
    EXPECT_EQ(cols[8], "0");

    const CliResult bare = cli("metrics --no-header --mesh " + path("mc.obj") + " --ref " + path("ref.obj") + " --samples 2000");
    ASSERT_EQ(bare.code, 0);
    EXPECT_EQ(std::ranges::count(bare.output, '\n'), 1);
}

TEST_F(Cli, AblateWritesOneRowPerValue)
{
    ASSERT_EQ(cli("gen --shape sphere --dims 10 --out " + path("s.sdfg")).code, 0);
    save_obj(sphere_mesh(Vec3::Constant(0.5), 0.4, 32, 64), path("ref.obj"));
    const std::string args = "ablate --in " + path("s.sdfg") + " --ref " + path("ref.obj") +
                             " --param w-hermite --values 0.01 0.02 0.05 --samples 2000 --max-outer 2 --no-timing --csv " + path("a.csv");
    ASSERT_EQ(cli(args).code, 0);
    const std::string csv = slurp(path("a.csv"));
    EXPECT_EQ(std::ranges::count(csv, '\n'), 4);
    ASSERT_EQ(cli(args.substr(0, args.size() - 5) + "b.csv").code, 0);
    EXPECT_EQ(csv, slurp(path("b.csv")));
}

TEST_F(Cli, ErrorsAndExitCodes)
{
    const CliResult typo = cli("reconstruct --in x --out y --w-hermit 0.1");
    EXPECT_EQ(typo.code, 1);
    EXPECT_NE(typo.output.find("--w-hermite"), std::string::npos) << typo.output;

    EXPECT_EQ(cli("reconstruct --in " + path("missing.sdfg") + " --out " + path("o.obj")).code, 1);
    EXPECT_EQ(cli("gen --shape sphere --out " + path("nodir/x.sdfg")).code, 1);
    EXPECT_EQ(cli("gen --shape sphere --spec foo --out x").code, 1);
    EXPECT_EQ(cli("gen --shape sphere --dims 1 --out x").code, 1);

    std::ofstream(path("bad.sdfg")) << "SDFG 1 text\n2 2 2\n0 0 0\n1\n1 2 3\n";
    EXPECT_EQ(cli("reconstruct --in " + path("bad.sdfg") + " --out " + path("o.obj")).code, 2);

    ASSERT_EQ(cli("gen --shape sphere --dims 6 --out " + path("s.sdfg")).code, 0);
    EXPECT_EQ(cli("reconstruct --method mc --trace " + path("t.csv") + " --in " + path("s.sdfg") + " --out " + path("o.obj")).code, 1);

    std::ofstream(path("flat.sdfg")) << serialize_grid(SdfGrid({3, 3, 3}, Vec3::Zero(), 1.0, std::vector<double>(27, 1.0)), GridFormat::Text);
    EXPECT_EQ(cli("reconstruct --in " + path("flat.sdfg") + " --out " + path("o.obj")).code, 2);
}

TEST_F(Cli, HelpShowsTheLibraryDefaults)
{
    const CliResult help = cli("reconstruct --help");
    ASSERT_EQ(help.code, 0);
    std::map<std::string, std::string> defaults;
    // "--name TYPE[ in [range]] [default]"
    const std::regex opt(R"(^\s*(--[a-z-]+) \S+(?: in \[[^\]]*\])? \[([^\]]+)\])");
    std::istringstream lines(help.output);
    std::smatch m;
    for (std::string line; std::getline(lines, line);)
        if (std::regex_search(line, m, opt)) defaults[m[1]] = m[2];
    const ReconstructionConfig cfg;
    ASSERT_TRUE(defaults.contains("--w-hermite")) << help.output;
    EXPECT_EQ(std::stod(defaults["--w-hermite"]), cfg.w_hermite);
    EXPECT_EQ(std::stod(defaults["--update-weight"]), cfg.update_weight);
    EXPECT_EQ(std::stod(defaults["--mu"]), cfg.mu);
    EXPECT_EQ(std::stoi(defaults["--max-outer"]), cfg.max_outer);
    EXPECT_EQ(std::stoi(defaults["--max-inner"]), cfg.max_inner);
    EXPECT_EQ(std::stoull(defaults["--batch-size"]), cfg.batch_size);
    EXPECT_EQ(std::stoull(defaults["--seed"]), cfg.seed);
}
