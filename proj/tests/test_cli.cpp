#include "doctest.h"

#include "prandtl/cli_io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace prandtl;
using namespace prandtl::io;

namespace {

const fs::path source_dir = PRANDTL_SOURCE_DIR;

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("prandtl_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* small_square = R"(
name = "square"
alpha = 0.3

[mesh]
nx = 3
ny = 3
sides = ["gamma1", "gamma1", "gamma0", "gamma0"]

[[materials]]
mu = 1.0
kappa = 2.0
yield = "von_mises"
radius = 0.3

[[w]]
A = [[0.0, 1.0], [0.0, 0.0]]
times = [0.0, 1.0]
values = [0.0, 0.6]
)";

RunManifest manifest_for(const fs::path& dir, const std::string& scenario_text, int steps)
{
    write(dir / "scenario.toml", scenario_text);
    RunManifest m = parse_manifest("scenario = \"scenario.toml\"\nsteps = " + std::to_string(steps) +
                                       "\ngrids = [4, 8, 16]\n",
                                   dir);
    m.out = dir / "out";
    return m;
}

} // namespace

TEST_CASE("scenario parsing")
{
    const Scenario s = parse_scenario(small_square);
    CHECK(s.name == "square");
    CHECK(s.alpha == 0.3);
    CHECK(s.mesh.num_elements() == 18);
    CHECK(s.mode == DirichletMode::Hard);
    REQUIRE(s.w.size() == 1);
    CHECK(s.w[0].A(0, 1) == 1.0);
    CHECK(s.w[0].amplitude(0.5) == doctest::Approx(0.3));
    CHECK(s.materials[0].yield.radius() == 0.3);
    s.validate();

    const std::string poly = R"(
alpha = 0.5
[mesh]
[[materials]]
mu = 1.0
kappa = 1.0
yield = "polyhedral"
normals = [[1, 0], [-1, 0], [0, 1], [0, -1]]
offsets = [1, 1, 1, 1]
[[rho]]
stress = [0.1, 0.0, 0.0]
amplitude = 2.0
[[f]]
f = [0.0, -1.0]
)";
    const Scenario p = parse_scenario(poly);
    CHECK(p.materials[0].yield.kind() == YieldSurface::Kind::Polyhedral);
    CHECK(p.materials[0].yield.inner_radius() == doctest::Approx(1.0));
    CHECK(p.rho[0].amplitude(3.0) == 2.0);
    CHECK(p.f[0].f.y() == -1.0);
}

TEST_CASE("scenario errors")
{
    const std::string base = small_square;
    CHECK_THROWS_AS(parse_scenario(base + "\nbogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("[mesh]\n[[materials]]\nmu=1\nkappa=1\nradius=1\n"), ConfigError); // no alpha
    CHECK_THROWS_AS(parse_scenario("alpha = 1\n[[materials]]\nmu=1\nkappa=1\nradius=1\n"), ConfigError); // no mesh
    CHECK_THROWS_AS(parse_scenario("alpha = 1\n[mesh]\n[[materials]]\nmu=1\nkappa=1\nyield=\"tresca\"\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_scenario("alpha = 1\n[mesh]\n[[materials]]\nregion=1\nmu=1\nkappa=1\nradius=1\n"),
                    ConfigError); // region 0 missing
    CHECK_THROWS_AS(parse_scenario("alpha = 1\n[mesh]\nfile = \"missing.mesh\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("alpha = = 1"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(base + "\n[[g]]\ng = [1, 0]\n"), ConfigError); // no tag
    CHECK_THROWS_AS(parse_scenario(base + "\n[[rho]]\nstress = [1, 0]\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(base + "\n[[w]]\nA = [[1, 0]]\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(base + "\n[[f]]\nf = [1, 0]\ntimes = [0, 1]\n"), ConfigError);
}

TEST_CASE("bundled scenarios load and validate")
{
    int count = 0;
    for (const auto& entry : fs::directory_iterator(source_dir / "scenarios")) {
        if (entry.path().extension() != ".toml")
            continue;
        CAPTURE(entry.path().string());
        const Scenario s = load_scenario(entry.path());
        CHECK_NOTHROW(s.validate());
        ++count;
    }
    CHECK(count >= 5);
    for (const auto& entry : fs::directory_iterator(source_dir / "scenarios" / "runs")) {
        CAPTURE(entry.path().string());
        const RunManifest m = load_manifest(entry.path());
        CHECK(fs::exists(m.scenario));
        CHECK(m.grids.size() >= 3);
    }
}

TEST_CASE("mesh files round-trip through cmd_mesh")
{
    const fs::path dir = scratch("mesh");
    std::ostringstream log;
    write(dir / "s.toml", small_square);
    REQUIRE(cmd_mesh(dir / "s.toml", dir / "square.mesh", log) == exit_ok);
    write(dir / "from_file.toml", "alpha = 0.3\n[mesh]\nfile = \"square.mesh\"\n[[materials]]\nmu = 1\nkappa = 2\n"
                                  "radius = 0.3\n");
    const Scenario a = load_scenario(dir / "s.toml");
    const Scenario b = load_scenario(dir / "from_file.toml");
    CHECK(b.mesh.num_elements() == a.mesh.num_elements());
    CHECK(b.mesh.edges().size() == a.mesh.edges().size());
    CHECK(b.mesh.total_area(false) == doctest::Approx(1.0));
}

TEST_CASE("strain history csv")
{
    std::istringstream good("# comment\nt,xx,yy,xy\n0,0,0,0\n1, 0.5, -0.5, 0.25\n");
    const StrainHistory h = read_history_csv(good);
    CHECK(h.dim() == 2);
    CHECK(h.times == std::vector<double>{0.0, 1.0});
    CHECK(h.strains[1](0, 1) == 0.25);

    std::istringstream three("t,xx,yy,zz,yz,xz,xy\n0,1,2,3,4,5,6\n");
    CHECK(read_history_csv(three).dim() == 3);

    for (const char* bad : {"", "t,xx,yy,xy\n", "t,xx,yy\n0,1,2\n", "t,xx,yy,xy\n0,1,2\n", "t,xx,yy,xy\n0,a,0,0\n",
                            "t,xx,yy,xy\n1,0,0,0\n0,0,0,0\n"}) {
        CAPTURE(bad);
        std::istringstream in(bad);
        CHECK_THROWS_AS(read_history_csv(in), ConfigError);
    }
}

TEST_CASE("manifests, overrides and the thread variable")
{
    const fs::path dir = scratch("manifest");
    write(dir / "s.toml", small_square);
    const RunManifest m = parse_manifest(R"(
scenario = "s.toml"
steps = 8
out = "somewhere"
fields = "all"
warm_start = "zero"
[solver]
tol_res = 1e-10
threads = 2
[checks]
enabled = ["flow_rule", "normality"]
)",
                                         dir);
    CHECK(m.scenario == fs::absolute(dir / "s.toml").lexically_normal());
    CHECK(*m.steps == 8);
    CHECK(m.solver.tol_res == 1e-10);
    CHECK(m.solver.threads == 2);
    CHECK(m.warm_start == WarmStart::Zero);
    CHECK(m.checks == std::vector<std::string>{"flow_rule", "normality"});
    CHECK(m.grid(2.0).t.back() == 2.0);

    RunManifest o = m;
    Overrides flags;
    flags.steps = 3;
    flags.tol_res = 1e-7;
    flags.force = true;
    flags.out = dir / "elsewhere";
    apply_overrides(o, flags);
    CHECK(*o.steps == 3);
    CHECK(o.solver.tol_res == 1e-7);
    CHECK(o.solver.force);
    CHECK(o.out == dir / "elsewhere");

    const RunManifest explicit_times = parse_manifest("scenario = \"s.toml\"\ntimes = [0, 0.25, 1]\n", dir);
    CHECK(explicit_times.grid(1.0).steps() == 2);
    CHECK_THROWS_AS(parse_manifest("scenario = \"s.toml\"\n", dir).grid(1.0), ConfigError);
    CHECK_THROWS_AS(parse_manifest("scenario = \"s.toml\"\ntimes = [0, 1, 0.5]\n", dir).grid(1.0), ConfigError);
    CHECK_THROWS_AS(parse_manifest("scenario = \"nope.toml\"\n", dir), ConfigError);
    CHECK_THROWS_AS(parse_manifest("scenario = \"s.toml\"\nsteps = 0\n", dir), ConfigError);
    CHECK_THROWS_AS(parse_manifest("scenario = \"s.toml\"\n[checks]\nenabled = [\"bogus\"]\n", dir), ConfigError);
    CHECK_THROWS_AS(parse_manifest("scenario = \"s.toml\"\nfields = \"some\"\n", dir), ConfigError);

    ::setenv("PRANDTL_THREADS", "3", 1);
    CHECK(threads_from_env() == 3);
    ::setenv("PRANDTL_THREADS", "three", 1);
    CHECK_THROWS_AS(threads_from_env(), ConfigError);
    ::unsetenv("PRANDTL_THREADS");
    CHECK_FALSE(threads_from_env().has_value());
}

TEST_CASE("run on zero data")
{
    const fs::path dir = scratch("zero");
    RunManifest m = load_manifest(source_dir / "scenarios" / "runs" / "zero.toml");
    m.out = dir;
    std::ostringstream log;
    REQUIRE(cmd_run(m, log) == exit_ok);
    for (const char* f : {"energies.csv", "fields_4.csv", "triples.csv", "run.toml", "verify.csv"})
        CHECK(fs::exists(dir / f));
    std::istringstream energies(slurp(dir / "energies.csv"));
    std::string line;
    std::getline(energies, line);
    int rows = 0;
    while (std::getline(energies, line)) {
        std::istringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ','); // step
        for (int col = 0; col < 9 && std::getline(cells, cell, ','); ++col)
            CHECK(std::stod(cell) == (col == 0 ? 0.25 * rows : 0.0));
        ++rows;
    }
    CHECK(rows == 5);
}

TEST_CASE("run outputs, re-audit and determinism")
{
    const fs::path dir = scratch("run");
    RunManifest m = manifest_for(dir, small_square, 6);
    m.fields = "all";
    m.emit_plotdata = true;
    std::ostringstream log;
    REQUIRE(cmd_run(m, log) == exit_ok);
    CHECK(log.str().find("FAIL") == std::string::npos);
    for (int i = 0; i <= 6; ++i)
        CHECK(fs::exists(m.out / ("fields_" + std::to_string(i) + ".csv")));
    CHECK(fs::exists(m.out / "plot_energies.csv"));

    // the stored triples reproduce the audit exactly
    const std::string verify = slurp(m.out / "verify.csv");
    CHECK(verify.rfind("check,step,element,value,tolerance,pass\n", 0) == 0);
    REQUIRE(cmd_verify(m.out, log) == exit_ok);
    CHECK(slurp(m.out / "verify.csv") == verify);

    RunManifest again = m;
    again.out = dir / "again";
    REQUIRE(cmd_run(again, log) == exit_ok);
    for (const auto& entry : fs::directory_iterator(m.out)) {
        const std::string name = entry.path().filename().string();
        CAPTURE(name);
        if (name == "run.toml")
            continue; // records the output-independent settings only, compared below
        CHECK(slurp(entry.path()) == slurp(again.out / name));
    }
    CHECK(slurp(m.out / "run.toml") == slurp(again.out / "run.toml"));

    // a tampered plastic strain is caught on re-audit
    std::string triples = slurp(m.out / "triples.csv");
    const std::string marker = "\n6,1,p,4,";
    const auto at = triples.find(marker);
    REQUIRE(at != std::string::npos);
    const auto end = triples.find('\n', at + 1);
    triples.replace(at, end - at, marker + "0.05,-0.05,0.01");
    write(m.out / "triples.csv", triples);
    CHECK(cmd_verify(m.out, log) == exit_verification);
    CHECK(slurp(m.out / "verify.csv").find(",0\n") != std::string::npos);

    write(m.out / "triples.csv", "step,t,kind,index,c0,c1,c2\n0,0,u,0,0,0,0\n");
    CHECK(cmd_verify(m.out, log) == exit_config);
    CHECK(cmd_verify(dir / "missing", log) == exit_config);
}

TEST_CASE("exit codes")
{
    std::ostringstream log;
    SUBCASE("safe-load violation is a configuration error")
    {
        const fs::path dir = scratch("unsafe");
        RunManifest m = manifest_for(dir, std::string(small_square) + "\n[[rho]]\nstress = [0.0, 0.0, 0.5]\n", 4);
        CHECK(cmd_run(m, log) == exit_config);
        CHECK(log.str().find("safe load violated") != std::string::npos);
        CHECK_FALSE(fs::exists(m.out / "energies.csv"));
        m.solver.force = true;
        CHECK(cmd_run(m, log) != exit_config);
    }
    SUBCASE("iteration cap")
    {
        const fs::path dir = scratch("cap");
        RunManifest m = manifest_for(dir, small_square, 4);
        m.solver.max_outer = 1;
        CHECK(cmd_run(m, log) == exit_nonconvergence);
        CHECK(log.str().find("did not converge") != std::string::npos);
    }
    SUBCASE("bad solver settings and grids")
    {
        const fs::path dir = scratch("bad");
        RunManifest m = manifest_for(dir, small_square, 4);
        m.solver.relaxation = 3.0;
        CHECK(cmd_run(m, log) == exit_config);
        m = manifest_for(dir, small_square, 4);
        m.steps.reset();
        CHECK(cmd_run(m, log) == exit_config);
        m = manifest_for(dir, small_square, 4);
        m.grids = {8};
        CHECK(cmd_converge(m, log) == exit_config);
        m.grids = {8, 12, 16};
        CHECK(cmd_converge(m, log) == exit_config);
    }
}

TEST_CASE("converge")
{
    std::ostringstream log;
    const fs::path dir = scratch("converge");
    RunManifest elastic = load_manifest(source_dir / "scenarios" / "runs" / "tension_traction.toml");
    elastic.out = dir / "elastic";
    elastic.grids = {2, 4, 8};
    CHECK(cmd_converge(elastic, log) == exit_ok);

    RunManifest ramp = manifest_for(dir, small_square, 4);
    ramp.out = dir / "ramp";
    ramp.emit_plotdata = true;
    CHECK(cmd_converge(ramp, log) == exit_ok);
    const std::string study = slurp(ramp.out / "study.csv");
    CHECK(study.rfind("steps,max_step,sigma_cauchy", 0) == 0);
    CHECK(std::count(study.begin(), study.end(), '\n') == 4);
    CHECK(fs::exists(ramp.out / "plot_study.csv"));
}

TEST_CASE("point traces")
{
    std::ostringstream out, log;
    const fs::path point = source_dir / "scenarios" / "point";
    REQUIRE(cmd_point(point / "von_mises.toml", point / "deviatoric_ramp.csv", out, log) == exit_ok);
    std::istringstream in(out.str());
    std::string line, last;
    std::getline(in, line);
    CHECK(line == "t,eps_xx,eps_yy,eps_xy,p_xx,p_yy,p_xy,s_xx,s_yy,s_xy,Q,D,W,residual");
    while (std::getline(in, line))
        last = line;
    std::vector<double> cells;
    std::istringstream ls(last);
    std::string cell;
    while (std::getline(ls, cell, ','))
        cells.push_back(std::stod(cell));
    REQUIRE(cells.size() == 14);
    CHECK(cells[10] == doctest::Approx(0.25).epsilon(1e-12)); // Q
    CHECK(cells[11] == doctest::Approx(0.5).epsilon(1e-12));  // D
    CHECK(cells[12] == doctest::Approx(0.75).epsilon(1e-12)); // W
    CHECK(std::abs(cells[13]) <= 1e-12);

    const fs::path dir = scratch("point");
    write(dir / "empty.csv", "t,xx,yy,xy\n");
    CHECK(cmd_point(point / "von_mises.toml", dir / "empty.csv", out, log) == exit_config);
    write(dir / "bad.csv", "t,xx,yy,xy\n0,1\n");
    CHECK(cmd_point(point / "von_mises.toml", dir / "bad.csv", out, log) == exit_config);
    write(dir / "m3.toml", "dim = 3\nmu = 1\nkappa = 1\nradius = 1\n");
    CHECK(cmd_point(dir / "m3.toml", point / "deviatoric_ramp.csv", out, log) == exit_config);
}
