// prandtl: batch front end for runs, convergence studies, re-audits and point traces.
#include "prandtl/cli_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace prandtl::io;

namespace {

void add_run_flags(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--steps", o.steps, "Uniform grid with this many steps (overrides the manifest)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out, "Output directory (overrides the manifest)");
    cmd->add_option("--tol-res", o.tol_res, "Relative equilibrium tolerance of the solver")->check(CLI::PositiveNumber);
    cmd->add_flag("--force", o.force, "Solve even when the safe-load check fails");
    cmd->add_flag("--emit-plotdata", o.emit_plotdata, "Also write long-format CSV for plotting");
}

int with_manifest(const std::string& path, const Overrides& o, int (*cmd)(const RunManifest&, std::ostream&))
{
    try {
        RunManifest m = load_manifest(path);
        apply_overrides(m, o);
        return cmd(m, std::cerr);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quasistatic small-strain perfect plasticity: incremental solver and verification harness"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 ok, 2 configuration error, 3 non-convergence, 4 verification failure.\n"
               "PRANDTL_THREADS sets the number of worker threads.");

    std::string manifest, run_dir, material, history, scenario, out_file;
    Overrides run_o, conv_o;

    auto* run = app.add_subcommand("run", "Run an evolution and audit it");
    run->add_option("manifest", manifest, "Run manifest (TOML)")->required()->check(CLI::ExistingFile);
    add_run_flags(run, run_o);

    auto* conv = app.add_subcommand("converge", "Convergence study over the manifest's grids");
    conv->add_option("manifest", manifest, "Run manifest (TOML) with a grids list")->required()->check(CLI::ExistingFile);
    add_run_flags(conv, conv_o);

    auto* verify = app.add_subcommand("verify", "Re-audit a run directory");
    verify->add_option("run-dir", run_dir, "Directory written by run")->required()->check(CLI::ExistingDirectory);

    auto* point = app.add_subcommand("point", "Material-point trace for a strain history");
    point->add_option("material", material, "Material (TOML)")->required()->check(CLI::ExistingFile);
    point->add_option("history", history, "Strain history (CSV)")->required()->check(CLI::ExistingFile);
    point->add_option("--out", out_file, "Output CSV (default: standard output)");

    auto* mesh = app.add_subcommand("mesh", "Write the mesh of a scenario");
    mesh->add_option("scenario", scenario, "Scenario (TOML)")->required()->check(CLI::ExistingFile);
    mesh->add_option("--out", out_file, "Output mesh file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    if (*run)
        return with_manifest(manifest, run_o, cmd_run);
    if (*conv)
        return with_manifest(manifest, conv_o, cmd_converge);
    if (*verify)
        return cmd_verify(run_dir, std::cerr);
    if (*point) {
        if (out_file.empty())
            return cmd_point(material, history, std::cout, std::cerr);
        std::ofstream out(out_file, std::ios::binary);
        if (!out) {
            std::cerr << "error: cannot write '" << out_file << "'\n";
            return exit_failure;
        }
        return cmd_point(material, history, out, std::cerr);
    }
    return cmd_mesh(scenario, out_file, std::cerr);
}
