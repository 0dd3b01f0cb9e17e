// Batch front end: TOML scenarios and manifests, CSV outputs, exit codes.
//
// Exit codes: 0 success, 2 configuration error (including a failed safe-load
// check), 3 solver non-convergence, 4 verification failure.
#ifndef PRANDTL_CLI_IO_HPP
#define PRANDTL_CLI_IO_HPP

#include "prandtl/evolution.hpp"
#include "prandtl/material_point.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prandtl::io {

namespace fs = std::filesystem;

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_nonconvergence = 3,
    exit_verification = 4,
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses a scenario; a relative mesh file is resolved against base_dir.
Scenario parse_scenario(const std::string& text, const fs::path& base_dir = {});
Scenario load_scenario(const fs::path& path);

/// Single material: mu, kappa, dim (default 2) and a yield set.
Material parse_material(const std::string& text);
Material load_material(const fs::path& path);

/// CSV with header t,xx,yy,xy (plane) or t,xx,yy,zz,yz,xz,xy (3-d); # lines are comments.
StrainHistory read_history_csv(std::istream& in);

/// Names accepted in [checks] enabled; all of them run by default.
const std::vector<std::string>& check_names();

struct RunManifest {
    fs::path scenario;               // absolute after loading
    std::optional<int> steps;        // uniform grid on [0, T]
    std::vector<double> times;       // explicit grid, used when steps is unset
    std::vector<int> grids;          // step counts for converge
    fs::path out = "out";
    SolverConfig solver;
    WarmStart warm_start = WarmStart::Previous;
    std::vector<std::string> checks; // enabled checks
    std::string fields = "final";    // final, all or none
    bool emit_plotdata = false;

    /// Throws ConfigError when neither steps nor times give a valid grid.
    TimeGrid grid(double T) const;
};

/// Relative scenario paths are resolved against the manifest directory; `out` against the working directory.
RunManifest parse_manifest(const std::string& text, const fs::path& base_dir = {});
RunManifest load_manifest(const fs::path& path);

/// Command-line flags, applied on top of a manifest.
struct Overrides {
    std::optional<int> steps;
    std::optional<fs::path> out;
    std::optional<double> tol_res;
    bool force = false;
    bool emit_plotdata = false;
};

void apply_overrides(RunManifest& manifest, const Overrides& overrides);

/// Thread count from PRANDTL_THREADS, or nullopt when unset. Throws ConfigError if malformed.
std::optional<int> threads_from_env();

/// Writes energies.csv, fields_<step>.csv, triples.csv, run.toml and verify.csv into manifest.out.
int cmd_run(const RunManifest& manifest, std::ostream& log);

/// Writes study.csv; exit 0 iff the Cauchy norms strictly decrease.
int cmd_converge(const RunManifest& manifest, std::ostream& log);

/// Re-audits a run directory from its run.toml and triples.csv; rewrites verify.csv.
int cmd_verify(const fs::path& run_dir, std::ostream& log);

/// Point trace with columns t, strain, plastic strain, stress, Q, D, W and the energy residual.
int cmd_point(const fs::path& material, const fs::path& history, std::ostream& out, std::ostream& log);

/// Writes the scenario mesh in the text mesh format.
int cmd_mesh(const fs::path& scenario, const fs::path& out, std::ostream& log);

/// Evolution outputs, shared by cmd_run and the tests.
void write_energies_csv(std::ostream& out, const EvolutionRecord& record);
void write_fields_csv(std::ostream& out, const Scenario& s, const EvolutionRecord& record, int step);
void write_triples_csv(std::ostream& out, const EvolutionRecord& record);
std::vector<DiscreteTriple> read_triples_csv(std::istream& in, const Mesh& mesh, std::vector<double>& times);
void write_study_csv(std::ostream& out, const StudyReport& study);
void write_point_csv(std::ostream& out, const PointRecord& record);

} // namespace prandtl::io

#endif // PRANDTL_CLI_IO_HPP
