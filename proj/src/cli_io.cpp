#include "prandtl/cli_io.hpp"

#include "prandtl/solver.hpp"
#include "prandtl/verification.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace prandtl::io {

namespace {

// ---------------------------------------------------------------- TOML access

std::string where(const std::string& ctx, const std::string& key) { return ctx.empty() ? key : ctx + "." + key; }

void allow_keys(const toml::table& t, std::initializer_list<std::string_view> keys, const std::string& ctx)
{
    for (const auto& [k, v] : t)
        if (std::find(keys.begin(), keys.end(), k.str()) == keys.end())
            throw ConfigError("unknown key '" + where(ctx, std::string(k.str())) + "'");
}

std::optional<double> opt_number(const toml::table& t, const std::string& key, const std::string& ctx)
{
    const toml::node* n = t.get(key);
    if (!n)
        return std::nullopt;
    if (auto v = n->value<double>())
        return *v;
    throw ConfigError("'" + where(ctx, key) + "' must be a number");
}

double number(const toml::table& t, const std::string& key, const std::string& ctx)
{
    if (auto v = opt_number(t, key, ctx))
        return *v;
    throw ConfigError("missing '" + where(ctx, key) + "'");
}

std::optional<std::int64_t> opt_integer(const toml::table& t, const std::string& key, const std::string& ctx)
{
    const toml::node* n = t.get(key);
    if (!n)
        return std::nullopt;
    if (!n->is_integer())
        throw ConfigError("'" + where(ctx, key) + "' must be an integer");
    return n->value<std::int64_t>();
}

std::optional<std::string> opt_string(const toml::table& t, const std::string& key, const std::string& ctx)
{
    const toml::node* n = t.get(key);
    if (!n)
        return std::nullopt;
    if (!n->is_string())
        throw ConfigError("'" + where(ctx, key) + "' must be a string");
    return n->value<std::string>();
}

std::optional<bool> opt_bool(const toml::table& t, const std::string& key, const std::string& ctx)
{
    const toml::node* n = t.get(key);
    if (!n)
        return std::nullopt;
    if (!n->is_boolean())
        throw ConfigError("'" + where(ctx, key) + "' must be true or false");
    return n->value<bool>();
}

const toml::array* opt_array(const toml::table& t, const std::string& key, const std::string& ctx)
{
    const toml::node* n = t.get(key);
    if (!n)
        return nullptr;
    if (!n->is_array())
        throw ConfigError("'" + where(ctx, key) + "' must be an array");
    return n->as_array();
}

std::vector<double> numbers(const toml::array& a, const std::string& ctx)
{
    std::vector<double> out;
    for (const auto& n : a) {
        auto v = n.value<double>();
        if (!v)
            throw ConfigError("'" + ctx + "' must contain numbers");
        out.push_back(*v);
    }
    return out;
}

std::vector<double> numbers(const toml::table& t, const std::string& key, const std::string& ctx,
                            std::size_t expected = 0)
{
    const toml::array* a = opt_array(t, key, ctx);
    if (!a)
        throw ConfigError("missing '" + where(ctx, key) + "'");
    auto v = numbers(*a, where(ctx, key));
    if (expected && v.size() != expected)
        throw ConfigError("'" + where(ctx, key) + "' must have " + std::to_string(expected) + " entries");
    return v;
}

/// Arrays of tables, e.g. [[materials]]; absent keys give an empty list.
std::vector<const toml::table*> tables(const toml::table& t, const std::string& key, const std::string& ctx)
{
    std::vector<const toml::table*> out;
    const toml::array* a = opt_array(t, key, ctx);
    if (!a)
        return out;
    for (const auto& n : *a) {
        if (!n.is_table())
            throw ConfigError("'" + where(ctx, key) + "' must be an array of tables");
        out.push_back(n.as_table());
    }
    return out;
}

toml::table parse_toml(const std::string& text)
{
    try {
        return toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(msg.str());
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- scenario pieces

PiecewiseLinear amplitude(const toml::table& t, const std::string& ctx)
{
    const toml::array* times = opt_array(t, "times", ctx);
    const toml::array* values = opt_array(t, "values", ctx);
    if (!times && !values)
        return PiecewiseLinear::constant(opt_number(t, "amplitude", ctx).value_or(1.0));
    if (!times || !values)
        throw ConfigError("'" + ctx + "' needs both times and values");
    try {
        return PiecewiseLinear(numbers(*times, ctx + ".times"), numbers(*values, ctx + ".values"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
}

Eigen::Vector2d vec2(const toml::table& t, const std::string& key, const std::string& ctx, bool required)
{
    if (!t.get(key)) {
        if (required)
            throw ConfigError("missing '" + where(ctx, key) + "'");
        return Eigen::Vector2d::Zero();
    }
    const auto v = numbers(t, key, ctx, 2);
    return {v[0], v[1]};
}

YieldSurface yield_surface(const toml::table& t, int dim, const std::string& ctx)
{
    const std::string kind = opt_string(t, "yield", ctx).value_or("von_mises");
    try {
        if (kind == "von_mises")
            return YieldSurface::von_mises(dim, number(t, "radius", ctx));
        if (kind == "polyhedral") {
            const toml::array* normals = opt_array(t, "normals", ctx);
            if (!normals)
                throw ConfigError("missing '" + where(ctx, "normals") + "'");
            std::vector<Dev> ns;
            for (const auto& n : *normals) {
                if (!n.is_array())
                    throw ConfigError("'" + where(ctx, "normals") + "' must be an array of arrays");
                const auto c = numbers(*n.as_array(), where(ctx, "normals"));
                if (static_cast<int>(c.size()) != deviatoric_size(dim))
                    throw ConfigError("each normal in '" + where(ctx, "normals") + "' needs " +
                                      std::to_string(deviatoric_size(dim)) + " deviatoric coordinates");
                ns.push_back(from_coordinates(dim, Eigen::Map<const Eigen::VectorXd>(c.data(), c.size())));
            }
            return YieldSurface::polyhedral(dim, ns, numbers(t, "offsets", ctx, ns.size()));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
    throw ConfigError("'" + where(ctx, "yield") + "' must be von_mises or polyhedral");
}

Material material(const toml::table& t, int dim, const std::string& ctx)
{
    try {
        return Material{ElasticModuli(number(t, "mu", ctx), number(t, "kappa", ctx)), yield_surface(t, dim, ctx)};
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
}

EdgeLabel side_label(const std::string& name, const std::string& ctx)
{
    if (name == "gamma0")
        return EdgeLabel::Gamma0;
    if (name == "gamma1")
        return EdgeLabel::Gamma1;
    throw ConfigError("'" + ctx + "' entries must be gamma0 or gamma1");
}

Mesh mesh_from(const toml::table& t, const fs::path& base_dir)
{
    const std::string ctx = "mesh";
    if (auto file = opt_string(t, "file", ctx)) {
        allow_keys(t, {"file"}, ctx);
        fs::path p(*file);
        if (p.is_relative())
            p = base_dir / p;
        try {
            return read_mesh_file(p.string());
        } catch (const std::exception& e) {
            throw ConfigError("mesh file '" + p.string() + "': " + e.what());
        }
    }
    allow_keys(t, {"generator", "lx", "ly", "nx", "ny", "sides", "collar_width", "bands"}, ctx);
    const std::string gen = opt_string(t, "generator", ctx).value_or("rectangle");
    if (gen != "rectangle")
        throw ConfigError("'mesh.generator' must be rectangle, or give mesh.file");
    RectangleSpec spec;
    spec.lx = opt_number(t, "lx", ctx).value_or(spec.lx);
    spec.ly = opt_number(t, "ly", ctx).value_or(spec.ly);
    spec.nx = static_cast<int>(opt_integer(t, "nx", ctx).value_or(spec.nx));
    spec.ny = static_cast<int>(opt_integer(t, "ny", ctx).value_or(spec.ny));
    spec.collar_width = opt_number(t, "collar_width", ctx).value_or(0.0);
    if (const toml::array* sides = opt_array(t, "sides", ctx)) {
        if (sides->size() != 4)
            throw ConfigError("'mesh.sides' lists left, right, bottom, top");
        for (std::size_t k = 0; k < 4; ++k) {
            auto s = (*sides)[k].value<std::string>();
            if (!s)
                throw ConfigError("'mesh.sides' must contain strings");
            spec.sides[k] = side_label(*s, "mesh.sides");
        }
    }
    for (const toml::table* b : tables(t, "bands", ctx)) {
        allow_keys(*b, {"y_min", "y_max", "region"}, "mesh.bands");
        RectangleSpec::Band band;
        band.y_min = number(*b, "y_min", "mesh.bands");
        band.y_max = number(*b, "y_max", "mesh.bands");
        band.region = static_cast<int>(opt_integer(*b, "region", "mesh.bands").value_or(1));
        spec.bands.push_back(band);
    }
    try {
        return make_rectangle(spec);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("mesh: ") + e.what());
    }
}

// ---------------------------------------------------------------- CSV helpers

std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Short form for log lines; data files use num.
std::string brief(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    for (auto& c : out) {
        const auto a = c.find_first_not_of(" \t\r");
        const auto b = c.find_last_not_of(" \t\r");
        c = a == std::string::npos ? std::string() : c.substr(a, b - a + 1);
    }
    return out;
}

double parse_double(const std::string& cell, int line)
{
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0' || errno == ERANGE)
        throw ConfigError("line " + std::to_string(line) + ": '" + cell + "' is not a number");
    return v;
}

/// Non-empty, non-comment lines with their line numbers.
std::vector<std::pair<int, std::string>> data_lines(std::istream& in)
{
    std::vector<std::pair<int, std::string>> out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos || line[a] == '#')
            continue;
        out.emplace_back(n, line);
    }
    return out;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path.string() + "'");
    body(out);
    if (!out)
        throw std::runtime_error("write to '" + path.string() + "' failed");
}

void write_components(std::ostream& out, const Sym& a)
{
    for (int k = 0; k < a.components().size(); ++k)
        out << ',' << num(a.components()[k]);
}

// ---------------------------------------------------------------- command plumbing

/// Maps the exception taxonomy onto exit codes.
int guarded(std::ostream& log, const std::function<int()>& body)
{
    try {
        return body();
    } catch (const SafeLoadViolation& e) {
        log << "error: " << e.what() << "\n" << e.report.summary() << "\n";
        return exit_config;
    } catch (const EvolutionNonConvergence& e) {
        log << "error: step " << e.step << " did not converge after " << e.report.iterations
            << " iterations (equilibrium residual " << brief(e.report.equilibrium_residual) << ")\n";
        return exit_nonconvergence;
    } catch (const NonConvergence& e) {
        log << "error: " << e.what() << "\n";
        return exit_nonconvergence;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::invalid_argument& e) {
        log << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return exit_failure;
    }
}

SolverConfig effective_config(const RunManifest& m)
{
    SolverConfig cfg = m.solver;
    if (auto n = threads_from_env())
        cfg.threads = *n;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    return cfg;
}

Scenario checked_scenario(const fs::path& path)
{
    Scenario s = load_scenario(path);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("scenario '" + path.string() + "': " + e.what());
    }
    return s;
}

std::vector<CheckReport> selected_checks(const EvolutionRecord& rec, const Scenario& s,
                                         const std::vector<std::string>& enabled)
{
    std::vector<CheckReport> out;
    for (auto& r : run_checks(rec, s))
        if (std::find(enabled.begin(), enabled.end(), r.name) != enabled.end())
            out.push_back(std::move(r));
    return out;
}

bool report_checks(std::ostream& log, const std::vector<CheckReport>& reports)
{
    bool ok = true;
    for (const auto& r : reports) {
        const CheckRow w = r.worst();
        log << (r.pass() ? "PASS " : "FAIL ") << r.name << ": worst " << brief(w.value) << " at step " << w.step;
        if (w.element >= 0)
            log << ", element " << w.element;
        log << " (tolerance " << brief(r.tolerance) << ")\n";
        ok = ok && r.pass();
    }
    return ok;
}

std::string toml_string(const std::string& s)
{
    std::ostringstream out;
    out << toml::value<std::string>(s);
    return out.str();
}

void write_run_toml(std::ostream& out, const RunManifest& m, const SolverConfig& cfg, const TimeGrid& grid)
{
    out << "# written by prandtl run; re-read by prandtl verify\n";
    out << "scenario = " << toml_string(fs::absolute(m.scenario).lexically_normal().string()) << "\n";
    out << "times = [";
    for (std::size_t i = 0; i < grid.t.size(); ++i)
        out << (i ? ", " : "") << num(grid.t[i]);
    out << "]\n";
    out << "warm_start = \"" << (m.warm_start == WarmStart::Zero ? "zero" : "previous") << "\"\n";
    out << "fields = " << toml_string(m.fields) << "\n\n";
    out << "[solver]\n";
    out << "tol_energy = " << num(cfg.tol_energy) << "\n";
    out << "tol_res = " << num(cfg.tol_res) << "\n";
    out << "max_outer = " << cfg.max_outer << "\n";
    out << "relaxation = " << num(cfg.relaxation) << "\n";
    out << "force = " << (cfg.force ? "true" : "false") << "\n\n";
    out << "[checks]\nenabled = [";
    for (std::size_t i = 0; i < m.checks.size(); ++i)
        out << (i ? ", " : "") << toml_string(m.checks[i]);
    out << "]\n";
}

void write_plot_energies(std::ostream& out, const EvolutionRecord& rec)
{
    const auto res = energy_balance_residual(rec);
    out << "step,t,quantity,value\n";
    for (std::size_t i = 0; i < rec.grid.t.size(); ++i) {
        const std::string head = std::to_string(i) + "," + num(rec.grid.t[i]) + ",";
        out << head << "Q," << num(rec.ledger.Q[i]) << "\n";
        out << head << "D," << num(rec.ledger.D[i]) << "\n";
        out << head << "load_work," << num(rec.ledger.load_work[i]) << "\n";
        out << head << "balance_residual," << num(res[i]) << "\n";
    }
}

void write_plot_study(std::ostream& out, const StudyReport& study)
{
    out << "steps,max_step,quantity,value\n";
    for (const auto& r : study.rows) {
        const std::string head = std::to_string(r.steps) + "," + num(r.max_step) + ",";
        out << head << "sigma_cauchy," << num(r.sigma_cauchy) << "\n";
        out << head << "dissipation," << num(r.dissipation) << "\n";
        out << head << "energy_residual," << num(r.energy_residual) << "\n";
    }
}

std::vector<int> field_steps(const std::string& mode, int steps)
{
    if (mode == "none")
        return {};
    if (mode == "final")
        return {steps};
    std::vector<int> all(steps + 1);
    for (int i = 0; i <= steps; ++i)
        all[i] = i;
    return all;
}

} // namespace

// ---------------------------------------------------------------- loaders

Scenario parse_scenario(const std::string& text, const fs::path& base_dir)
{
    const toml::table root = parse_toml(text);
    allow_keys(root, {"name", "T", "alpha", "dirichlet", "tol_eq", "mesh", "materials", "w", "f", "g", "rho"}, "");
    Scenario s;
    s.name = opt_string(root, "name", "").value_or("scenario");
    s.T = opt_number(root, "T", "").value_or(1.0);
    s.alpha = number(root, "alpha", "");
    s.tol_eq = opt_number(root, "tol_eq", "").value_or(s.tol_eq);
    const std::string mode = opt_string(root, "dirichlet", "").value_or("hard");
    if (mode == "hard")
        s.mode = DirichletMode::Hard;
    else if (mode == "collar")
        s.mode = DirichletMode::Collar;
    else
        throw ConfigError("'dirichlet' must be hard or collar");

    const toml::node* mesh = root.get("mesh");
    if (!mesh || !mesh->is_table())
        throw ConfigError("missing [mesh] table");
    s.mesh = mesh_from(*mesh->as_table(), base_dir);

    std::vector<std::optional<Material>> by_region;
    for (const toml::table* t : tables(root, "materials", "")) {
        allow_keys(*t, {"region", "mu", "kappa", "yield", "radius", "normals", "offsets"}, "materials");
        const auto region = opt_integer(*t, "region", "materials").value_or(0);
        if (region < 0)
            throw ConfigError("'materials.region' must be non-negative");
        if (by_region.size() <= static_cast<std::size_t>(region))
            by_region.resize(region + 1);
        if (by_region[region])
            throw ConfigError("region " + std::to_string(region) + " has two materials");
        by_region[region] = material(*t, 2, "materials[" + std::to_string(region) + "]");
    }
    if (by_region.empty())
        throw ConfigError("no [[materials]] given");
    for (std::size_t r = 0; r < by_region.size(); ++r) {
        if (!by_region[r])
            throw ConfigError("no material for region " + std::to_string(r));
        s.materials.push_back(*by_region[r]);
    }

    for (const toml::table* t : tables(root, "w", "")) {
        allow_keys(*t, {"A", "b", "times", "values", "amplitude"}, "w");
        DisplacementLoad w;
        const toml::array* A = opt_array(*t, "A", "w");
        if (!A || A->size() != 2 || !(*A)[0].is_array() || !(*A)[1].is_array())
            throw ConfigError("'w.A' must be a 2x2 array");
        for (int r = 0; r < 2; ++r) {
            const auto row = numbers(*(*A)[r].as_array(), "w.A");
            if (row.size() != 2)
                throw ConfigError("'w.A' must be a 2x2 array");
            w.A(r, 0) = row[0];
            w.A(r, 1) = row[1];
        }
        w.b = vec2(*t, "b", "w", false);
        w.amplitude = amplitude(*t, "w");
        s.w.push_back(w);
    }
    for (const toml::table* t : tables(root, "f", "")) {
        allow_keys(*t, {"f", "times", "values", "amplitude"}, "f");
        s.f.push_back(BodyForce{vec2(*t, "f", "f", true), amplitude(*t, "f")});
    }
    for (const toml::table* t : tables(root, "g", "")) {
        allow_keys(*t, {"tag", "g", "times", "values", "amplitude"}, "g");
        const auto tag = opt_integer(*t, "tag", "g");
        if (!tag)
            throw ConfigError("missing 'g.tag'");
        s.g.push_back(EdgeTraction{static_cast<int>(*tag), vec2(*t, "g", "g", true), amplitude(*t, "g")});
    }
    for (const toml::table* t : tables(root, "rho", "")) {
        allow_keys(*t, {"stress", "times", "values", "amplitude"}, "rho");
        const auto c = numbers(*t, "stress", "rho", 3);
        s.rho.push_back(SafeLoadStress{Sym::from_components(2, std::span<const double>(c)), amplitude(*t, "rho")});
    }
    return s;
}

Scenario load_scenario(const fs::path& path)
{
    try {
        return parse_scenario(read_file(path), path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Material parse_material(const std::string& text)
{
    const toml::table root = parse_toml(text);
    allow_keys(root, {"dim", "mu", "kappa", "yield", "radius", "normals", "offsets"}, "");
    const auto dim = opt_integer(root, "dim", "").value_or(2);
    if (dim != 2 && dim != 3)
        throw ConfigError("'dim' must be 2 or 3");
    return material(root, static_cast<int>(dim), "material");
}

Material load_material(const fs::path& path)
{
    try {
        return parse_material(read_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

StrainHistory read_history_csv(std::istream& in)
{
    const auto lines = data_lines(in);
    if (lines.empty())
        throw ConfigError("history: no header");
    const auto header = split(lines.front().second);
    int dim = 0;
    if (header == std::vector<std::string>{"t", "xx", "yy", "xy"})
        dim = 2;
    else if (header == std::vector<std::string>{"t", "xx", "yy", "zz", "yz", "xz", "xy"})
        dim = 3;
    else
        throw ConfigError("history: header must be t,xx,yy,xy or t,xx,yy,zz,yz,xz,xy");
    StrainHistory h;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto& [n, line] = lines[k];
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw ConfigError("history line " + std::to_string(n) + ": expected " + std::to_string(header.size()) +
                              " columns");
        h.times.push_back(parse_double(cells[0], n));
        std::vector<double> c;
        for (std::size_t j = 1; j < cells.size(); ++j)
            c.push_back(parse_double(cells[j], n));
        h.strains.push_back(Sym::from_components(dim, std::span<const double>(c)));
    }
    if (h.times.empty())
        throw ConfigError("history: no samples");
    try {
        h.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("history: ") + e.what());
    }
    return h;
}

const std::vector<std::string>& check_names()
{
    static const std::vector<std::string> names{"flow_rule",     "variational_inequality",     "normality",
                                                "yield_residence", "power_balance", "discrete_energy_inequality",
                                                "equilibrium"};
    return names;
}

TimeGrid RunManifest::grid(double T) const
{
    TimeGrid g;
    if (steps) {
        if (*steps < 1)
            throw ConfigError("steps must be at least 1");
        g = TimeGrid::uniform(T, *steps);
    } else if (!times.empty()) {
        g.t = times;
    } else {
        throw ConfigError("manifest gives neither steps nor times");
    }
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("times: ") + e.what());
    }
    return g;
}

RunManifest parse_manifest(const std::string& text, const fs::path& base_dir)
{
    const toml::table root = parse_toml(text);
    allow_keys(root, {"scenario", "steps", "times", "grids", "out", "warm_start", "fields", "emit_plotdata", "solver",
                      "checks"},
               "");
    RunManifest m;
    const auto scenario = opt_string(root, "scenario", "");
    if (!scenario)
        throw ConfigError("missing 'scenario'");
    m.scenario = fs::path(*scenario);
    if (m.scenario.is_relative())
        m.scenario = base_dir / m.scenario;
    m.scenario = fs::absolute(m.scenario).lexically_normal();
    if (!fs::exists(m.scenario))
        throw ConfigError("scenario file '" + m.scenario.string() + "' does not exist");

    if (auto k = opt_integer(root, "steps", "")) {
        if (*k < 1)
            throw ConfigError("'steps' must be at least 1");
        m.steps = static_cast<int>(*k);
    }
    if (const toml::array* t = opt_array(root, "times", ""))
        m.times = numbers(*t, "times");
    if (const toml::array* g = opt_array(root, "grids", "")) {
        for (const auto& n : *g) {
            auto k = n.value<std::int64_t>();
            if (!n.is_integer() || *k < 1)
                throw ConfigError("'grids' must contain positive integers");
            m.grids.push_back(static_cast<int>(*k));
        }
    }
    if (auto out = opt_string(root, "out", ""))
        m.out = *out;
    const std::string warm = opt_string(root, "warm_start", "").value_or("previous");
    if (warm == "previous")
        m.warm_start = WarmStart::Previous;
    else if (warm == "zero")
        m.warm_start = WarmStart::Zero;
    else
        throw ConfigError("'warm_start' must be previous or zero");
    m.fields = opt_string(root, "fields", "").value_or("final");
    if (m.fields != "final" && m.fields != "all" && m.fields != "none")
        throw ConfigError("'fields' must be final, all or none");
    m.emit_plotdata = opt_bool(root, "emit_plotdata", "").value_or(false);

    if (const toml::node* n = root.get("solver")) {
        if (!n->is_table())
            throw ConfigError("'solver' must be a table");
        const toml::table& t = *n->as_table();
        allow_keys(t, {"tol_energy", "tol_res", "max_outer", "relaxation", "threads", "force"}, "solver");
        SolverConfig& c = m.solver;
        c.tol_energy = opt_number(t, "tol_energy", "solver").value_or(c.tol_energy);
        c.tol_res = opt_number(t, "tol_res", "solver").value_or(c.tol_res);
        c.max_outer = static_cast<int>(opt_integer(t, "max_outer", "solver").value_or(c.max_outer));
        c.relaxation = opt_number(t, "relaxation", "solver").value_or(c.relaxation);
        c.threads = static_cast<int>(opt_integer(t, "threads", "solver").value_or(c.threads));
        c.force = opt_bool(t, "force", "solver").value_or(c.force);
    }

    m.checks = check_names();
    if (const toml::node* n = root.get("checks")) {
        if (!n->is_table())
            throw ConfigError("'checks' must be a table");
        const toml::table& t = *n->as_table();
        allow_keys(t, {"enabled"}, "checks");
        if (const toml::array* a = opt_array(t, "enabled", "checks")) {
            m.checks.clear();
            for (const auto& c : *a) {
                auto name = c.value<std::string>();
                if (!name || std::find(check_names().begin(), check_names().end(), *name) == check_names().end())
                    throw ConfigError("unknown check '" + name.value_or("?") + "'");
                m.checks.push_back(*name);
            }
        }
    }
    return m;
}

RunManifest load_manifest(const fs::path& path)
{
    try {
        return parse_manifest(read_file(path), path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void apply_overrides(RunManifest& m, const Overrides& o)
{
    if (o.steps) {
        if (*o.steps < 1)
            throw ConfigError("--steps must be at least 1");
        m.steps = o.steps;
    }
    if (o.out)
        m.out = *o.out;
    if (o.tol_res)
        m.solver.tol_res = *o.tol_res;
    if (o.force)
        m.solver.force = true;
    if (o.emit_plotdata)
        m.emit_plotdata = true;
}

std::optional<int> threads_from_env()
{
    const char* v = std::getenv("PRANDTL_THREADS");
    if (!v || !*v)
        return std::nullopt;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024)
        throw ConfigError(std::string("PRANDTL_THREADS must be a positive integer, got '") + v + "'");
    return static_cast<int>(n);
}

// ---------------------------------------------------------------- CSV writers

void write_energies_csv(std::ostream& out, const EvolutionRecord& rec)
{
    const EnergyLedger& L = rec.ledger;
    const auto trap = energy_balance_residual(rec, Quadrature::Trapezoid);
    const auto endp = energy_balance_residual(rec, Quadrature::Endpoint);
    out << "step,t,Q,D,load_work,sigma_Ewdot,L_wdot,Ldot_u,residual_trapezoid,residual_endpoint,iterations,"
           "equilibrium_residual\n";
    for (std::size_t i = 0; i < rec.grid.t.size(); ++i) {
        out << i << ',' << num(rec.grid.t[i]) << ',' << num(L.Q[i]) << ',' << num(L.D[i]) << ','
            << num(L.load_work[i]) << ',' << num(L.sigma_Ewdot_trapezoid[i]) << ',' << num(L.L_wdot_trapezoid[i])
            << ',' << num(L.Ldot_u_trapezoid[i]) << ',' << num(trap[i]) << ',' << num(endp[i]);
        if (i < rec.reports.size())
            out << ',' << rec.reports[i].iterations << ',' << num(rec.reports[i].equilibrium_residual);
        else
            out << ",,";
        out << '\n';
    }
}

void write_fields_csv(std::ostream& out, const Scenario& s, const EvolutionRecord& rec, int step)
{
    const Mesh& mesh = s.mesh;
    out << "element,region,collar,cx,cy,sxx,syy,sxy,exx,eyy,exy,pxx,pyy,pxy,dev_stress_norm\n";
    for (int el = 0; el < mesh.num_elements(); ++el) {
        const Eigen::Vector2d c = mesh.centroid(el);
        out << el << ',' << mesh.region()[el] << ',' << int(mesh.collar()[el]) << ',' << num(c.x()) << ','
            << num(c.y());
        write_components(out, rec.sigma[step][el]);
        write_components(out, rec.triples[step].e[el]);
        write_components(out, rec.triples[step].p[el].sym());
        out << ',' << num(norm(deviator(rec.sigma[step][el]))) << '\n';
    }
}

void write_triples_csv(std::ostream& out, const EvolutionRecord& rec)
{
    out << "step,t,kind,index,c0,c1,c2\n";
    for (std::size_t i = 0; i < rec.triples.size(); ++i) {
        const DiscreteTriple& x = rec.triples[i];
        const std::string head = std::to_string(i) + "," + num(rec.grid.t[i]) + ",";
        for (int a = 0; a < x.u.size() / 2; ++a)
            out << head << "u," << a << ',' << num(x.u[2 * a]) << ',' << num(x.u[2 * a + 1]) << ",0\n";
        for (std::size_t el = 0; el < x.p.size(); ++el) {
            out << head << "p," << el;
            write_components(out, x.p[el].sym());
            out << '\n';
        }
        for (std::size_t el = 0; el < x.e.size(); ++el) {
            out << head << "e," << el;
            write_components(out, x.e[el]);
            out << '\n';
        }
    }
}

std::vector<DiscreteTriple> read_triples_csv(std::istream& in, const Mesh& mesh, std::vector<double>& times)
{
    const auto lines = data_lines(in);
    if (lines.empty() || split(lines.front().second) != std::vector<std::string>{"step", "t", "kind", "index", "c0",
                                                                                 "c1", "c2"})
        throw ConfigError("triples: bad header");
    std::vector<DiscreteTriple> out;
    times.clear();
    const int nn = mesh.num_nodes(), ne = mesh.num_elements();
    std::vector<std::array<int, 3>> seen;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto& [n, line] = lines[k];
        const auto c = split(line);
        if (c.size() != 7)
            throw ConfigError("triples line " + std::to_string(n) + ": expected 7 columns");
        const int step = static_cast<int>(parse_double(c[0], n));
        if (step < 0 || step > static_cast<int>(out.size()))
            throw ConfigError("triples line " + std::to_string(n) + ": steps must be consecutive");
        if (step == static_cast<int>(out.size())) {
            out.push_back(DiscreteTriple::zero(mesh));
            times.push_back(parse_double(c[1], n));
            seen.push_back({0, 0, 0});
        }
        const int idx = static_cast<int>(parse_double(c[3], n));
        const double v[3] = {parse_double(c[4], n), parse_double(c[5], n), parse_double(c[6], n)};
        DiscreteTriple& x = out[step];
        if (c[2] == "u" && idx >= 0 && idx < nn) {
            x.u[2 * idx] = v[0];
            x.u[2 * idx + 1] = v[1];
            ++seen[step][0];
        } else if (c[2] == "p" && idx >= 0 && idx < ne) {
            x.p[idx] = Dev::from_sym(Sym::from_components(2, std::span<const double>(v, 3)), 1e-9);
            ++seen[step][1];
        } else if (c[2] == "e" && idx >= 0 && idx < ne) {
            x.e[idx] = Sym::from_components(2, std::span<const double>(v, 3));
            ++seen[step][2];
        } else {
            throw ConfigError("triples line " + std::to_string(n) + ": bad kind or index");
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (seen[i] != std::array<int, 3>{nn, ne, ne})
            throw ConfigError("triples: step " + std::to_string(i) + " is incomplete");
    if (out.empty())
        throw ConfigError("triples: no data");
    return out;
}

void write_study_csv(std::ostream& out, const StudyReport& study)
{
    out << "steps,max_step,sigma_cauchy,dissipation_gap,dissipation,energy_residual,delta_k,total_iterations\n";
    for (const auto& r : study.rows)
        out << r.steps << ',' << num(r.max_step) << ',' << num(r.sigma_cauchy) << ',' << num(r.dissipation_gap) << ','
            << num(r.dissipation) << ',' << num(r.energy_residual) << ',' << num(r.delta_k) << ','
            << r.total_iterations << '\n';
}

void write_point_csv(std::ostream& out, const PointRecord& rec)
{
    const int dim = rec.e.empty() ? 2 : rec.e.front().dim();
    const char* comps2[] = {"xx", "yy", "xy"};
    const char* comps3[] = {"xx", "yy", "zz", "yz", "xz", "xy"};
    const auto comps = dim == 2 ? std::span<const char*>(comps2) : std::span<const char*>(comps3);
    out << "t";
    for (const char* prefix : {"eps_", "p_", "s_"})
        for (const char* c : comps)
            out << ',' << prefix << c;
    out << ",Q,D,W,residual\n";
    const auto res = energy_residual(rec);
    for (std::size_t i = 0; i < rec.size(); ++i) {
        out << num(rec.t[i]);
        write_components(out, rec.e[i] + rec.p[i].sym());
        write_components(out, rec.p[i].sym());
        write_components(out, rec.sigma[i]);
        out << ',' << num(rec.Q[i]) << ',' << num(rec.D[i]) << ',' << num(rec.W[i]) << ',' << num(res[i]) << '\n';
    }
}

// ---------------------------------------------------------------- commands

int cmd_run(const RunManifest& m, std::ostream& log)
{
    return guarded(log, [&] {
        const Scenario s = checked_scenario(m.scenario);
        const SolverConfig cfg = effective_config(m);
        const TimeGrid grid = m.grid(s.T);
        EvolutionOptions opts;
        opts.warm_start = m.warm_start;
        opts.force = cfg.force;
        log << "run " << s.name << ": " << s.mesh.num_elements() << " elements, " << grid.steps() << " steps\n";
        const EvolutionRecord rec = run_evolution(s, grid, initial_triple(s, cfg), cfg, opts);

        fs::create_directories(m.out);
        write_file(m.out / "energies.csv", [&](std::ostream& o) { write_energies_csv(o, rec); });
        for (int step : field_steps(m.fields, grid.steps()))
            write_file(m.out / ("fields_" + std::to_string(step) + ".csv"),
                       [&](std::ostream& o) { write_fields_csv(o, s, rec, step); });
        write_file(m.out / "triples.csv", [&](std::ostream& o) { write_triples_csv(o, rec); });
        write_file(m.out / "run.toml", [&](std::ostream& o) { write_run_toml(o, m, cfg, grid); });
        if (m.emit_plotdata)
            write_file(m.out / "plot_energies.csv", [&](std::ostream& o) { write_plot_energies(o, rec); });

        const auto reports = selected_checks(rec, s, m.checks);
        write_file(m.out / "verify.csv", [&](std::ostream& o) { write_verify_csv(o, reports); });
        const bool ok = report_checks(log, reports);
        log << "D(T) = " << brief(rec.ledger.D.back()) << ", Q(T) = " << brief(rec.ledger.Q.back()) << "\n";
        return ok ? exit_ok : exit_verification;
    });
}

int cmd_converge(const RunManifest& m, std::ostream& log)
{
    return guarded(log, [&] {
        if (m.grids.size() < 3)
            throw ConfigError("converge needs at least three grids");
        const Scenario s = checked_scenario(m.scenario);
        const SolverConfig cfg = effective_config(m);
        const StudyReport study = convergence_study(s, m.grids, cfg);
        fs::create_directories(m.out);
        write_file(m.out / "study.csv", [&](std::ostream& o) { write_study_csv(o, study); });
        if (m.emit_plotdata)
            write_file(m.out / "plot_study.csv", [&](std::ostream& o) { write_plot_study(o, study); });
        for (const auto& r : study.rows)
            log << "k = " << r.steps << ": |sigma_k - sigma_2k| = " << brief(r.sigma_cauchy)
                << ", D(T) = " << brief(r.dissipation) << "\n";
        const bool ok = study.cauchy_decreasing();
        log << (ok ? "PASS" : "FAIL") << " Cauchy norms strictly decreasing\n";
        return ok ? exit_ok : exit_verification;
    });
}

int cmd_verify(const fs::path& dir, std::ostream& log)
{
    return guarded(log, [&] {
        const RunManifest m = load_manifest(dir / "run.toml");
        const Scenario s = checked_scenario(m.scenario);
        std::ifstream in(dir / "triples.csv", std::ios::binary);
        if (!in)
            throw ConfigError("cannot open '" + (dir / "triples.csv").string() + "'");
        std::vector<double> times;
        auto triples = read_triples_csv(in, s.mesh, times);
        if (times != m.times)
            throw ConfigError("triples.csv and run.toml disagree on the time grid");
        const EvolutionRecord rec = assemble_record(s, TimeGrid{times}, std::move(triples));
        const auto reports = selected_checks(rec, s, m.checks);
        write_file(dir / "verify.csv", [&](std::ostream& o) { write_verify_csv(o, reports); });
        return report_checks(log, reports) ? exit_ok : exit_verification;
    });
}

int cmd_point(const fs::path& material_path, const fs::path& history_path, std::ostream& out, std::ostream& log)
{
    return guarded(log, [&] {
        const Material mat = load_material(material_path);
        std::ifstream in(history_path, std::ios::binary);
        if (!in)
            throw ConfigError("cannot open '" + history_path.string() + "'");
        StrainHistory h;
        try {
            h = read_history_csv(in);
        } catch (const ConfigError& e) {
            throw ConfigError(history_path.string() + ": " + e.what());
        }
        if (h.dim() != mat.yield.dim())
            throw ConfigError("history and material dimensions differ");
        const PointRecord rec = run_point(mat, h);
        write_point_csv(out, rec);
        const auto res = energy_residual(rec);
        double worst = 0.0;
        for (double r : res)
            worst = std::max(worst, std::abs(r));
        log << "point: " << rec.size() << " samples, D = " << brief(rec.D.back()) << ", max |energy residual| = "
            << brief(worst) << "\n";
        return exit_ok;
    });
}

int cmd_mesh(const fs::path& scenario, const fs::path& out, std::ostream& log)
{
    return guarded(log, [&] {
        const Scenario s = load_scenario(scenario);
        if (out.has_parent_path())
            fs::create_directories(out.parent_path());
        write_file(out, [&](std::ostream& o) { write_mesh(o, s.mesh); });
        log << "mesh: " << s.mesh.num_nodes() << " nodes, " << s.mesh.num_elements() << " elements\n";
        return exit_ok;
    });
}

} // namespace prandtl::io
