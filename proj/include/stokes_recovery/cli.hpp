#pragma once

// Batch experiment runner: JSON config -> sweep tables (CSV) + run manifest.
// See README.md for the config grammar.

#include "stokes_recovery/recovery.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace stokes_rec {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct DomainSpec {
    std::string type = "unit_square";  // unit_square | square_with_hole | mesh_file
    Point center{0.5, 0.5};
    double radius = 0.1;
    std::string path;
    std::vector<int> unknown_markers;  // empty: generator default
};

struct TableSpec {
    std::string name = "results";
    DomainSpec domain;
    std::string solution = "none";
    std::optional<std::array<double, 2>> known_constant;  // g_k when not taken from the solution
    std::optional<std::map<int, std::array<double, 2>>> reference;  // extra Dirichlet markers of a same-mesh reference solve
    std::optional<std::string> measurements_file;
    std::vector<int> velocity_components{1, 2};
    double r = 0.1;
    double k = 0.4;

    std::vector<int> n{2};
    std::vector<double> s{1.0};
    std::vector<GramMode> mode{GramMode::jacobi_threshold};
    std::vector<double> eps{1e-10};
    std::vector<double> tol_background{1e-9};
    std::vector<double> tol_representer{1e-9};
    std::vector<int> velocity_grid;
    std::vector<int> pressure_grid;
    std::vector<Point> velocity_centers;
    std::vector<Point> pressure_centers;
    std::vector<int> center_count;

    std::optional<int> drag_lift_marker;
    bool field_dump = false;
};

struct RecoveryConfig {
    fs::path path;
    fs::path base_dir;
    fs::path output_dir;
    int threads = 0;
    json raw;
    std::vector<TableSpec> tables;
};

namespace detail {

inline std::string key_path(const std::string& scope, const std::string& key) {
    return scope.empty() ? key : scope + "." + key;
}

struct ConfigReader {
    std::string file;

    [[noreturn]] void fail(const std::string& key, const std::string& why) const {
        throw ConfigError(file + ": key '" + key + "': " + why);
    }

    template <class T>
    T scalar(const json& j, const std::string& key) const {
        try {
            return j.get<T>();
        } catch (const json::exception&) {
            fail(key, "expected " + std::string(std::is_same_v<T, std::string> ? "a string"
                                                : std::is_same_v<T, bool>      ? "a boolean"
                                                : std::is_integral_v<T>        ? "an integer"
                                                                               : "a number") +
                          ", got " + j.dump());
        }
    }

    template <class T>
    std::vector<T> list(const json& j, const std::string& key) const {
        std::vector<T> out;
        if (j.is_array()) {
            for (const auto& e : j) out.push_back(scalar<T>(e, key));
            if (out.empty()) fail(key, "sweep list is empty");
        } else {
            out.push_back(scalar<T>(j, key));
        }
        return out;
    }

    Point point(const json& j, const std::string& key) const {
        if (!j.is_array() || j.size() != 2) fail(key, "expected [x, y]");
        return {scalar<double>(j[0], key), scalar<double>(j[1], key)};
    }

    std::vector<Point> points(const json& j, const std::string& key) const {
        if (!j.is_array()) fail(key, "expected a list of [x, y] pairs");
        std::vector<Point> out;
        for (const auto& e : j) out.push_back(point(e, key));
        return out;
    }

    std::array<double, 2> vec2(const json& j, const std::string& key) const {
        const Point p = point(j, key);
        return {p.x, p.y};
    }

    void positive(double v, const std::string& key) const {
        if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be positive");
    }

    void apply(TableSpec& t, const json& j, const std::string& scope) const {
        if (!j.is_object()) fail(scope.empty() ? "<root>" : scope, "expected an object");
        for (const auto& [key, v] : j.items()) {
            const std::string kp = key_path(scope, key);
            if (key == "name") {
                t.name = scalar<std::string>(v, kp);
                if (t.name.empty() || t.name.find_first_of("/\\") != std::string::npos) fail(kp, "invalid table name");
            } else if (key == "domain") {
                apply_domain(t.domain, v, kp);
            } else if (key == "n") {
                t.n = list<int>(v, kp);
                for (int n : t.n)
                    if (n < 0 || n > 10) fail(kp, "refinement level out of range [0, 10]");
            } else if (key == "solution") {
                t.solution = scalar<std::string>(v, kp);
                if (t.solution != "none") {
                    try {
                        exact_solution(t.solution);
                    } catch (const ConfigError&) {
                        fail(kp, "unknown solution '" + t.solution + "'");
                    }
                }
            } else if (key == "known_boundary") {
                t.known_constant = vec2(v, kp);
            } else if (key == "reference") {
                if (!v.is_object()) fail(kp, "expected an object");
                std::map<int, std::array<double, 2>> dir;
                for (const auto& [mk, val] : v.items()) {
                    const std::string mp = key_path(kp, mk);
                    int id = 0;
                    try {
                        std::size_t used = 0;
                        id = std::stoi(mk, &used);
                        if (used != mk.size()) throw std::invalid_argument(mk);
                    } catch (const std::exception&) {
                        fail(mp, "marker ids must be integers");
                    }
                    dir[id] = vec2(val, mp);
                }
                t.reference = dir;
            } else if (key == "measurements_file") {
                t.measurements_file = scalar<std::string>(v, kp);
            } else if (key == "velocity_components") {
                t.velocity_components = list<int>(v, kp);
                for (int c : t.velocity_components)
                    if (c != 1 && c != 2) fail(kp, "components are 1 or 2");
            } else if (key == "r") {
                t.r = scalar<double>(v, kp);
                positive(t.r, kp);
            } else if (key == "k") {
                t.k = scalar<double>(v, kp);
                positive(t.k, kp);
            } else if (key == "s") {
                t.s = list<double>(v, kp);
                for (double s : t.s) positive(s, kp);
            } else if (key == "mode") {
                t.mode.clear();
                for (const auto& m : list<std::string>(v, kp)) {
                    try {
                        t.mode.push_back(parse_gram_mode(m));
                    } catch (const ConfigError&) {
                        fail(kp, "unknown Gram mode '" + m + "' (plain, jacobi, jacobi_threshold)");
                    }
                }
            } else if (key == "eps") {
                t.eps = list<double>(v, kp);
                for (double e : t.eps)
                    if (!(e >= 0.0) || e >= 1.0) fail(kp, "must lie in [0, 1)");
            } else if (key == "tol_background") {
                t.tol_background = list<double>(v, kp);
                for (double e : t.tol_background) positive(e, kp);
            } else if (key == "tol_representer") {
                t.tol_representer = list<double>(v, kp);
                for (double e : t.tol_representer) positive(e, kp);
            } else if (key == "velocity_grid") {
                t.velocity_grid = list<int>(v, kp);
                for (int l : t.velocity_grid)
                    if (l < 0) fail(kp, "grid sizes are non-negative");
            } else if (key == "pressure_grid") {
                t.pressure_grid = list<int>(v, kp);
                for (int l : t.pressure_grid)
                    if (l < 0) fail(kp, "grid sizes are non-negative");
            } else if (key == "velocity_centers") {
                t.velocity_centers = points(v, kp);
            } else if (key == "pressure_centers") {
                t.pressure_centers = points(v, kp);
            } else if (key == "center_count") {
                t.center_count = list<int>(v, kp);
                for (int c : t.center_count)
                    if (c < 0) fail(kp, "counts are non-negative");
            } else if (key == "drag_lift_marker") {
                t.drag_lift_marker = scalar<int>(v, kp);
            } else if (key == "field_dump") {
                t.field_dump = scalar<bool>(v, kp);
            } else {
                fail(kp, "unknown key");
            }
        }
    }

    void apply_domain(DomainSpec& d, const json& j, const std::string& scope) const {
        if (!j.is_object()) fail(scope, "expected an object");
        for (const auto& [key, v] : j.items()) {
            const std::string kp = key_path(scope, key);
            if (key == "type") {
                d.type = scalar<std::string>(v, kp);
                if (d.type != "unit_square" && d.type != "square_with_hole" && d.type != "mesh_file")
                    fail(kp, "unknown domain type '" + d.type + "' (unit_square, square_with_hole, mesh_file)");
            } else if (key == "center") {
                d.center = point(v, kp);
            } else if (key == "radius") {
                d.radius = scalar<double>(v, kp);
                positive(d.radius, kp);
            } else if (key == "path") {
                d.path = scalar<std::string>(v, kp);
            } else if (key == "unknown_markers") {
                d.unknown_markers = list<int>(v, kp);
            } else {
                fail(kp, "unknown key");
            }
        }
    }
};

}  // namespace detail

/// Parses a config document. `path` is used for diagnostics and to resolve
/// relative paths (output directory, mesh and measurement files).
inline RecoveryConfig parse_config(const std::string& text, const fs::path& path = "config.json") {
    RecoveryConfig cfg;
    cfg.path = path;
    cfg.base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    detail::ConfigReader rd{path.string()};
    try {
        cfg.raw = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!cfg.raw.is_object()) rd.fail("<root>", "expected an object");
    json defaults = json::object();
    cfg.output_dir = cfg.base_dir / "out";
    for (const auto& [key, v] : cfg.raw.items()) {
        if (key == "output") {
            cfg.output_dir = cfg.base_dir / rd.scalar<std::string>(v, key);
        } else if (key == "threads") {
            cfg.threads = rd.scalar<int>(v, key);
            if (cfg.threads < 0) rd.fail(key, "must be non-negative");
        } else if (key != "tables") {
            defaults[key] = v;
        }
    }
    TableSpec base;
    rd.apply(base, defaults, "");
    if (cfg.raw.contains("tables")) {
        const auto& tabs = cfg.raw["tables"];
        if (!tabs.is_array() || tabs.empty()) rd.fail("tables", "expected a non-empty list of tables");
        std::set<std::string> names;
        for (std::size_t i = 0; i < tabs.size(); ++i) {
            TableSpec t = base;
            t.name = "table" + std::to_string(i);
            rd.apply(t, tabs[i], "tables[" + std::to_string(i) + "]");
            if (!names.insert(t.name).second) rd.fail("tables[" + std::to_string(i) + "].name", "duplicate table name");
            cfg.tables.push_back(std::move(t));
        }
    } else {
        cfg.tables.push_back(base);
    }
    for (std::size_t i = 0; i < cfg.tables.size(); ++i) {
        const auto& t = cfg.tables[i];
        const std::string scope = cfg.raw.contains("tables") ? "tables[" + std::to_string(i) + "]." : "";
        if (t.domain.type == "mesh_file" && t.domain.path.empty()) rd.fail(scope + "domain.path", "required for mesh_file");
        if (t.domain.type == "mesh_file" && t.domain.unknown_markers.empty())
            rd.fail(scope + "domain.unknown_markers", "required for mesh_file");
        const bool grids = !t.velocity_grid.empty() || !t.pressure_grid.empty();
        const bool centers = !t.velocity_centers.empty() || !t.pressure_centers.empty();
        if (grids && centers) rd.fail(scope + "velocity_centers", "grid and explicit centers are exclusive");
        if (!t.center_count.empty() && !centers) rd.fail(scope + "center_count", "requires explicit centers");
        if (t.measurements_file && (grids || centers))
            rd.fail(scope + "measurements_file", "exclusive with generated measurement centers");
        if (t.measurements_file && (t.solution != "none" || t.reference))
            rd.fail(scope + "measurements_file", "measured data has no reference; set solution to \"none\"");
        if (t.reference && t.solution != "none") rd.fail(scope + "reference", "exclusive with an exact solution");
        if (!t.measurements_file && t.solution == "none" && !t.reference)
            rd.fail(scope + "solution", "needs an exact solution, a reference solve or a measurements file");
    }
    return cfg;
}

inline RecoveryConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

// --- execution ------------------------------------------------------------------

struct TableRow {
    Index m_u = 0;
    Index m_p = 0;
    double s = 1.0;
    int n = 0;
    GramMode mode = GramMode::jacobi_threshold;
    double eps = 0.0;
    GramReport report;
    std::optional<RecoveryErrors> errors;
    std::optional<std::array<double, 2>> drag_lift;
    double max_residual = 0.0;
    double seconds = 0.0;
};

inline std::string format_sig6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// CSV with one row per sweep point, 6 significant digits.
inline std::string emit_table(const std::vector<TableRow>& rows, bool with_qoi) {
    std::ostringstream os;
    os << "m_u,m_p,s,n,mode,eps,cond_G,cond_GP,rank,err_u,err_p,err";
    if (with_qoi) os << ",c_D,c_L";
    os << "\n";
    for (const auto& r : rows) {
        os << r.m_u << ',' << r.m_p << ',' << format_sig6(r.s) << ',' << r.n << ',' << to_string(r.mode) << ','
           << format_sig6(r.eps) << ',' << format_sig6(r.report.cond_G) << ',' << format_sig6(r.report.cond_truncated)
           << ',' << r.report.rank;
        if (r.errors)
            os << ',' << format_sig6(r.errors->err_u) << ',' << format_sig6(r.errors->err_p) << ','
               << format_sig6(r.errors->err);
        else
            os << ",,,";
        if (with_qoi) {
            if (r.drag_lift)
                os << ',' << format_sig6((*r.drag_lift)[0]) << ',' << format_sig6((*r.drag_lift)[1]);
            else
                os << ",,";
        }
        os << "\n";
    }
    return os.str();
}

inline Mesh build_domain_mesh(const DomainSpec& d, int n, const fs::path& base_dir) {
    if (d.type == "unit_square") return generate_unit_square(n);
    if (d.type == "square_with_hole") return generate_square_with_hole(n, d.center, d.radius);
    std::ifstream in(base_dir / d.path);
    if (!in) throw MeshError("cannot open mesh file " + (base_dir / d.path).string());
    std::stringstream ss;
    ss << in.rdbuf();
    return import_mesh(ss.str());
}

inline std::set<int> unknown_marker_set(const DomainSpec& d) {
    if (!d.unknown_markers.empty()) return {d.unknown_markers.begin(), d.unknown_markers.end()};
    if (d.type == "square_with_hole") return {2};
    return {1};
}

/// Boundary marker of every boundary Q2 node; vertices shared by several
/// markers keep the smallest id found in `prefer` order, else the smallest.
inline std::vector<int> node_markers(const DofLayout& L, const std::set<int>& prefer) {
    const Mesh& m = *L.mesh;
    std::vector<int> out(static_cast<std::size_t>(L.num_nodes()), 0);
    std::map<std::pair<Index, Index>, Index> edge_id;
    for (std::size_t e = 0; e < L.edges.size(); ++e)
        edge_id[{std::min(L.edges[e][0], L.edges[e][1]), std::max(L.edges[e][0], L.edges[e][1])}] = static_cast<Index>(e);
    auto assign = [&](Index node, int mk) {
        int& cur = out[static_cast<std::size_t>(node)];
        if (cur == 0 || (prefer.count(mk) && !prefer.count(cur)) ||
            (prefer.count(mk) == prefer.count(cur) && mk < cur))
            cur = mk;
    };
    for (const auto& be : m.boundary_edges) {
        assign(be.v[0], be.marker);
        assign(be.v[1], be.marker);
        const auto it = edge_id.find({std::min(be.v[0], be.v[1]), std::max(be.v[0], be.v[1])});
        if (it != edge_id.end()) assign(L.edge_node(it->second), be.marker);
    }
    return out;
}

/// Same-mesh FE reference: known-boundary data plus the configured extra
/// Dirichlet markers, do-nothing on the remaining unknown markers.
inline DiscreteField reference_solve(const Discretization& D, const TableSpec& t, double tol) {
    const auto& dir = *t.reference;
    std::set<int> natural;
    for (int mk : D.layout().unknown_markers)
        if (!dir.count(mk)) natural.insert(mk);
    const bool all = natural.empty();
    std::set<int> ref_unknown = all ? D.layout().unknown_markers : natural;
    Discretization R(D.mesh(), ref_unknown);
    std::set<int> dir_markers;
    for (const auto& [mk, v] : dir) dir_markers.insert(mk);
    const auto marks = node_markers(R.layout(), dir_markers);
    const std::array<double, 2> known = t.known_constant.value_or(std::array<double, 2>{0.0, 0.0});
    std::map<std::pair<double, double>, std::array<double, 2>> value_at;
    for (Index i = 0; i < R.layout().num_nodes(); ++i) {
        const int mk = marks[static_cast<std::size_t>(i)];
        if (mk == 0) continue;
        const Point x = R.layout().node_coords[static_cast<std::size_t>(i)];
        value_at[{x.x, x.y}] = dir.count(mk) ? dir.at(mk) : known;
    }
    const VectorFunction g = [&](Point x) {
        auto it = value_at.find({x.x, x.y});
        return it == value_at.end() ? std::array<double, 2>{0.0, 0.0} : it->second;
    };
    const auto zero = [](Point) { return std::array<double, 2>{0.0, 0.0}; };
    const auto rf = solve_stokes(R, zero, g, all ? DirichletPart::all : DirichletPart::known, tol);
    DiscreteField out = DiscreteField::zero(D.layout());
    for (Index i = 0; i < D.layout().num_nodes(); ++i)
        for (int c = 0; c < 2; ++c)
            out.velocity[D.layout().velocity_index(i, c)] = rf.velocity[R.layout().velocity_index(i, c)];
    out.pressure = rf.pressure;
    return out;
}

struct TableResult {
    std::string name;
    std::vector<TableRow> rows;
    bool with_qoi = false;
    double seconds = 0.0;
};

struct RunOptions {
    bool field_dumps = true;
    bool write_files = true;
    std::ostream* log = nullptr;
};

inline MeasurementSet measurement_set_for(const TableSpec& t, const Mesh& mesh, int lu, int lp, int count,
                                          Index& m_u, Index& m_p) {
    std::vector<Point> vc, pc;
    if (!t.velocity_centers.empty() || !t.pressure_centers.empty()) {
        auto take = [count](const std::vector<Point>& all) {
            if (count < 0 || static_cast<std::size_t>(count) >= all.size()) return all;
            return std::vector<Point>(all.begin(), all.begin() + count);
        };
        vc = take(t.velocity_centers);
        pc = take(t.pressure_centers);
    } else {
        std::vector<Circle> holes;
        if (t.domain.type == "square_with_hole") holes.push_back({t.domain.center, t.domain.radius});
        if (lu > 0) vc = gaussian_centers_grid(lu, mesh, holes);
        if (lp > 0) pc = gaussian_centers_grid(lp, mesh, holes);
    }
    MeasurementSet set;
    for (int c : t.velocity_components)
        for (const auto& z : vc) set.functionals.push_back({z, c, t.r});
    for (const auto& z : pc) set.functionals.push_back({z, 3, t.r});
    m_u = static_cast<Index>(vc.size());
    m_p = static_cast<Index>(pc.size());
    return set;
}

inline TableResult run_table(const RecoveryConfig& cfg, const TableSpec& t, const RunOptions& opt) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    TableResult out;
    out.name = t.name;
    out.with_qoi = t.drag_lift_marker.has_value();
    const std::vector<int> lus = t.velocity_grid.empty() ? std::vector<int>{0} : t.velocity_grid;
    const std::vector<int> lps = t.pressure_grid.empty() ? std::vector<int>{0} : t.pressure_grid;
    const std::vector<int> counts = t.center_count.empty() ? std::vector<int>{-1} : t.center_count;
    std::optional<ExactSolution> exact;
    if (t.solution != "none") exact = exact_solution(t.solution);
    const std::vector<int> ns = t.domain.type == "mesh_file" ? std::vector<int>{0} : t.n;

    for (int n : ns) {
        Mesh mesh = build_domain_mesh(t.domain, n, cfg.base_dir);
        Discretization D(std::move(mesh), unknown_marker_set(t.domain));
        const auto& Q = D.context().quadrature();
        std::optional<DiscreteField> reference;
        std::optional<MeasurementSet> file_set;
        if (t.measurements_file) {
            std::ifstream in(cfg.base_dir / *t.measurements_file);
            if (!in) throw ConfigError("cannot open measurements file " + (cfg.base_dir / *t.measurements_file).string());
            file_set = read_measurements_csv(in);
            if (!file_set->values) throw ConfigError("measurements file carries no values");
        }
        if (t.reference) reference = reference_solve(D, t, t.tol_background.front());

        VectorFunction f = exact ? exact->f : VectorFunction([](Point) { return std::array<double, 2>{0.0, 0.0}; });
        VectorFunction g = exact ? exact->u : VectorFunction(nullptr);
        if (t.known_constant) {
            const auto kc = *t.known_constant;
            g = [kc](Point) { return kc; };
        }
        std::map<double, DiscreteField> backgrounds;
        for (double s : t.s)
            for (GramMode mode : t.mode)
                for (double eps : t.eps)
                    for (double tb : t.tol_background)
                        for (double tr : t.tol_representer)
                            for (int lu : lus)
                                for (int lp : lps)
                                    for (int cnt : counts) {
                                        const auto t0 = clock::now();
                                        TableRow row;
                                        row.s = s;
                                        row.n = n;
                                        row.mode = mode;
                                        row.eps = eps;
                                        MeasurementSet set;
                                        if (file_set) {
                                            set = *file_set;
                                            for (const auto& fn : set.functionals) (fn.is_pressure() ? row.m_p : row.m_u)++;
                                        } else {
                                            set = measurement_set_for(t, D.mesh(), lu, lp, cnt, row.m_u, row.m_p);
                                        }
                                        Vector w;
                                        if (file_set)
                                            w = *file_set->values;
                                        else if (exact)
                                            w = measurement_vector(set, exact->field(), Q);
                                        else
                                            w = measurement_vector(set, *reference, Q);
                                        auto bit = backgrounds.find(tb);
                                        if (bit == backgrounds.end())
                                            bit = backgrounds.emplace(tb, solve_background(D, f, g, tb)).first;
                                        RecoveryOptions ro;
                                        ro.s = s;
                                        ro.k = t.k;
                                        ro.mode = mode;
                                        ro.eps = eps;
                                        ro.tol_background = tb;
                                        ro.tol_representer = tr;
                                        ro.threads = cfg.threads;
                                        const auto res = recover(D, set, w, bit->second, ro);
                                        row.report = res.report;
                                        if (res.residuals.size() > 0) row.max_residual = res.residuals.cwiseAbs().maxCoeff();
                                        if (exact) row.errors = recovery_errors(*exact, res.field);
                                        if (reference) {
                                            DiscreteField diff = *reference;
                                            diff.velocity -= res.field.velocity;
                                            diff.pressure -= res.field.pressure;
                                            diff.pressure_shift -= res.field.pressure_shift;
                                            row.errors = field_errors(D.layout(), nullptr, &diff);
                                        }
                                        if (t.drag_lift_marker) row.drag_lift = drag_lift(res.field, *t.drag_lift_marker);
                                        row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
                                        if (opt.write_files && opt.field_dumps && t.field_dump) {
                                            fs::create_directories(cfg.output_dir);
                                            std::ofstream fo(cfg.output_dir / (t.name + "_row" +
                                                                               std::to_string(out.rows.size()) + "_field.csv"));
                                            write_field_csv(fo, res.field);
                                        }
                                        if (opt.log)
                                            *opt.log << t.name << ": n=" << n << " s=" << s << " m_u=" << row.m_u
                                                     << " m_p=" << row.m_p << " " << to_string(mode)
                                                     << " (" << format_sig6(row.seconds) << " s)\n";
                                        out.rows.push_back(std::move(row));
                                    }
        if (reference && t.drag_lift_marker && opt.log) {
            const auto cd = drag_lift(*reference, *t.drag_lift_marker);
            *opt.log << t.name << ": reference c_D=" << format_sig6(cd[0]) << " c_L=" << format_sig6(cd[1]) << "\n";
        }
    }
    out.seconds = std::chrono::duration<double>(clock::now() - t_start).count();
    return out;
}

inline std::string version_string() { return "stokes_recovery 1.0.0"; }

/// Runs every table, writes `<name>.csv` and `manifest.json` under the
/// output directory and returns the results.
inline std::vector<TableResult> run_experiment(const RecoveryConfig& cfg, const RunOptions& opt = {}) {
    std::vector<TableResult> results;
    json manifest;
    manifest["config_path"] = cfg.path.string();
    manifest["config"] = cfg.raw;
    manifest["version"] = version_string();
    manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
#ifdef __VERSION__
    manifest["compiler"] = __VERSION__;
#endif
    manifest["threads"] = cfg.threads > 0 ? cfg.threads : thread_count();
    manifest["tables"] = json::array();
    for (const auto& t : cfg.tables) {
        results.push_back(run_table(cfg, t, opt));
        const auto& r = results.back();
        json entry{{"name", r.name}, {"csv", r.name + ".csv"}, {"rows", r.rows.size()}, {"seconds", r.seconds}};
        entry["row_seconds"] = json::array();
        for (const auto& row : r.rows) entry["row_seconds"].push_back(row.seconds);
        manifest["tables"].push_back(entry);
        if (opt.write_files) {
            fs::create_directories(cfg.output_dir);
            std::ofstream(cfg.output_dir / (r.name + ".csv")) << emit_table(r.rows, r.with_qoi);
        }
    }
    if (opt.write_files) std::ofstream(cfg.output_dir / "manifest.json") << manifest.dump(2) << "\n";
    return results;
}

}  // namespace stokes_rec
