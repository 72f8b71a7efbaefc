// recover: command-line front end of the Stokes recovery library.
//
//   recover run <config>          run every table, write CSVs, field dumps, manifest
//   recover table <config>        same without field dumps
//   recover mesh gen ...          generate a mesh file
//   recover mesh import <file>    validate a mesh file and print a summary
//   recover mesh export <config>  write the config's domain mesh

#include "stokes_recovery/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace stokes_rec;

namespace {

int report(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        std::cerr << "recover: error [" << err->stage() << "] " << err->what() << "\n";
        return dynamic_cast<const ConfigError*>(&e) ? 2 : 3;
    }
    std::cerr << "recover: error " << e.what() << "\n";
    return 3;
}

void print_summary(const Mesh& m, std::ostream& os) {
    os << "vertices " << m.num_vertices() << "\ncells " << m.num_cells() << "\nboundary edges "
       << m.boundary_edges.size() << "\narea " << format_double(m.area()) << "\n";
    for (const auto& [id, name] : m.markers) os << "marker " << id << ' ' << name << "\n";
    for (const auto& c : boundary_loops(m))
        os << "loop marker " << c.marker << (c.closed ? " closed" : " open") << " edges " << c.edge_count()
           << " length " << format_double(c.arc_length) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal recovery of Stokes flows from local averages"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run the experiment tables of a config file");
    run->add_option("config", config_path, "JSON config file")->required();
    auto* table = app.add_subcommand("table", "Run the tables without field dumps");
    table->add_option("config", config_path, "JSON config file")->required();

    auto* mesh = app.add_subcommand("mesh", "Mesh utilities");
    mesh->require_subcommand(1);
    std::string gen_type = "unit_square", out_path;
    int gen_n = 2;
    std::vector<double> gen_center{0.5, 0.5};
    double gen_radius = 0.1;
    auto* gen = mesh->add_subcommand("gen", "Generate a structured mesh");
    gen->add_option("--type", gen_type, "unit_square or square_with_hole")
        ->check(CLI::IsMember({"unit_square", "square_with_hole"}));
    gen->add_option("-n,--refinements", gen_n, "Refinement level")->check(CLI::Range(0, 10));
    gen->add_option("--center", gen_center, "Hole center x y")->expected(2);
    gen->add_option("--radius", gen_radius, "Hole radius");
    gen->add_option("-o,--output", out_path, "Output file (default: stdout)");
    std::string import_path;
    auto* imp = mesh->add_subcommand("import", "Validate a mesh file and print a summary");
    imp->add_option("file", import_path, "Mesh file")->required();
    auto* exp = mesh->add_subcommand("export", "Write the domain mesh of a config's first table");
    exp->add_option("config", config_path, "JSON config file")->required();
    exp->add_option("-o,--output", out_path, "Output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    auto emit = [&](const std::string& text) {
        if (out_path.empty()) {
            std::cout << text;
            return;
        }
        std::ofstream out(out_path);
        if (!out) throw Error("io", "cannot write " + out_path);
        out << text;
    };

    try {
        if (run->parsed() || table->parsed()) {
            const auto cfg = load_config(config_path);
            RunOptions opt;
            opt.field_dumps = run->parsed();
            opt.log = &std::cerr;
            const auto results = run_experiment(cfg, opt);
            for (const auto& r : results)
                std::cout << (cfg.output_dir / (r.name + ".csv")).string() << " (" << r.rows.size() << " rows)\n";
            std::cout << (cfg.output_dir / "manifest.json").string() << "\n";
        } else if (gen->parsed()) {
            const Mesh m = gen_type == "unit_square"
                               ? generate_unit_square(gen_n)
                               : generate_square_with_hole(gen_n, {gen_center[0], gen_center[1]}, gen_radius);
            emit(export_mesh(m));
        } else if (imp->parsed()) {
            std::ifstream in(import_path);
            if (!in) throw MeshError("cannot open " + import_path);
            std::stringstream ss;
            ss << in.rdbuf();
            print_summary(import_mesh(ss.str()), std::cout);
        } else if (exp->parsed()) {
            const auto cfg = load_config(config_path);
            const auto& t = cfg.tables.front();
            emit(export_mesh(build_domain_mesh(t.domain, t.n.front(), cfg.base_dir)));
        }
    } catch (const std::exception& e) {
        return report(e);
    }
    return 0;
}
