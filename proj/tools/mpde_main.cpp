#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mpde/bench.hpp"
#include "mpde/neighbors.hpp"

namespace fs = std::filesystem;
using namespace mpde;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    int threads = 0;
};

bench::ExperimentConfig load_config(const GlobalArgs& g) {
    if (g.config_path.empty()) throw ConfigError("--config is required");
    auto cfg = bench::ExperimentConfig::from_json_file(g.config_path);
    if (g.seed_set) cfg.seed = g.seed;
    if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
    return cfg;
}

void setup_threads(const GlobalArgs& g) {
    int threads = g.threads;
    if (threads <= 0) {
        if (const char* env = std::getenv("MPDE_THREADS")) threads = std::atoi(env);
    }
    if (threads <= 0) threads = 1;
    set_thread_count(threads);
}

void add_global_flags(CLI::App* cmd, GlobalArgs& g) {
    cmd->add_option("--config", g.config_path, "experiment config JSON");
    cmd->add_option("--seed", g.seed, "override the config seed")
        ->each([&](const std::string&) { g.seed_set = true; });
    cmd->add_option("--out", g.out_dir, "override the output directory");
    cmd->add_option("--threads", g.threads, "worker threads (default: MPDE_THREADS or 1)");
}

int do_sample(const GlobalArgs& g) {
    auto cfg = load_config(g);
    auto p = bench::build_pipeline(cfg);
    fs::create_directories(cfg.output_dir);
    geom::save_cloud_csv(p.cloud, (fs::path(cfg.output_dir) / "cloud.csv").string());
    std::cout << "wrote " << cfg.output_dir << "/cloud.csv (" << p.cloud.size() << " points)\n";
    return 0;
}

int do_build_operator(const GlobalArgs& g) {
    auto cfg = load_config(g);
    auto p = bench::build_pipeline(cfg);
    fs::create_directories(cfg.output_dir);
    geom::save_cloud_csv(p.cloud, (fs::path(cfg.output_dir) / "cloud.csv").string());
    op::save_operator(p.residual_operator(), (fs::path(cfg.output_dir) / "operator.txt").string());
    if (p.has_boundary)
        gpdm::save_ghosts_csv(p.ghosts, (fs::path(cfg.output_dir) / "ghosts.csv").string());
    std::cout << "wrote " << cfg.output_dir << "/operator.txt (" << p.residual_operator().n_rows
              << "x" << p.residual_operator().n_cols << ", nnz "
              << p.residual_operator().nnz() << ")\n";
    return 0;
}

int do_run_solver(const GlobalArgs& g, bench::SolverKind kind) {
    auto cfg = load_config(g);
    cfg.solver = kind;
    if (kind == bench::SolverKind::NN && !cfg.nn.has_value())
        throw ConfigError("solve-nn needs an nn config block");
    auto rep = bench::run(cfg);
    std::cout << bench::render_report_table({{cfg.N, rep}});
    return 0;
}

int do_metrics(const GlobalArgs& g) {
    auto cfg = load_config(g);
    double diff = bench::verify(cfg);
    std::cout << "metrics recomputed from artifacts in " << cfg.output_dir
              << "; max deviation from report.json = " << diff << "\n";
    return 0;
}

int do_verify(const GlobalArgs& g) {
    auto cfg = load_config(g);
    double diff = bench::verify(cfg);
    bool ok = diff <= 1e-12;
    std::cout << (ok ? "PASS" : "FAIL") << ": max metric deviation " << diff << "\n";
    if (!ok) throw NumericalError("verification failed");
    return 0;
}

int do_compare_activations(const GlobalArgs& g) {
    auto cfg = load_config(g);
    std::vector<Index> N_list = {cfg.N};
    auto rows = bench::compare_activations(cfg, N_list);
    auto table = bench::render_activation_table(rows, N_list);
    std::cout << table;
    fs::create_directories(cfg.output_dir);
    std::ofstream out(fs::path(cfg.output_dir) / "activations.txt");
    out << table;
    return 0;
}

int do_report(const GlobalArgs& g) {
    auto cfg = load_config(g);
    std::ifstream in(fs::path(cfg.output_dir) / "report.txt");
    if (!in) throw ConfigError("no report.txt under " + cfg.output_dir + "; run a solver first");
    std::cout << in.rdbuf();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mesh-free elliptic PDE solver on point-cloud manifolds"};
    app.require_subcommand(1);

    GlobalArgs g;
    struct Sub {
        const char* name;
        const char* desc;
        int (*fn)(const GlobalArgs&);
    };
    std::vector<Sub> subs = {
        {"sample", "sample a point cloud and write cloud.csv", do_sample},
        {"build-operator", "assemble the discrete operator and write operator.txt",
         do_build_operator},
        {"metrics", "recompute metrics from persisted artifacts", do_metrics},
        {"verify", "recompute metrics and compare against report.json", do_verify},
        {"compare-activations", "activation/optimizer comparison table", do_compare_activations},
        {"report", "print the persisted report table", do_report},
    };
    for (auto& s : subs) add_global_flags(app.add_subcommand(s.name, s.desc), g);
    add_global_flags(app.add_subcommand("solve-direct", "full direct pipeline"), g);
    add_global_flags(app.add_subcommand("solve-nn", "full network-based pipeline"), g);

    CLI11_PARSE(app, argc, argv);

    try {
        setup_threads(g);
        auto* chosen = app.get_subcommands().front();
        std::string name = chosen->get_name();
        if (name == "solve-direct") return do_run_solver(g, bench::SolverKind::DirectDM);
        if (name == "solve-nn") return do_run_solver(g, bench::SolverKind::NN);
        for (auto& s : subs)
            if (name == s.name) return s.fn(g);
        throw ConfigError("unknown subcommand");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
