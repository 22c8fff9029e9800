#include "mpde/bench.hpp"

#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mpde/neighbors.hpp"
#include "vendor_json.hpp"

namespace mpde::bench {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

long peak_rss_kb() {
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return ru.ru_maxrss;
}

VectorXd gather(const VectorXd& v, const std::vector<Index>& idx) {
    VectorXd out(static_cast<Index>(idx.size()));
    for (std::size_t s = 0; s < idx.size(); ++s) out[static_cast<Index>(s)] = v[idx[s]];
    return out;
}

MatrixXd projected_intrinsic(const MatrixXd& ambient) {
    MatrixXd th(ambient.rows(), 2);
    for (Index i = 0; i < ambient.rows(); ++i)
        th.row(i) = geom::torus_closest_intrinsic(ambient.row(i).transpose()).transpose();
    return th;
}

int heuristic_layers(double eps_eff, double h) {
    if (!(h > 0)) throw NumericalError("ghost spacing is zero");
    double radius = eps_eff < 1.0 ? 2.0 * std::sqrt(eps_eff * std::log(1.0 / eps_eff)) : 0.0;
    int K = static_cast<int>(std::ceil(radius / h));
    return std::clamp(K, 1, 6);
}

}  // namespace

VectorXd Pipeline::residual_rhs() const {
    if (!has_boundary) return f_rows;
    return gather(f_rows, gp.interior_rows);
}

Pipeline build_pipeline(const ExperimentConfig& config, PhaseTiming* timing) {
    Pipeline p;
    p.spec = geom::ManifoldSpec::make(config.manifold);
    p.has_boundary = p.spec.has_boundary;

    auto t0 = Clock::now();
    Index N_b = config.N_b;
    if (p.has_boundary && config.sampling == geom::SamplingMode::IID && N_b == 0)
        N_b = static_cast<Index>(std::llround(2.0 * std::sqrt(double(config.N))));
    p.cloud = geom::sample_cloud(p.spec, config.N, p.has_boundary ? N_b : 0, config.seed,
                                 config.sampling);
    if (timing) timing->sample_ms = ms_since(t0);

    p.kappa_rows = geom::diffusion_kappa_all(p.spec, p.cloud.intrinsic);
    p.f_rows = geom::rhs_f_all(p.spec, p.cloud.intrinsic);
    p.u_exact_rows = geom::exact_solution_all(p.spec, p.cloud.intrinsic);

    double eps_eff = config.operator_options.bandwidth_scale * config.epsilon;
    t0 = Clock::now();
    if (!p.has_boundary) {
        auto nt = knn::build(p.cloud.points, static_cast<int>(config.k));
        if (timing) timing->knn_ms = ms_since(t0);
        t0 = Clock::now();
        p.L = op::assemble_L(p.cloud.points, nt, p.kappa_rows, config.epsilon, p.spec.d,
                             config.operator_options);
        if (timing) timing->operator_ms = ms_since(t0);
        return p;
    }

    p.boundary_idx = gpdm::boundary_indices(p.cloud);
    MatrixXd normals = gpdm::estimate_normals(p.cloud, p.boundary_idx, eps_eff,
                                              config.normal_method, &p.spec, config.ghost_P);
    int K = config.ghost_layers;
    if (config.ghost_mode == gpdm::GhostMode::Snap) {
        p.ghosts = gpdm::attach_ghosts(p.cloud, p.boundary_idx, normals, 1);
        if (K <= 0) K = heuristic_layers(eps_eff, p.ghosts.h);
        if (K != 1) p.ghosts = gpdm::attach_ghosts(p.cloud, p.boundary_idx, normals, K);
    } else {
        p.ghosts = gpdm::place_ghosts(p.cloud, p.boundary_idx, normals, 1, config.ghost_P);
        if (K <= 0) K = heuristic_layers(eps_eff, p.ghosts.h);
        if (K != 1)
            p.ghosts = gpdm::place_ghosts(p.cloud, p.boundary_idx, normals, K, config.ghost_P);
        // interior ghosts join the collocation set as new non-boundary points
        Index N0 = p.cloud.size(), N_g = p.ghosts.interior_points.rows();
        MatrixXd pts(N0 + N_g, p.cloud.ambient_dim());
        pts.topRows(N0) = p.cloud.points;
        pts.bottomRows(N_g) = p.ghosts.interior_points;
        MatrixXd th(N0 + N_g, 2);
        th.topRows(N0) = p.cloud.intrinsic;
        th.bottomRows(N_g) = projected_intrinsic(p.ghosts.interior_points);
        p.cloud.points = std::move(pts);
        p.cloud.intrinsic = std::move(th);
        p.cloud.boundary.resize(N0 + N_g, 0);
        p.kappa_rows = geom::diffusion_kappa_all(p.spec, p.cloud.intrinsic);
        p.f_rows = geom::rhs_f_all(p.spec, p.cloud.intrinsic);
        p.u_exact_rows = geom::exact_solution_all(p.spec, p.cloud.intrinsic);
        p.boundary_idx = gpdm::boundary_indices(p.cloud);
    }
    if (timing) timing->knn_ms = ms_since(t0);

    t0 = Clock::now();
    MatrixXd ext_th = projected_intrinsic(p.ghosts.exterior_points);
    VectorXd kappa_cols(p.cloud.size() + ext_th.rows());
    kappa_cols.head(p.cloud.size()) = p.kappa_rows;
    kappa_cols.tail(ext_th.rows()) = geom::diffusion_kappa_all(p.spec, ext_th);
    p.gp = gpdm::assemble_gpdm(p.cloud, p.ghosts, kappa_cols, config.epsilon, p.spec.d,
                               static_cast<int>(config.k), config.operator_options);
    if (timing) timing->operator_ms = ms_since(t0);
    return p;
}

double forward_error(const Pipeline& p) {
    VectorXd r = p.residual_operator().apply(p.u_exact_rows) - p.residual_rhs();
    return r.cwiseAbs().maxCoeff();
}

double inverse_error(const Pipeline& p, const VectorXd& solution) {
    if (solution.size() != p.u_exact_rows.size())
        throw ConfigError("inverse_error: solution length mismatch");
    return (solution - p.u_exact_rows).cwiseAbs().maxCoeff();
}

namespace {

struct NNOutcome {
    std::vector<double> train_err, test_err;
    std::vector<std::uint64_t> seeds;
    std::vector<nn::NetworkParams> params;
    std::vector<nn::TrainingHistory> histories;
};

nn::LossContext make_loss_context(const Pipeline& p, const NNConfig& nncfg) {
    nn::LossContext ctx;
    ctx.op = &p.residual_operator();
    ctx.f = p.residual_rhs();
    ctx.gamma = nncfg.gamma;
    if (p.has_boundary) {
        ctx.g = gather(p.u_exact_rows, p.gp.boundary_rows);
        ctx.boundary_index = p.gp.boundary_rows;
        ctx.lambda = nncfg.lambda;
    }
    return ctx;
}

NNOutcome run_nn(const Pipeline& p, const ExperimentConfig& config, const NNConfig& nncfg,
                 const geom::PointCloud& grid) {
    nn::Architecture arch;
    arch.input_dim = p.spec.n;
    arch.width = static_cast<int>(nncfg.m);
    arch.depth = nncfg.depth;
    arch.activation = nncfg.activation;
    arch.biases = true;
    arch.trainable_coeffs = nncfg.activation.kind == nn::ActivationKind::PolynomialSine;

    nn::TrainConfig tc;
    tc.optimizer = nncfg.optimizer;
    tc.lr0 = nncfg.lr0;
    tc.iterations = nncfg.T;
    tc.cosine_decay = nncfg.optimizer == nn::Optimizer::Adam && nncfg.cosine_decay;
    tc.batch_rows = nncfg.batch_rows;
    tc.repeats = nncfg.repeats;
    tc.gd_adaptive = nncfg.optimizer == nn::Optimizer::GD && nncfg.gd_adaptive;

    nn::LossContext ctx = make_loss_context(p, nncfg);
    VectorXd u_grid = geom::exact_solution_all(p.spec, grid.intrinsic);

    NNOutcome out;
    for (Index s = 0; s < nncfg.seeds; ++s) {
        std::uint64_t seed = config.seed + static_cast<std::uint64_t>(s);
        tc.seed = seed;
        auto params = nn::init_deep(arch, seed);
        auto hist = nn::train(params, p.cloud.points, ctx, tc);
        VectorXd phi = nn::batch_forward(params, p.cloud.points);
        out.train_err.push_back((phi - p.u_exact_rows).cwiseAbs().maxCoeff());
        VectorXd phi_grid = nn::batch_forward(params, grid.points);
        out.test_err.push_back((phi_grid - u_grid).cwiseAbs().maxCoeff());
        out.seeds.push_back(seed);
        out.params.push_back(std::move(params));
        out.histories.push_back(std::move(hist));
    }
    return out;
}

double mean(const std::vector<double>& v) {
    double acc = 0;
    for (double x : v) acc += x;
    return acc / double(v.size());
}

}  // namespace

ExperimentReport run(const ExperimentConfig& config) {
    fs::create_directories(config.output_dir);
    auto total0 = Clock::now();
    ExperimentReport rep;
    rep.config_echo = config.to_json_string();

    Pipeline p = build_pipeline(config, &rep.timing);
    {
        std::ofstream cfg_out(fs::path(config.output_dir) / "config.json");
        cfg_out << rep.config_echo << "\n";
    }
    geom::save_cloud_csv(p.cloud, (fs::path(config.output_dir) / "cloud.csv").string());
    op::save_operator(p.residual_operator(),
                      (fs::path(config.output_dir) / "operator.txt").string());
    if (p.has_boundary)
        gpdm::save_ghosts_csv(p.ghosts, (fs::path(config.output_dir) / "ghosts.csv").string());

    auto t0 = Clock::now();
    rep.forward_error_inf = forward_error(p);

    if (config.solver == SolverKind::DirectDM) {
        t0 = Clock::now();
        solve::LinearSolveReport sol;
        if (p.has_boundary) {
            VectorXd f_int = p.residual_rhs();
            VectorXd g = gather(p.u_exact_rows, p.gp.boundary_rows);
            sol = solve::solve_dirichlet(p.gp, VectorXd(), f_int, g);
        } else {
            sol = solve::solve_closed(p.L, VectorXd(), p.f_rows, config.gamma);
        }
        rep.timing.solve_ms = ms_since(t0);
        solve::save_solution_csv(sol.solution,
                                 (fs::path(config.output_dir) / "solution.csv").string());
        solve::save_report_json(sol, (fs::path(config.output_dir) / "solve.json").string());
        t0 = Clock::now();
        rep.inverse_error_inf = inverse_error(p, sol.solution);
        rep.timing.metrics_ms = ms_since(t0);
        rep.seeds = {config.seed};
    } else {
        auto grid = geom::test_grid(p.spec, config.test_resolution);
        t0 = Clock::now();
        NNOutcome out = run_nn(p, config, *config.nn, grid);
        rep.timing.solve_ms = ms_since(t0);
        for (std::size_t s = 0; s < out.params.size(); ++s) {
            auto tag = std::to_string(out.seeds[s]);
            nn::save_params_json(out.params[s],
                                 (fs::path(config.output_dir) / ("params_seed" + tag + ".json")).string());
            nn::save_history_csv(out.histories[s],
                                 (fs::path(config.output_dir) / ("history_seed" + tag + ".csv")).string());
        }
        rep.per_seed_training = out.train_err;
        rep.per_seed_testing = out.test_err;
        rep.training_error_inf = mean(out.train_err);
        rep.testing_error_inf = mean(out.test_err);
        rep.seeds = out.seeds;
        rep.timing.metrics_ms = 0;
    }
    rep.timing.total_ms = ms_since(total0);
    rep.timing.peak_rss_kb = peak_rss_kb();

    write_report_json(rep, (fs::path(config.output_dir) / "report.json").string());
    write_timing_json(rep, (fs::path(config.output_dir) / "timing.json").string());
    {
        std::ofstream txt(fs::path(config.output_dir) / "report.txt");
        txt << render_report_table({{config.N, rep}});
    }
    return rep;
}

void write_report_json(const ExperimentReport& rep, const std::string& path) {
    nlohmann::json j;
    j["forward_error_inf"] = fmt17(rep.forward_error_inf);
    if (rep.inverse_error_inf) j["inverse_error_inf"] = fmt17(*rep.inverse_error_inf);
    if (rep.training_error_inf) j["training_error_inf"] = fmt17(*rep.training_error_inf);
    if (rep.testing_error_inf) j["testing_error_inf"] = fmt17(*rep.testing_error_inf);
    if (!rep.per_seed_training.empty()) {
        std::vector<std::string> tr, te;
        for (double x : rep.per_seed_training) tr.push_back(fmt17(x));
        for (double x : rep.per_seed_testing) te.push_back(fmt17(x));
        j["per_seed_training"] = tr;
        j["per_seed_testing"] = te;
    }
    j["seeds"] = rep.seeds;
    j["config"] = nlohmann::json::parse(rep.config_echo);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_timing_json(const ExperimentReport& rep, const std::string& path) {
    nlohmann::json j;
    j["sample_ms"] = rep.timing.sample_ms;
    j["knn_ms"] = rep.timing.knn_ms;
    j["operator_ms"] = rep.timing.operator_ms;
    j["solve_ms"] = rep.timing.solve_ms;
    j["metrics_ms"] = rep.timing.metrics_ms;
    j["total_ms"] = rep.timing.total_ms;
    j["peak_rss_kb_approx"] = rep.timing.peak_rss_kb;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
}

std::string render_report_table(const std::vector<std::pair<Index, ExperimentReport>>& rows) {
    std::ostringstream os;
    os << "      N   forward      inverse     training    testing\n";
    for (const auto& [N, rep] : rows) {
        char line[160];
        auto opt = [](const std::optional<double>& v) {
            return v ? *v : std::numeric_limits<double>::quiet_NaN();
        };
        std::snprintf(line, sizeof(line), "%7lld   %-9.4g  %-9.4g   %-9.4g  %-9.4g\n",
                      static_cast<long long>(N), rep.forward_error_inf,
                      opt(rep.inverse_error_inf), opt(rep.training_error_inf),
                      opt(rep.testing_error_inf));
        os << line;
    }
    return os.str();
}

double verify(const ExperimentConfig& config) {
    Pipeline p = build_pipeline(config);
    fs::path dir(config.output_dir);
    std::ifstream rin(dir / "report.json");
    if (!rin) throw ConfigError("verify: missing report.json in " + config.output_dir);
    nlohmann::json j;
    rin >> j;

    auto stored_op = op::load_operator((dir / "operator.txt").string());
    VectorXd r = stored_op.apply(p.u_exact_rows) - p.residual_rhs();
    double max_diff = std::abs(r.cwiseAbs().maxCoeff() -
                               std::stod(j.at("forward_error_inf").get<std::string>()));

    if (j.contains("inverse_error_inf")) {
        VectorXd u = solve::load_solution_csv((dir / "solution.csv").string());
        max_diff = std::max(max_diff, std::abs(inverse_error(p, u) -
                                               std::stod(j.at("inverse_error_inf").get<std::string>())));
    }
    if (j.contains("per_seed_training")) {
        auto grid = geom::test_grid(p.spec, config.test_resolution);
        VectorXd u_grid = geom::exact_solution_all(p.spec, grid.intrinsic);
        auto seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        auto tr = j.at("per_seed_training").get<std::vector<std::string>>();
        auto te = j.at("per_seed_testing").get<std::vector<std::string>>();
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            auto params = nn::load_params_json(
                (dir / ("params_seed" + std::to_string(seeds[s]) + ".json")).string());
            VectorXd phi = nn::batch_forward(params, p.cloud.points);
            double train = (phi - p.u_exact_rows).cwiseAbs().maxCoeff();
            VectorXd phi_g = nn::batch_forward(params, grid.points);
            double test = (phi_g - u_grid).cwiseAbs().maxCoeff();
            max_diff = std::max(max_diff, std::abs(train - std::stod(tr[s])));
            max_diff = std::max(max_diff, std::abs(test - std::stod(te[s])));
        }
    }
    return max_diff;
}

std::vector<ActivationRow> compare_activations(const ExperimentConfig& base,
                                               const std::vector<Index>& N_list) {
    if (base.manifold != geom::Manifold::Flat3DinR12)
        throw ConfigError("compare_activations targets the Flat3DinR12 benchmark");
    if (!base.nn.has_value()) throw ConfigError("compare_activations needs an nn block");

    struct Row {
        std::string label;
        nn::Activation act;
        nn::Optimizer opt;
    };
    std::vector<Row> defs = {
        {"PolynomialSine+Adam", nn::Activation::polynomial_sine(), nn::Optimizer::Adam},
        {"ReLU3+GD", nn::Activation::relu_pow(3), nn::Optimizer::GD},
        {"ReLU+GD", nn::Activation::relu(), nn::Optimizer::GD},
    };
    std::vector<ActivationRow> rows(defs.size());
    for (std::size_t r = 0; r < defs.size(); ++r) rows[r].label = defs[r].label;

    for (Index N : N_list) {
        auto preset = table_preset(base.manifold, N);
        for (std::size_t r = 0; r < defs.size(); ++r) {
            ExperimentConfig cfg = base;
            cfg.N = N;
            cfg.epsilon = preset.epsilon;
            cfg.k = preset.k;
            cfg.solver = SolverKind::NN;
            NNConfig nncfg = *base.nn;
            nncfg.m = preset.m;
            nncfg.T = preset.T;
            nncfg.gamma = preset.gamma;
            nncfg.activation = defs[r].act;
            nncfg.optimizer = defs[r].opt;
            if (defs[r].opt == nn::Optimizer::GD) {
                if (nncfg.gd_lr0 > 0) nncfg.lr0 = nncfg.gd_lr0;
                if (nncfg.gd_T > 0) nncfg.T = nncfg.gd_T;
                nncfg.gd_adaptive = true;
            }
            cfg.nn = nncfg;
            cfg.output_dir = base.output_dir + "/" + rows[r].label + "_N" + std::to_string(N);
            ExperimentReport rep = run(cfg);
            rows[r].training.push_back(*rep.training_error_inf);
            rows[r].testing.push_back(*rep.testing_error_inf);
        }
    }
    return rows;
}

std::string render_activation_table(const std::vector<ActivationRow>& rows,
                                    const std::vector<Index>& N_list) {
    std::ostringstream os;
    os << "activation+optimizer       metric    ";
    for (Index N : N_list) os << "N=" << N << "      ";
    os << "\n";
    for (const auto& row : rows) {
        for (int pass = 0; pass < 2; ++pass) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%-26s %-9s ", row.label.c_str(),
                          pass == 0 ? "training" : "testing");
            os << buf;
            const auto& vals = pass == 0 ? row.training : row.testing;
            for (double v : vals) {
                std::snprintf(buf, sizeof(buf), "%-10.4g", v);
                os << buf;
            }
            os << "\n";
        }
    }
    return os.str();
}

TablePreset table_preset(geom::Manifold manifold, Index N) {
    struct Entry {
        Index N;
        double epsilon;
        Index k;
        Index T;
        Index m;
        double gamma;
    };
    static const std::vector<Entry> torus = {
        {625, 0.1166, 128, 2000, 50, 0.001},   {1225, 0.0508, 128, 3000, 71, 0.001},
        {2500, 0.0237, 128, 4000, 100, 0.001}, {5041, 0.0118, 256, 4000, 141, 0.001},
        {10000, 0.0059, 256, 4000, 200, 0.001}};
    static const std::vector<Entry> flat = {{512, 0.43, 128, 1000, 100, 0.001},
                                            {1331, 0.23, 128, 2000, 150, 0.001},
                                            {4096, 0.12, 256, 2000, 250, 0.005},
                                            {12167, 0.073, 256, 3000, 400, 0.005}};
    static const std::vector<Entry> semi = {{1024, 0.0221, 128, 2000, 100, 0.0},
                                            {2025, 0.0096, 128, 3000, 100, 0.0},
                                            {4096, 0.0048, 128, 4000, 150, 0.0}};
    const std::vector<Entry>* table = nullptr;
    switch (manifold) {
        case geom::Manifold::Torus2D: table = &torus; break;
        case geom::Manifold::Flat3DinR12: table = &flat; break;
        case geom::Manifold::SemiTorus2D: table = &semi; break;
    }
    for (const auto& e : *table)
        if (e.N == N) return {e.epsilon, e.k, e.T, e.m, e.gamma};
    throw ConfigError("no benchmark preset for manifold/N = " + geom::to_string(manifold) + "/" +
                      std::to_string(N));
}

}  // namespace mpde::bench
