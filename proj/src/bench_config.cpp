#include <fstream>

#include "mpde/bench.hpp"
#include "vendor_json.hpp"

namespace mpde::bench {

using nlohmann::json;

namespace {

NNConfig nn_from_json(const json& j) {
    NNConfig nn;
    nn.m = j.value("m", nn.m);
    nn.depth = j.value("depth", nn.depth);
    if (j.contains("activation"))
        nn.activation = nn::activation_from_string(j["activation"].get<std::string>());
    if (j.contains("optimizer")) {
        auto o = j["optimizer"].get<std::string>();
        if (o == "Adam") nn.optimizer = nn::Optimizer::Adam;
        else if (o == "GD") nn.optimizer = nn::Optimizer::GD;
        else throw ConfigError("unknown optimizer: " + o);
    }
    nn.T = j.value("T", nn.T);
    nn.lr0 = j.value("lr0", nn.lr0);
    nn.gamma = j.value("gamma", nn.gamma);
    nn.lambda = j.value("lambda", nn.lambda);
    nn.batch_rows = j.value("batch_rows", nn.batch_rows);
    nn.repeats = j.value("repeats", nn.repeats);
    nn.seeds = j.value("seeds", nn.seeds);
    nn.gd_adaptive = j.value("gd_adaptive", nn.gd_adaptive);
    nn.cosine_decay = j.value("cosine_decay", nn.cosine_decay);
    nn.gd_lr0 = j.value("gd_lr0", nn.gd_lr0);
    nn.gd_T = j.value("gd_T", nn.gd_T);
    return nn;
}

json nn_to_json(const NNConfig& nn) {
    json j;
    j["m"] = nn.m;
    j["depth"] = nn.depth;
    j["activation"] = nn::to_string(nn.activation);
    j["optimizer"] = nn.optimizer == nn::Optimizer::Adam ? "Adam" : "GD";
    j["T"] = nn.T;
    j["lr0"] = nn.lr0;
    j["gamma"] = nn.gamma;
    j["lambda"] = nn.lambda;
    j["batch_rows"] = nn.batch_rows;
    j["repeats"] = nn.repeats;
    j["seeds"] = nn.seeds;
    j["gd_adaptive"] = nn.gd_adaptive;
    j["cosine_decay"] = nn.cosine_decay;
    j["gd_lr0"] = nn.gd_lr0;
    j["gd_T"] = nn.gd_T;
    return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.manifold = geom::manifold_from_string(j.at("manifold").get<std::string>());
        cfg.N = j.at("N").get<Index>();
        cfg.N_b = j.value("N_b", Index(0));
        if (j.contains("sampling")) {
            auto s = j["sampling"].get<std::string>();
            if (s == "grid") cfg.sampling = geom::SamplingMode::Grid;
            else if (s == "iid") cfg.sampling = geom::SamplingMode::IID;
            else throw ConfigError("unknown sampling mode: " + s);
        }
        cfg.epsilon = j.at("epsilon").get<double>();
        cfg.k = j.at("k").get<Index>();
        if (j.contains("bandwidth_convention"))
            cfg.operator_options.convention =
                op::convention_from_string(j["bandwidth_convention"].get<std::string>());
        cfg.operator_options.bandwidth_scale =
            j.value("bandwidth_scale", cfg.operator_options.bandwidth_scale);
        auto solver = j.value("solver", std::string("DirectDM"));
        if (solver == "DirectDM") cfg.solver = SolverKind::DirectDM;
        else if (solver == "NN") cfg.solver = SolverKind::NN;
        else throw ConfigError("unknown solver: " + solver);
        cfg.gamma = j.value("gamma", cfg.gamma);
        cfg.test_resolution = j.value("test_resolution", cfg.test_resolution);
        if (j.contains("ghost_mode")) {
            auto g = j["ghost_mode"].get<std::string>();
            if (g == "snap") cfg.ghost_mode = gpdm::GhostMode::Snap;
            else if (g == "append") cfg.ghost_mode = gpdm::GhostMode::Append;
            else throw ConfigError("unknown ghost mode: " + g);
        }
        if (j.contains("normal_method")) {
            auto nm = j["normal_method"].get<std::string>();
            if (nm == "kernel") cfg.normal_method = gpdm::NormalMethod::Kernel;
            else if (nm == "analytic") cfg.normal_method = gpdm::NormalMethod::Analytic;
            else throw ConfigError("unknown normal method: " + nm);
        }
        cfg.ghost_layers = j.value("ghost_layers", cfg.ghost_layers);
        cfg.ghost_P = j.value("ghost_P", cfg.ghost_P);
        if (j.contains("nn")) cfg.nn = nn_from_json(j["nn"]);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.output_dir = j.value("output_dir", cfg.output_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    if (cfg.solver == SolverKind::NN && !cfg.nn.has_value())
        throw ConfigError("solver NN requires an nn config block");
    if (cfg.N <= 0 || cfg.k <= 0 || cfg.epsilon <= 0)
        throw ConfigError("N, k, epsilon must be positive");
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_string(text);
}

std::string ExperimentConfig::to_json_string() const {
    json j;
    j["manifold"] = geom::to_string(manifold);
    j["N"] = N;
    j["N_b"] = N_b;
    j["sampling"] = sampling == geom::SamplingMode::Grid ? "grid" : "iid";
    j["epsilon"] = epsilon;
    j["k"] = k;
    j["bandwidth_convention"] = op::to_string(operator_options.convention);
    j["bandwidth_scale"] = operator_options.bandwidth_scale;
    j["solver"] = solver == SolverKind::DirectDM ? "DirectDM" : "NN";
    j["gamma"] = gamma;
    j["test_resolution"] = test_resolution;
    j["ghost_mode"] = ghost_mode == gpdm::GhostMode::Snap ? "snap" : "append";
    j["normal_method"] = normal_method == gpdm::NormalMethod::Kernel ? "kernel" : "analytic";
    j["ghost_layers"] = ghost_layers;
    j["ghost_P"] = ghost_P;
    if (nn.has_value()) j["nn"] = nn_to_json(*nn);
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    return j.dump(2);
}

}  // namespace mpde::bench
