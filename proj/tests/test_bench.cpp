#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mpde/bench.hpp"

using namespace mpde;
using namespace mpde::bench;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig small_direct_config(const std::string& out) {
    ExperimentConfig cfg;
    cfg.manifold = geom::Manifold::Torus2D;
    cfg.N = 625;
    cfg.sampling = geom::SamplingMode::Grid;
    cfg.epsilon = 0.1166;
    cfg.k = 64;
    cfg.solver = SolverKind::DirectDM;
    cfg.gamma = 0.001;
    cfg.test_resolution = 40;
    cfg.seed = 1;
    cfg.output_dir = out;
    return cfg;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
    auto cfg = small_direct_config("tmp");
    auto text = cfg.to_json_string();
    auto back = ExperimentConfig::from_json_string(text);
    CHECK(back.to_json_string() == text);

    CHECK_THROWS_AS(ExperimentConfig::from_json_string("{not json"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_string(R"({"manifold":"Torus2D"})"), ConfigError);
    // NN solver without an nn block fails before any compute
    CHECK_THROWS_AS(ExperimentConfig::from_json_string(
                        R"({"manifold":"Torus2D","N":625,"epsilon":0.1,"k":16,"solver":"NN"})"),
                    ConfigError);
}

TEST_CASE("metric basics") {
    auto cfg = small_direct_config("");
    auto p = build_pipeline(cfg);
    CHECK(inverse_error(p, p.u_exact_rows) == 0.0);

    // a zero network's testing error is the sup of the true solution
    auto grid = geom::test_grid(p.spec, 25);
    VectorXd u_grid = geom::exact_solution_all(p.spec, grid.intrinsic);
    nn::Architecture arch;
    arch.input_dim = 3;
    arch.width = 4;
    arch.depth = 2;
    arch.activation = nn::Activation::polynomial_sine();
    arch.trainable_coeffs = true;
    auto params = nn::init_deep(arch, 1);
    params.theta.setZero();
    VectorXd phi = nn::batch_forward(params, grid.points);
    CHECK((phi - u_grid).cwiseAbs().maxCoeff() ==
          doctest::Approx(u_grid.cwiseAbs().maxCoeff()));
}

TEST_CASE("direct run persists artifacts, verifies, and reruns byte-identically") {
    auto dir1 = fs::temp_directory_path() / "mpde_bench_run1";
    auto dir2 = fs::temp_directory_path() / "mpde_bench_run2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    auto cfg = small_direct_config(dir1.string());
    auto rep = run(cfg);
    CHECK(rep.inverse_error_inf.has_value());
    CHECK(*rep.inverse_error_inf > 0);
    CHECK(rep.forward_error_inf > 0);
    for (const char* name : {"cloud.csv", "operator.txt", "solution.csv", "report.json",
                             "timing.json", "solve.json", "config.json", "report.txt"})
        CHECK(fs::exists(dir1 / name));

    CHECK(verify(cfg) <= 1e-12);

    auto cfg2 = cfg;
    cfg2.output_dir = dir2.string();
    run(cfg2);
    for (const char* name : {"cloud.csv", "operator.txt", "solution.csv"})
        CHECK(read_file(dir1 / name) == read_file(dir2 / name));
    // report.json embeds the config echo whose output_dir differs; compare metrics
    CHECK(read_file(dir1 / "solution.csv") == read_file(dir2 / "solution.csv"));

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("nn run reports seed-averaged errors and verifies" * doctest::timeout(900)) {
    auto dir = fs::temp_directory_path() / "mpde_bench_nn";
    fs::remove_all(dir);
    auto cfg = small_direct_config(dir.string());
    cfg.solver = SolverKind::NN;
    NNConfig nncfg;
    nncfg.m = 16;
    nncfg.depth = 2;
    nncfg.T = 120;
    nncfg.seeds = 2;
    nncfg.gamma = 0.001;
    cfg.nn = nncfg;
    cfg.test_resolution = 30;
    auto rep = run(cfg);
    REQUIRE(rep.testing_error_inf.has_value());
    CHECK(rep.per_seed_testing.size() == 2);
    CHECK(*rep.testing_error_inf ==
          doctest::Approx(0.5 * (rep.per_seed_testing[0] + rep.per_seed_testing[1])));
    for (auto s : rep.seeds)
        CHECK(fs::exists(dir / ("params_seed" + std::to_string(s) + ".json")));
    CHECK(verify(cfg) <= 1e-12);
    fs::remove_all(dir);
}

TEST_CASE("phase timing accounting") {
    auto dir = fs::temp_directory_path() / "mpde_bench_timing";
    fs::remove_all(dir);
    auto cfg = small_direct_config(dir.string());
    auto rep = run(cfg);
    double parts = rep.timing.sample_ms + rep.timing.knn_ms + rep.timing.operator_ms +
                   rep.timing.solve_ms + rep.timing.metrics_ms;
    CHECK(parts <= rep.timing.total_ms + 1e-6);
    CHECK(rep.timing.peak_rss_kb > 0);
    fs::remove_all(dir);
}

TEST_CASE("benchmark presets cover the published settings") {
    auto p = table_preset(geom::Manifold::Torus2D, 625);
    CHECK(p.epsilon == doctest::Approx(0.1166));
    CHECK(p.k == 128);
    CHECK(p.m == 50);
    CHECK(p.T == 2000);
    auto q = table_preset(geom::Manifold::Flat3DinR12, 4096);
    CHECK(q.epsilon == doctest::Approx(0.12));
    CHECK(q.gamma == doctest::Approx(0.005));
    CHECK_THROWS_AS(table_preset(geom::Manifold::Torus2D, 999), ConfigError);
}
