#pragma once

#include <map>
#include <optional>
#include <string>

#include "mpde/dm_operator.hpp"
#include "mpde/geometry.hpp"
#include "mpde/gpdm.hpp"
#include "mpde/solver.hpp"
#include "mpde/training.hpp"

namespace mpde::bench {

enum class SolverKind { DirectDM, NN };

struct NNConfig {
    Index m = 50;
    int depth = 3;
    nn::Activation activation = nn::Activation::polynomial_sine();
    nn::Optimizer optimizer = nn::Optimizer::Adam;
    Index T = 2000;
    double lr0 = 0.01;
    double gamma = 0.001;
    double lambda = 5.0;
    Index batch_rows = 0;
    Index repeats = 1;
    Index seeds = 5;  // independent runs averaged in the report
    bool gd_adaptive = true;
    bool cosine_decay = true;  // Adam only; GD runs fixed/adaptive lr
    double gd_lr0 = 0.05;      // activation-comparison GD runs
    Index gd_T = 0;            // 0 = reuse T
};

struct ExperimentConfig {
    geom::Manifold manifold = geom::Manifold::Torus2D;
    Index N = 625;
    Index N_b = 0;
    geom::SamplingMode sampling = geom::SamplingMode::Grid;
    double epsilon = 0.1166;
    Index k = 128;
    op::OperatorOptions operator_options;
    SolverKind solver = SolverKind::DirectDM;
    double gamma = 0.001;  // direct-solve regularization (a == 0 cases)
    Index test_resolution = 300;
    // boundary handling (SemiTorus2D)
    gpdm::GhostMode ghost_mode = gpdm::GhostMode::Snap;
    gpdm::NormalMethod normal_method = gpdm::NormalMethod::Kernel;
    int ghost_layers = 0;  // 0 = heuristic from bandwidth and spacing
    int ghost_P = 10;
    std::optional<NNConfig> nn;
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    static ExperimentConfig from_json_file(const std::string& path);
    static ExperimentConfig from_json_string(const std::string& text);
    std::string to_json_string() const;
};

struct PhaseTiming {
    double sample_ms = 0, knn_ms = 0, operator_ms = 0, solve_ms = 0, metrics_ms = 0;
    double total_ms = 0;
    long peak_rss_kb = 0;  // allocator high-water estimate, approximate
};

struct ExperimentReport {
    double forward_error_inf = 0.0;
    std::optional<double> inverse_error_inf;    // direct solves
    std::optional<double> training_error_inf;   // NN (mean over seeds)
    std::optional<double> testing_error_inf;    // NN (mean over seeds)
    std::vector<double> per_seed_training;
    std::vector<double> per_seed_testing;
    std::vector<std::uint64_t> seeds;
    PhaseTiming timing;
    std::string config_echo;
};

// sample -> knn -> operator (DM or GPDM) -> solve -> metrics, persisting
// cloud.csv, operator.txt, ghosts.csv, solution.csv / params_seed*.json,
// history_seed*.csv, report.json (deterministic) and timing.json (volatile).
ExperimentReport run(const ExperimentConfig& config);

// Recompute every metric from the persisted artifacts and compare against
// report.json; returns the largest absolute mismatch.
double verify(const ExperimentConfig& config);

struct ActivationRow {
    std::string label;
    std::vector<double> training;  // per N
    std::vector<double> testing;
};

// PolynomialSine+Adam vs ReLU^3+GD vs ReLU+GD over the configured N list.
std::vector<ActivationRow> compare_activations(const ExperimentConfig& base,
                                               const std::vector<Index>& N_list);

void write_report_json(const ExperimentReport& rep, const std::string& path);
void write_timing_json(const ExperimentReport& rep, const std::string& path);
std::string render_report_table(const std::vector<std::pair<Index, ExperimentReport>>& rows);
std::string render_activation_table(const std::vector<ActivationRow>& rows,
                                    const std::vector<Index>& N_list);

// Pieces reused by the CLI subcommands.
struct Pipeline {
    geom::ManifoldSpec spec;
    geom::PointCloud cloud;          // X^h in Append mode (ghosts appended)
    gpdm::GhostSet ghosts;           // boundary problems only
    gpdm::GpdmOperator gp;           // boundary problems only
    op::SparseOperator L;            // closed problems
    VectorXd kappa_rows, f_rows, u_exact_rows;
    std::vector<Index> boundary_idx;
    bool has_boundary = false;

    const op::SparseOperator& residual_operator() const { return has_boundary ? gp.L_interior : L; }
    VectorXd residual_rhs() const;  // f at the residual operator's rows
};

Pipeline build_pipeline(const ExperimentConfig& config, PhaseTiming* timing = nullptr);

double forward_error(const Pipeline& p);
double inverse_error(const Pipeline& p, const VectorXd& solution);

// Published hyperparameters of the three benchmark problems, keyed by N.
struct TablePreset {
    double epsilon;
    Index k;
    Index T;
    Index m;
    double gamma;
};
TablePreset table_preset(geom::Manifold manifold, Index N);

}  // namespace mpde::bench
