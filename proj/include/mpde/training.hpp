#pragma once

#include <optional>

#include "mpde/network.hpp"
#include "mpde/sparse.hpp"

namespace mpde::nn {

enum class Optimizer { GD, Adam };

struct TrainConfig {
    Optimizer optimizer = Optimizer::Adam;
    double lr0 = 0.01;
    Index iterations = 1000;     // per repeat when batching, total otherwise
    bool cosine_decay = true;    // lr_t = lr0 * 0.5 (cos(pi t / T) + 1)
    Index batch_rows = 0;        // 0 = full operator
    Index repeats = 1;
    std::uint64_t seed = 0;      // row-subsampling stream
    // GD safeguards (off = fixed learning rate exactly)
    bool gd_adaptive = false;
    double divergence_limit = 1e12;
    // Adam moments
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

// Residual context: 1/2 ||(-a + L) phi - f||^2 over the operator rows
// (mean-of-squares norm), plus gamma/2 mean(phi^2), plus for Dirichlet
// problems lambda/2 mean over the boundary of (phi_b - g)^2.
struct LossContext {
    const op::SparseOperator* op = nullptr;  // R x N_cols
    VectorXd a;                              // R (empty = zero)
    VectorXd f;                              // R
    std::optional<VectorXd> g;               // boundary values
    std::vector<Index> boundary_index;       // positions of phi^b within phi
    double gamma = 0.0;
    double lambda = 0.0;
};

double loss_value(const NetworkParams& params, const MatrixXd& X, const LossContext& ctx,
                  const std::vector<Index>* row_subset = nullptr);

// exact reverse-mode gradient of loss_value; optionally reports the loss of
// the same forward pass
VectorXd loss_gradient(const NetworkParams& params, const MatrixXd& X, const LossContext& ctx,
                       const std::vector<Index>* row_subset = nullptr,
                       double* loss_out = nullptr);

struct TrainingHistory {
    std::vector<double> loss;     // per iteration, on the active subset
    std::vector<double> lr;       // per iteration
    std::vector<Index> checkpoint_iter;       // repeat boundaries
    std::vector<double> full_loss_checkpoint; // full loss at those iterations
};

// Divergence failure carrying what was recorded up to the bad iteration.
struct TrainingDivergence : NumericalError {
    TrainingHistory history;
    TrainingDivergence(const std::string& msg, TrainingHistory hist)
        : NumericalError(msg), history(std::move(hist)) {}
};

TrainingHistory train(NetworkParams& params, const MatrixXd& X, const LossContext& ctx,
                      const TrainConfig& cfg);

void save_history_csv(const TrainingHistory& hist, const std::string& path);

}  // namespace mpde::nn
