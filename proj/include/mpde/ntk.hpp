#pragma once

#include "mpde/network.hpp"
#include "mpde/training.hpp"

namespace mpde::ntk {

using nn::NetworkParams;

// Empirical last-layer Gram: G_ij = (1/m) sum_k sigma(w_k.x_i) sigma(w_k.x_j).
// Requires a two-layer (depth 1, no bias) network.
MatrixXd gram_a(const NetworkParams& params, const MatrixXd& X);

// First-layer Gram: G_ij = (1/m) sum_k a_k^2 sigma'(w_k.x_i) sigma'(w_k.x_j) x_i.x_j.
MatrixXd gram_w(const NetworkParams& params, const MatrixXd& X);

// Smallest eigenvalue of a symmetric matrix (dense solver).
double min_eig(const MatrixXd& G);

struct GramSnapshot {
    Index iteration;
    double drift_frobenius;  // ||G_a(t) - G_a(0)||_F
    double lambda_min;
};

struct DecayReport {
    double lambda_S_hat = 0.0;       // lambda_min(G_a(theta_0))
    double lambda_A_hat = 0.0;       // lambda_min(A A^T)
    double bound_satisfaction_fraction = 0.0;  // with 2x slack, t = iter * lr
    double fit_slope = 0.0;          // log-linear fit of loss over the first phase
    double fit_r2 = 0.0;
    Index fit_span = 0;
    double max_drift = 0.0;
    double min_lambda_min = 0.0;
    bool monotone = false;
};

// Checks Theorem-style exponential decay of a recorded full-GD history
// against the realized lambda estimates.
DecayReport verify_decay(const nn::TrainingHistory& history, double lr, Index m,
                         double lambda_S_hat, double lambda_A_hat, Index N,
                         const std::vector<GramSnapshot>& snapshots);

void save_report_json(const DecayReport& rep, const std::string& path);

// The two-layer experiment runner used by the diagnostics suite: trains
// phi(X) toward A^{-1} f under loss (1/2N)|A phi - f|^2 with full-batch GD,
// recording Gram snapshots every `snapshot_every` iterations.
struct NtkExperiment {
    MatrixXd A;          // N x N
    MatrixXd X;          // N x n
    VectorXd f;          // N
    int r = 3;
    Index m = 8192;
    double gamma = 0.0;  // init scale (default m^{-1/2})
    double lr = 1e-4;
    Index iterations = 1500;
    Index snapshot_every = 10;
    std::uint64_t seed = 0;
};

struct NtkRunResult {
    nn::TrainingHistory history;
    std::vector<GramSnapshot> snapshots;
    DecayReport report;
    NetworkParams params;
};

NtkRunResult run_experiment(const NtkExperiment& exp);

}  // namespace mpde::ntk
