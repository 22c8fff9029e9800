#pragma once

#include "mpde/gpdm.hpp"
#include "mpde/sparse.hpp"

namespace mpde::solve {

using op::SparseOperator;

enum class SolveMethod { DenseLS, IterativeLSQR };

struct LinearSolveReport {
    VectorXd solution;
    double residual_norm = 0.0;  // ||A u - b||_2 / sqrt(N)
    SolveMethod method = SolveMethod::DenseLS;
    Index iterations = 0;
    double gamma = 0.0;
    double wall_time_ms = 0.0;
};

struct SolveOptions {
    Index dense_threshold = 5000;        // rows above this go iterative
    double iterative_tol = 1e-12;
    Index max_iterations = 200000;
    bool force_iterative = false;
};

// argmin_u 1/2 ||(-a + L) u - f||^2_{L2(pi_N)} + gamma/2 ||u||^2_{L2(pi_N)}.
// gamma > 0 is required when a == 0 (constant null direction).
LinearSolveReport solve_closed(const SparseOperator& L, const VectorXd& a, const VectorXd& f,
                               double gamma, const SolveOptions& opts = SolveOptions{});

// Interior rows (-a + L_interior) u = f stacked with boundary identities
// u(xbar_b) = g_b, solved by least squares.
LinearSolveReport solve_dirichlet(const gpdm::GpdmOperator& gp, const VectorXd& a,
                                  const VectorXd& f_interior, const VectorXd& g_boundary,
                                  const SolveOptions& opts = SolveOptions{});

void save_solution_csv(const VectorXd& u, const std::string& path);
VectorXd load_solution_csv(const std::string& path);
void save_report_json(const LinearSolveReport& rep, const std::string& path);

}  // namespace mpde::solve
