#pragma once

#include "mpde/neighbors.hpp"
#include "mpde/sparse.hpp"

namespace mpde::op {

// Kernel bandwidth placement in the affinity matrix vs the density estimate.
//   Matched  - one kernel, argument s/eps in both (consistent; default)
//   Paper    - argument s/eps in the affinity, s/(4 eps) in the density,
//              prefactors as printed (kept for comparison; the density then
//              overestimates by 2^d and the operator scale is off by 2^-d)
//   Uniform4 - both at s/(4 eps), normalized at the 4 eps bandwidth
//              (equivalent to Matched at 4 eps)
enum class BandwidthConvention { Matched, Paper, Uniform4 };

BandwidthConvention convention_from_string(const std::string& name);
std::string to_string(BandwidthConvention c);

struct OperatorOptions {
    BandwidthConvention convention = BandwidthConvention::Matched;
    // Multiplies eps in every kernel argument and prefactor; calibration of
    // the tabulated bandwidths to this kernel convention.
    double bandwidth_scale = 1.15;
    // Affinity entries whose kernel factor exp(-s/4) falls below this are
    // dropped before the diagonal is formed, so rows still sum to zero.
    double kernel_drop_tol = 1e-15;
};

// h(s) = exp(-s/4) / (4 pi)^{d/2}
double kernel_h(double s, int d);

struct DensityEstimate {
    VectorXd Q;      // positive sampling-density values
    double epsilon;  // bandwidth the estimate was built at
    int d;
};

// Q_i = b^{-d/2} M^{-1} sum_{j in nbr(i) + self} h(|x_i-x_j|^2 / arg_b),
// with (b, arg_b) set by the convention. M = number of points.
DensityEstimate estimate_density(const MatrixXd& points, const knn::NeighborTable& neighbors,
                                 double epsilon, int d,
                                 const OperatorOptions& opts = OperatorOptions{});

// W - D on the union-symmetrized kNN graph; rows sum to zero exactly.
// W_ij = b^{-d/2-1} M^{-1} h(|x_i-x_j|^2/arg_b) sqrt(kappa_i kappa_j) / Q_j.
SparseOperator assemble_L(const MatrixXd& points, const knn::NeighborTable& neighbors,
                          const VectorXd& kappa, double epsilon, int d,
                          const OperatorOptions& opts = OperatorOptions{});

// Rectangular variant: rows are the first `n_row_pts` of `points`, columns all
// of them. Q is estimated over the full column population (on the symmetrized
// assembly graph; exposed through Q_out for the self-adjointness checks).
// Used by the ghost point estimator; assemble_L is the square case.
SparseOperator assemble_L_rect(const MatrixXd& points, Index n_row_pts,
                               const knn::NeighborTable& neighbors, const VectorXd& kappa,
                               double epsilon, int d,
                               const OperatorOptions& opts = OperatorOptions{},
                               VectorXd* Q_out = nullptr);

}  // namespace mpde::op
