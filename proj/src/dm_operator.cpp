#include "mpde/dm_operator.hpp"

#include <algorithm>
#include <cmath>

namespace mpde::op {

BandwidthConvention convention_from_string(const std::string& name) {
    if (name == "matched") return BandwidthConvention::Matched;
    if (name == "paper") return BandwidthConvention::Paper;
    if (name == "uniform4") return BandwidthConvention::Uniform4;
    throw ConfigError("unknown bandwidth convention: " + name);
}

std::string to_string(BandwidthConvention c) {
    switch (c) {
        case BandwidthConvention::Matched: return "matched";
        case BandwidthConvention::Paper: return "paper";
        case BandwidthConvention::Uniform4: return "uniform4";
    }
    throw ConfigError("bad convention");
}

double kernel_h(double s, int d) {
    if (s < 0) throw ConfigError("kernel_h: negative argument");
    return std::exp(-s / 4.0) * std::pow(4.0 * M_PI, -0.5 * d);
}

namespace {

struct Bandwidths {
    double q_pref_eps;  // prefactor bandwidth in Q
    double q_arg_eps;   // kernel argument divisor in Q
    double w_pref_eps;
    double w_arg_eps;
};

Bandwidths bandwidths(double epsilon, const OperatorOptions& opts) {
    double e = opts.bandwidth_scale * epsilon;
    if (e <= 0) throw ConfigError("epsilon must be positive");
    switch (opts.convention) {
        case BandwidthConvention::Matched: return {e, e, e, e};
        case BandwidthConvention::Paper: return {e, 4.0 * e, e, e};
        case BandwidthConvention::Uniform4: return {4.0 * e, 4.0 * e, 4.0 * e, 4.0 * e};
    }
    throw ConfigError("bad convention");
}

// Union-symmetrized neighbor lists (self excluded), sorted.
std::vector<std::vector<Index>> symmetrized_adjacency(const knn::NeighborTable& nt, Index M) {
    std::vector<std::vector<Index>> adj(M);
    for (Index i = 0; i < nt.indices.rows(); ++i)
        for (int s = 0; s < nt.k; ++s) {
            Index j = nt.indices(i, s);
            adj[i].push_back(j);
            adj[j].push_back(i);
        }
    for (auto& lst : adj) {
        std::sort(lst.begin(), lst.end());
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }
    return adj;
}

VectorXd density_on_adjacency(const MatrixXd& points, const std::vector<std::vector<Index>>& adj,
                              double q_pref_eps, double q_arg_eps, int d) {
    Index M = points.rows();
    VectorXd Q(M);
    double pref = std::pow(q_pref_eps, -0.5 * d) / static_cast<double>(M);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < M; ++i) {
        double acc = kernel_h(0.0, d);
        for (Index j : adj[i])
            acc += kernel_h((points.row(i) - points.row(j)).squaredNorm() / q_arg_eps, d);
        Q[i] = pref * acc;
    }
    for (Index i = 0; i < M; ++i)
        if (!(Q[i] > 0.0) || !std::isfinite(Q[i]))
            throw NumericalError("non-finite density at index " + std::to_string(i));
    return Q;
}

}  // namespace

DensityEstimate estimate_density(const MatrixXd& points, const knn::NeighborTable& neighbors,
                                 double epsilon, int d, const OperatorOptions& opts) {
    auto bw = bandwidths(epsilon, opts);
    Index M = points.rows();
    VectorXd Q(M);
    double pref = std::pow(bw.q_pref_eps, -0.5 * d) / static_cast<double>(M);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < M; ++i) {
        double acc = kernel_h(0.0, d);
        for (int s = 0; s < neighbors.k; ++s)
            acc += kernel_h(neighbors.sq_distances(i, s) / bw.q_arg_eps, d);
        Q[i] = pref * acc;
    }
    for (Index i = 0; i < M; ++i)
        if (!(Q[i] > 0.0) || !std::isfinite(Q[i]))
            throw NumericalError("non-finite density at index " + std::to_string(i));
    return {Q, epsilon, d};
}

SparseOperator assemble_L_rect(const MatrixXd& points, Index n_row_pts,
                               const knn::NeighborTable& neighbors, const VectorXd& kappa,
                               double epsilon, int d, const OperatorOptions& opts,
                               VectorXd* Q_out) {
    Index M = points.rows(), R = n_row_pts;
    if (kappa.size() != M) throw ConfigError("assemble: kappa length mismatch");
    if (kappa.minCoeff() <= 0) throw ConfigError("assemble: kappa must be positive");
    auto bw = bandwidths(epsilon, opts);
    auto adj = symmetrized_adjacency(neighbors, M);
    VectorXd Q = density_on_adjacency(points, adj, bw.q_pref_eps, bw.q_arg_eps, d);
    if (Q_out) *Q_out = Q;

    double pref = std::pow(bw.w_pref_eps, -0.5 * d - 1.0) / static_cast<double>(M);
    double drop_s = -4.0 * std::log(opts.kernel_drop_tol);  // exp(-s/4) cutoff

    std::vector<std::vector<Triplet>> row_trips(R);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < R; ++i) {
        auto& out = row_trips[i];
        out.reserve(adj[i].size() + 2);
        double diag = pref * kernel_h(0.0, d) * kappa[i] / Q[i];  // self term
        double row_sum = diag;
        for (Index j : adj[i]) {
            double s = (points.row(i) - points.row(j)).squaredNorm() / bw.w_arg_eps;
            if (s > drop_s) continue;
            double w = pref * kernel_h(s, d) * std::sqrt(kappa[i] * kappa[j]) / Q[j];
            out.push_back({i, j, w});
            row_sum += w;
        }
        out.push_back({i, i, diag - row_sum});  // W_ii - D_ii; whole row sums to zero
    }
    std::vector<Triplet> trips;
    for (auto& rt : row_trips) trips.insert(trips.end(), rt.begin(), rt.end());
    return SparseOperator::from_triplets(
        R, M, std::move(trips), R == M ? SymmetryTag::GraphLaplacianLike : SymmetryTag::General);
}

SparseOperator assemble_L(const MatrixXd& points, const knn::NeighborTable& neighbors,
                          const VectorXd& kappa, double epsilon, int d,
                          const OperatorOptions& opts) {
    return assemble_L_rect(points, points.rows(), neighbors, kappa, epsilon, d, opts);
}

}  // namespace mpde::op
