#pragma once

#include <optional>
#include <string>

#include "mpde/common.hpp"

namespace mpde::geom {

enum class Manifold { Torus2D, Flat3DinR12, SemiTorus2D };

Manifold manifold_from_string(const std::string& name);
std::string to_string(Manifold id);

struct ManifoldSpec {
    Manifold id;
    int d;              // intrinsic dimension
    int n;              // ambient dimension
    MatrixXd ranges;    // d x 2 intrinsic coordinate ranges
    bool has_boundary;  // boundary set at the closed theta2 range ends

    static ManifoldSpec make(Manifold id);
};

struct PointCloud {
    MatrixXd points;                 // N x n ambient coordinates
    MatrixXd intrinsic;              // N x d (empty if not stored)
    std::vector<std::uint8_t> boundary;  // N flags
    int d = 0;
    std::uint64_t seed = 0;

    Index size() const { return points.rows(); }
    Index ambient_dim() const { return points.cols(); }
    Index boundary_count() const;
    bool has_intrinsic() const { return intrinsic.size() > 0; }
};

enum class SamplingMode { IID, Grid };

Eigen::VectorXd embed(const ManifoldSpec& spec, const Eigen::VectorXd& intrinsic);
double exact_solution(const ManifoldSpec& spec, const Eigen::VectorXd& intrinsic);
double diffusion_kappa(const ManifoldSpec& spec, const Eigen::VectorXd& intrinsic);
double rhs_f(const ManifoldSpec& spec, const Eigen::VectorXd& intrinsic);

// Row-wise convenience wrappers over the scalar ops above.
MatrixXd embed_all(const ManifoldSpec& spec, const MatrixXd& intrinsic);
VectorXd exact_solution_all(const ManifoldSpec& spec, const MatrixXd& intrinsic);
VectorXd diffusion_kappa_all(const ManifoldSpec& spec, const MatrixXd& intrinsic);
VectorXd rhs_f_all(const ManifoldSpec& spec, const MatrixXd& intrinsic);

// IID: N interior points uniform over the intrinsic ranges plus, for specs
// with boundary, N_b points on the boundary circles appended last.
// Grid: equispaced intrinsic lattice with N = m^d total points (boundary
// included in N for SemiTorus2D, lattice-closed in theta2, N_b = 2*m);
// boundary points are reordered last.
PointCloud sample_cloud(const ManifoldSpec& spec, Index N, Index N_b, std::uint64_t seed,
                        SamplingMode mode = SamplingMode::IID);

// Tensor grid of Gauss-Legendre nodes mapped to the intrinsic ranges.
PointCloud test_grid(const ManifoldSpec& spec, Index resolution);

// Gauss-Legendre nodes/weights on [-1,1].
void gauss_legendre(Index n, VectorXd& nodes, VectorXd& weights);

// Closest-point intrinsic coordinates for the (semi-)torus family, defined for
// ambient points near the full torus; used to evaluate u, kappa, f at ghost
// points. theta2 is reported in (-pi, pi] so exterior ghosts fall outside
// [0, pi].
Eigen::Vector2d torus_closest_intrinsic(const Eigen::VectorXd& ambient);

void save_cloud_csv(const PointCloud& cloud, const std::string& path);
PointCloud load_cloud_csv(const std::string& path);

}  // namespace mpde::geom
