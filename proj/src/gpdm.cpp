#include "mpde/gpdm.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "mpde/neighbors.hpp"

namespace mpde::gpdm {

std::vector<Index> boundary_indices(const geom::PointCloud& cloud) {
    std::vector<Index> idx;
    for (Index i = 0; i < cloud.size(); ++i)
        if (cloud.boundary[i]) idx.push_back(i);
    return idx;
}

namespace {

// outward unit tangent normal to the theta2 boundary of the semi-torus
Eigen::VectorXd analytic_normal(const geom::ManifoldSpec& spec, const Eigen::VectorXd& intrinsic) {
    if (spec.id != geom::Manifold::SemiTorus2D)
        throw ConfigError("analytic normals defined for SemiTorus2D only");
    double t2 = intrinsic[1];
    Eigen::Vector3d dt2(-std::sin(t2), std::cos(t2), 0.0);  // unit tangent in theta2
    double mid = 0.5 * (spec.ranges(1, 0) + spec.ranges(1, 1));
    return (t2 < mid) ? Eigen::Vector3d(-dt2) : dt2;
}

VectorXd interior_centroid_dir(const geom::PointCloud& cloud, Index b,
                               const std::vector<Index>& interior, int P) {
    std::vector<std::pair<double, Index>> dist;
    dist.reserve(interior.size());
    for (Index j : interior)
        dist.push_back({(cloud.points.row(b) - cloud.points.row(j)).squaredNorm(), j});
    std::partial_sort(dist.begin(), dist.begin() + std::min<std::size_t>(P, dist.size()),
                      dist.end());
    VectorXd c = VectorXd::Zero(cloud.ambient_dim());
    Index cnt = std::min<Index>(P, static_cast<Index>(dist.size()));
    for (Index s = 0; s < cnt; ++s) c += cloud.points.row(dist[s].second);
    c /= double(cnt);
    return cloud.points.row(b).transpose() - c;  // away from the interior
}

}  // namespace

MatrixXd estimate_normals(const geom::PointCloud& cloud, const std::vector<Index>& boundary_idx,
                          double epsilon, NormalMethod method, const geom::ManifoldSpec* spec,
                          int P) {
    if (boundary_idx.empty()) throw ConfigError("estimate_normals: no boundary points");
    Index n = cloud.ambient_dim();
    Index N_b = static_cast<Index>(boundary_idx.size());
    MatrixXd normals(N_b, n);

    std::vector<Index> interior;
    for (Index i = 0; i < cloud.size(); ++i)
        if (!cloud.boundary[i]) interior.push_back(i);

    if (method == NormalMethod::Analytic) {
        if (!cloud.has_intrinsic() || spec == nullptr)
            throw ConfigError("analytic normals need stored intrinsic coordinates");
        for (Index s = 0; s < N_b; ++s) {
            VectorXd nu = analytic_normal(*spec, cloud.intrinsic.row(boundary_idx[s]).transpose());
            VectorXd away = interior_centroid_dir(cloud, boundary_idx[s], interior, P);
            if (nu.dot(away) < 0) nu = -nu;
            normals.row(s) = nu.transpose();
        }
        return normals;
    }

    // Kernel method: direction from the kernel-weighted neighbor centroid to
    // the boundary point, projected onto the weighted-PCA tangent space.
    for (Index s = 0; s < N_b; ++s) {
        Index b = boundary_idx[s];
        VectorXd xb = cloud.points.row(b).transpose();
        VectorXd centroid = VectorXd::Zero(n);
        double wsum = 0.0;
        std::vector<std::pair<double, Index>> wpts;
        for (Index j = 0; j < cloud.size(); ++j) {
            if (j == b) continue;
            double d2 = (cloud.points.row(j).transpose() - xb).squaredNorm();
            double w = std::exp(-d2 / (4.0 * epsilon));
            if (w < 1e-14) continue;
            centroid += w * cloud.points.row(j).transpose();
            wsum += w;
            wpts.push_back({w, j});
        }
        if (wsum <= 0) throw NumericalError("normal estimation: empty neighborhood at boundary point " +
                                            std::to_string(b));
        centroid /= wsum;
        MatrixXd C = MatrixXd::Zero(n, n);
        for (auto [w, j] : wpts) {
            VectorXd dx = cloud.points.row(j).transpose() - centroid;
            C += w * dx * dx.transpose();
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
        MatrixXd U = es.eigenvectors().rightCols(cloud.d);  // tangent basis
        VectorXd v = xb - centroid;
        VectorXd nu = U * (U.transpose() * v);
        double norm = nu.norm();
        if (norm < 1e-14)
            throw NumericalError("normal estimation: degenerate direction at boundary point " +
                                 std::to_string(b));
        nu /= norm;
        VectorXd away = interior_centroid_dir(cloud, b, interior, P);
        if (nu.dot(away) < 0) nu = -nu;
        normals.row(s) = nu.transpose();
    }
    return normals;
}

GhostSet place_ghosts(const geom::PointCloud& cloud, const std::vector<Index>& boundary_idx,
                      const MatrixXd& normals, int K, int P) {
    if (K < 1 || P < 1) throw ConfigError("place_ghosts: K and P must be positive");
    Index N_b = static_cast<Index>(boundary_idx.size());
    Index n = cloud.ambient_dim();

    double h_acc = 0.0;
    for (Index s = 0; s < N_b; ++s) {
        std::vector<double> d2;
        d2.reserve(cloud.size() - 1);
        for (Index j = 0; j < cloud.size(); ++j) {
            if (j == boundary_idx[s]) continue;
            d2.push_back((cloud.points.row(boundary_idx[s]) - cloud.points.row(j)).squaredNorm());
        }
        std::partial_sort(d2.begin(), d2.begin() + P, d2.end());
        double mean = 0.0;
        for (int p = 0; p < P; ++p) mean += std::sqrt(d2[p]);
        h_acc += mean / P;
    }
    double h = h_acc / double(N_b);
    if (h <= 0) throw NumericalError("place_ghosts: zero spacing (duplicate points)");

    GhostSet ghosts;
    ghosts.mode = GhostMode::Append;
    ghosts.K = K;
    ghosts.h = h;
    ghosts.h_per = VectorXd::Constant(N_b, h);
    ghosts.normals = normals;
    ghosts.exterior_points.resize(N_b * K, n);
    ghosts.interior_points.resize(N_b, n);
    for (int k = 1; k <= K; ++k)
        for (Index s = 0; s < N_b; ++s)
            ghosts.exterior_points.row((k - 1) * N_b + s) =
                cloud.points.row(boundary_idx[s]) + k * h * normals.row(s);
    for (Index s = 0; s < N_b; ++s)
        ghosts.interior_points.row(s) = cloud.points.row(boundary_idx[s]) - h * normals.row(s);
    return ghosts;
}

GhostSet attach_ghosts(const geom::PointCloud& cloud, const std::vector<Index>& boundary_idx,
                       const MatrixXd& normals, int K) {
    if (K < 1) throw ConfigError("attach_ghosts: K must be positive");
    Index N_b = static_cast<Index>(boundary_idx.size());
    Index n = cloud.ambient_dim();
    std::vector<Index> interior;
    for (Index i = 0; i < cloud.size(); ++i)
        if (!cloud.boundary[i]) interior.push_back(i);
    if (interior.empty()) throw ConfigError("attach_ghosts: no interior points");

    GhostSet ghosts;
    ghosts.mode = GhostMode::Snap;
    ghosts.K = K;
    ghosts.h_per.resize(N_b);
    ghosts.normals = normals;
    ghosts.exterior_points.resize(N_b * K, n);
    ghosts.interior_index.resize(N_b);

    for (Index s = 0; s < N_b; ++s) {
        VectorXd xb = cloud.points.row(boundary_idx[s]).transpose();
        double best = std::numeric_limits<double>::infinity();
        for (Index j : interior)
            best = std::min(best, (cloud.points.row(j).transpose() - xb).squaredNorm());
        double h1 = std::sqrt(best);
        VectorXd target = xb - h1 * normals.row(s).transpose();
        Index pick = interior[0];
        best = std::numeric_limits<double>::infinity();
        for (Index j : interior) {
            double d2 = (cloud.points.row(j).transpose() - target).squaredNorm();
            if (d2 < best) {
                best = d2;
                pick = j;
            }
        }
        ghosts.interior_index[s] = pick;
        double hb = (cloud.points.row(pick).transpose() - xb).norm();
        if (hb <= 0) throw NumericalError("attach_ghosts: zero spacing (duplicate points)");
        ghosts.h_per[s] = hb;
    }
    ghosts.h = ghosts.h_per.mean();
    for (int k = 1; k <= K; ++k)
        for (Index s = 0; s < N_b; ++s)
            ghosts.exterior_points.row((k - 1) * N_b + s) =
                cloud.points.row(boundary_idx[s]) + k * ghosts.h_per[s] * normals.row(s);
    return ghosts;
}

SparseOperator build_extrapolation(const GhostSet& ghosts, const std::vector<Index>& boundary_idx,
                                   const std::vector<Index>& interior_ghost_index, Index n_cols) {
    Index N_b = ghosts.boundary_count();
    if (static_cast<Index>(boundary_idx.size()) != N_b ||
        static_cast<Index>(interior_ghost_index.size()) != N_b)
        throw ConfigError("build_extrapolation: index map mismatch");
    std::vector<op::Triplet> trips;
    trips.reserve(2 * N_b * ghosts.K);
    for (int k = 1; k <= ghosts.K; ++k)
        for (Index s = 0; s < N_b; ++s) {
            Index row = (k - 1) * N_b + s;
            trips.push_back({row, boundary_idx[s], double(k + 1)});
            trips.push_back({row, interior_ghost_index[s], -double(k)});
        }
    return SparseOperator::from_triplets(N_b * ghosts.K, n_cols, std::move(trips));
}

GpdmOperator assemble_gpdm(const geom::PointCloud& cloud_aug, const GhostSet& ghosts,
                           const VectorXd& kappa_cols, double epsilon, int d, int k,
                           const OperatorOptions& opts) {
    Index N_h = cloud_aug.size();
    Index n_ext = ghosts.exterior_points.rows();
    Index M = N_h + n_ext;
    if (kappa_cols.size() != M) throw ConfigError("assemble_gpdm: kappa length mismatch");

    MatrixXd cols(M, cloud_aug.ambient_dim());
    cols.topRows(N_h) = cloud_aug.points;
    if (n_ext > 0) cols.bottomRows(n_ext) = ghosts.exterior_points;

    auto nt = knn::build(cols, static_cast<int>(std::min<Index>(k, M - 1)));
    GpdmOperator gp;
    auto Lh = op::assemble_L_rect(cols, N_h, nt, kappa_cols, epsilon, d, opts);
    auto L1 = Lh.slice_cols(0, N_h);

    auto bidx = boundary_indices(cloud_aug);
    Index N_b = static_cast<Index>(bidx.size());
    if (N_b != ghosts.boundary_count() && ghosts.boundary_count() > 0)
        throw ConfigError("assemble_gpdm: ghost set inconsistent with cloud");

    if (n_ext == 0) {
        gp.L_tilde = L1;
    } else {
        auto L2 = Lh.slice_cols(N_h, M);
        std::vector<Index> ig_index;
        if (ghosts.mode == GhostMode::Snap) {
            ig_index = ghosts.interior_index;
        } else {
            // interior ghosts were appended as the last N_b cloud rows
            for (Index s = 0; s < N_b; ++s) ig_index.push_back(N_h - N_b + s);
        }
        gp.G = build_extrapolation(ghosts, bidx, ig_index, N_h);
        gp.L_tilde = op::add(L1, op::multiply(L2, gp.G));
    }
    for (Index i = 0; i < N_h; ++i)
        (cloud_aug.boundary[i] ? gp.boundary_rows : gp.interior_rows).push_back(i);
    gp.L_interior = gp.L_tilde.select_rows(gp.interior_rows);
    return gp;
}

void save_ghosts_csv(const GhostSet& ghosts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    Index n = ghosts.exterior_points.cols();
    out << "b,k";
    for (Index j = 0; j < n; ++j) out << ",x" << (j + 1);
    out << "\n";
    Index N_b = ghosts.boundary_count();
    if (ghosts.mode == GhostMode::Append)
        for (Index s = 0; s < N_b; ++s) {
            out << s << ",0";
            for (Index j = 0; j < n; ++j) out << "," << fmt17(ghosts.interior_points(s, j));
            out << "\n";
        }
    for (int k = 1; k <= ghosts.K; ++k)
        for (Index s = 0; s < N_b; ++s) {
            out << s << "," << k;
            for (Index j = 0; j < n; ++j)
                out << "," << fmt17(ghosts.exterior_points((k - 1) * N_b + s, j));
            out << "\n";
        }
}

}  // namespace mpde::gpdm
