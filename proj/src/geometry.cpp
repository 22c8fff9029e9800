#include "mpde/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mpde::geom {

namespace {
constexpr double kTwoPi = 6.2831853071795864769252867665590;
constexpr double kPi = 3.1415926535897932384626433832795;
}  // namespace

Manifold manifold_from_string(const std::string& name) {
    if (name == "Torus2D") return Manifold::Torus2D;
    if (name == "Flat3DinR12") return Manifold::Flat3DinR12;
    if (name == "SemiTorus2D") return Manifold::SemiTorus2D;
    throw ConfigError("unknown manifold: " + name);
}

std::string to_string(Manifold id) {
    switch (id) {
        case Manifold::Torus2D: return "Torus2D";
        case Manifold::Flat3DinR12: return "Flat3DinR12";
        case Manifold::SemiTorus2D: return "SemiTorus2D";
    }
    throw ConfigError("bad manifold id");
}

ManifoldSpec ManifoldSpec::make(Manifold id) {
    ManifoldSpec spec;
    spec.id = id;
    switch (id) {
        case Manifold::Torus2D:
            spec.d = 2;
            spec.n = 3;
            spec.ranges.resize(2, 2);
            spec.ranges << 0, kTwoPi, 0, kTwoPi;
            spec.has_boundary = false;
            break;
        case Manifold::SemiTorus2D:
            spec.d = 2;
            spec.n = 3;
            spec.ranges.resize(2, 2);
            spec.ranges << 0, kTwoPi, 0, kPi;
            spec.has_boundary = true;
            break;
        case Manifold::Flat3DinR12:
            spec.d = 3;
            spec.n = 12;
            spec.ranges.resize(3, 2);
            spec.ranges << 0, kTwoPi, 0, kTwoPi, 0, kTwoPi;
            spec.has_boundary = false;
            break;
    }
    return spec;
}

Index PointCloud::boundary_count() const {
    Index c = 0;
    for (auto b : boundary) c += (b != 0);
    return c;
}

VectorXd embed(const ManifoldSpec& spec, const VectorXd& intrinsic) {
    if (intrinsic.size() != spec.d) throw ConfigError("embed: intrinsic dimension mismatch");
    VectorXd x(spec.n);
    switch (spec.id) {
        case Manifold::Torus2D:
        case Manifold::SemiTorus2D: {
            double t1 = intrinsic[0], t2 = intrinsic[1];
            double rho = 2.0 + std::cos(t1);
            x << rho * std::cos(t2), rho * std::sin(t2), std::sin(t1);
            break;
        }
        case Manifold::Flat3DinR12: {
            for (int j = 0; j < 3; ++j) {
                double t = intrinsic[j];
                x[4 * j + 0] = std::sin(t);
                x[4 * j + 1] = std::cos(t);
                x[4 * j + 2] = std::sin(2 * t);
                x[4 * j + 3] = std::cos(2 * t);
            }
            break;
        }
    }
    return x;
}

double exact_solution(const ManifoldSpec& spec, const VectorXd& intrinsic) {
    switch (spec.id) {
        case Manifold::Torus2D:
        case Manifold::SemiTorus2D: {
            double t1 = intrinsic[0], t2 = intrinsic[1];
            double rho = 2.0 + std::cos(t1);
            return (std::sin(2 * t2) - 2.0 * std::cos(2 * t2) / rho) * std::cos(t1);
        }
        case Manifold::Flat3DinR12:
            return std::sin(intrinsic[0]) * std::cos(intrinsic[1]) * std::sin(2 * intrinsic[2]);
    }
    throw ConfigError("bad manifold id");
}

double diffusion_kappa(const ManifoldSpec& spec, const VectorXd& intrinsic) {
    switch (spec.id) {
        case Manifold::Torus2D:
        case Manifold::SemiTorus2D: {
            double s1 = std::sin(intrinsic[0]), c2 = std::cos(intrinsic[1]);
            return 1.1 + s1 * s1 * c2 * c2;
        }
        case Manifold::Flat3DinR12:
            return 1.0;
    }
    throw ConfigError("bad manifold id");
}

// div_g(kappa grad_g u) in intrinsic coordinates. For the torus family the
// metric induced by the embedding is diag(1, rho^2) with rho = 2 + cos t1, so
//   f = kappa u_11 + kappa u_22 / rho^2
//     + (kappa_1 + kappa rho_1 / rho) u_1 + kappa_2 u_2 / rho^2.
// The closed forms below were derived offline and are pinned against a
// finite-difference oracle in the tests.
double rhs_f(const ManifoldSpec& spec, const VectorXd& intrinsic) {
    switch (spec.id) {
        case Manifold::Torus2D:
        case Manifold::SemiTorus2D: {
            double t1 = intrinsic[0], t2 = intrinsic[1];
            double s1 = std::sin(t1), c1 = std::cos(t1);
            double s2 = std::sin(t2), c2 = std::cos(t2);
            double s22 = std::sin(2 * t2), c22 = std::cos(2 * t2);
            double rho = 2.0 + c1;
            double rho1 = -s1;
            double kap = 1.1 + s1 * s1 * c2 * c2;
            double kap1 = std::sin(2 * t1) * c2 * c2;
            double kap2 = -s1 * s1 * std::sin(2 * t2);
            double u1 = -s1 * s22 + 4.0 * s1 * c22 / (rho * rho);
            double u11 = -c1 * s22 + 4.0 * c22 * (c1 / (rho * rho) + 2.0 * s1 * s1 / (rho * rho * rho));
            double u2 = 2.0 * c1 * c22 + 4.0 * c1 * s22 / rho;
            double u22 = -4.0 * c1 * s22 + 8.0 * c1 * c22 / rho;
            return kap * u11 + kap * u22 / (rho * rho) + (kap1 + kap * rho1 / rho) * u1 +
                   kap2 * u2 / (rho * rho);
        }
        case Manifold::Flat3DinR12:
            // metric is 5 I_3; u is a Laplacian eigenfunction
            return -1.2 * exact_solution(spec, intrinsic);
    }
    throw ConfigError("bad manifold id");
}

MatrixXd embed_all(const ManifoldSpec& spec, const MatrixXd& intrinsic) {
    MatrixXd out(intrinsic.rows(), spec.n);
    for (Index i = 0; i < intrinsic.rows(); ++i)
        out.row(i) = embed(spec, intrinsic.row(i).transpose()).transpose();
    return out;
}

VectorXd exact_solution_all(const ManifoldSpec& spec, const MatrixXd& intrinsic) {
    VectorXd out(intrinsic.rows());
    for (Index i = 0; i < intrinsic.rows(); ++i)
        out[i] = exact_solution(spec, intrinsic.row(i).transpose());
    return out;
}

VectorXd diffusion_kappa_all(const ManifoldSpec& spec, const MatrixXd& intrinsic) {
    VectorXd out(intrinsic.rows());
    for (Index i = 0; i < intrinsic.rows(); ++i)
        out[i] = diffusion_kappa(spec, intrinsic.row(i).transpose());
    return out;
}

VectorXd rhs_f_all(const ManifoldSpec& spec, const MatrixXd& intrinsic) {
    VectorXd out(intrinsic.rows());
    for (Index i = 0; i < intrinsic.rows(); ++i) out[i] = rhs_f(spec, intrinsic.row(i).transpose());
    return out;
}

namespace {

PointCloud finalize(const ManifoldSpec& spec, MatrixXd intrinsic, std::vector<std::uint8_t> bnd,
                    std::uint64_t seed) {
    PointCloud cloud;
    cloud.intrinsic = std::move(intrinsic);
    cloud.points = embed_all(spec, cloud.intrinsic);
    cloud.boundary = std::move(bnd);
    cloud.d = spec.d;
    cloud.seed = seed;
    return cloud;
}

PointCloud sample_iid(const ManifoldSpec& spec, Index N, Index N_b, std::uint64_t seed) {
    Rng rng(seed, "sample_cloud");
    Index total = N + N_b;
    MatrixXd th(total, spec.d);
    std::vector<std::uint8_t> bnd(total, 0);
    for (Index i = 0; i < N; ++i)
        for (int j = 0; j < spec.d; ++j)
            th(i, j) = rng.uniform(spec.ranges(j, 0), spec.ranges(j, 1));
    if (N_b > 0) {
        Rng brng(seed, "sample_boundary");
        Index half = N_b / 2;
        for (Index i = 0; i < N_b; ++i) {
            th(N + i, 0) = brng.uniform(0.0, kTwoPi);
            th(N + i, 1) = (i < half) ? 0.0 : kPi;
            bnd[N + i] = 1;
        }
    }
    return finalize(spec, std::move(th), std::move(bnd), seed);
}

PointCloud sample_grid(const ManifoldSpec& spec, Index N, std::uint64_t seed) {
    Index m = static_cast<Index>(std::llround(std::pow(static_cast<double>(N), 1.0 / spec.d)));
    Index check = 1;
    for (int j = 0; j < spec.d; ++j) check *= m;
    if (check != N)
        throw ConfigError("grid sampling needs N = m^" + std::to_string(spec.d) +
                          ", got N = " + std::to_string(N));

    std::vector<VectorXd> axes(spec.d);
    for (int j = 0; j < spec.d; ++j) {
        axes[j].resize(m);
        bool closed = spec.has_boundary && j == spec.d - 1;  // theta2 lattice hits both ends
        for (Index i = 0; i < m; ++i) {
            double lo = spec.ranges(j, 0), hi = spec.ranges(j, 1);
            axes[j][i] = closed ? lo + (hi - lo) * double(i) / double(m - 1)
                                : lo + (hi - lo) * double(i) / double(m);
        }
    }
    MatrixXd th(N, spec.d);
    std::vector<std::uint8_t> bnd(N, 0);
    std::vector<Index> idx(spec.d, 0);
    for (Index r = 0; r < N; ++r) {
        for (int j = 0; j < spec.d; ++j) th(r, j) = axes[j][idx[j]];
        if (spec.has_boundary) bnd[r] = (idx[spec.d - 1] == 0 || idx[spec.d - 1] == m - 1) ? 1 : 0;
        for (int j = spec.d - 1; j >= 0; --j) {
            if (++idx[j] < m) break;
            idx[j] = 0;
        }
    }
    // boundary points last, stable order otherwise
    if (spec.has_boundary) {
        std::vector<Index> order;
        order.reserve(N);
        for (Index r = 0; r < N; ++r)
            if (!bnd[r]) order.push_back(r);
        for (Index r = 0; r < N; ++r)
            if (bnd[r]) order.push_back(r);
        MatrixXd th2(N, spec.d);
        std::vector<std::uint8_t> bnd2(N);
        for (Index r = 0; r < N; ++r) {
            th2.row(r) = th.row(order[r]);
            bnd2[r] = bnd[order[r]];
        }
        th = std::move(th2);
        bnd = std::move(bnd2);
    }
    return finalize(spec, std::move(th), std::move(bnd), seed);
}

}  // namespace

PointCloud sample_cloud(const ManifoldSpec& spec, Index N, Index N_b, std::uint64_t seed,
                        SamplingMode mode) {
    if (N <= 0) throw ConfigError("sample_cloud: N must be positive");
    if (N_b > 0 && !spec.has_boundary)
        throw ConfigError("sample_cloud: boundary points requested on a closed manifold");
    if (mode == SamplingMode::Grid) return sample_grid(spec, N, seed);
    return sample_iid(spec, N, N_b, seed);
}

void gauss_legendre(Index n, VectorXd& nodes, VectorXd& weights) {
    nodes.resize(n);
    weights.resize(n);
    for (Index i = 0; i < n; ++i) {
        // Newton from the Chebyshev-based initial guess
        double x = std::cos(kPi * (double(i) + 0.75) / (double(n) + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (Index j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - double(j) * p2) / double(j + 1);
            }
            pp = double(n) * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
}

PointCloud test_grid(const ManifoldSpec& spec, Index resolution) {
    if (resolution < 2) throw ConfigError("test_grid: resolution must be >= 2");
    VectorXd nodes, weights;
    gauss_legendre(resolution, nodes, weights);
    Index total = 1;
    for (int j = 0; j < spec.d; ++j) total *= resolution;
    MatrixXd th(total, spec.d);
    std::vector<Index> idx(spec.d, 0);
    for (Index r = 0; r < total; ++r) {
        for (int j = 0; j < spec.d; ++j) {
            double lo = spec.ranges(j, 0), hi = spec.ranges(j, 1);
            th(r, j) = lo + (hi - lo) * (nodes[idx[j]] + 1.0) / 2.0;
        }
        for (int j = spec.d - 1; j >= 0; --j) {
            if (++idx[j] < resolution) break;
            idx[j] = 0;
        }
    }
    return finalize(spec, std::move(th), std::vector<std::uint8_t>(total, 0), 0);
}

Eigen::Vector2d torus_closest_intrinsic(const VectorXd& ambient) {
    double x = ambient[0], y = ambient[1], z = ambient[2];
    double t2 = std::atan2(y, x);
    double r = std::sqrt(x * x + y * y);
    double t1 = std::atan2(z, r - 2.0);
    if (t1 < 0) t1 += kTwoPi;
    return {t1, t2};
}

void save_cloud_csv(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    Index n = cloud.ambient_dim(), d = cloud.has_intrinsic() ? cloud.intrinsic.cols() : 0;
    for (Index j = 0; j < n; ++j) out << "x" << (j + 1) << ",";
    for (Index j = 0; j < d; ++j) out << "t" << (j + 1) << ",";
    out << "boundary\n";
    for (Index i = 0; i < cloud.size(); ++i) {
        for (Index j = 0; j < n; ++j) out << fmt17(cloud.points(i, j)) << ",";
        for (Index j = 0; j < d; ++j) out << fmt17(cloud.intrinsic(i, j)) << ",";
        out << int(cloud.boundary[i]) << "\n";
    }
}

PointCloud load_cloud_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    std::string header;
    std::getline(in, header);
    Index n = 0, d = 0;
    {
        std::stringstream ss(header);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty() && tok[0] == 'x') ++n;
            if (!tok.empty() && tok[0] == 't') ++d;
        }
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        if (static_cast<Index>(vals.size()) != n + d + 1)
            throw ConfigError("malformed cloud row in " + path);
        rows.push_back(std::move(vals));
    }
    PointCloud cloud;
    Index N = static_cast<Index>(rows.size());
    cloud.points.resize(N, n);
    cloud.intrinsic.resize(N, d);
    cloud.boundary.assign(N, 0);
    cloud.d = static_cast<int>(d);
    for (Index i = 0; i < N; ++i) {
        for (Index j = 0; j < n; ++j) cloud.points(i, j) = rows[i][j];
        for (Index j = 0; j < d; ++j) cloud.intrinsic(i, j) = rows[i][n + j];
        cloud.boundary[i] = rows[i][n + d] != 0.0 ? 1 : 0;
    }
    return cloud;
}

}  // namespace mpde::geom
