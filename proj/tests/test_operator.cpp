#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mpde/dm_operator.hpp"
#include "mpde/geometry.hpp"
#include "oracles.hpp"

using namespace mpde;
using namespace mpde::op;

namespace {

OperatorOptions matched_opts(double scale = 1.0) {
    OperatorOptions o;
    o.convention = BandwidthConvention::Matched;
    o.bandwidth_scale = scale;
    return o;
}

MatrixXd circle_points(Index N) {
    MatrixXd X(N, 2);
    for (Index i = 0; i < N; ++i) {
        double t = 2.0 * M_PI * double(i) / double(N);
        X.row(i) << std::cos(t), std::sin(t);
    }
    return X;
}

}  // namespace

TEST_CASE("kernel values") {
    CHECK(kernel_h(0, 2) == doctest::Approx(1.0 / (4 * M_PI)).epsilon(1e-14));
    CHECK(kernel_h(4, 2) == doctest::Approx(std::exp(-1.0) / (4 * M_PI)).epsilon(1e-14));
    CHECK(kernel_h(0, 3) == doctest::Approx(std::pow(4 * M_PI, -1.5)).epsilon(1e-14));
    CHECK_THROWS_AS(kernel_h(-1, 2), ConfigError);
}

TEST_CASE("density on a uniform circle is nearly constant") {
    Index N = 64;
    MatrixXd X = circle_points(N);
    auto nt = knn::build(X, 16);
    auto est = estimate_density(X, nt, 0.01, 1, matched_opts());
    CHECK(est.Q.minCoeff() > 0);
    CHECK(est.Q.maxCoeff() / est.Q.minCoeff() < 1.05);
}

TEST_CASE("truncated density matches the dense sum at k = N-1") {
    Rng rng(21);
    Index N = 80;
    MatrixXd X(N, 3);
    for (Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    double eps = 0.5;
    auto nt = knn::build(X, static_cast<int>(N - 1));
    auto est = estimate_density(X, nt, eps, 3, matched_opts());
    for (Index i = 0; i < N; ++i) {
        double dense = 0;
        for (Index j = 0; j < N; ++j)
            dense += kernel_h((X.row(i) - X.row(j)).squaredNorm() / eps, 3);
        dense *= std::pow(eps, -1.5) / double(N);
        CHECK(std::abs(est.Q[i] - dense) / dense < 1e-8);
    }
    // doubled bandwidth still agrees with its own dense sum
    auto est2 = estimate_density(X, nt, 2 * eps, 3, matched_opts());
    CHECK(est2.Q.allFinite());
}

TEST_CASE("assembled operator annihilates constants") {
    auto spec = geom::ManifoldSpec::make(geom::Manifold::Torus2D);
    auto cloud = geom::sample_cloud(spec, 400, 0, 3);
    auto nt = knn::build(cloud.points, 32);
    VectorXd kappa = geom::diffusion_kappa_all(spec, cloud.intrinsic);
    auto L = assemble_L(cloud.points, nt, kappa, 0.05, 2, matched_opts());
    CHECK(L.tag == SymmetryTag::GraphLaplacianLike);
    VectorXd ones = VectorXd::Ones(400);
    double resid = L.apply(ones).cwiseAbs().maxCoeff();
    CHECK(resid <= 1e-10 * L.max_row_l1_norm());
}

TEST_CASE("equilateral triangle matches the hand computation") {
    MatrixXd X(3, 2);
    X << 0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2;
    auto nt = knn::build(X, 2);
    VectorXd kappa = VectorXd::Ones(3);
    double eps = 0.3;
    auto L = assemble_L(X, nt, kappa, eps, 2, matched_opts());
    MatrixXd Ld = L.to_dense();
    // all pairwise distances equal: off-diagonals identical, diagonal -2w
    double w = Ld(0, 1);
    CHECK(w > 0);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j)
            CHECK(Ld(i, j) == doctest::Approx(i == j ? -2 * w : w).epsilon(1e-12));
    MatrixXd dense = oracles::dense_operator(X, kappa, eps, 2);
    CHECK((Ld - dense).cwiseAbs().maxCoeff() < 1e-12 * dense.cwiseAbs().maxCoeff());
}

TEST_CASE("kNN truncation at k = N-1 equals the dense all-pairs assembly") {
    auto spec = geom::ManifoldSpec::make(geom::Manifold::Torus2D);
    auto cloud = geom::sample_cloud(spec, 300, 0, 5);
    auto nt = knn::build(cloud.points, 299);
    VectorXd kappa = geom::diffusion_kappa_all(spec, cloud.intrinsic);
    double eps = 0.2;  // wide enough that nothing falls below the drop cutoff
    auto L = assemble_L(cloud.points, nt, kappa, eps, 2, matched_opts());
    MatrixXd dense = oracles::dense_operator(cloud.points, kappa, eps, 2);
    double scale = dense.cwiseAbs().maxCoeff();
    CHECK((L.to_dense() - dense).cwiseAbs().maxCoeff() < 1e-12 * scale);
}

TEST_CASE("sign pattern and Q-weighted negativity") {
    auto spec = geom::ManifoldSpec::make(geom::Manifold::Torus2D);
    auto cloud = geom::sample_cloud(spec, 500, 0, 9);
    auto nt = knn::build(cloud.points, 64);
    VectorXd kappa = geom::diffusion_kappa_all(spec, cloud.intrinsic);
    VectorXd Q;
    auto L = assemble_L_rect(cloud.points, 500, nt, kappa, 0.08, 2, matched_opts(), &Q);
    for (Index r = 0; r < L.n_rows; ++r)
        for (Index p = L.row_ptr[r]; p < L.row_ptr[r + 1]; ++p) {
            if (L.col_idx[p] == r) CHECK(L.values[p] <= 0);
            else CHECK(L.values[p] >= 0);
        }
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        VectorXd v(500);
        for (Index i = 0; i < 500; ++i) v[i] = rng.normal();
        VectorXd Lv = L.apply(v);
        double quad = 0;
        for (Index i = 0; i < 500; ++i) quad += v[i] * Lv[i] / Q[i];
        quad /= 500.0;
        CHECK(quad <= 1e-8 * v.squaredNorm());
    }
}

TEST_CASE("shift subtracts the zero-order coefficient") {
    MatrixXd X(4, 2);
    X.setRandom();
    auto nt = knn::build(X, 3);
    auto L = assemble_L(X, nt, VectorXd::Ones(4), 0.5, 2, matched_opts());

    VectorXd zero = VectorXd::Zero(4);
    auto same = shift(L, zero);
    CHECK((same.to_dense() - L.to_dense()).cwiseAbs().maxCoeff() == 0.0);

    auto empty = SparseOperator::from_triplets(4, 4, {});
    auto minus_id = shift(empty, VectorXd::Ones(4));
    CHECK((minus_id.to_dense() + MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);

    VectorXd a(4);
    a << 1, 2, 3, 4;
    auto shifted = shift(L, a);
    VectorXd rows = shifted.apply(VectorXd::Ones(4));
    for (Index i = 0; i < 4; ++i) CHECK(rows[i] == doctest::Approx(-a[i]).epsilon(1e-12));

    CHECK_THROWS_AS(shift(L, VectorXd::Ones(3)), ConfigError);
}

TEST_CASE("sparse apply against a dense oracle") {
    Rng rng(33);
    std::vector<Triplet> trips;
    for (int t = 0; t < 400; ++t)
        trips.push_back({static_cast<Index>(rng.next_u64() % 50),
                         static_cast<Index>(rng.next_u64() % 50), rng.normal()});
    auto A = SparseOperator::from_triplets(50, 50, trips);
    MatrixXd Ad = A.to_dense();
    VectorXd v(50);
    for (Index i = 0; i < 50; ++i) v[i] = rng.normal();
    CHECK((A.apply(v) - Ad * v).cwiseAbs().maxCoeff() < 1e-13);

    std::vector<Triplet> id;
    for (Index i = 0; i < 5; ++i) id.push_back({i, i, 1.0});
    auto I = SparseOperator::from_triplets(5, 5, id);
    VectorXd w(5);
    w << 1, 2, 3, 4, 5;
    CHECK(I.apply(w) == w);

    CHECK_THROWS_AS(A.apply(w), ConfigError);
}

TEST_CASE("operator file round trip") {
    Rng rng(8);
    std::vector<Triplet> trips;
    for (int t = 0; t < 60; ++t)
        trips.push_back({static_cast<Index>(rng.next_u64() % 12),
                         static_cast<Index>(rng.next_u64() % 15), rng.normal()});
    auto A = SparseOperator::from_triplets(12, 15, trips);
    auto path = std::filesystem::temp_directory_path() / "mpde_op_test.txt";
    save_operator(A, path.string());
    auto B = load_operator(path.string());
    CHECK(B.n_rows == 12);
    CHECK(B.n_cols == 15);
    CHECK(B.col_idx == A.col_idx);
    CHECK(B.values == A.values);  // 17 significant digits round-trip exactly
    std::filesystem::remove(path);
}

TEST_CASE("literal conventions expose the printed-formula bias") {
    // the literal text normalizations scale the operator by 2^-d and 4;
    // the matched default is the consistent one
    auto spec = geom::ManifoldSpec::make(geom::Manifold::Torus2D);
    auto cloud = geom::sample_cloud(spec, 625, 0, 0, geom::SamplingMode::Grid);
    auto nt = knn::build(cloud.points, 64);
    VectorXd kappa = geom::diffusion_kappa_all(spec, cloud.intrinsic);
    VectorXd u = geom::exact_solution_all(spec, cloud.intrinsic);
    VectorXd f = geom::rhs_f_all(spec, cloud.intrinsic);

    OperatorOptions paper;
    paper.convention = BandwidthConvention::Paper;
    paper.bandwidth_scale = 1.0;
    auto Lp = assemble_L(cloud.points, nt, kappa, 0.1166, 2, paper);
    OperatorOptions matched = matched_opts(1.0);
    auto Lm = assemble_L(cloud.points, nt, kappa, 0.1166, 2, matched);
    // paper-literal rows are close to 2^-d times the matched rows
    VectorXd rp = Lp.apply(u), rm = Lm.apply(u);
    double ratio = rp.norm() / rm.norm();
    CHECK(ratio == doctest::Approx(0.25).epsilon(0.15));
    // and its forward error cannot reach the matched one
    CHECK((rp - f).cwiseAbs().maxCoeff() > 2.0 * (rm - f).cwiseAbs().maxCoeff());
}

TEST_CASE("benchmark forward error at the published setting") {
    auto spec = geom::ManifoldSpec::make(geom::Manifold::Torus2D);
    auto cloud = geom::sample_cloud(spec, 625, 0, 0, geom::SamplingMode::Grid);
    auto nt = knn::build(cloud.points, 128);
    VectorXd kappa = geom::diffusion_kappa_all(spec, cloud.intrinsic);
    auto L = assemble_L(cloud.points, nt, kappa, 0.1166, 2);  // default options
    VectorXd u = geom::exact_solution_all(spec, cloud.intrinsic);
    VectorXd f = geom::rhs_f_all(spec, cloud.intrinsic);
    double fwd = (L.apply(u) - f).cwiseAbs().maxCoeff();
    CHECK(fwd > 3.7837 * 0.5);
    CHECK(fwd < 3.7837 * 1.5);
}

TEST_CASE("forward error decreases with N at the published settings" * doctest::timeout(900)) {
    auto spec = geom::ManifoldSpec::make(geom::Manifold::Torus2D);
    struct Row {
        Index N;
        double eps;
        int k;
    };
    double prev = std::numeric_limits<double>::infinity();
    for (Row row : {Row{625, 0.1166, 128}, Row{2500, 0.0237, 128}, Row{10000, 0.0059, 256}}) {
        auto cloud = geom::sample_cloud(spec, row.N, 0, 0, geom::SamplingMode::Grid);
        auto nt = knn::build(cloud.points, row.k);
        VectorXd kappa = geom::diffusion_kappa_all(spec, cloud.intrinsic);
        auto L = assemble_L(cloud.points, nt, kappa, row.eps, 2);
        VectorXd u = geom::exact_solution_all(spec, cloud.intrinsic);
        VectorXd f = geom::rhs_f_all(spec, cloud.intrinsic);
        double fwd = (L.apply(u) - f).cwiseAbs().maxCoeff();
        CHECK(fwd < prev);
        prev = fwd;
    }
}

TEST_CASE("kappa must be positive") {
    MatrixXd X(4, 2);
    X.setRandom();
    auto nt = knn::build(X, 3);
    VectorXd kappa = VectorXd::Ones(4);
    kappa[2] = 0.0;
    CHECK_THROWS_AS(assemble_L(X, nt, kappa, 0.5, 2, matched_opts()), ConfigError);
}
