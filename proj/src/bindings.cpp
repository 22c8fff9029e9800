#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mpde/bench.hpp"
#include "mpde/neighbors.hpp"
#include "mpde/ntk.hpp"

namespace py = pybind11;
using namespace mpde;

namespace {

geom::ManifoldSpec spec_of(const std::string& name) {
    return geom::ManifoldSpec::make(geom::manifold_from_string(name));
}

py::dict cloud_to_dict(const geom::PointCloud& cloud) {
    py::dict d;
    d["points"] = cloud.points;
    d["intrinsic"] = cloud.intrinsic;
    std::vector<bool> bnd(cloud.boundary.begin(), cloud.boundary.end());
    d["boundary"] = bnd;
    d["d"] = cloud.d;
    d["seed"] = cloud.seed;
    return d;
}

py::tuple op_to_coo(const op::SparseOperator& L) {
    std::vector<Index> rows, cols;
    std::vector<double> vals;
    rows.reserve(L.nnz());
    for (Index r = 0; r < L.n_rows; ++r)
        for (Index p = L.row_ptr[r]; p < L.row_ptr[r + 1]; ++p) {
            rows.push_back(r);
            cols.push_back(L.col_idx[p]);
            vals.push_back(L.values[p]);
        }
    return py::make_tuple(L.n_rows, L.n_cols, rows, cols, vals);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "mesh-free elliptic PDE solver on point-cloud manifolds";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<NumericalError>(m, "NumericalFailure");

    m.def("set_threads", &set_thread_count, py::arg("threads"));

    m.def(
        "sample_cloud",
        [](const std::string& manifold, Index N, Index N_b, std::uint64_t seed,
           const std::string& mode) {
            auto spec = spec_of(manifold);
            auto cloud = geom::sample_cloud(
                spec, N, N_b, seed,
                mode == "grid" ? geom::SamplingMode::Grid : geom::SamplingMode::IID);
            return cloud_to_dict(cloud);
        },
        py::arg("manifold"), py::arg("N"), py::arg("N_b") = 0, py::arg("seed") = 0,
        py::arg("mode") = "iid");

    m.def(
        "test_grid",
        [](const std::string& manifold, Index resolution) {
            return cloud_to_dict(geom::test_grid(spec_of(manifold), resolution));
        },
        py::arg("manifold"), py::arg("resolution"));

    m.def(
        "embed",
        [](const std::string& manifold, const MatrixXd& intrinsic) {
            return geom::embed_all(spec_of(manifold), intrinsic);
        },
        py::arg("manifold"), py::arg("intrinsic"));
    m.def(
        "exact_solution",
        [](const std::string& manifold, const MatrixXd& intrinsic) {
            return geom::exact_solution_all(spec_of(manifold), intrinsic);
        },
        py::arg("manifold"), py::arg("intrinsic"));
    m.def(
        "diffusion_kappa",
        [](const std::string& manifold, const MatrixXd& intrinsic) {
            return geom::diffusion_kappa_all(spec_of(manifold), intrinsic);
        },
        py::arg("manifold"), py::arg("intrinsic"));
    m.def(
        "rhs_f",
        [](const std::string& manifold, const MatrixXd& intrinsic) {
            return geom::rhs_f_all(spec_of(manifold), intrinsic);
        },
        py::arg("manifold"), py::arg("intrinsic"));

    m.def(
        "knn",
        [](const MatrixXd& points, int k) {
            auto nt = knn::build(points, k);
            return py::make_tuple(nt.indices, nt.sq_distances);
        },
        py::arg("points"), py::arg("k"));

    m.def(
        "estimate_density",
        [](const MatrixXd& points, int k, double epsilon, int d, const std::string& convention,
           double scale) {
            auto nt = knn::build(points, k);
            op::OperatorOptions opts;
            opts.convention = op::convention_from_string(convention);
            opts.bandwidth_scale = scale;
            return op::estimate_density(points, nt, epsilon, d, opts).Q;
        },
        py::arg("points"), py::arg("k"), py::arg("epsilon"), py::arg("d"),
        py::arg("convention") = "matched", py::arg("scale") = 1.15);

    m.def(
        "assemble_operator",
        [](const MatrixXd& points, const VectorXd& kappa, double epsilon, int d, int k,
           const std::string& convention, double scale) {
            auto nt = knn::build(points, k);
            op::OperatorOptions opts;
            opts.convention = op::convention_from_string(convention);
            opts.bandwidth_scale = scale;
            return op_to_coo(op::assemble_L(points, nt, kappa, epsilon, d, opts));
        },
        py::arg("points"), py::arg("kappa"), py::arg("epsilon"), py::arg("d"), py::arg("k"),
        py::arg("convention") = "matched", py::arg("scale") = 1.15,
        "returns (n_rows, n_cols, rows, cols, values) in coordinate form");

    m.def(
        "solve_closed",
        [](Index n_rows, Index n_cols, const std::vector<Index>& rows,
           const std::vector<Index>& cols, const std::vector<double>& vals, const VectorXd& a,
           const VectorXd& f, double gamma) {
            std::vector<op::Triplet> trips;
            trips.reserve(vals.size());
            for (std::size_t i = 0; i < vals.size(); ++i)
                trips.push_back({rows[i], cols[i], vals[i]});
            auto L = op::SparseOperator::from_triplets(n_rows, n_cols, std::move(trips));
            auto rep = solve::solve_closed(L, a, f, gamma);
            py::dict info;
            info["residual_norm"] = rep.residual_norm;
            info["iterations"] = rep.iterations;
            info["method"] = rep.method == solve::SolveMethod::DenseLS ? "DenseLS" : "IterativeLSQR";
            return py::make_tuple(rep.solution, info);
        },
        py::arg("n_rows"), py::arg("n_cols"), py::arg("rows"), py::arg("cols"), py::arg("values"),
        py::arg("a"), py::arg("f"), py::arg("gamma"));

    m.def(
        "gram_a",
        [](const MatrixXd& X, int m, int r, double gamma, std::uint64_t seed) {
            auto params = nn::init_two_layer_ntk(static_cast<int>(X.cols()), m, r, gamma, seed);
            return ntk::gram_a(params, X);
        },
        py::arg("X"), py::arg("m"), py::arg("r") = 3, py::arg("gamma") = 0.5, py::arg("seed") = 0);

    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            auto cfg = bench::ExperimentConfig::from_json_string(config_json);
            auto rep = bench::run(cfg);
            py::dict d;
            d["forward_error_inf"] = rep.forward_error_inf;
            if (rep.inverse_error_inf) d["inverse_error_inf"] = *rep.inverse_error_inf;
            if (rep.training_error_inf) d["training_error_inf"] = *rep.training_error_inf;
            if (rep.testing_error_inf) d["testing_error_inf"] = *rep.testing_error_inf;
            d["output_dir"] = cfg.output_dir;
            return d;
        },
        py::arg("config_json"), "run a full experiment from a JSON config string");

    m.def(
        "train_nn",
        [](const MatrixXd& X, Index n_rows, Index n_cols, const std::vector<Index>& rows,
           const std::vector<Index>& cols, const std::vector<double>& vals, const VectorXd& f,
           double gamma, Index width, int depth, const std::string& activation,
           const std::string& optimizer, double lr0, Index T, std::uint64_t seed) {
            std::vector<op::Triplet> trips;
            for (std::size_t i = 0; i < vals.size(); ++i)
                trips.push_back({rows[i], cols[i], vals[i]});
            auto L = op::SparseOperator::from_triplets(n_rows, n_cols, std::move(trips));
            nn::Architecture arch;
            arch.input_dim = static_cast<int>(X.cols());
            arch.width = static_cast<int>(width);
            arch.depth = depth;
            arch.activation = nn::activation_from_string(activation);
            arch.trainable_coeffs = arch.activation.kind == nn::ActivationKind::PolynomialSine;
            auto params = nn::init_deep(arch, seed);
            nn::LossContext ctx;
            ctx.op = &L;
            ctx.f = f;
            ctx.gamma = gamma;
            nn::TrainConfig tc;
            tc.optimizer = optimizer == "GD" ? nn::Optimizer::GD : nn::Optimizer::Adam;
            tc.lr0 = lr0;
            tc.iterations = T;
            tc.gd_adaptive = tc.optimizer == nn::Optimizer::GD;
            tc.seed = seed;
            auto hist = nn::train(params, X, ctx, tc);
            VectorXd phi = nn::batch_forward(params, X);
            return py::make_tuple(phi, hist.loss);
        },
        py::arg("X"), py::arg("n_rows"), py::arg("n_cols"), py::arg("rows"), py::arg("cols"),
        py::arg("values"), py::arg("f"), py::arg("gamma"), py::arg("width") = 50,
        py::arg("depth") = 3, py::arg("activation") = "PolynomialSine",
        py::arg("optimizer") = "Adam", py::arg("lr0") = 0.01, py::arg("T") = 500,
        py::arg("seed") = 0);
}
