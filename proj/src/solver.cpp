#include "mpde/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <chrono>
#include <fstream>

#include "vendor_json.hpp"

namespace mpde::solve {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// least squares on [A; sqrt(gamma) I] via dense normal equations
VectorXd dense_ls(const SparseOperator& A, const VectorXd& b, double gamma) {
    MatrixXd Ad = A.to_dense();
    MatrixXd N = Ad.transpose() * Ad;
    N.diagonal().array() += gamma;
    VectorXd rhs = Ad.transpose() * b;
    Eigen::LDLT<MatrixXd> ldlt(N);
    if (ldlt.info() != Eigen::Success) throw NumericalError("dense least-squares factorization failed");
    return ldlt.solve(rhs);
}

VectorXd iterative_ls(const SparseOperator& A, const VectorXd& b, double gamma,
                      const SolveOptions& opts, Index& iterations) {
    Eigen::SparseMatrix<double> S;
    VectorXd rhs;
    if (gamma > 0) {
        // stack sqrt(gamma) I under A
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(A.nnz() + A.n_cols);
        for (Index r = 0; r < A.n_rows; ++r)
            for (Index p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p)
                trips.emplace_back(static_cast<int>(r), static_cast<int>(A.col_idx[p]), A.values[p]);
        double sg = std::sqrt(gamma);
        for (Index c = 0; c < A.n_cols; ++c)
            trips.emplace_back(static_cast<int>(A.n_rows + c), static_cast<int>(c), sg);
        S.resize(A.n_rows + A.n_cols, A.n_cols);
        S.setFromTriplets(trips.begin(), trips.end());
        rhs = VectorXd::Zero(A.n_rows + A.n_cols);
        rhs.head(A.n_rows) = b;
    } else {
        S = A.to_eigen();
        rhs = b;
    }
    Eigen::LeastSquaresConjugateGradient<Eigen::SparseMatrix<double>> lscg;
    lscg.setTolerance(opts.iterative_tol);
    lscg.setMaxIterations(opts.max_iterations);
    lscg.compute(S);
    VectorXd u = lscg.solve(rhs);
    iterations = lscg.iterations();
    if (lscg.info() != Eigen::Success && lscg.error() > 1e-8)
        throw NumericalError("iterative least squares did not converge, error " +
                             std::to_string(lscg.error()));
    return u;
}

LinearSolveReport solve_ls(const SparseOperator& A, const VectorXd& b, double gamma,
                           const SolveOptions& opts) {
    auto t0 = Clock::now();
    LinearSolveReport rep;
    rep.gamma = gamma;
    if (!opts.force_iterative && A.n_rows <= opts.dense_threshold) {
        rep.method = SolveMethod::DenseLS;
        rep.solution = dense_ls(A, b, gamma);
        rep.iterations = 0;
    } else {
        rep.method = SolveMethod::IterativeLSQR;
        rep.solution = iterative_ls(A, b, gamma, opts, rep.iterations);
    }
    if (!rep.solution.allFinite()) throw NumericalError("solver produced non-finite solution");
    rep.residual_norm = (A.apply(rep.solution) - b).norm() / std::sqrt(double(A.n_rows));
    rep.wall_time_ms = elapsed_ms(t0);
    return rep;
}

}  // namespace

LinearSolveReport solve_closed(const SparseOperator& L, const VectorXd& a, const VectorXd& f,
                               double gamma, const SolveOptions& opts) {
    if (L.n_rows != L.n_cols) throw ConfigError("solve_closed: operator must be square");
    if (f.size() != L.n_rows) throw ConfigError("solve_closed: rhs length mismatch");
    bool a_zero = a.size() == 0 || a.isZero(0.0);
    if (a_zero && gamma <= 0)
        throw ConfigError("solve_closed: gamma > 0 required when a == 0");
    if (gamma < 0) throw ConfigError("solve_closed: gamma must be nonnegative");
    SparseOperator A = a_zero ? L : op::shift(L, a);
    return solve_ls(A, f, gamma, opts);
}

LinearSolveReport solve_dirichlet(const gpdm::GpdmOperator& gp, const VectorXd& a,
                                  const VectorXd& f_interior, const VectorXd& g_boundary,
                                  const SolveOptions& opts) {
    Index n_int = static_cast<Index>(gp.interior_rows.size());
    Index N_b = static_cast<Index>(gp.boundary_rows.size());
    if (f_interior.size() != n_int || g_boundary.size() != N_b)
        throw ConfigError("solve_dirichlet: rhs length mismatch");
    SparseOperator top = gp.L_interior;
    if (a.size() > 0 && !a.isZero(0.0)) {
        if (a.size() != n_int) throw ConfigError("solve_dirichlet: a length mismatch");
        // subtract a at each interior row's own column
        std::vector<op::Triplet> trips;
        for (Index r = 0; r < top.n_rows; ++r)
            for (Index p = top.row_ptr[r]; p < top.row_ptr[r + 1]; ++p)
                trips.push_back({r, top.col_idx[p], top.values[p]});
        for (Index r = 0; r < n_int; ++r) trips.push_back({r, gp.interior_rows[r], -a[r]});
        top = SparseOperator::from_triplets(top.n_rows, top.n_cols, std::move(trips));
    }
    std::vector<op::Triplet> id_trips;
    for (Index s = 0; s < N_b; ++s) id_trips.push_back({s, gp.boundary_rows[s], 1.0});
    auto bottom = SparseOperator::from_triplets(N_b, top.n_cols, std::move(id_trips));
    auto A = op::vstack(top, bottom);
    VectorXd rhs(n_int + N_b);
    rhs.head(n_int) = f_interior;
    rhs.tail(N_b) = g_boundary;
    return solve_ls(A, rhs, 0.0, opts);
}

void save_solution_csv(const VectorXd& u, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "index,u\n";
    for (Index i = 0; i < u.size(); ++i) out << i << "," << fmt17(u[i]) << "\n";
}

VectorXd load_solution_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    std::string line;
    std::getline(in, line);
    std::vector<double> vals;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        vals.push_back(std::stod(line.substr(comma + 1)));
    }
    return Eigen::Map<VectorXd>(vals.data(), static_cast<Index>(vals.size()));
}

void save_report_json(const LinearSolveReport& rep, const std::string& path) {
    nlohmann::json j;
    j["method"] = rep.method == SolveMethod::DenseLS ? "DenseLS" : "IterativeLSQR";
    j["iterations"] = rep.iterations;
    j["residual_norm"] = rep.residual_norm;
    j["gamma"] = rep.gamma;
    j["wall_time_ms"] = rep.wall_time_ms;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace mpde::solve
