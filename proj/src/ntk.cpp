#include "mpde/ntk.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>

#include "mpde/sparse.hpp"
#include "vendor_json.hpp"

namespace mpde::ntk {

namespace {

void check_two_layer(const NetworkParams& params) {
    if (params.arch.depth != 1 || params.arch.biases || params.arch.trainable_coeffs)
        throw ConfigError("gram matrices need a two-layer (single hidden, bias-free) network");
}

MatrixXd relu_pow_features(const NetworkParams& params, const MatrixXd& X, bool derivative) {
    int r = params.arch.activation.power;
    MatrixXd Z = X * params.weights(0).transpose();  // N x m
    return Z.unaryExpr([&](double z) -> double {
        if (z <= 0) return 0.0;
        double p = derivative ? double(r) : z;
        for (int i = 1; i < r; ++i) p *= z;
        return p;
    });
}

}  // namespace

MatrixXd gram_a(const NetworkParams& params, const MatrixXd& X) {
    check_two_layer(params);
    MatrixXd S = relu_pow_features(params, X, false);
    return (S * S.transpose()) / double(params.arch.width);
}

MatrixXd gram_w(const NetworkParams& params, const MatrixXd& X) {
    check_two_layer(params);
    MatrixXd P = relu_pow_features(params, X, true);
    VectorXd a2 = params.output_weights().array().square();
    MatrixXd inner = P * a2.asDiagonal() * P.transpose();
    return inner.cwiseProduct(X * X.transpose()) / double(params.arch.width);
}

double min_eig(const MatrixXd& G) {
    if (G.rows() != G.cols()) throw ConfigError("min_eig: matrix must be square");
    double asym = (G - G.transpose()).cwiseAbs().maxCoeff();
    double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
    if (asym > 1e-8 * scale) throw ConfigError("min_eig: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (G + G.transpose()),
                                               Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

DecayReport verify_decay(const nn::TrainingHistory& history, double lr, Index m,
                         double lambda_S_hat, double lambda_A_hat, Index N,
                         const std::vector<GramSnapshot>& snapshots) {
    if (history.loss.empty()) throw ConfigError("verify_decay: empty history");
    DecayReport rep;
    rep.lambda_S_hat = lambda_S_hat;
    rep.lambda_A_hat = lambda_A_hat;

    const auto& loss = history.loss;
    double loss0 = loss.front();
    Index satisfied = 0;
    rep.monotone = true;
    for (std::size_t t = 0; t < loss.size(); ++t) {
        double bound = 2.0 * std::exp(-double(m) * lambda_S_hat * lambda_A_hat *
                                      (double(t) * lr) / double(N)) * loss0;
        if (loss[t] <= bound) ++satisfied;
        if (t > 0 && loss[t] > loss[t - 1]) rep.monotone = false;
    }
    rep.bound_satisfaction_fraction = double(satisfied) / double(loss.size());

    // log-linear fit over the first phase (before the floor)
    Index cut = static_cast<Index>(loss.size());
    for (std::size_t t = 0; t < loss.size(); ++t)
        if (loss[t] < loss0 * 1e-12 || loss[t] <= 0.0) {
            cut = static_cast<Index>(t);
            break;
        }
    cut = std::max<Index>(cut, 3);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (Index t = 0; t < cut; ++t) {
        double y = std::log(loss[t]);
        sx += t;
        sy += y;
        sxx += double(t) * t;
        sxy += t * y;
    }
    double n = double(cut);
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double intercept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0, mean = sy / n;
    for (Index t = 0; t < cut; ++t) {
        double y = std::log(loss[t]);
        ss_res += (y - slope * t - intercept) * (y - slope * t - intercept);
        ss_tot += (y - mean) * (y - mean);
    }
    rep.fit_slope = slope;
    rep.fit_r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    rep.fit_span = cut;

    rep.max_drift = 0.0;
    rep.min_lambda_min = std::numeric_limits<double>::infinity();
    for (const auto& s : snapshots) {
        rep.max_drift = std::max(rep.max_drift, s.drift_frobenius);
        rep.min_lambda_min = std::min(rep.min_lambda_min, s.lambda_min);
    }
    return rep;
}

void save_report_json(const DecayReport& rep, const std::string& path) {
    nlohmann::json j;
    j["lambda_min_a"] = rep.lambda_S_hat;
    j["lambda_min_AAt"] = rep.lambda_A_hat;
    j["drift_frobenius"] = rep.max_drift;
    j["decay_fit_slope"] = rep.fit_slope;
    j["decay_fit_r2"] = rep.fit_r2;
    j["bound_satisfaction_fraction"] = rep.bound_satisfaction_fraction;
    j["min_lambda_min_along_run"] = rep.min_lambda_min;
    j["monotone"] = rep.monotone;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
}

NtkRunResult run_experiment(const NtkExperiment& exp) {
    Index N = exp.X.rows();
    if (exp.A.rows() != N || exp.A.cols() != N || exp.f.size() != N)
        throw ConfigError("ntk experiment: shape mismatch");
    double gamma = exp.gamma > 0 ? exp.gamma : 1.0 / std::sqrt(double(exp.m));

    NtkRunResult result;
    result.params = nn::init_two_layer_ntk(static_cast<int>(exp.X.cols()),
                                           static_cast<int>(exp.m), exp.r, gamma, exp.seed);

    // loss (1/2N) |A phi - f|^2 expressed through the generic loss context
    std::vector<op::Triplet> trips;
    for (Index i = 0; i < N; ++i)
        for (Index j = 0; j < N; ++j)
            if (exp.A(i, j) != 0.0) trips.push_back({i, j, exp.A(i, j)});
    auto A_op = op::SparseOperator::from_triplets(N, N, std::move(trips));
    nn::LossContext ctx;
    ctx.op = &A_op;
    ctx.f = exp.f;

    nn::TrainConfig cfg;
    cfg.optimizer = nn::Optimizer::GD;
    cfg.gd_adaptive = false;
    cfg.cosine_decay = false;
    cfg.lr0 = exp.lr;
    cfg.iterations = 1;  // stepped manually to interleave Gram snapshots

    MatrixXd G0 = gram_a(result.params, exp.X);
    double lamS = min_eig(G0);
    double lamA = min_eig(exp.A * exp.A.transpose());

    result.history.lr.reserve(exp.iterations);
    result.history.loss.reserve(exp.iterations);
    for (Index t = 0; t < exp.iterations; ++t) {
        double loss = nn::loss_value(result.params, exp.X, ctx);
        result.history.loss.push_back(loss);
        result.history.lr.push_back(exp.lr);
        if (t % exp.snapshot_every == 0) {
            MatrixXd G = gram_a(result.params, exp.X);
            result.snapshots.push_back({t, (G - G0).norm(), min_eig(G)});
        }
        VectorXd grad = nn::loss_gradient(result.params, exp.X, ctx);
        result.params.theta -= exp.lr * grad;
    }
    result.report = verify_decay(result.history, exp.lr, exp.m, lamS, lamA, N, result.snapshots);
    return result;
}

}  // namespace mpde::ntk
