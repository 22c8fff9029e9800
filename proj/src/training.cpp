#include "mpde/training.hpp"

#include <cmath>
#include <fstream>

namespace mpde::nn {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

void check_ctx(const LossContext& ctx) {
    if (ctx.op == nullptr) throw ConfigError("loss: missing operator");
    if (ctx.f.size() != ctx.op->n_rows) throw ConfigError("loss: f length mismatch");
    if (ctx.a.size() != 0 && ctx.a.size() != ctx.op->n_rows)
        throw ConfigError("loss: a length mismatch");
    if (ctx.g.has_value() &&
        ctx.g->size() != static_cast<Index>(ctx.boundary_index.size()))
        throw ConfigError("loss: boundary value length mismatch");
    if (ctx.gamma < 0 || ctx.lambda < 0) throw ConfigError("loss: negative penalty");
}

// residual r = (-a + L) phi - f over the given rows
VectorXd residual_rows(const LossContext& ctx, const VectorXd& phi,
                       const std::vector<Index>& rows) {
    VectorXd r = ctx.op->apply_row_subset(rows, phi);
    for (std::size_t s = 0; s < rows.size(); ++s) {
        Index row = rows[s];
        double av = ctx.a.size() ? ctx.a[row] : 0.0;
        r[static_cast<Index>(s)] -= av * phi[row] + ctx.f[row];
    }
    return r;
}

std::vector<Index> all_rows(Index n) {
    std::vector<Index> rows(n);
    for (Index i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

}  // namespace

double loss_value(const NetworkParams& params, const MatrixXd& X, const LossContext& ctx,
                  const std::vector<Index>* row_subset) {
    check_ctx(ctx);
    VectorXd phi = batch_forward(params, X);
    std::vector<Index> rows = row_subset ? *row_subset : all_rows(ctx.op->n_rows);
    VectorXd r = residual_rows(ctx, phi, rows);
    double loss = 0.5 * r.squaredNorm() / double(rows.size());
    if (ctx.gamma > 0) loss += 0.5 * ctx.gamma * phi.squaredNorm() / double(phi.size());
    if (ctx.g.has_value() && ctx.lambda > 0) {
        double acc = 0.0;
        for (std::size_t s = 0; s < ctx.boundary_index.size(); ++s) {
            double diff = phi[ctx.boundary_index[s]] - (*ctx.g)[static_cast<Index>(s)];
            acc += diff * diff;
        }
        loss += 0.5 * ctx.lambda * acc / double(ctx.boundary_index.size());
    }
    if (!std::isfinite(loss)) throw NumericalError("non-finite loss");
    return loss;
}

namespace {

void loss_gradient_ws(const NetworkParams& params, const MatrixXd& X, const LossContext& ctx,
                      const std::vector<Index>* row_subset, double* loss_out,
                      ForwardCache& cache, VectorXd& grad) {
    check_ctx(ctx);
    batch_forward_cached(params, X, cache);
    const VectorXd& phi = cache.phi;
    std::vector<Index> rows = row_subset ? *row_subset : all_rows(ctx.op->n_rows);
    VectorXd r = residual_rows(ctx, phi, rows);
    if (loss_out) {
        double loss = 0.5 * r.squaredNorm() / double(rows.size());
        if (ctx.gamma > 0) loss += 0.5 * ctx.gamma * phi.squaredNorm() / double(phi.size());
        if (ctx.g.has_value() && ctx.lambda > 0) {
            double acc = 0.0;
            for (std::size_t s = 0; s < ctx.boundary_index.size(); ++s) {
                double diff = phi[ctx.boundary_index[s]] - (*ctx.g)[static_cast<Index>(s)];
                acc += diff * diff;
            }
            loss += 0.5 * ctx.lambda * acc / double(ctx.boundary_index.size());
        }
        if (!std::isfinite(loss)) throw NumericalError("non-finite loss");
        *loss_out = loss;
    }
    // dLoss/dphi
    VectorXd v = VectorXd::Zero(phi.size());
    ctx.op->apply_transpose_rows(rows, r, v);
    for (std::size_t s = 0; s < rows.size(); ++s) {
        Index row = rows[s];
        double av = ctx.a.size() ? ctx.a[row] : 0.0;
        if (av != 0.0) v[row] -= av * r[static_cast<Index>(s)];
    }
    v /= double(rows.size());
    if (ctx.gamma > 0) v += (ctx.gamma / double(phi.size())) * phi;
    if (ctx.g.has_value() && ctx.lambda > 0) {
        double scale = ctx.lambda / double(ctx.boundary_index.size());
        for (std::size_t s = 0; s < ctx.boundary_index.size(); ++s) {
            Index b = ctx.boundary_index[s];
            v[b] += scale * (phi[b] - (*ctx.g)[static_cast<Index>(s)]);
        }
    }
    backward(params, X, cache, v, grad);
}

}  // namespace

VectorXd loss_gradient(const NetworkParams& params, const MatrixXd& X, const LossContext& ctx,
                       const std::vector<Index>* row_subset, double* loss_out) {
    ForwardCache cache;
    VectorXd grad;
    loss_gradient_ws(params, X, ctx, row_subset, loss_out, cache, grad);
    return grad;
}

TrainingHistory train(NetworkParams& params, const MatrixXd& X, const LossContext& ctx,
                      const TrainConfig& cfg) {
    check_ctx(ctx);
    if (cfg.lr0 <= 0 || cfg.iterations < 1) throw ConfigError("train: bad config");
    if (cfg.batch_rows > ctx.op->n_rows) throw ConfigError("train: batch_rows exceeds rows");

    TrainingHistory hist;
    Index total_iters = cfg.iterations * std::max<Index>(1, cfg.repeats);
    hist.loss.reserve(total_iters);
    hist.lr.reserve(total_iters);

    VectorXd adam_m, adam_v;
    if (cfg.optimizer == Optimizer::Adam) {
        adam_m = VectorXd::Zero(params.theta.size());
        adam_v = VectorXd::Zero(params.theta.size());
    }
    Rng row_rng(cfg.seed, "row_subsample");
    double lr = cfg.lr0;
    double prev_loss = std::numeric_limits<double>::infinity();
    VectorXd prev_theta;
    Index adam_t = 0;
    ForwardCache ws;
    VectorXd grad;

    Index repeats = cfg.batch_rows > 0 ? std::max<Index>(1, cfg.repeats) : 1;
    Index global_T = cfg.iterations * repeats;
    Index global_it = 0;

    for (Index rep = 0; rep < repeats; ++rep) {
        std::vector<Index> subset;
        const std::vector<Index>* rows = nullptr;
        if (cfg.batch_rows > 0) {
            subset = row_rng.sample_without_replacement(ctx.op->n_rows, cfg.batch_rows);
            rows = &subset;
        }
        for (Index it = 0; it < cfg.iterations; ++it, ++global_it) {
            if (cfg.optimizer == Optimizer::Adam && cfg.cosine_decay)
                lr = cfg.lr0 * 0.5 * (std::cos(kPi * double(global_it) / double(global_T)) + 1.0);

            double loss;
            loss_gradient_ws(params, X, ctx, rows, &loss, ws, grad);
            if (!std::isfinite(loss) || loss > cfg.divergence_limit)
                throw TrainingDivergence("training diverged at iteration " + std::to_string(global_it),
                                         hist);
            if (cfg.optimizer == Optimizer::GD && cfg.gd_adaptive && prev_theta.size() &&
                loss > prev_loss) {
                // step was too long: restore and halve
                params.theta = prev_theta;
                lr *= 0.5;
                if (lr < 1e-18) throw NumericalError("gradient descent stalled");
                loss = prev_loss;
                loss_gradient_ws(params, X, ctx, rows, nullptr, ws, grad);
            }
            hist.loss.push_back(loss);
            hist.lr.push_back(lr);
            if (cfg.optimizer == Optimizer::GD) {
                if (cfg.gd_adaptive) {
                    prev_theta = params.theta;
                    prev_loss = loss;
                }
                params.theta -= lr * grad;
            } else {
                ++adam_t;
                adam_m.array() =
                    cfg.adam_beta1 * adam_m.array() + (1.0 - cfg.adam_beta1) * grad.array();
                adam_v.array() = cfg.adam_beta2 * adam_v.array() +
                                 (1.0 - cfg.adam_beta2) * grad.array().square();
                double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(adam_t));
                double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(adam_t));
                params.theta.array() -= lr * (adam_m.array() / bc1) /
                                        ((adam_v.array() / bc2).sqrt() + cfg.adam_eps);
            }
        }
        hist.checkpoint_iter.push_back(global_it - 1);
        hist.full_loss_checkpoint.push_back(loss_value(params, X, ctx, nullptr));
    }
    return hist;
}

void save_history_csv(const TrainingHistory& hist, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "iter,lr,loss,full_loss_checkpoint\n";
    std::size_t cp = 0;
    for (std::size_t i = 0; i < hist.loss.size(); ++i) {
        out << i << "," << fmt17(hist.lr[i]) << "," << fmt17(hist.loss[i]) << ",";
        if (cp < hist.checkpoint_iter.size() &&
            hist.checkpoint_iter[cp] == static_cast<Index>(i)) {
            out << fmt17(hist.full_loss_checkpoint[cp]);
            ++cp;
        }
        out << "\n";
    }
}

}  // namespace mpde::nn
