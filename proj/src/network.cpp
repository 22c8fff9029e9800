#include "mpde/network.hpp"

#include <cmath>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#else
namespace {
inline int omp_get_thread_num() { return 0; }
inline int omp_get_num_threads() { return 1; }
}  // namespace
#endif

#include "vendor_json.hpp"

namespace mpde::nn {

Activation activation_from_string(const std::string& name) {
    if (name == "ReLU") return Activation::relu();
    if (name == "PolynomialSine") return Activation::polynomial_sine();
    if (name.rfind("ReLUPow", 0) == 0) {
        int r = name.size() > 7 ? std::stoi(name.substr(7)) : 2;
        if (r < 1) throw ConfigError("ReLUPow power must be >= 1");
        return Activation::relu_pow(r);
    }
    throw ConfigError("unknown activation: " + name);
}

std::string to_string(const Activation& act) {
    switch (act.kind) {
        case ActivationKind::ReLU: return "ReLU";
        case ActivationKind::ReLUPow: return "ReLUPow" + std::to_string(act.power);
        case ActivationKind::PolynomialSine: return "PolynomialSine";
    }
    throw ConfigError("bad activation");
}

Index Architecture::param_count() const {
    Index total = 0;
    for (int l = 0; l < depth; ++l) {
        Index fan = l == 0 ? input_dim : width;
        total += Index(width) * fan;
        if (biases) total += width;
        total += coeff_count_per_layer();
    }
    return total + width;  // output weights
}

namespace {
Index layer_block(const Architecture& a, int layer) {
    Index fan = layer == 0 ? a.input_dim : a.width;
    return Index(a.width) * fan + (a.biases ? a.width : 0) + a.coeff_count_per_layer();
}
}  // namespace

Index NetworkParams::weight_offset(int layer) const {
    Index off = 0;
    for (int l = 0; l < layer; ++l) off += layer_block(arch, l);
    return off;
}
Index NetworkParams::bias_offset(int layer) const {
    return weight_offset(layer) + Index(arch.width) * fan_in(layer);
}
Index NetworkParams::coeff_offset(int layer) const {
    return bias_offset(layer) + (arch.biases ? arch.width : 0);
}
Index NetworkParams::output_offset() const { return weight_offset(arch.depth); }

Eigen::Map<MatrixXd> NetworkParams::weights(int layer) {
    return {theta.data() + weight_offset(layer), arch.width, fan_in(layer)};
}
Eigen::Map<const MatrixXd> NetworkParams::weights(int layer) const {
    return {theta.data() + weight_offset(layer), arch.width, fan_in(layer)};
}
Eigen::Map<VectorXd> NetworkParams::bias(int layer) {
    if (!arch.biases) throw ConfigError("network has no biases");
    return {theta.data() + bias_offset(layer), arch.width};
}
Eigen::Map<const VectorXd> NetworkParams::bias(int layer) const {
    if (!arch.biases) throw ConfigError("network has no biases");
    return {theta.data() + bias_offset(layer), arch.width};
}
Eigen::Map<VectorXd> NetworkParams::coeffs(int layer) {
    return {theta.data() + coeff_offset(layer), arch.coeff_count_per_layer()};
}
Eigen::Map<const VectorXd> NetworkParams::coeffs(int layer) const {
    return {theta.data() + coeff_offset(layer), arch.coeff_count_per_layer()};
}
Eigen::Map<VectorXd> NetworkParams::output_weights() {
    return {theta.data() + output_offset(), arch.width};
}
Eigen::Map<const VectorXd> NetworkParams::output_weights() const {
    return {theta.data() + output_offset(), arch.width};
}

namespace {

double he_gain(const Activation& act) {
    switch (act.kind) {
        case ActivationKind::ReLU: return std::sqrt(2.0);
        case ActivationKind::ReLUPow: {
            // (2 / (2r-1)!!)^{1/(2r)} keeps E[sigma(z)^2] near one
            double dfact = 1.0;
            for (int v = 2 * act.power - 1; v > 1; v -= 2) dfact *= v;
            return std::pow(2.0 / dfact, 1.0 / (2.0 * act.power));
        }
        case ActivationKind::PolynomialSine: return 1.0;
    }
    return 1.0;
}

#if defined(__AVX512F__) && defined(__GLIBC__)
#include <immintrin.h>
extern "C" __m512d _ZGVeN8v_sin(__m512d);
extern "C" __m512d _ZGVeN8v_cos(__m512d);
#define MPDE_HAVE_VECTOR_SINCOS 1
#elif defined(__AVX2__) && defined(__GLIBC__)
#include <immintrin.h>
extern "C" __m256d _ZGVdN4v_sin(__m256d);
extern "C" __m256d _ZGVdN4v_cos(__m256d);
#define MPDE_HAVE_VECTOR_SINCOS 1
#endif

// one pass of sin and cos over b*Z; vector math library when available
void sincos_fill(double b, const MatrixXd& Z, MatrixXd& S, MatrixXd& C) {
    S.resize(Z.rows(), Z.cols());
    C.resize(Z.rows(), Z.cols());
    const double* z = Z.data();
    double* s = S.data();
    double* c = C.data();
    const Index n = Z.size();
    Index i = 0;
#if defined(__AVX512F__) && defined(__GLIBC__)
#pragma omp parallel
    {
        int tid = omp_get_thread_num(), nth = omp_get_num_threads();
        Index chunk = ((n + nth - 1) / nth + 7) / 8 * 8;
        Index lo = std::min<Index>(tid * chunk, n), hi = std::min<Index>(lo + chunk, n);
        Index stop = lo + (hi - lo) / 8 * 8;
        __m512d vb = _mm512_set1_pd(b);
        for (Index j = lo; j < stop; j += 8) {
            __m512d a = _mm512_mul_pd(vb, _mm512_loadu_pd(z + j));
            _mm512_storeu_pd(s + j, _ZGVeN8v_sin(a));
            _mm512_storeu_pd(c + j, _ZGVeN8v_cos(a));
        }
        for (Index j = stop; j < hi; ++j) {
            s[j] = std::sin(b * z[j]);
            c[j] = std::cos(b * z[j]);
        }
    }
    i = n;
#elif defined(__AVX2__) && defined(__GLIBC__)
#pragma omp parallel
    {
        int tid = omp_get_thread_num(), nth = omp_get_num_threads();
        Index chunk = ((n + nth - 1) / nth + 3) / 4 * 4;
        Index lo = std::min<Index>(tid * chunk, n), hi = std::min<Index>(lo + chunk, n);
        Index stop = lo + (hi - lo) / 4 * 4;
        __m256d vb = _mm256_set1_pd(b);
        for (Index j = lo; j < stop; j += 4) {
            __m256d a = _mm256_mul_pd(vb, _mm256_loadu_pd(z + j));
            _mm256_storeu_pd(s + j, _ZGVdN4v_sin(a));
            _mm256_storeu_pd(c + j, _ZGVdN4v_cos(a));
        }
        for (Index j = stop; j < hi; ++j) {
            s[j] = std::sin(b * z[j]);
            c[j] = std::cos(b * z[j]);
        }
    }
    i = n;
#endif
    for (; i < n; ++i) {
        s[i] = std::sin(b * z[i]);
        c[i] = std::cos(b * z[i]);
    }
}

}  // namespace

NetworkParams init_deep(const Architecture& arch, std::uint64_t seed) {
    if (arch.width < 1 || arch.depth < 1 || arch.input_dim < 1)
        throw ConfigError("init_deep: bad architecture");
    NetworkParams params;
    params.arch = arch;
    params.init_seed = seed;
    params.theta.resize(arch.param_count());
    Rng rng(seed, "init_deep");
    double gain = he_gain(arch.activation);
    for (int l = 0; l < arch.depth; ++l) {
        auto W = params.weights(l);
        double std_w = gain / std::sqrt(double(params.fan_in(l)));
        for (Index j = 0; j < W.cols(); ++j)
            for (Index i = 0; i < W.rows(); ++i) W(i, j) = rng.normal(0.0, std_w);
        if (arch.biases) params.bias(l).setZero();
        if (arch.trainable_coeffs) {
            auto c = params.coeffs(l);
            c[0] = rng.normal(1.0, 0.1);
            c[1] = rng.normal(1.0, 0.1);
            c[2] = rng.normal(0.0, 0.1);
            c[3] = rng.normal(0.0, 0.1);
        }
    }
    auto a = params.output_weights();
    double std_a = 1.0 / std::sqrt(double(arch.width));
    for (Index i = 0; i < a.size(); ++i) a[i] = rng.normal(0.0, std_a);
    return params;
}

NetworkParams init_two_layer_ntk(int n, int m, int r, double gamma, std::uint64_t seed) {
    if (m < 1) throw ConfigError("init_two_layer_ntk: m must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("init_two_layer_ntk: need 0 < gamma < 1");
    Architecture arch;
    arch.input_dim = n;
    arch.width = m;
    arch.depth = 1;
    arch.activation = Activation::relu_pow(r);
    arch.biases = false;
    arch.trainable_coeffs = false;
    NetworkParams params;
    params.arch = arch;
    params.init_seed = seed;
    params.init_gamma = gamma;
    params.theta.resize(arch.param_count());
    Rng rng(seed, "init_ntk");
    auto W = params.weights(0);
    for (Index j = 0; j < W.cols(); ++j)
        for (Index i = 0; i < W.rows(); ++i) W(i, j) = rng.normal();
    auto a = params.output_weights();
    for (Index i = 0; i < a.size(); ++i) a[i] = rng.normal(0.0, gamma);
    return params;
}

void batch_forward_cached(const NetworkParams& params, const MatrixXd& X, ForwardCache& cache) {
    const auto& arch = params.arch;
    if (X.cols() != arch.input_dim) throw ConfigError("forward: input dimension mismatch");
    cache.Z.resize(arch.depth);
    cache.H.resize(arch.depth);
    const bool ps = arch.activation.kind == ActivationKind::PolynomialSine;
    if (ps) {
        cache.sinZ.resize(arch.depth);
        cache.cosZ.resize(arch.depth);
    }
    const MatrixXd* input = &X;
    static const double kDefaultPs[4] = {1, 1, 0, 0};
    for (int l = 0; l < arch.depth; ++l) {
        cache.Z[l].noalias() = (*input) * params.weights(l).transpose();
        if (arch.biases) cache.Z[l].rowwise() += params.bias(l).transpose();
        const MatrixXd& Z = cache.Z[l];
        switch (arch.activation.kind) {
            case ActivationKind::ReLU:
                cache.H[l] = Z.cwiseMax(0.0);
                break;
            case ActivationKind::ReLUPow: {
                // H = max(Z,0)^r in one fused pass
                cache.H[l].resize(Z.rows(), Z.cols());
                const int r = arch.activation.power;
                const double* zp = Z.data();
                double* hp = cache.H[l].data();
                const Index nn = Z.size();
#pragma omp parallel for schedule(static)
                for (Index e = 0; e < nn; ++e) {
                    double zv = zp[e];
                    if (zv <= 0) {
                        hp[e] = 0.0;
                    } else {
                        double pv = zv;
                        for (int i = 1; i < r; ++i) pv *= zv;
                        hp[e] = pv;
                    }
                }
                break;
            }
            case ActivationKind::PolynomialSine: {
                const double* c = arch.trainable_coeffs ? params.coeffs(l).data() : kDefaultPs;
                sincos_fill(c[0], Z, cache.sinZ[l], cache.cosZ[l]);
                cache.H[l] = (c[1] * cache.sinZ[l].array() + c[2] * Z.array() +
                              c[3] * Z.array().square())
                                 .matrix();
                break;
            }
        }
        input = &cache.H[l];
    }
    cache.phi.noalias() = cache.H[arch.depth - 1] * params.output_weights();
    if (!cache.phi.allFinite()) throw NumericalError("forward pass produced non-finite values");
}

ForwardCache batch_forward_cached(const NetworkParams& params, const MatrixXd& X) {
    ForwardCache cache;
    batch_forward_cached(params, X, cache);
    return cache;
}

VectorXd batch_forward(const NetworkParams& params, const MatrixXd& X) {
    return batch_forward_cached(params, X).phi;
}

VectorXd backward(const NetworkParams& params, const MatrixXd& X, const ForwardCache& cache,
                  const VectorXd& cotangent) {
    ForwardCache scratch = cache;
    VectorXd grad;
    backward(params, X, scratch, cotangent, grad);
    return grad;
}

double forward(const NetworkParams& params, const VectorXd& x) {
    return batch_forward(params, x.transpose())[0];
}

void backward(const NetworkParams& params, const MatrixXd& X, ForwardCache& cache,
              const VectorXd& cotangent, VectorXd& grad) {
    const auto& arch = params.arch;
    grad.resize(params.theta.size());
    static const double kDefaultPs[4] = {1, 1, 0, 0};

    // output layer: d/da = H_L^T v
    Eigen::Map<VectorXd>(grad.data() + params.output_offset(), arch.width).noalias() =
        cache.H[arch.depth - 1].transpose() * cotangent;

    // U = dLoss/dH_l, starts as v a^T
    MatrixXd& U = cache.U;
    MatrixXd& delta = cache.delta;
    U.noalias() = cotangent * params.output_weights().transpose();
    for (int l = arch.depth - 1; l >= 0; --l) {
        const double* c = arch.trainable_coeffs ? params.coeffs(l).data() : kDefaultPs;
        if (arch.activation.kind == ActivationKind::PolynomialSine) {
            const auto& Z = cache.Z[l];
            const auto& sinZ = cache.sinZ[l];
            const auto& cosZ = cache.cosZ[l];
            if (arch.trainable_coeffs) {
                // sums of U .* dsigma/dcoef over all entries in one pass
                double g0 = 0, g1 = 0, g2 = 0, g3 = 0;
                const double* up = U.data();
                const double* zp = Z.data();
                const double* sp = sinZ.data();
                const double* cp = cosZ.data();
                const Index nn = U.size();
#pragma omp parallel for schedule(static) reduction(+ : g0, g1, g2, g3)
                for (Index e = 0; e < nn; ++e) {
                    double u = up[e], zv = zp[e];
                    g0 += u * zv * cp[e];
                    g1 += u * sp[e];
                    g2 += u * zv;
                    g3 += u * zv * zv;
                }
                auto gc = Eigen::Map<VectorXd>(grad.data() + params.coeff_offset(l), 4);
                gc << c[1] * g0, g1, g2, g3;
            }
            // sigma' = beta1 alpha1 cos(beta1 z) + alpha2 + 2 alpha3 z
            delta = U.array() * ((c[1] * c[0]) * cosZ.array() + c[2] + (2.0 * c[3]) * Z.array());
        } else {
            // delta = U .* sigma'(Z) in one fused pass (derivative 0 at z = 0)
            const int r = arch.activation.kind == ActivationKind::ReLU ? 1 : arch.activation.power;
            const auto& Z = cache.Z[l];
            delta.resize(Z.rows(), Z.cols());
            const double* zp = Z.data();
            const double* up = U.data();
            double* dp = delta.data();
            const Index nn = Z.size();
#pragma omp parallel for schedule(static)
            for (Index e = 0; e < nn; ++e) {
                double zv = zp[e];
                if (zv <= 0) {
                    dp[e] = 0.0;
                } else {
                    double pv = double(r);
                    for (int i = 1; i < r; ++i) pv *= zv;
                    dp[e] = up[e] * pv;
                }
            }
        }
        const MatrixXd& input_h = l == 0 ? X : cache.H[l - 1];
        Eigen::Map<MatrixXd>(grad.data() + params.weight_offset(l), arch.width,
                             params.fan_in(l))
            .noalias() = delta.transpose() * input_h;
        if (arch.biases)
            Eigen::Map<VectorXd>(grad.data() + params.bias_offset(l), arch.width).noalias() =
                delta.colwise().sum().transpose();
        if (l > 0) U.noalias() = delta * params.weights(l);
    }
    if (!grad.allFinite()) throw NumericalError("backward pass produced non-finite gradient");
}

void save_params_json(const NetworkParams& params, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["input_dim"] = params.arch.input_dim;
    j["width"] = params.arch.width;
    j["depth"] = params.arch.depth;
    j["activation"] = to_string(params.arch.activation);
    j["biases"] = params.arch.biases;
    j["trainable_coeffs"] = params.arch.trainable_coeffs;
    j["init_seed"] = params.init_seed;
    j["init_gamma"] = params.init_gamma;
    std::vector<std::string> theta;
    theta.reserve(params.theta.size());
    for (Index i = 0; i < params.theta.size(); ++i) theta.push_back(fmt17(params.theta[i]));
    j["theta"] = theta;  // row-major per the offset layout, 17 significant digits
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump() << "\n";
}

NetworkParams load_params_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    nlohmann::json j;
    in >> j;
    NetworkParams params;
    params.arch.input_dim = j.at("input_dim").get<int>();
    params.arch.width = j.at("width").get<int>();
    params.arch.depth = j.at("depth").get<int>();
    params.arch.activation = activation_from_string(j.at("activation").get<std::string>());
    params.arch.biases = j.at("biases").get<bool>();
    params.arch.trainable_coeffs = j.at("trainable_coeffs").get<bool>();
    params.init_seed = j.at("init_seed").get<std::uint64_t>();
    params.init_gamma = j.at("init_gamma").get<double>();
    auto theta = j.at("theta").get<std::vector<std::string>>();
    params.theta.resize(static_cast<Index>(theta.size()));
    for (Index i = 0; i < params.theta.size(); ++i) params.theta[i] = std::stod(theta[i]);
    if (params.theta.size() != params.arch.param_count())
        throw ConfigError("params file does not match architecture");
    return params;
}

}  // namespace mpde::nn
