#pragma once

#include <string>
#include <vector>

#include "mpde/common.hpp"

namespace mpde::nn {

enum class ActivationKind { ReLU, ReLUPow, PolynomialSine };

struct Activation {
    ActivationKind kind = ActivationKind::PolynomialSine;
    int power = 1;  // r for ReLUPow

    static Activation relu() { return {ActivationKind::ReLU, 1}; }
    static Activation relu_pow(int r) { return {ActivationKind::ReLUPow, r}; }
    static Activation polynomial_sine() { return {ActivationKind::PolynomialSine, 1}; }
};

Activation activation_from_string(const std::string& name);
std::string to_string(const Activation& act);

struct Architecture {
    int input_dim = 0;
    int width = 0;   // uniform hidden width m
    int depth = 1;   // hidden layer count L
    Activation activation;
    bool biases = true;           // two-layer NTK networks carry none
    bool trainable_coeffs = false;  // PolynomialSine coefficient training

    Index coeff_count_per_layer() const { return trainable_coeffs ? 4 : 0; }
    Index param_count() const;
};

// All parameters live in one flat vector; the layout methods expose Eigen
// maps into it, so optimizers and finite-difference checks treat the network
// as theta in R^P.
struct NetworkParams {
    Architecture arch;
    VectorXd theta;
    std::uint64_t init_seed = 0;
    double init_gamma = 0.0;  // output-scale of the two-layer NTK init

    Index weight_offset(int layer) const;   // W_l: width x fan_in(layer)
    Index bias_offset(int layer) const;     // b_l: width
    Index coeff_offset(int layer) const;    // (beta1, alpha1, alpha2, alpha3)
    Index output_offset() const;            // a: width
    Index fan_in(int layer) const { return layer == 0 ? arch.input_dim : arch.width; }

    Eigen::Map<MatrixXd> weights(int layer);
    Eigen::Map<const MatrixXd> weights(int layer) const;
    Eigen::Map<VectorXd> bias(int layer);
    Eigen::Map<const VectorXd> bias(int layer) const;
    Eigen::Map<VectorXd> coeffs(int layer);
    Eigen::Map<const VectorXd> coeffs(int layer) const;
    Eigen::Map<VectorXd> output_weights();
    Eigen::Map<const VectorXd> output_weights() const;
};

// He-style init for deep networks; activation-dependent gain keeps layer
// variances near one (sqrt(2) for ReLU, (2/(2r-1)!!)^{1/2r} for ReLU^r,
// 1 for PolynomialSine). Output weights ~ N(0, 1/m). PolynomialSine
// coefficients beta1, alpha1 ~ N(1, 0.01); alpha2, alpha3 ~ N(0, 0.01).
NetworkParams init_deep(const Architecture& arch, std::uint64_t seed);

// phi(x) = sum_k a_k sigma(w_k^T x) with a ~ N(0, gamma^2), w ~ N(0, I_n).
NetworkParams init_two_layer_ntk(int n, int m, int r, double gamma, std::uint64_t seed);

double forward(const NetworkParams& params, const VectorXd& x);
VectorXd batch_forward(const NetworkParams& params, const MatrixXd& X);

// Forward pass with cached pre-activations for reverse mode. PolynomialSine
// layers also keep sin/cos of the scaled pre-activations so the backward pass
// never re-evaluates trig. Reusing one cache across calls avoids reallocating
// the layer buffers, which dominates the cost at benchmark sizes.
struct ForwardCache {
    std::vector<MatrixXd> Z;  // pre-activations per hidden layer, N x m
    std::vector<MatrixXd> H;  // activations per hidden layer, N x m
    std::vector<MatrixXd> sinZ, cosZ;
    VectorXd phi;
    MatrixXd U, delta;  // reverse-mode scratch
};

void batch_forward_cached(const NetworkParams& params, const MatrixXd& X, ForwardCache& cache);
ForwardCache batch_forward_cached(const NetworkParams& params, const MatrixXd& X);

// Gradient of cotangent^T phi(X) with respect to theta; the in-place form
// reuses the cache scratch and the gradient buffer.
void backward(const NetworkParams& params, const MatrixXd& X, ForwardCache& cache,
              const VectorXd& cotangent, VectorXd& grad);
VectorXd backward(const NetworkParams& params, const MatrixXd& X, const ForwardCache& cache,
                  const VectorXd& cotangent);

void save_params_json(const NetworkParams& params, const std::string& path);
NetworkParams load_params_json(const std::string& path);

}  // namespace mpde::nn
