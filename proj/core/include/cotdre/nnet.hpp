#pragma once

#include <array>
#include <optional>
#include <span>
#include <variant>
#include <string>
#include <vector>

#include "cotdre/autodiff.hpp"
#include "cotdre/measures.hpp"
#include "cotdre/rng.hpp"

namespace cotdre {

enum class Activation { Identity, Relu, LeakyRelu, Tanh };

// Fully connected network with per-layer activations. Parameters are packed
// layer by layer (row-major weights, then biases); the same packing is used
// by optimizers, gradients, clamping, and serialization.
class DenseNet {
public:
  DenseNet() = default;
  DenseNet(std::vector<int> layer_sizes, std::vector<Activation> activations,
           std::optional<std::array<double, 2>> clamp_bounds = std::nullopt);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases.
  static DenseNet random(std::vector<int> layer_sizes,
                         std::vector<Activation> activations, CounterRng& rng,
                         std::optional<std::array<double, 2>> clamp_bounds =
                             std::nullopt);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int param_count() const { return static_cast<int>(params_.size()); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return acts_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  const std::optional<std::array<double, 2>>& clamp_bounds() const {
    return clamp_;
  }
  void set_clamp_bounds(std::optional<std::array<double, 2>> b) { clamp_ = b; }

  std::vector<double> forward(std::span<const double> input) const;

  // Forward with network parameters taken from tape leaves (one per packed
  // parameter, same order as params()). Used when gradients w.r.t. the
  // parameters are needed.
  std::vector<ad::Var> forward_tape(ad::Tape& tape,
                                    std::span<const ad::Var> input,
                                    std::span<const int> param_leaves) const;
  // Forward with constant parameters; only the inputs are differentiable.
  std::vector<ad::Var> forward_tape(ad::Tape& tape,
                                    std::span<const ad::Var> input) const;

  std::string to_json_string() const;
  static DenseNet from_json_string(const std::string& text);

  bool operator==(const DenseNet& other) const = default;

private:
  std::vector<int> sizes_;
  std::vector<Activation> acts_;
  std::vector<double> params_;
  std::optional<std::array<double, 2>> clamp_;
};

struct ForwardBackwardResult {
  std::vector<double> outputs;
  std::vector<double> param_grad;  // d(seed . outputs)/d params
  std::vector<double> input_grad;  // d(seed . outputs)/d input
};

// Vector-Jacobian product through one forward pass; seeds default to all
// ones (the plain gradient for scalar-output nets).
ForwardBackwardResult forward_backward(const DenseNet& net,
                                       std::span<const double> input,
                                       std::span<const double> seeds = {});

// Project every parameter into [low, high]. Idempotent.
void clamp_params(DenseNet& net, double low, double high);

// Adapted test-function family: for l in [L], h_{l,t} consumes y_{1:t}
// (t = 1..T-1) and M_{l,t} consumes x_{1:t} (t = 1..T). Inputs are sliced
// prefixes, so the functions structurally cannot read past time t.
class TestFunctionFamily {
public:
  TestFunctionFamily() = default;

  static TestFunctionFamily make(int L, int T, int d, int hidden,
                                 std::array<double, 2> clamp_bounds,
                                 CounterRng& rng);

  int L() const { return L_; }
  int T() const { return T_; }
  int d() const { return d_; }
  bool empty() const { return L_ == 0; }

  DenseNet& h(int l, int t);              // t in 1..T-1
  const DenseNet& h(int l, int t) const;
  DenseNet& M(int l, int t);              // t in 1..T
  const DenseNet& M(int l, int t) const;

  std::vector<DenseNet>& h_nets() { return h_; }
  std::vector<DenseNet>& M_nets() { return M_; }
  const std::vector<DenseNet>& h_nets() const { return h_; }
  const std::vector<DenseNet>& M_nets() const { return M_; }

  void clamp_all();

  std::string to_json_string() const;
  static TestFunctionFamily from_json_string(const std::string& text);

private:
  int L_ = 0, T_ = 0, d_ = 0;
  std::array<double, 2> clamp_{-50.0, 50.0};
  std::vector<DenseNet> h_;  // index l*(T-1) + (t-1)
  std::vector<DenseNet> M_;  // index l*T + (t-1)
};

// gamma'(x, y) = sum_l sum_{t=1}^{T-1} h_{l,t}(y_{1:t}) [M_{l,t+1}(x_{1:t+1})
// - M_{l,t}(x_{1:t})]. Empty family evaluates to 0.
double gamma_prime(const TestFunctionFamily& fam, std::span<const double> x,
                   std::span<const double> y);

// Martingale penalty on a discrete measure:
//   (1/T) sum_l sum_{t=1}^{T-1} | sum_n w_n dM_{l,t}(x_n) | / (sqrt(Var_l)+eta)
// Var_l is the pooled across-atom variance of M_l (per-time variances under
// the atom weights, averaged over t in [T]).
double martingale_penalty(const TestFunctionFamily& fam,
                          const DiscreteMeasure& measure, double eta);

// Scenario generator: y = x' + R(x' - mean(x')) with x' = x + z,
// z iid Gaussian(0, sigma2) per coordinate, mean over the time axis per dim.
struct GeneratorSpec {
  double sigma2 = 0.0;
  DenseNet R;  // input and output dim both T*d

  static GeneratorSpec make(int T, int d, int hidden, double sigma2,
                            CounterRng& rng);
};

std::vector<double> generate(const GeneratorSpec& spec,
                             std::span<const double> x, int T, int d,
                             CounterRng& rng);

// --- Optimizers -----------------------------------------------------------

// v <- momentum*v - grad/(denom_slope*iter + denom_base); param += v.
// Descent direction is built into the velocity rule.
struct MomentumSchedule {
  double momentum = 0.9;
  double denom_slope = 0.1;
  double denom_base = 10.0;
  std::vector<double> v;

  void step(std::span<double> params, std::span<const double> grads, long iter);
};

// Ascent step param += step0/(iter+1) * grad (optionally normalized by the
// gradient's euclidean norm).
struct SgdSchedule {
  double step0 = 50.0;
  bool normalize = false;

  void step(std::span<double> params, std::span<const double> grads, long iter);
};

// Adam with bias correction; minimizes (pass the gradient of the loss).
struct AdamOptimizer {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long t = 0;
  std::vector<double> m, v;

  void step(std::span<double> params, std::span<const double> grads);
};

using OptimizerState =
    std::variant<MomentumSchedule, AdamOptimizer, SgdSchedule>;

// Single-call dispatch over the three update rules.
void optimizer_step(OptimizerState& state, std::span<double> params,
                    std::span<const double> grads, long iter);

}  // namespace cotdre
