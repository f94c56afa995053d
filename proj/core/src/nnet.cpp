#include "cotdre/nnet.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace cotdre {

using json = nlohmann::json;

namespace {

double apply_act(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::LeakyRelu: return x > 0.0 ? x : 0.01 * x;
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

ad::Var apply_act(Activation a, ad::Var x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return relu(x);
    case Activation::LeakyRelu: return leaky_relu(x, 0.01);
    case Activation::Tanh: return tanh(x);
  }
  return x;
}

std::string act_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Activation act_from_name(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "leaky_relu") return Activation::LeakyRelu;
  if (s == "tanh") return Activation::Tanh;
  throw ParameterError("nnet: unknown activation '" + s + "'");
}

int packed_param_count(const std::vector<int>& sizes) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

}  // namespace

DenseNet::DenseNet(std::vector<int> layer_sizes,
                   std::vector<Activation> activations,
                   std::optional<std::array<double, 2>> clamp_bounds)
    : sizes_(std::move(layer_sizes)), acts_(std::move(activations)),
      clamp_(clamp_bounds) {
  if (sizes_.size() < 2) throw DimensionError("DenseNet: need >= 2 layer sizes");
  for (int s : sizes_)
    if (s < 1) throw DimensionError("DenseNet: layer sizes must be >= 1");
  if (acts_.size() != sizes_.size() - 1)
    throw DimensionError("DenseNet: one activation per layer required");
  if (clamp_ && !((*clamp_)[0] <= (*clamp_)[1]))
    throw ParameterError("DenseNet: clamp bounds must satisfy low <= high");
  params_.assign(packed_param_count(sizes_), 0.0);
}

DenseNet DenseNet::random(std::vector<int> layer_sizes,
                          std::vector<Activation> activations, CounterRng& rng,
                          std::optional<std::array<double, 2>> clamp_bounds) {
  DenseNet net(std::move(layer_sizes), std::move(activations), clamp_bounds);
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
    const int count = net.sizes_[l] * net.sizes_[l + 1] + net.sizes_[l + 1];
    for (int k = 0; k < count; ++k)
      net.params_[p++] = rng.uniform(-bound, bound);
  }
  if (net.clamp_) clamp_params(net, (*net.clamp_)[0], (*net.clamp_)[1]);
  return net;
}

std::vector<double> DenseNet::forward(std::span<const double> input) const {
  if (input.size() != static_cast<std::size_t>(sizes_.front()))
    throw DimensionError("DenseNet::forward: input dim mismatch");
  std::vector<double> cur(input.begin(), input.end());
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    std::vector<double> next(out);
    for (int o = 0; o < out; ++o) {
      double s = 0.0;
      for (int i = 0; i < in; ++i) s += params_[p + o * in + i] * cur[i];
      s += params_[p + in * out + o];
      next[o] = apply_act(acts_[l], s);
    }
    p += static_cast<std::size_t>(in) * out + out;
    cur = std::move(next);
  }
  return cur;
}

std::vector<ad::Var> DenseNet::forward_tape(
    ad::Tape& tape, std::span<const ad::Var> input,
    std::span<const int> param_leaves) const {
  if (input.size() != static_cast<std::size_t>(sizes_.front()))
    throw DimensionError("DenseNet::forward_tape: input dim mismatch");
  if (!param_leaves.empty() &&
      param_leaves.size() != static_cast<std::size_t>(param_count()))
    throw DimensionError("DenseNet::forward_tape: param leaves mismatch");

  std::vector<ad::Var> cur(input.begin(), input.end());
  std::size_t p = 0;
  std::vector<int> ids;
  std::vector<double> coefs;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    std::vector<ad::Var> next(out);
    for (int o = 0; o < out; ++o) {
      ad::Var pre;
      if (param_leaves.empty()) {
        // Constant parameters: one fused lincomb over the inputs.
        ids.clear();
        coefs.clear();
        for (int i = 0; i < in; ++i) {
          ids.push_back(cur[i].id);
          coefs.push_back(params_[p + o * in + i]);
        }
        pre = wrap(tape, tape.lincomb(ids, coefs, params_[p + in * out + o]));
      } else {
        // Differentiable parameters: explicit products.
        ad::Var s = wrap(tape, param_leaves[p + in * out + o]);
        for (int i = 0; i < in; ++i)
          s = s + wrap(tape, param_leaves[p + o * in + i]) * cur[i];
        pre = s;
      }
      next[o] = apply_act(acts_[l], pre);
    }
    p += static_cast<std::size_t>(in) * out + out;
    cur = std::move(next);
  }
  return cur;
}

std::vector<ad::Var> DenseNet::forward_tape(ad::Tape& tape,
                                            std::span<const ad::Var> input) const {
  return forward_tape(tape, input, {});
}

std::string DenseNet::to_json_string() const {
  json j;
  j["layer_sizes"] = sizes_;
  std::vector<std::string> acts;
  for (auto a : acts_) acts.push_back(act_name(a));
  j["activations"] = acts;
  j["params"] = params_;
  if (clamp_) j["clamp"] = *clamp_;
  return j.dump();
}

DenseNet DenseNet::from_json_string(const std::string& text) {
  json j = json::parse(text);
  std::vector<Activation> acts;
  for (const auto& s : j.at("activations"))
    acts.push_back(act_from_name(s.get<std::string>()));
  std::optional<std::array<double, 2>> clamp;
  if (j.contains("clamp")) clamp = j.at("clamp").get<std::array<double, 2>>();
  DenseNet net(j.at("layer_sizes").get<std::vector<int>>(), std::move(acts),
               clamp);
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != static_cast<std::size_t>(net.param_count()))
    throw IoError("DenseNet: checkpoint parameter count mismatch");
  net.params_ = std::move(params);
  return net;
}

ForwardBackwardResult forward_backward(const DenseNet& net,
                                       std::span<const double> input,
                                       std::span<const double> seeds) {
  ad::Tape tape;
  std::vector<ad::Var> in_vars;
  in_vars.reserve(input.size());
  for (double v : input) in_vars.push_back(lift(tape, v));
  std::vector<int> leaves(net.param_count());
  for (int k = 0; k < net.param_count(); ++k)
    leaves[k] = tape.leaf(net.params()[k]);
  const auto out_vars = net.forward_tape(tape, in_vars, leaves);

  std::vector<int> roots;
  std::vector<double> seed_vals;
  for (std::size_t k = 0; k < out_vars.size(); ++k) {
    roots.push_back(out_vars[k].id);
    seed_vals.push_back(seeds.empty() ? 1.0 : seeds[k]);
  }
  tape.backward(roots, seed_vals);

  ForwardBackwardResult res;
  for (const auto& v : out_vars) res.outputs.push_back(v.value());
  for (int leaf : leaves) res.param_grad.push_back(tape.adjoint(leaf));
  for (const auto& v : in_vars) res.input_grad.push_back(tape.adjoint(v.id));
  return res;
}

void clamp_params(DenseNet& net, double low, double high) {
  if (low > high) throw ParameterError("clamp_params: low > high");
  for (double& p : net.mutable_params()) p = std::clamp(p, low, high);
}

TestFunctionFamily TestFunctionFamily::make(int L, int T, int d, int hidden,
                                            std::array<double, 2> clamp_bounds,
                                            CounterRng& rng) {
  if (L < 0) throw ParameterError("TestFunctionFamily: L must be >= 0");
  if (T < 2 && L > 0)
    throw ParameterError("TestFunctionFamily: T must be >= 2 when L > 0");
  TestFunctionFamily fam;
  fam.L_ = L;
  fam.T_ = T;
  fam.d_ = d;
  fam.clamp_ = clamp_bounds;
  for (int l = 0; l < L; ++l) {
    for (int t = 1; t <= T - 1; ++t)
      fam.h_.push_back(DenseNet::random(
          {t * d, hidden, 1}, {Activation::Tanh, Activation::Identity}, rng,
          clamp_bounds));
    for (int t = 1; t <= T; ++t)
      fam.M_.push_back(DenseNet::random(
          {t * d, hidden, 1}, {Activation::Tanh, Activation::Identity}, rng,
          clamp_bounds));
  }
  return fam;
}

DenseNet& TestFunctionFamily::h(int l, int t) {
  return h_[static_cast<std::size_t>(l) * (T_ - 1) + (t - 1)];
}
const DenseNet& TestFunctionFamily::h(int l, int t) const {
  return h_[static_cast<std::size_t>(l) * (T_ - 1) + (t - 1)];
}
DenseNet& TestFunctionFamily::M(int l, int t) {
  return M_[static_cast<std::size_t>(l) * T_ + (t - 1)];
}
const DenseNet& TestFunctionFamily::M(int l, int t) const {
  return M_[static_cast<std::size_t>(l) * T_ + (t - 1)];
}

void TestFunctionFamily::clamp_all() {
  for (auto& net : h_) clamp_params(net, clamp_[0], clamp_[1]);
  for (auto& net : M_) clamp_params(net, clamp_[0], clamp_[1]);
}

std::string TestFunctionFamily::to_json_string() const {
  json j;
  j["L"] = L_;
  j["T"] = T_;
  j["d"] = d_;
  j["clamp"] = clamp_;
  json hs = json::array(), ms = json::array();
  for (const auto& n : h_) hs.push_back(json::parse(n.to_json_string()));
  for (const auto& n : M_) ms.push_back(json::parse(n.to_json_string()));
  j["h"] = std::move(hs);
  j["M"] = std::move(ms);
  return j.dump();
}

TestFunctionFamily TestFunctionFamily::from_json_string(const std::string& text) {
  json j = json::parse(text);
  TestFunctionFamily fam;
  fam.L_ = j.at("L").get<int>();
  fam.T_ = j.at("T").get<int>();
  fam.d_ = j.at("d").get<int>();
  fam.clamp_ = j.at("clamp").get<std::array<double, 2>>();
  for (const auto& n : j.at("h"))
    fam.h_.push_back(DenseNet::from_json_string(n.dump()));
  for (const auto& n : j.at("M"))
    fam.M_.push_back(DenseNet::from_json_string(n.dump()));
  return fam;
}

double gamma_prime(const TestFunctionFamily& fam, std::span<const double> x,
                   std::span<const double> y) {
  if (fam.empty()) return 0.0;
  const int T = fam.T(), d = fam.d();
  if (x.size() != static_cast<std::size_t>(T) * d ||
      y.size() != static_cast<std::size_t>(T) * d)
    throw DimensionError("gamma_prime: paths must have shape [T][d]");
  double total = 0.0;
  for (int l = 0; l < fam.L(); ++l) {
    // M_{l,t} evaluations reused across increments.
    std::vector<double> mvals(T);
    for (int t = 1; t <= T; ++t)
      mvals[t - 1] =
          fam.M(l, t).forward(x.subspan(0, static_cast<std::size_t>(t) * d))[0];
    for (int t = 1; t <= T - 1; ++t) {
      const double hval =
          fam.h(l, t).forward(y.subspan(0, static_cast<std::size_t>(t) * d))[0];
      total += hval * (mvals[t] - mvals[t - 1]);
    }
  }
  return total;
}

double martingale_penalty(const TestFunctionFamily& fam,
                          const DiscreteMeasure& measure, double eta) {
  if (!(eta > 0.0)) throw ParameterError("martingale_penalty: eta must be > 0");
  if (fam.empty()) return 0.0;
  const PathBatch& xs = measure.support();
  const auto& w = measure.weights();
  const int T = fam.T(), d = fam.d();
  if (xs.num_steps() != T || xs.dim() != d)
    throw DimensionError("martingale_penalty: measure shape mismatch");

  double penalty = 0.0;
  for (int l = 0; l < fam.L(); ++l) {
    // M values per atom and time.
    std::vector<double> mvals(static_cast<std::size_t>(measure.size()) * T);
    for (int n = 0; n < measure.size(); ++n) {
      const auto path = xs.path(n);
      for (int t = 1; t <= T; ++t)
        mvals[static_cast<std::size_t>(n) * T + (t - 1)] =
            fam.M(l, t).forward(path.subspan(0, static_cast<std::size_t>(t) * d))[0];
    }
    // Pooled across-atom variance: weighted variance at each t, averaged.
    double var = 0.0;
    for (int t = 0; t < T; ++t) {
      double mean = 0.0;
      for (int n = 0; n < measure.size(); ++n)
        mean += w[n] * mvals[static_cast<std::size_t>(n) * T + t];
      double v = 0.0;
      for (int n = 0; n < measure.size(); ++n) {
        const double diff = mvals[static_cast<std::size_t>(n) * T + t] - mean;
        v += w[n] * diff * diff;
      }
      var += v;
    }
    var /= T;
    const double denom = std::sqrt(var) + eta;
    for (int t = 0; t < T - 1; ++t) {
      double inc = 0.0;
      for (int n = 0; n < measure.size(); ++n)
        inc += w[n] * (mvals[static_cast<std::size_t>(n) * T + t + 1] -
                       mvals[static_cast<std::size_t>(n) * T + t]);
      penalty += std::abs(inc / denom);
    }
  }
  return penalty / T;
}

GeneratorSpec GeneratorSpec::make(int T, int d, int hidden, double sigma2,
                                  CounterRng& rng) {
  if (sigma2 < 0.0) throw ParameterError("GeneratorSpec: sigma2 must be >= 0");
  GeneratorSpec spec;
  spec.sigma2 = sigma2;
  spec.R = DenseNet::random({T * d, hidden, T * d},
                            {Activation::Tanh, Activation::Identity}, rng);
  return spec;
}

std::vector<double> generate(const GeneratorSpec& spec,
                             std::span<const double> x, int T, int d,
                             CounterRng& rng) {
  if (x.size() != static_cast<std::size_t>(T) * d)
    throw DimensionError("generate: path must have shape [T][d]");
  if (spec.R.input_dim() != T * d || spec.R.output_dim() != T * d)
    throw DimensionError("generate: residual net must map paths to paths");

  std::vector<double> xp(x.begin(), x.end());
  if (spec.sigma2 > 0.0) {
    for (double& v : xp) v += rng.normal(0.0, spec.sigma2);
  }
  // Center over the time axis per dimension.
  std::vector<double> centered(xp.size());
  for (int k = 0; k < d; ++k) {
    double mean = 0.0;
    for (int t = 0; t < T; ++t) mean += xp[static_cast<std::size_t>(t) * d + k];
    mean /= T;
    for (int t = 0; t < T; ++t)
      centered[static_cast<std::size_t>(t) * d + k] =
          xp[static_cast<std::size_t>(t) * d + k] - mean;
  }
  const auto r = spec.R.forward(centered);
  std::vector<double> y(xp.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xp[i] + r[i];
  return y;
}

void MomentumSchedule::step(std::span<double> params,
                            std::span<const double> grads, long iter) {
  if (params.size() != grads.size())
    throw DimensionError("momentum: params/grads mismatch");
  if (v.size() != params.size()) v.assign(params.size(), 0.0);
  const double denom = denom_slope * static_cast<double>(iter) + denom_base;
  for (std::size_t k = 0; k < params.size(); ++k) {
    v[k] = momentum * v[k] - grads[k] / denom;
    params[k] += v[k];
  }
}

void SgdSchedule::step(std::span<double> params, std::span<const double> grads,
                       long iter) {
  if (params.size() != grads.size())
    throw DimensionError("sgd: params/grads mismatch");
  double scale = step0 / (static_cast<double>(iter) + 1.0);
  if (normalize) {
    double norm = 0.0;
    for (double g : grads) norm += g * g;
    norm = std::sqrt(norm);
    if (norm > 0.0) scale /= norm;
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k] += scale * grads[k];
}

void optimizer_step(OptimizerState& state, std::span<double> params,
                    std::span<const double> grads, long iter) {
  std::visit(
      [&](auto& opt) {
        using T = std::decay_t<decltype(opt)>;
        if constexpr (std::is_same_v<T, AdamOptimizer>)
          opt.step(params, grads);
        else
          opt.step(params, grads, iter);
      },
      state);
}

void AdamOptimizer::step(std::span<double> params,
                         std::span<const double> grads) {
  if (params.size() != grads.size())
    throw DimensionError("adam: params/grads mismatch");
  if (m.size() != params.size()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
    t = 0;
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m[k] = beta1 * m[k] + (1.0 - beta1) * grads[k];
    v[k] = beta2 * v[k] + (1.0 - beta2) * grads[k] * grads[k];
    const double mhat = m[k] / bc1;
    const double vhat = v[k] / bc2;
    params[k] -= lr * mhat / (std::sqrt(vhat) + epsilon);
  }
}

}  // namespace cotdre
