#include "cotdre/autodiff.hpp"

#include <cmath>

namespace cotdre::ad {

int Tape::push(Node n) {
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(double value) {
  return push(Node{Op::Leaf, -1, -1, 0.0, value, 0.0});
}

int Tape::add(int a, int b) {
  check(a);
  check(b);
  return push(Node{Op::Add, a, b, 0.0, nodes_[a].val + nodes_[b].val, 0.0});
}

int Tape::mul(int a, int b) {
  check(a);
  check(b);
  return push(Node{Op::Mul, a, b, 0.0, nodes_[a].val * nodes_[b].val, 0.0});
}

int Tape::neg(int a) {
  check(a);
  return push(Node{Op::Neg, a, -1, 0.0, -nodes_[a].val, 0.0});
}

int Tape::max(int a, int b) {
  check(a);
  check(b);
  return push(Node{Op::Max, a, b, 0.0, std::max(nodes_[a].val, nodes_[b].val), 0.0});
}

int Tape::exp_(int a) {
  check(a);
  return push(Node{Op::Exp, a, -1, 0.0, std::exp(nodes_[a].val), 0.0});
}

int Tape::ln(int a) {
  check(a);
  if (!(nodes_[a].val > 0.0))
    throw NumericError("autodiff: ln of non-positive value");
  return push(Node{Op::Ln, a, -1, 0.0, std::log(nodes_[a].val), 0.0});
}

int Tape::tanh_(int a) {
  check(a);
  return push(Node{Op::Tanh, a, -1, 0.0, std::tanh(nodes_[a].val), 0.0});
}

int Tape::relu(int a) {
  check(a);
  const double v = nodes_[a].val;
  return push(Node{Op::Relu, a, -1, 0.0, v > 0.0 ? v : 0.0, 0.0});
}

int Tape::leaky_relu(int a, double slope) {
  check(a);
  const double v = nodes_[a].val;
  return push(Node{Op::LeakyRelu, a, -1, slope, v > 0.0 ? v : slope * v, 0.0});
}

int Tape::sqrt_(int a) {
  check(a);
  if (nodes_[a].val < 0.0)
    throw NumericError("autodiff: sqrt of negative value");
  return push(Node{Op::Sqrt, a, -1, 0.0, std::sqrt(nodes_[a].val), 0.0});
}

int Tape::div(int a, int b) {
  check(a);
  check(b);
  if (nodes_[b].val == 0.0) throw NumericError("autodiff: division by zero");
  return push(Node{Op::Div, a, b, 0.0, nodes_[a].val / nodes_[b].val, 0.0});
}

int Tape::lincomb(std::span<const int> parents, std::span<const double> coefs,
                  double c0) {
  if (parents.size() != coefs.size())
    throw DimensionError("autodiff: lincomb parents/coefs mismatch");
  double v = c0;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    check(parents[k]);
    v += coefs[k] * nodes_[parents[k]].val;
  }
  const int ofs = static_cast<int>(lc_args_.size());
  lc_args_.insert(lc_args_.end(), parents.begin(), parents.end());
  lc_coefs_.insert(lc_coefs_.end(), coefs.begin(), coefs.end());
  return push(Node{Op::Lincomb, ofs, static_cast<int>(parents.size()), c0, v, 0.0});
}

void Tape::reset_adjoints() {
  for (auto& n : nodes_) n.adj = 0.0;
}

void Tape::backward(int root) {
  const double one = 1.0;
  backward({&root, 1}, {&one, 1});
}

void Tape::backward(std::span<const int> roots, std::span<const double> seeds) {
  if (roots.size() != seeds.size())
    throw DimensionError("autodiff: roots/seeds mismatch");
  for (std::size_t k = 0; k < roots.size(); ++k) {
    check(roots[k]);
    nodes_[roots[k]].adj += seeds[k];
  }
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    const double g = n.adj;
    if (g == 0.0) continue;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        nodes_[n.a].adj += g;
        nodes_[n.b].adj += g;
        break;
      case Op::Mul:
        nodes_[n.a].adj += g * nodes_[n.b].val;
        nodes_[n.b].adj += g * nodes_[n.a].val;
        break;
      case Op::Neg:
        nodes_[n.a].adj -= g;
        break;
      case Op::Max:
        // Ties route through the first operand.
        if (nodes_[n.a].val >= nodes_[n.b].val)
          nodes_[n.a].adj += g;
        else
          nodes_[n.b].adj += g;
        break;
      case Op::Exp:
        nodes_[n.a].adj += g * n.val;
        break;
      case Op::Ln:
        nodes_[n.a].adj += g / nodes_[n.a].val;
        break;
      case Op::Tanh:
        nodes_[n.a].adj += g * (1.0 - n.val * n.val);
        break;
      case Op::Relu:
        if (nodes_[n.a].val > 0.0) nodes_[n.a].adj += g;
        break;
      case Op::LeakyRelu:
        nodes_[n.a].adj += g * (nodes_[n.a].val > 0.0 ? 1.0 : n.aux);
        break;
      case Op::Sqrt:
        // Subgradient 0 at the origin keeps variance-style expressions from
        // poisoning the sweep with NaN.
        if (n.val > 0.0) nodes_[n.a].adj += g * 0.5 / n.val;
        break;
      case Op::Div:
        nodes_[n.a].adj += g / nodes_[n.b].val;
        nodes_[n.b].adj -= g * n.val / nodes_[n.b].val;
        break;
      case Op::Lincomb:
        for (int k = 0; k < n.b; ++k)
          nodes_[lc_args_[n.a + k]].adj += g * lc_coefs_[n.a + k];
        break;
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  lc_args_.clear();
  lc_coefs_.clear();
}

}  // namespace cotdre::ad
