#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cotdre/errors.hpp"

namespace cotdre::ad {

// Scalar reverse-mode tape. Nodes live in an arena in topological order (an
// operand always precedes its consumer), so one reverse sweep propagates
// adjoints exactly once per node.
class Tape {
public:
  enum class Op : std::uint8_t {
    Leaf,
    Add,
    Mul,
    Neg,
    Max,
    Exp,
    Ln,
    Tanh,
    Relu,
    LeakyRelu,
    Sqrt,
    Div,
    Lincomb,  // c0 + sum_k coef_k * parent_k, fused to keep arenas small
  };

  int leaf(double value);
  int constant(double value) { return leaf(value); }

  int add(int a, int b);
  int mul(int a, int b);
  int neg(int a);
  int max(int a, int b);
  int exp_(int a);
  int ln(int a);
  int tanh_(int a);
  int relu(int a);
  int leaky_relu(int a, double slope);
  int sqrt_(int a);
  int div(int a, int b);
  int lincomb(std::span<const int> parents, std::span<const double> coefs,
              double c0);

  double value(int i) const { return nodes_[i].val; }
  double adjoint(int i) const { return nodes_[i].adj; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and sweeps backwards. Adjoints accumulate, so
  // call reset_adjoints() between independent backward passes.
  void backward(int root);
  void backward(std::span<const int> roots, std::span<const double> seeds);
  void reset_adjoints();
  void clear();

private:
  struct Node {
    Op op;
    int a = -1, b = -1;  // Lincomb: a = offset into args, b = count
    double aux = 0.0;    // LeakyRelu slope, Lincomb c0
    double val = 0.0;
    double adj = 0.0;
  };

  int push(Node n);
  void check(int i) const {
    if (i < 0 || i >= static_cast<int>(nodes_.size()))
      throw ParameterError("autodiff: node index out of range");
  }

  std::vector<Node> nodes_;
  std::vector<int> lc_args_;
  std::vector<double> lc_coefs_;
};

// Thin value handle with operator sugar; all state lives in the tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  double value() const { return tape->value(id); }
  double adjoint() const { return tape->adjoint(id); }
};

inline Var wrap(Tape& t, int id) { return Var{&t, id}; }
inline Var lift(Tape& t, double v) { return wrap(t, t.leaf(v)); }

inline Var operator+(Var a, Var b) { return wrap(*a.tape, a.tape->add(a.id, b.id)); }
inline Var operator*(Var a, Var b) { return wrap(*a.tape, a.tape->mul(a.id, b.id)); }
inline Var operator-(Var a) { return wrap(*a.tape, a.tape->neg(a.id)); }
inline Var operator-(Var a, Var b) { return a + (-b); }
inline Var operator/(Var a, Var b) { return wrap(*a.tape, a.tape->div(a.id, b.id)); }
inline Var operator+(Var a, double c) { return a + lift(*a.tape, c); }
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator*(Var a, double c) { return a * lift(*a.tape, c); }
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) { return lift(*a.tape, c) - a; }

inline Var max(Var a, Var b) { return wrap(*a.tape, a.tape->max(a.id, b.id)); }
inline Var exp(Var a) { return wrap(*a.tape, a.tape->exp_(a.id)); }
inline Var ln(Var a) { return wrap(*a.tape, a.tape->ln(a.id)); }
inline Var tanh(Var a) { return wrap(*a.tape, a.tape->tanh_(a.id)); }
inline Var relu(Var a) { return wrap(*a.tape, a.tape->relu(a.id)); }
inline Var leaky_relu(Var a, double slope) {
  return wrap(*a.tape, a.tape->leaky_relu(a.id, slope));
}
inline Var sqrt(Var a) { return wrap(*a.tape, a.tape->sqrt_(a.id)); }
inline Var abs(Var a) { return max(a, -a); }

}  // namespace cotdre::ad
