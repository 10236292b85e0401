#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gacdr/matrix.hpp"

/// Define-by-run reverse-mode differentiation over dense row-major matrices,
/// plus the Adam optimizer and a central-difference gradient checker.
namespace gacdr::ad {

/// Named trainable tensors with their Adam moments.
class ParamStore {
 public:
  struct AdamState {
    Matrix m;
    Matrix v;
    std::uint64_t step = 0;
  };

  void add(const std::string& name, Matrix value);
  bool contains(const std::string& name) const { return values_.count(name) > 0; }
  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;
  const std::map<std::string, Matrix>& values() const { return values_; }
  std::vector<std::string> names() const;
  AdamState& adam(const std::string& name);
  const AdamState* adam_if_any(const std::string& name) const;

  bool operator==(const ParamStore& other) const;

 private:
  std::map<std::string, Matrix> values_;
  std::map<std::string, AdamState> adam_;
};

using Gradients = std::map<std::string, Matrix>;

class Tape;

/// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Receives the upstream gradient of the node and accumulates into its inputs via Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad)>;

  Var constant(Matrix value);

  /// Leaf bound to a store tensor. Repeated calls with one name return the same node.
  Var param(const ParamStore& store, const std::string& name);

  /// Reverse sweep from a 1x1 loss. Every param leaf on the tape gets an entry, zero when unreachable.
  /// Throws NonFinite naming the first node whose gradient is not finite.
  Gradients backward(const Var& loss);

  Var record(const char* op, Matrix value, BackwardFn backward);
  void accumulate(int id, const Matrix& grad);
  const Matrix& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    Matrix value;
    BackwardFn backward;
    std::string param;  // non-empty for store leaves
  };
  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  std::map<std::string, int> param_ids_;
};

// Elementwise ops require equal shapes unless stated otherwise.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var mul_row(const Var& a, const Var& row);  // a (n x k) times a broadcast 1 x k row
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var relu(const Var& a);  // subgradient 0 at exactly 0
Var exp(const Var& a);
Var log(const Var& a);
Var clamp(const Var& a, double lo, double hi);  // gradient passes only strictly inside (lo, hi)
Var sum(const Var& a);                          // 1 x 1
Var sum_squares(const Var& a);                  // 1 x 1, squared Frobenius norm
Var gather_rows(const Var& a, const std::vector<std::uint32_t>& rows);
Var scatter_rows(const Var& a, const std::vector<std::uint32_t>& rows, Eigen::Index total_rows);
Var stack_rows(const std::vector<Var>& parts);
Var softmax_over_rows(const Var& a);  // each column normalized across rows

/// The value computed by softmax_over_rows, for callers off the tape.
Matrix softmax_columns(const Matrix& logits);
/// Row-wise cosine similarity, n x 1. Rows with a zero norm give 0 and pass no gradient.
Var row_cosine(const Var& a, const Var& b);
/// -sum_i [t_i log p_i + (1 - t_i) log(1 - p_i)] for p (n x 1) in (0, 1). 1 x 1.
Var soft_bce(const Var& p, const std::vector<double>& targets);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of every tensor named in `grads`. Throws ShapeMismatch.
void adam_step(ParamStore& store, const Gradients& grads, const AdamConfig& config);

using LossBuilder = std::function<Var(Tape&, const ParamStore&)>;

struct GradCheckReport {
  std::map<std::string, double> max_rel_error;  // per tensor
  double max_rel_error_overall = 0.0;
  std::size_t coordinates = 0;
};

/// Compares backward() with (f(x+h) - f(x-h)) / 2h on `samples` random coordinates (0 = all).
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
GradCheckReport finite_diff_check(const LossBuilder& loss, ParamStore& store, std::size_t samples, double h,
                                  std::uint64_t seed = 1, double abs_floor = 1e-6,
                                  const std::vector<std::string>& only = {});

}  // namespace gacdr::ad
