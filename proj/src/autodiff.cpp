#include "gacdr/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "gacdr/error.hpp"
#include "gacdr/random.hpp"

namespace gacdr::ad {

namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch(std::string(op) + ": " + shape(a.value()) + " vs " + shape(b.value()));
}

Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------------------------

void ParamStore::add(const std::string& name, Matrix value) {
  if (values_.count(name)) throw Error("parameter '" + name + "' already exists");
  values_.emplace(name, std::move(value));
}

Matrix& ParamStore::value(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Matrix& ParamStore::value(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : values_) out.push_back(name);
  return out;
}

ParamStore::AdamState& ParamStore::adam(const std::string& name) {
  auto it = adam_.find(name);
  if (it != adam_.end()) return it->second;
  const Matrix& v = value(name);
  AdamState st{Matrix::Zero(v.rows(), v.cols()), Matrix::Zero(v.rows(), v.cols()), 0};
  return adam_.emplace(name, std::move(st)).first->second;
}

const ParamStore::AdamState* ParamStore::adam_if_any(const std::string& name) const {
  auto it = adam_.find(name);
  return it == adam_.end() ? nullptr : &it->second;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (values_.size() != other.values_.size()) return false;
  for (const auto& [name, v] : values_) {
    auto it = other.values_.find(name);
    if (it == other.values_.end()) return false;
    if (v.rows() != it->second.rows() || v.cols() != it->second.cols() || v != it->second) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeMismatch("expected a 1x1 value, got " + shape(v));
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return record("constant", std::move(value), nullptr); }

Var Tape::param(const ParamStore& store, const std::string& name) {
  auto it = param_ids_.find(name);
  if (it != param_ids_.end()) return Var(this, it->second);
  Var v = record("param", store.value(name), nullptr);
  nodes_.back().param = name;
  param_ids_.emplace(name, v.id());
  return v;
}

Var Tape::record(const char* op, Matrix value, BackwardFn backward) {
  nodes_.push_back(Node{op, std::move(value), std::move(backward), {}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(int id, const Matrix& grad) {
  auto& g = grads_.at(static_cast<std::size_t>(id));
  if (g.size() == 0)
    g = grad;
  else
    g += grad;
}

Gradients Tape::backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeMismatch("backward needs a scalar loss, got " + shape(loss.value()));
  grads_.assign(nodes_.size(), Matrix());
  grads_[static_cast<std::size_t>(loss.id())] = scalar_matrix(1.0);
  for (int id = loss.id(); id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    const Matrix& g = grads_[static_cast<std::size_t>(id)];
    if (g.size() == 0) continue;
    if (!g.allFinite()) throw NonFinite(std::string("non-finite gradient at node ") + std::to_string(id) + " (" + node.op + ")");
    if (node.backward) node.backward(*this, g);
  }
  Gradients out;
  for (const auto& [name, id] : param_ids_) {
    const Matrix& g = grads_[static_cast<std::size_t>(id)];
    const Matrix& v = nodes_[static_cast<std::size_t>(id)].value;
    out[name] = g.size() == 0 ? Matrix(Matrix::Zero(v.rows(), v.cols())) : g;
  }
  grads_.clear();
  return out;
}

// ---------------------------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeMismatch("matmul: " + shape(a.value()) + " * " + shape(b.value()));
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value() * b.value();
  return a.tape().record("matmul", std::move(out), [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g * t.value(ib).transpose());
    t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.tape().record("add", a.value() + b.value(), [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.tape().record("sub", a.value() - b.value(), [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  return a.tape().record("mul", a.value().cwiseProduct(b.value()), [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var mul_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeMismatch("mul_row: " + shape(a.value()) + " with row " + shape(row.value()));
  const int ia = a.id(), ir = row.id();
  Matrix out = a.value();
  out.array().rowwise() *= row.value().row(0).array();
  return a.tape().record("mul_row", std::move(out), [ia, ir](Tape& t, const Matrix& g) {
    Matrix ga = g;
    ga.array().rowwise() *= t.value(ir).row(0).array();
    t.accumulate(ia, ga);
    t.accumulate(ir, g.cwiseProduct(t.value(ia)).colwise().sum());
  });
}

Var scale(const Var& a, double c) {
  const int ia = a.id();
  return a.tape().record("scale", a.value() * c, [ia, c](Tape& t, const Matrix& g) { t.accumulate(ia, g * c); });
}

Var add_scalar(const Var& a, double c) {
  const int ia = a.id();
  Matrix out = a.value().array() + c;
  return a.tape().record("add_scalar", std::move(out), [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
}

Var relu(const Var& a) {
  const int ia = a.id();
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape().record("relu", std::move(out), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix((t.value(ia).array() > 0.0).select(g.array(), 0.0)));
  });
}

Var exp(const Var& a) {
  const int ia = a.id();
  const int self = static_cast<int>(a.tape().size());
  Matrix out = a.value().array().exp();
  return a.tape().record("exp", std::move(out), [ia, self](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.cwiseProduct(t.value(self)));
  });
}

Var log(const Var& a) {
  const int ia = a.id();
  Matrix out = a.value().array().log();
  return a.tape().record("log", std::move(out), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.cwiseQuotient(t.value(ia)));
  });
}

Var clamp(const Var& a, double lo, double hi) {
  const int ia = a.id();
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape().record("clamp", std::move(out), [ia, lo, hi](Tape& t, const Matrix& g) {
    const auto& x = t.value(ia).array();
    t.accumulate(ia, Matrix((x > lo && x < hi).select(g.array(), 0.0)));
  });
}

Var sum(const Var& a) {
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape().record("sum", scalar_matrix(a.value().sum()), [ia, r, c](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var sum_squares(const Var& a) {
  const int ia = a.id();
  return a.tape().record("sum_squares", scalar_matrix(a.value().squaredNorm()), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, t.value(ia) * (2.0 * g(0, 0)));
  });
}

Var gather_rows(const Var& a, const std::vector<std::uint32_t>& rows) {
  const int ia = a.id();
  const Matrix& src = a.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= src.rows()) throw ShapeMismatch("gather_rows: row " + std::to_string(rows[r]) + " of " + shape(src));
    out.row(static_cast<Eigen::Index>(r)) = src.row(rows[r]);
  }
  const Eigen::Index total = src.rows();
  return a.tape().record("gather_rows", std::move(out), [ia, rows, total](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(total, g.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) ga.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    t.accumulate(ia, ga);
  });
}

Var scatter_rows(const Var& a, const std::vector<std::uint32_t>& rows, Eigen::Index total_rows) {
  if (static_cast<Eigen::Index>(rows.size()) != a.rows()) throw ShapeMismatch("scatter_rows: index count mismatch");
  const int ia = a.id();
  Matrix out = Matrix::Zero(total_rows, a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= total_rows) throw ShapeMismatch("scatter_rows: row out of range");
    out.row(rows[r]) += a.value().row(static_cast<Eigen::Index>(r));
  }
  return a.tape().record("scatter_rows", std::move(out), [ia, rows](Tape& t, const Matrix& g) {
    Matrix ga(static_cast<Eigen::Index>(rows.size()), g.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) ga.row(static_cast<Eigen::Index>(r)) = g.row(rows[r]);
    t.accumulate(ia, ga);
  });
}

Var stack_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeMismatch("stack_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeMismatch("stack_rows: column mismatch");
    ids.push_back(p.id());
    offsets.push_back(rows);
    rows += p.rows();
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) out.middleRows(offsets[i], parts[i].rows()) = parts[i].value();
  return parts.front().tape().record("stack_rows", std::move(out), [ids, offsets](Tape& t, const Matrix& g) {
    for (std::size_t i = 0; i < ids.size(); ++i) t.accumulate(ids[i], g.middleRows(offsets[i], t.value(ids[i]).rows()));
  });
}

Matrix softmax_columns(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double shift = x.col(c).maxCoeff();
    double total = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) total += (out(r, c) = std::exp(x(r, c) - shift));
    for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, c) /= total;
  }
  return out;
}

Var softmax_over_rows(const Var& a) {
  const int ia = a.id();
  Matrix out = softmax_columns(a.value());
  const int self = static_cast<int>(a.tape().size());
  return a.tape().record("softmax", std::move(out), [ia, self](Tape& t, const Matrix& g) {
    const Matrix& s = t.value(self);
    // d x_rc = s_rc * (g_rc - sum_r' g_r'c s_r'c)
    RowVector inner = g.cwiseProduct(s).colwise().sum();
    Matrix gx = g;
    gx.rowwise() -= inner;
    t.accumulate(ia, gx.cwiseProduct(s));
  });
}

Var row_cosine(const Var& a, const Var& b) {
  require_same(a, b, "row_cosine");
  const int ia = a.id(), ib = b.id();
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const Eigen::Index n = x.rows();
  Matrix out(n, 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double nx = x.row(r).norm(), ny = y.row(r).norm();
    out(r, 0) = (nx == 0.0 || ny == 0.0) ? 0.0 : x.row(r).dot(y.row(r)) / (nx * ny);
  }
  return a.tape().record("row_cosine", std::move(out), [ia, ib](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(ib);
    Matrix gx = Matrix::Zero(x.rows(), x.cols()), gy = Matrix::Zero(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double nx = x.row(r).norm(), ny = y.row(r).norm();
      if (nx == 0.0 || ny == 0.0) continue;
      const double c = x.row(r).dot(y.row(r)) / (nx * ny);
      gx.row(r) = g(r, 0) * (y.row(r) / (nx * ny) - c * x.row(r) / (nx * nx));
      gy.row(r) = g(r, 0) * (x.row(r) / (nx * ny) - c * y.row(r) / (ny * ny));
    }
    t.accumulate(ia, gx);
    t.accumulate(ib, gy);
  });
}

Var soft_bce(const Var& p, const std::vector<double>& targets) {
  if (p.cols() != 1 || p.rows() != static_cast<Eigen::Index>(targets.size()))
    throw ShapeMismatch("soft_bce: predictions " + shape(p.value()) + " for " + std::to_string(targets.size()) + " targets");
  const int ip = p.id();
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double q = p.value()(static_cast<Eigen::Index>(i), 0);
    total -= targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q);
  }
  return p.tape().record("soft_bce", scalar_matrix(total), [ip, targets](Tape& t, const Matrix& g) {
    const Matrix& pv = t.value(ip);
    Matrix gp(pv.rows(), 1);
    for (Eigen::Index i = 0; i < pv.rows(); ++i) {
      const double q = pv(i, 0), y = targets[static_cast<std::size_t>(i)];
      gp(i, 0) = g(0, 0) * (-(y / q) + (1.0 - y) / (1.0 - q));
    }
    t.accumulate(ip, gp);
  });
}

// ---------------------------------------------------------------------------------------------

void adam_step(ParamStore& store, const Gradients& grads, const AdamConfig& config) {
  for (const auto& [name, g] : grads) {
    Matrix& theta = store.value(name);
    if (g.rows() != theta.rows() || g.cols() != theta.cols())
      throw ShapeMismatch("adam_step: gradient " + shape(g) + " for parameter '" + name + "' of " + shape(theta));
    auto& st = store.adam(name);
    ++st.step;
    st.m = config.beta1 * st.m + (1.0 - config.beta1) * g;
    st.v = config.beta2 * st.v + (1.0 - config.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(st.step));
    theta.array() -= config.lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + config.eps);
  }
}

GradCheckReport finite_diff_check(const LossBuilder& loss, ParamStore& store, std::size_t samples, double h,
                                  std::uint64_t seed, double abs_floor, const std::vector<std::string>& only) {
  if (!(h > 0.0)) throw Error("finite_diff_check: h must be positive");
  Gradients analytic;
  {
    Tape tape;
    analytic = tape.backward(loss(tape, store));
  }
  auto evaluate = [&]() {
    Tape tape;
    return loss(tape, store).scalar();
  };

  struct Coord {
    std::string name;
    Eigen::Index r, c;
  };
  std::vector<Coord> coords;
  for (const auto& [name, g] : analytic) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < g.cols(); ++c) coords.push_back({name, r, c});
  }
  if (samples > 0 && samples < coords.size()) {
    Rng rng = make_rng(derive_seed(seed, 0x666463ULL));
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(samples);
  }

  GradCheckReport report;
  for (const auto& co : coords) {
    double& x = store.value(co.name)(co.r, co.c);
    const double saved = x;
    x = saved + h;
    const double up = evaluate();
    x = saved - h;
    const double down = evaluate();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.at(co.name)(co.r, co.c);
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), abs_floor});
    auto& worst = report.max_rel_error[co.name];
    worst = std::max(worst, rel);
    report.max_rel_error_overall = std::max(report.max_rel_error_overall, rel);
    ++report.coordinates;
  }
  return report;
}

}  // namespace gacdr::ad
