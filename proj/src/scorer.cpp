#include "gacdr/scorer.hpp"

#include <algorithm>
#include <charconv>

#include "gacdr/error.hpp"
#include "gacdr/random.hpp"
#include "gacdr/text_util.hpp"

namespace gacdr {

TowerStructure TowerStructure::parse(const std::string& text) {
  TowerStructure s;
  s.multipliers.clear();
  for (const auto& part : text::split(text::trim(text), '-')) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size() || v == 0)
      throw BadStructure("tower structure '" + text + "': bad width '" + part + "'");
    s.multipliers.push_back(v);
  }
  if (s.multipliers.size() < 2) throw BadStructure("tower structure '" + text + "' needs at least one layer");
  if (s.multipliers.front() != 1 || s.multipliers.back() != 1)
    throw BadStructure("tower structure '" + text + "' must start and end at k");
  return s;
}

std::string TowerStructure::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < multipliers.size(); ++i) out += (i ? "-" : "") + std::to_string(multipliers[i]);
  return out;
}

std::vector<std::size_t> TowerStructure::widths(std::size_t k) const {
  std::vector<std::size_t> w;
  for (auto m : multipliers) w.push_back(m * k);
  return w;
}

std::string tower_param_name(std::size_t dataset, EntityKind kind, std::size_t layer) {
  return "tower/" + std::to_string(dataset) + "/" + to_string(kind) + "/" + std::to_string(layer);
}

void init_towers(ad::ParamStore& store, std::size_t dataset, const std::string& dataset_name, std::size_t k,
                 const TowerStructure& structure, std::uint64_t seed, double sigma) {
  if (k == 0) throw BadStructure("k must be positive");
  if (structure.multipliers.size() < 2 || structure.multipliers.front() != 1 || structure.multipliers.back() != 1)
    throw BadStructure("tower structure '" + structure.to_string() + "' must start and end at k");
  const auto widths = structure.widths(k);
  for (EntityKind kind : {EntityKind::User, EntityKind::Item}) {
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      Rng rng = make_rng(derive_seed(seed, fnv1a(dataset_name), static_cast<std::uint64_t>(kind), l));
      std::normal_distribution<double> gauss(0.0, sigma);
      Matrix w(static_cast<Eigen::Index>(widths[l]), static_cast<Eigen::Index>(widths[l + 1]));
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = gauss(rng);
      store.add(tower_param_name(dataset, kind, l), std::move(w));
    }
  }
}

std::vector<Matrix> tower_layers(const ad::ParamStore& store, std::size_t dataset, EntityKind kind,
                                 std::size_t layers) {
  std::vector<Matrix> out;
  for (std::size_t l = 0; l < layers; ++l) out.push_back(store.value(tower_param_name(dataset, kind, l)));
  return out;
}

Matrix tower_forward(const std::vector<Matrix>& layers, const Matrix& input) {
  Matrix x = input;
  for (const auto& w : layers) {
    if (x.cols() != w.rows())
      throw ShapeMismatch("tower input width " + std::to_string(x.cols()) + " vs layer " + std::to_string(w.rows()));
    x = (x * w).cwiseMax(0.0);
  }
  if (!x.allFinite()) throw NonFinite("tower output is not finite");
  return x;
}

RowVector forward_user(const ad::ParamStore& store, std::size_t dataset, std::size_t layers, const RowVector& p_in) {
  return tower_forward(tower_layers(store, dataset, EntityKind::User, layers), p_in).row(0);
}

RowVector forward_item(const ad::ParamStore& store, std::size_t dataset, std::size_t layers, const RowVector& q_in) {
  return tower_forward(tower_layers(store, dataset, EntityKind::Item, layers), q_in).row(0);
}

double predict(const Eigen::Ref<const RowVector>& p, const Eigen::Ref<const RowVector>& q) {
  const double np = p.norm(), nq = q.norm();
  if (np == 0.0 || nq == 0.0) return kPredictionEps;
  return std::clamp(p.dot(q) / (np * nq), kPredictionEps, 1.0 - kPredictionEps);
}

}  // namespace gacdr
