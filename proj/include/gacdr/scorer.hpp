#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gacdr/autodiff.hpp"
#include "gacdr/corpus.hpp"
#include "gacdr/matrix.hpp"

namespace gacdr {

/// Bounds applied to every prediction so the cross-entropy logs stay finite.
inline constexpr double kPredictionEps = 1e-7;

/// Layer widths as multiples of k, written `1-2-4-8-4-2-1`. Must start and end at 1.
struct TowerStructure {
  std::vector<std::size_t> multipliers{1, 2, 4, 8, 4, 2, 1};

  static TowerStructure parse(const std::string& text);  // throws BadStructure
  std::string to_string() const;
  std::size_t layers() const { return multipliers.size() - 1; }
  std::vector<std::size_t> widths(std::size_t k) const;
  bool operator==(const TowerStructure&) const = default;
};

std::string tower_param_name(std::size_t dataset, EntityKind kind, std::size_t layer);

/// Adds user and item towers for one dataset to `store`, entries i.i.d. N(0, sigma^2).
/// The stream depends only on (seed, dataset name, kind, layer), so a dataset's towers do not
/// change when other datasets are added.
void init_towers(ad::ParamStore& store, std::size_t dataset, const std::string& dataset_name, std::size_t k,
                 const TowerStructure& structure, std::uint64_t seed, double sigma = 0.1);

/// The layer matrices of one tower, in order.
std::vector<Matrix> tower_layers(const ad::ParamStore& store, std::size_t dataset, EntityKind kind,
                                 std::size_t layers);

/// ReLU(...ReLU(ReLU(x W1) W2)...) row-wise. Throws NonFinite.
Matrix tower_forward(const std::vector<Matrix>& layers, const Matrix& input);

RowVector forward_user(const ad::ParamStore& store, std::size_t dataset, std::size_t layers, const RowVector& p_in);
RowVector forward_item(const ad::ParamStore& store, std::size_t dataset, std::size_t layers, const RowVector& q_in);

/// Cosine similarity clamped to [eps, 1 - eps]; eps when either norm is zero.
double predict(const Eigen::Ref<const RowVector>& p, const Eigen::Ref<const RowVector>& q);

}  // namespace gacdr
