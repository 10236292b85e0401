#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gacdr/autodiff.hpp"
#include "gacdr/corpus.hpp"
#include "gacdr/embedding.hpp"
#include "gacdr/fusion.hpp"
#include "gacdr/scorer.hpp"

namespace gacdr {

struct ModelConfig {
  std::size_t k = 16;
  TowerStructure structure;
  FusionMode fusion = FusionMode::Attention;
  bool share = true;  // false: every dataset uses its own base embeddings only
  double init_sigma = 0.1;
  std::uint64_t seed = 1;
};

/// Two datasets that share entities, with their aligned rows.
struct PairLink {
  std::size_t a = 0, b = 0;  // a < b
  CommonRows users, items;
};

/// Where an entity sits in the sharing groups: group index and row within the group, or -1.
struct GroupSlot {
  std::int32_t group = -1;
  std::uint32_t row = 0;
};

/// Towers, attention logits, pair logits and base embeddings of every dataset, in one store.
class GaModel {
 public:
  static GaModel create(const Corpus& corpus, const std::vector<EntityEmbeddings>& base, const ModelConfig& config);

  static std::string base_param_name(std::size_t dataset, EntityKind kind);
  static std::string pair_param_name(std::size_t a, std::size_t b);

  std::size_t k() const { return k_; }
  const TowerStructure& structure() const { return structure_; }
  FusionMode fusion() const { return fusion_; }
  const std::vector<DatasetDescriptor>& datasets() const { return datasets_; }
  const std::vector<SharingGroup>& groups() const { return groups_; }
  const std::vector<PairLink>& pairs() const { return pairs_; }
  const GroupSlot& slot(std::size_t dataset, EntityKind kind, std::uint32_t row) const;
  std::optional<std::size_t> find_dataset(const std::string& name) const;

  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  AttentionParams attention() const;
  const Matrix& base(std::size_t dataset, EntityKind kind) const;
  /// P_in / Q_in of one dataset.
  Matrix inputs(std::size_t dataset, EntityKind kind) const;
  /// P / Q of one dataset: tower outputs for every entity.
  Matrix outputs(std::size_t dataset, EntityKind kind) const;
  /// Softmax of the pair logits, in pairs() order. Empty without pairs.
  std::vector<double> pair_weights() const;

  bool operator==(const GaModel& other) const;

 private:
  friend GaModel load_checkpoint(const std::filesystem::path& path);
  void index();

  std::size_t k_ = 0;
  TowerStructure structure_;
  FusionMode fusion_ = FusionMode::Attention;
  std::vector<DatasetDescriptor> datasets_;
  std::vector<SharingGroup> groups_;
  ad::ParamStore params_;
  // derived
  std::vector<PairLink> pairs_;
  std::vector<std::vector<GroupSlot>> user_slots_, item_slots_;
};

/// Tower outputs of every dataset, for repeated scoring.
struct ModelOutputs {
  std::vector<Matrix> users, items;

  static ModelOutputs of(const GaModel& model);
  double score(std::size_t dataset, std::uint32_t user, std::uint32_t item) const {
    return predict(users[dataset].row(user), items[dataset].row(item));
  }
};

/// Text manifest (structure, datasets, groups, tensor table) ending in `end`, then a
/// little-endian uint64 count and that many doubles. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const GaModel& model);
GaModel load_checkpoint(const std::filesystem::path& path);  // throws ValidationError on a malformed file

}  // namespace gacdr
