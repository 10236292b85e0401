#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "gacdr/corpus.hpp"
#include "gacdr/matrix.hpp"

namespace gacdr {

enum class FusionMode : std::uint8_t { Attention, Average };

const char* to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& text);  // throws ConfigError

/// Entities of one kind shared by exactly the datasets in `members`.
struct SharingGroup {
  EntityKind kind = EntityKind::User;
  std::vector<std::size_t> members;             // ascending dataset indices, at least two
  std::vector<std::vector<std::uint32_t>> rows;  // rows[p][r]: dense index in members[p] of the r-th entity

  std::size_t size() const { return rows.empty() ? 0 : rows.front().size(); }
  std::optional<std::size_t> position(std::size_t dataset) const;
};

/// One group per distinct member set among the alignment classes; users first, then items,
/// each ordered by member list. Row order follows the classes' order.
std::vector<SharingGroup> build_sharing_groups(const Corpus& corpus);

/// Free logits Phi^{xy}, one 1 x k row per (kind, target x, source y) that co-occur in some group.
/// A target's weights in a group are the per-dimension softmax of its logits over the group's members.
struct AttentionParams {
  using Key = std::tuple<EntityKind, std::size_t, std::size_t>;

  std::size_t dim = 0;
  std::map<Key, RowVector> logits;

  /// Zero logits (uniform weights) for every pair the groups need.
  static AttentionParams for_groups(const std::vector<SharingGroup>& groups, std::size_t dim);

  const RowVector& logit(EntityKind kind, std::size_t target, std::size_t source) const;
};

/// Name under which Phi^{xy} is kept in a parameter store.
std::string attention_param_name(EntityKind kind, std::size_t target, std::size_t source);

/// W^{x y} for every member y of the group, in member order. Average mode ignores the logits.
std::vector<RowVector> attention_weights(const SharingGroup& group, const AttentionParams& params, FusionMode mode,
                                         std::size_t target);

/// sum_y weights[y] (elementwise) * embeddings[members[y]] rows, aligned with the group's row order.
/// `embeddings` is indexed by dataset. Throws DimMismatch.
Matrix fuse(const SharingGroup& group, const std::vector<RowVector>& weights, const std::vector<Matrix>& embeddings);

/// Fused common-user rows of `target` (U matrices indexed by dataset).
Matrix fuse_users(const SharingGroup& group, const AttentionParams& params, FusionMode mode,
                  const std::vector<Matrix>& embeddings, std::size_t target);
/// Fused common-item rows of `target` (V matrices indexed by dataset).
Matrix fuse_items(const SharingGroup& group, const AttentionParams& params, FusionMode mode,
                  const std::vector<Matrix>& embeddings, std::size_t target);

/// Fused rows of one dataset and kind, gathered over every group that contains it.
struct FusedRows {
  std::vector<std::uint32_t> rows;
  Matrix values;
};

FusedRows collect_fused_rows(EntityKind kind, std::size_t dataset, const std::vector<SharingGroup>& groups,
                             const AttentionParams& params, FusionMode mode, const std::vector<Matrix>& embeddings);

/// P_in and Q_in: fused rows for common entities, base rows otherwise. Throws CoverageGap when the
/// fused rows do not cover exactly the dataset's aligned entities.
std::pair<Matrix, Matrix> assemble_inputs(const Corpus& corpus, std::size_t dataset, const FusedRows& users,
                                          const FusedRows& items, const Matrix& base_users, const Matrix& base_items);

/// TSV `kind<TAB>target<TAB>source<TAB>w1 ... wk`, one line per (group, target, source).
void write_attention_weights(const std::filesystem::path& path, const Corpus& corpus,
                             const std::vector<SharingGroup>& groups, const AttentionParams& params,
                             FusionMode mode);

}  // namespace gacdr
