#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gacdr {

enum class EntityKind : std::uint8_t { User, Item };

const char* to_string(EntityKind kind);
EntityKind parse_entity_kind(const std::string& text);  // throws ValidationError

struct EntityRef {
  EntityKind kind = EntityKind::User;
  std::size_t dataset = 0;
  std::uint32_t index = 0;

  auto operator<=>(const EntityRef&) const = default;
};

/// One observed rating. User and item indices are dense within the owning dataset.
struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double rating = 0.0;
  std::optional<std::int64_t> timestamp;
  std::size_t order = 0;  // position in the source file; breaks timestamp ties

  bool operator==(const Interaction&) const = default;
};

struct DatasetDescriptor {
  std::string name;
  double max_rating = 0.0;
  std::size_t users = 0;
  std::size_t items = 0;

  bool operator==(const DatasetDescriptor&) const = default;
};

struct Dataset {
  DatasetDescriptor desc;
  std::vector<std::string> user_ids;  // dense index -> raw id, lexicographic
  std::vector<std::string> item_ids;
  std::vector<Interaction> interactions;  // file order
  std::vector<std::string> user_docs;     // empty string: no document
  std::vector<std::string> item_docs;
  bool has_timestamps = false;

  std::optional<std::uint32_t> user_index(const std::string& raw) const;
  std::optional<std::uint32_t> item_index(const std::string& raw) const;
  std::size_t entity_count(EntityKind kind) const { return kind == EntityKind::User ? desc.users : desc.items; }
  const std::string& raw_id(EntityKind kind, std::uint32_t index) const;
  bool operator==(const Dataset&) const;

  /// Rebuilds the raw-id lookups after user_ids/item_ids change.
  void reindex();

 private:
  std::unordered_map<std::string, std::uint32_t> user_lookup_;
  std::unordered_map<std::string, std::uint32_t> item_lookup_;
};

/// Aligned rows of the common entities of one dataset pair, sorted by the first dataset's index.
struct CommonRows {
  std::vector<std::uint32_t> rows_a;
  std::vector<std::uint32_t> rows_b;

  std::size_t size() const { return rows_a.size(); }
  bool empty() const { return rows_a.empty(); }
  bool operator==(const CommonRows&) const = default;
};

/// Cross-dataset entity identity. Links are closed under symmetry and transitivity;
/// each equivalence class holds at most one entity per dataset.
class AlignmentMap {
 public:
  using Link = std::pair<EntityRef, EntityRef>;  // first.dataset < second.dataset

  const std::vector<Link>& user_links() const { return user_links_; }
  const std::vector<Link>& item_links() const { return item_links_; }
  const std::vector<Link>& links(EntityKind kind) const { return kind == EntityKind::User ? user_links_ : item_links_; }

  /// Equivalence classes with at least two members, each sorted by dataset.
  const std::vector<std::vector<EntityRef>>& classes(EntityKind kind) const {
    return kind == EntityKind::User ? user_classes_ : item_classes_;
  }

  CommonRows common(std::size_t a, std::size_t b, EntityKind kind) const;
  bool empty() const { return user_links_.empty() && item_links_.empty(); }
  bool operator==(const AlignmentMap&) const = default;

 private:
  friend class CorpusBuilder;
  std::vector<Link> user_links_;
  std::vector<Link> item_links_;
  std::vector<std::vector<EntityRef>> user_classes_;
  std::vector<std::vector<EntityRef>> item_classes_;
};

struct MatrixStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double density = 0.0;

  bool operator==(const MatrixStats&) const = default;
};

/// Immutable multi-dataset corpus. Built through CorpusBuilder or load_corpus.
class Corpus {
 public:
  std::size_t dataset_count() const { return datasets_.size(); }
  const Dataset& dataset(std::size_t index) const { return datasets_.at(index); }
  const std::vector<Dataset>& datasets() const { return datasets_; }
  std::optional<std::size_t> find_dataset(const std::string& name) const;
  const AlignmentMap& alignment() const { return alignment_; }

  /// Copy of this corpus with one dataset's interactions replaced (entity universe unchanged).
  Corpus with_interactions(std::size_t dataset, std::vector<Interaction> interactions) const;

  bool operator==(const Corpus&) const = default;

 private:
  friend class CorpusBuilder;
  std::vector<Dataset> datasets_;
  AlignmentMap alignment_;
};

struct LoadOptions {
  std::size_t min_interactions_per_user = 1;
};

/// Accumulates raw records, then interns, filters and closes the alignment in build().
class CorpusBuilder {
 public:
  /// Returns the dataset index. Re-declaring with a different max_rating throws ConflictingMaxRating.
  std::size_t add_dataset(const std::string& name, double max_rating);
  void add_rating(std::size_t dataset, const std::string& user, const std::string& item, double rating,
                  std::optional<std::int64_t> timestamp = std::nullopt);
  void add_document(std::size_t dataset, EntityKind kind, const std::string& raw_id, const std::string& text);
  void add_alignment(EntityKind kind, const std::string& dataset_a, const std::string& raw_a,
                     const std::string& dataset_b, const std::string& raw_b);

  Corpus build(const LoadOptions& options = {}) const;

 private:
  struct RawRating {
    std::string user, item;
    double rating;
    std::optional<std::int64_t> timestamp;
  };
  struct RawDataset {
    std::string name;
    double max_rating;
    std::vector<RawRating> ratings;
    std::map<std::string, std::string> user_docs, item_docs;
  };
  struct RawLink {
    EntityKind kind;
    std::string dataset_a, raw_a, dataset_b, raw_b;
  };
  std::vector<RawDataset> datasets_;
  std::vector<RawLink> links_;
};

/// Dataset manifest: `key = value` lines.
///   dataset = NAME                 (declares a dataset, in order)
///   NAME.ratings = PATH
///   NAME.content = PATH            (optional)
///   NAME.max_rating = REAL
///   alignment = PATH               (optional)
/// Relative paths resolve against the manifest's directory.
struct DatasetFiles {
  std::string name;
  std::filesystem::path ratings;
  std::optional<std::filesystem::path> content;
  double max_rating = 0.0;
};

struct CorpusManifest {
  std::vector<DatasetFiles> datasets;
  std::optional<std::filesystem::path> alignment;

  static CorpusManifest read(const std::filesystem::path& path);
};

Corpus load_corpus(const CorpusManifest& manifest, const LoadOptions& options = {});
Corpus load_corpus(const std::filesystem::path& manifest_path, const LoadOptions& options = {});

/// Aligned index lists of the common entities of a dataset pair. Empty when there is no overlap.
CommonRows common_entities(const Corpus& corpus, std::size_t a, std::size_t b, EntityKind kind);

MatrixStats interaction_matrix_stats(const Corpus& corpus, std::size_t dataset);

}  // namespace gacdr
