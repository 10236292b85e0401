#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gacdr/corpus.hpp"
#include "gacdr/matrix.hpp"

namespace gacdr {

struct SynthDataset {
  std::string name;
  std::size_t users = 300;
  std::size_t items = 300;
  double density = 0.05;
};

/// Entity overlap between two datasets, as fractions of the smaller side.
struct SynthLink {
  std::size_t a = 0, b = 1;
  double user_fraction = 0.0;
  double item_fraction = 0.0;
};

struct SynthConfig {
  std::vector<SynthDataset> datasets;
  std::vector<SynthLink> links;
  std::size_t latent_dim = 8;
  std::size_t clusters = 8;
  double cluster_spread = 0.5;  // within-cluster latent noise, relative to unit-variance centers
  double temperature = 0.2;     // Gumbel scale of the item choice; lower is more predictable
  double noise_sigma = 0.5;     // rating noise
  double max_rating = 5.0;      // ratings are integers 1..max_rating
  std::size_t min_per_user = 2;
  std::size_t vocab_size = 400;
  std::size_t tokens_per_doc = 30;
  double user_content_signal = 0.1;  // share of a user's tokens drawn from its cluster's slice
  double item_content_signal = 0.6;
  std::uint64_t seed = 1;

  /// Two datasets of 300 users and 300 items, densities 0.05 and 0.01, 60% of users shared.
  static SynthConfig dtcdr_default();
  void validate() const;  // throws ConfigError / InfeasibleDensity
};

struct EntityTruth {
  std::uint32_t cluster = 0;
  RowVector latent;
};

/// Planted factors per dataset, keyed by raw id.
struct SynthTruth {
  std::vector<std::map<std::string, EntityTruth>> users, items;

  /// Affinity used by the oracle ranker: latent dot product.
  double affinity(std::size_t dataset, const std::string& user, const std::string& item) const;
};

struct SynthRating {
  std::string user, item;
  double rating;
  std::int64_t timestamp;
};

struct SynthData {
  SynthConfig config;
  std::vector<std::vector<SynthRating>> ratings;  // per dataset, timestamp order
  std::vector<std::map<std::string, std::string>> user_docs, item_docs;
  std::vector<std::tuple<EntityKind, std::size_t, std::string, std::size_t, std::string>> alignment;
  SynthTruth truth;
};

SynthData generate_data(const SynthConfig& config);

/// Writes `corpus.manifest`, `<name>.ratings.tsv`, `<name>.content.tsv`, `alignment.tsv` and
/// `truth/<name>.{users,items}.tsv` under `dir`. Returns the manifest path.
std::filesystem::path write_synth(const SynthData& data, const std::filesystem::path& dir);

/// generate_data then write_synth.
std::filesystem::path generate(const SynthConfig& config, const std::filesystem::path& dir);

SynthTruth read_truth(const std::filesystem::path& dir, const std::vector<std::string>& dataset_names);

struct SynthStats {
  std::vector<MatrixStats> datasets;
  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::size_t, std::size_t>> overlaps;  // (users, items)

  bool operator==(const SynthStats&) const = default;
};

/// Statistics of the generated data as a loader would see them.
SynthStats describe(const SynthData& data);
/// The same statistics measured on a loaded corpus.
SynthStats describe(const Corpus& corpus);
std::string format_stats(const SynthStats& stats, const std::vector<std::string>& names);

}  // namespace gacdr
