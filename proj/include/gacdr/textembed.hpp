#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gacdr/corpus.hpp"
#include "gacdr/embedding.hpp"
#include "gacdr/random.hpp"

namespace gacdr {

/// Lowercases ASCII and splits on whitespace and ASCII punctuation. Non-ASCII bytes are word characters.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static Vocabulary build(const std::vector<std::vector<std::string>>& documents);

  std::size_t size() const { return tokens_.size(); }
  std::optional<std::uint32_t> id(const std::string& token) const;
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::uint64_t frequency(std::uint32_t id) const { return counts_.at(id); }

  /// Draws from the unigram distribution raised to the 0.75 power.
  std::uint32_t sample_negative(Rng& rng) const { return negative_(rng); }

 private:
  std::vector<std::string> tokens_;  // sorted
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  mutable std::discrete_distribution<std::uint32_t> negative_;
};

struct PvDbowConfig {
  std::size_t dim = 16;
  std::size_t epochs = 20;
  std::size_t negatives = 5;
  double lr = 0.025;  // decays linearly to lr * 1e-4
  std::uint64_t seed = 1;
};

struct ContentEmbeddings : EntityEmbeddings {
  /// Negative-sampling loss of a fixed (doc, word, negatives) sample, measured after each epoch.
  std::vector<double> epoch_loss;
};

/// Minimal paragraph-vector (distributed bag of words) trainer over one dataset's documents.
/// Entities without a document get a zero row and present=false.
ContentEmbeddings train_pvdbow(const Corpus& corpus, std::size_t dataset, const PvDbowConfig& config);

/// (1 + cos(x, y)) / 2, or 0 when either vector is zero.
double normalized_sim(const Eigen::Ref<const RowVector>& x, const Eigen::Ref<const RowVector>& y);

}  // namespace gacdr
