#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gacdr/autodiff.hpp"
#include "gacdr/corpus.hpp"
#include "gacdr/model.hpp"
#include "gacdr/random.hpp"

namespace gacdr {

enum class Objective : std::uint8_t { Preliminary, Personalized };
enum class RegTarget : std::uint8_t { Outputs, Inputs };

const char* to_string(Objective objective);
Objective parse_objective(const std::string& text);  // throws ConfigError
const char* to_string(RegTarget target);
RegTarget parse_reg_target(const std::string& text);  // throws ConfigError

struct TrainConfig {
  Objective objective = Objective::Preliminary;
  std::size_t negatives_per_positive = 7;
  std::size_t batch_size = 1024;
  std::size_t epochs = 50;
  double lr = 0.001;
  double reg_lambda = 0.001;
  double theta = 1.0;
  bool finetune_base = false;
  RegTarget reg_target = RegTarget::Outputs;
  std::size_t penalty_sample = 0;  // cap on aligned rows per pair and step; 0 = all
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

/// One (user, item, target) training example; negatives carry target 0.
struct Instance {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double target = 0.0;

  bool operator==(const Instance&) const = default;
};

/// Observed items per user, sorted.
std::vector<std::vector<std::uint32_t>> observed_items(const Dataset& dataset);

/// Every interaction as a positive with target = rating, in file order.
std::vector<Instance> positive_instances(const Dataset& dataset);

/// `ratio` unobserved items per positive, uniform with replacement over the item set with
/// observed pairs rejected. Users who rated every item get none.
std::vector<Instance> sample_negatives(const Dataset& dataset, const std::vector<Instance>& positives,
                                       std::size_t ratio, std::uint64_t seed);

/// -[(y / max_r) log p + (1 - y / max_r) log(1 - p)].
double nce_loss(double y, double max_rating, double prediction);

/// Builds model quantities on one tape, caching shared nodes (attention weights, leaves).
class ModelTape {
 public:
  ModelTape(ad::Tape& tape, const GaModel& model, bool finetune_base);

  /// P_in / Q_in rows of `rows` (any order, duplicates allowed).
  ad::Var inputs(std::size_t dataset, EntityKind kind, const std::vector<std::uint32_t>& rows);
  /// Tower outputs of `rows`.
  ad::Var outputs(std::size_t dataset, EntityKind kind, const std::vector<std::uint32_t>& rows);
  /// Softmax over the pair logits, pairs x 1.
  ad::Var pair_weights();

  ad::Tape& tape() { return tape_; }
  const GaModel& model() const { return model_; }

 private:
  ad::Var base_rows(std::size_t dataset, EntityKind kind, const std::vector<std::uint32_t>& rows);
  const std::vector<ad::Var>& weights(std::size_t group, std::size_t target);

  ad::Tape& tape_;
  const GaModel& model_;
  bool finetune_base_;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<ad::Var>> weight_cache_;
};

struct BatchTerms {
  ad::Var nce;  // summed over the batch
  ad::Var reg;  // lambda * (||P_batch||^2 + ||Q_batch||^2), deduplicated rows
};

/// Summed cross-entropy and the regularizer for one batch of one dataset.
BatchTerms batch_terms(ModelTape& mt, std::size_t dataset, const std::vector<Instance>& batch,
                       const TrainConfig& config);

/// Sum of nce and reg.
ad::Var preliminary_objective(ModelTape& mt, std::size_t dataset, const std::vector<Instance>& batch,
                              const TrainConfig& config);

/// sum over pairs of lambda_ij * (1 - exp(-||W^i - W^j||^2 / theta)), W the tower outputs of the
/// aligned common entities. `rng` is used only when penalty_sample caps the rows. Throws NoCommonEntities.
ad::Var attention_penalty(ModelTape& mt, const TrainConfig& config, Rng* rng = nullptr);

/// Summed nce plus the penalty.
ad::Var personalized_objective(ModelTape& mt, std::size_t dataset, const std::vector<Instance>& batch,
                               const TrainConfig& config, Rng* rng = nullptr);

/// ||W^a - W^b||_F over all aligned users and items of one pair, from plain outputs.
double common_distance(const ModelOutputs& outputs, const PairLink& pair);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t dataset = 0;
  std::size_t instances = 0;
  double objective = 0.0;  // per instance
  double mean_nce = 0.0;
  double penalty = 0.0;                // mean over the dataset's steps; 0 for the preliminary objective
  std::vector<double> lambda;          // pair weights at epoch end
  std::vector<double> pair_distance;   // common_distance per pair at epoch end
};

struct StepInfo {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::vector<double> lambda;
};

using StepCallback = std::function<void(const StepInfo&, const GaModel&)>;

/// Round-robin minibatch training: every step takes one batch from each dataset that still has
/// batches this epoch, sums their objectives and applies one Adam update. Negatives are resampled
/// and instances shuffled per epoch from streams keyed by dataset name.
std::vector<EpochRecord> train_loop(const Corpus& train_corpus, GaModel& model, const TrainConfig& config,
                                    const StepCallback& on_step = {});

/// `epoch,dataset,objective,mean_nce,penalty,lambda_<a>_<b>...`
void write_trace_csv(const std::filesystem::path& path, const GaModel& model, const std::vector<EpochRecord>& trace);

}  // namespace gacdr
