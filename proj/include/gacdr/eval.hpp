#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gacdr/corpus.hpp"

namespace gacdr {

inline constexpr std::size_t kMaxCutoff = 10;

struct TestCase {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::vector<std::uint32_t> candidates;

  bool operator==(const TestCase&) const = default;
};

struct EvalSplit {
  std::size_t dataset = 0;
  std::vector<Interaction> train;  // file order, test interactions removed
  std::vector<TestCase> tests;     // ascending user
  std::vector<std::uint32_t> excluded_users;

  bool operator==(const EvalSplit&) const = default;
};

/// Holds out each eligible user's latest interaction (ties and missing timestamps: last in file
/// order) and samples `candidates` never-interacted items without replacement from a stream keyed
/// by (seed, dataset name, user). Users with fewer than two interactions are excluded.
EvalSplit make_split(const Corpus& corpus, std::size_t dataset, std::uint64_t seed, std::size_t candidates = 99);

/// 1 + number of candidates scoring strictly higher; ties rank the test item last among them.
std::size_t rank_test_item(double test_score, const std::vector<double>& candidate_scores);

double hr_at(const std::vector<std::size_t>& ranks, std::size_t n);
double ndcg_at(const std::vector<std::size_t>& ranks, std::size_t n);

struct DatasetReport {
  std::string name;
  bool empty = true;
  std::array<double, kMaxCutoff> hr{};
  std::array<double, kMaxCutoff> ndcg{};  // index n-1 holds the value at cutoff n
  std::vector<std::uint32_t> users;
  std::vector<std::size_t> ranks;

  bool operator==(const DatasetReport&) const = default;
};

using ScoreFn = std::function<double(std::uint32_t user, std::uint32_t item)>;

DatasetReport evaluate(const ScoreFn& score, const EvalSplit& split, const std::string& name);

/// `dataset,N,hr,ndcg` with one row per dataset and cutoff 1..10.
void write_eval_csv(const std::filesystem::path& path, const std::vector<DatasetReport>& reports);
/// `dataset,user,item,rank` per test user.
void write_ranks_csv(const std::filesystem::path& path, const Corpus& corpus, const std::vector<EvalSplit>& splits,
                     const std::vector<DatasetReport>& reports);

/// Test interactions and candidate lists as `user<TAB>item<TAB>c1 c2 ...` (raw ids).
void write_split(const std::filesystem::path& path, const Corpus& corpus, const EvalSplit& split);
EvalSplit read_split(const std::filesystem::path& path, const Corpus& corpus, std::size_t dataset);

}  // namespace gacdr
