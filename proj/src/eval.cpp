#include "gacdr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "gacdr/error.hpp"
#include "gacdr/random.hpp"
#include "gacdr/text_util.hpp"

namespace gacdr {

EvalSplit make_split(const Corpus& corpus, std::size_t dataset, std::uint64_t seed, std::size_t candidates) {
  const Dataset& ds = corpus.dataset(dataset);
  if (!ds.has_timestamps && !ds.interactions.empty())
    spdlog::info("dataset {} lacks timestamps on some ratings; holding out the last interaction in file order",
                 ds.desc.name);
  const auto m = ds.desc.users;
  const auto n = static_cast<std::uint32_t>(ds.desc.items);

  std::vector<std::vector<std::size_t>> by_user(m);
  for (std::size_t i = 0; i < ds.interactions.size(); ++i) by_user[ds.interactions[i].user].push_back(i);

  EvalSplit split;
  split.dataset = dataset;
  std::vector<bool> held(ds.interactions.size(), false);
  std::size_t short_lists = 0;
  for (std::uint32_t u = 0; u < m; ++u) {
    const auto& mine = by_user[u];
    if (mine.size() < 2) {
      split.excluded_users.push_back(u);
      continue;
    }
    // Latest by timestamp; later file position wins ties. Without timestamps, the last in file order.
    std::size_t pick = mine.front();
    for (auto i : mine) {
      const auto& x = ds.interactions[i];
      const auto& best = ds.interactions[pick];
      if (!ds.has_timestamps || !(x.timestamp < best.timestamp)) pick = i;
    }
    held[pick] = true;

    std::vector<std::uint32_t> seen;
    for (auto i : mine) seen.push_back(ds.interactions[i].item);
    std::sort(seen.begin(), seen.end());
    std::vector<std::uint32_t> unseen;
    unseen.reserve(n);
    for (std::uint32_t j = 0; j < n; ++j)
      if (!std::binary_search(seen.begin(), seen.end(), j)) unseen.push_back(j);
    const std::size_t take = std::min(candidates, unseen.size());
    if (take < candidates) ++short_lists;
    Rng rng = make_rng(derive_seed(seed, fnv1a(ds.desc.name), u));
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick_at(i, unseen.size() - 1);
      std::swap(unseen[i], unseen[pick_at(rng)]);
    }
    unseen.resize(take);
    split.tests.push_back(TestCase{u, ds.interactions[pick].item, std::move(unseen)});
  }
  if (short_lists)
    spdlog::warn("dataset {}: {} test users have fewer than {} unseen items; sampled all available", ds.desc.name,
                 short_lists, candidates);
  if (!split.excluded_users.empty())
    spdlog::warn("dataset {}: {} users with fewer than 2 interactions excluded from the test set", ds.desc.name,
                 split.excluded_users.size());
  for (std::size_t i = 0; i < ds.interactions.size(); ++i)
    if (!held[i]) split.train.push_back(ds.interactions[i]);
  return split;
}

std::size_t rank_test_item(double test_score, const std::vector<double>& candidate_scores) {
  std::size_t rank = 1;
  for (double s : candidate_scores)
    if (s >= test_score) ++rank;
  return rank;
}

double hr_at(const std::vector<std::size_t>& ranks, std::size_t n) {
  if (ranks.empty()) return 0.0;
  std::size_t hits = 0;
  for (auto r : ranks) hits += r <= n;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at(const std::vector<std::size_t>& ranks, std::size_t n) {
  if (ranks.empty()) return 0.0;
  double total = 0.0;
  for (auto r : ranks)
    if (r <= n) total += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return total / static_cast<double>(ranks.size());
}

DatasetReport evaluate(const ScoreFn& score, const EvalSplit& split, const std::string& name) {
  DatasetReport report;
  report.name = name;
  report.empty = split.tests.empty();
  std::vector<double> cand;
  for (const auto& t : split.tests) {
    cand.clear();
    for (auto c : t.candidates) cand.push_back(score(t.user, c));
    report.users.push_back(t.user);
    report.ranks.push_back(rank_test_item(score(t.user, t.item), cand));
  }
  for (std::size_t n = 1; n <= kMaxCutoff; ++n) {
    report.hr[n - 1] = hr_at(report.ranks, n);
    report.ndcg[n - 1] = ndcg_at(report.ranks, n);
  }
  return report;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<DatasetReport>& reports) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "dataset,N,hr,ndcg\n";
  for (const auto& r : reports)
    for (std::size_t n = 1; n <= kMaxCutoff; ++n)
      out << r.name << ',' << n << ',' << text::format_real(r.hr[n - 1]) << ',' << text::format_real(r.ndcg[n - 1])
          << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

void write_ranks_csv(const std::filesystem::path& path, const Corpus& corpus, const std::vector<EvalSplit>& splits,
                     const std::vector<DatasetReport>& reports) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "dataset,user,item,rank\n";
  for (std::size_t s = 0; s < splits.size() && s < reports.size(); ++s) {
    const auto& ds = corpus.dataset(splits[s].dataset);
    for (std::size_t t = 0; t < splits[s].tests.size(); ++t) {
      const auto& tc = splits[s].tests[t];
      out << ds.desc.name << ',' << ds.user_ids[tc.user] << ',' << ds.item_ids[tc.item] << ',' << reports[s].ranks[t]
          << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

void write_split(const std::filesystem::path& path, const Corpus& corpus, const EvalSplit& split) {
  const auto& ds = corpus.dataset(split.dataset);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : split.tests) {
    out << ds.user_ids[t.user] << '\t' << ds.item_ids[t.item] << '\t';
    for (std::size_t c = 0; c < t.candidates.size(); ++c) out << (c ? " " : "") << ds.item_ids[t.candidates[c]];
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

EvalSplit read_split(const std::filesystem::path& path, const Corpus& corpus, std::size_t dataset) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("eval", path.string());
  const auto& ds = corpus.dataset(dataset);
  EvalSplit split;
  split.dataset = dataset;
  std::vector<std::vector<std::uint32_t>> held(ds.desc.users);
  std::vector<bool> tested(ds.desc.users, false);
  std::string line;
  std::size_t line_no = 0;
  auto item = [&](const std::string& raw) {
    auto j = ds.item_index(raw);
    if (!j) throw MalformedLine(path.string(), line_no, "unknown item '" + raw + "'");
    return *j;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto f = text::split(line, '\t');
    if (f.size() != 3) throw MalformedLine(path.string(), line_no, "expected 3 tab-separated fields");
    auto u = ds.user_index(f[0]);
    if (!u) throw MalformedLine(path.string(), line_no, "unknown user '" + f[0] + "'");
    if (tested[*u]) throw MalformedLine(path.string(), line_no, "user listed twice");
    tested[*u] = true;
    TestCase t{*u, item(f[1]), {}};
    for (const auto& c : text::split_ws(f[2])) t.candidates.push_back(item(c));
    held[*u].push_back(t.item);
    split.tests.push_back(std::move(t));
  }
  std::sort(split.tests.begin(), split.tests.end(), [](const TestCase& a, const TestCase& b) { return a.user < b.user; });
  for (std::uint32_t u = 0; u < ds.desc.users; ++u)
    if (!tested[u]) split.excluded_users.push_back(u);
  for (const auto& x : ds.interactions)
    if (!(tested[x.user] && held[x.user].front() == x.item)) split.train.push_back(x);
  return split;
}

}  // namespace gacdr
