#include "gacdr/textembed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

#include "gacdr/error.hpp"

namespace gacdr {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && (std::isspace(c) || std::ispunct(c) || std::iscntrl(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& documents) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& doc : documents)
    for (const auto& tok : doc) ++counts[tok];
  Vocabulary v;
  std::vector<double> weights;
  for (const auto& [tok, c] : counts) {
    v.ids_.emplace(tok, static_cast<std::uint32_t>(v.tokens_.size()));
    v.tokens_.push_back(tok);
    v.counts_.push_back(c);
    weights.push_back(std::pow(static_cast<double>(c), 0.75));
  }
  if (!weights.empty()) v.negative_ = std::discrete_distribution<std::uint32_t>(weights.begin(), weights.end());
  return v;
}

std::optional<std::uint32_t> Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

struct Sample {
  std::uint32_t doc;
  std::uint32_t word;
  std::vector<std::uint32_t> negatives;
};

double sample_loss(const Matrix& docs, const Matrix& words, const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) {
    total -= log_sigmoid(docs.row(s.doc).dot(words.row(s.word)));
    for (auto n : s.negatives) total -= log_sigmoid(-docs.row(s.doc).dot(words.row(n)));
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace

ContentEmbeddings train_pvdbow(const Corpus& corpus, std::size_t dataset, const PvDbowConfig& config) {
  const Dataset& ds = corpus.dataset(dataset);
  const std::size_t m = ds.desc.users, n = ds.desc.items, k = config.dim;

  std::vector<std::vector<std::string>> token_docs;
  token_docs.reserve(m + n);
  for (const auto& d : ds.user_docs) token_docs.push_back(tokenize(d));
  for (const auto& d : ds.item_docs) token_docs.push_back(tokenize(d));
  const Vocabulary vocab = Vocabulary::build(token_docs);
  if (vocab.size() == 0) throw EmptyVocabulary("dataset " + ds.desc.name + " has no document tokens");

  std::vector<std::vector<std::uint32_t>> docs(token_docs.size());
  std::vector<std::uint32_t> active;  // documents with at least one token
  std::size_t total_tokens = 0;
  for (std::size_t d = 0; d < token_docs.size(); ++d) {
    for (const auto& tok : token_docs[d]) docs[d].push_back(*vocab.id(tok));
    if (!docs[d].empty()) active.push_back(static_cast<std::uint32_t>(d));
    total_tokens += docs[d].size();
  }

  Rng rng = make_rng(derive_seed(config.seed, fnv1a(ds.desc.name), 0x7465787431ULL));
  Matrix doc_vecs = Matrix::Zero(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(k));
  Matrix word_vecs = Matrix::Zero(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(k));
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(k), 0.5 / static_cast<double>(k));
  for (auto d : active)
    for (std::size_t c = 0; c < k; ++c) doc_vecs(d, c) = init(rng);

  Rng sample_rng = make_rng(derive_seed(config.seed, fnv1a(ds.desc.name), 0x6576616cULL));
  std::vector<Sample> probe;
  {
    std::uniform_int_distribution<std::size_t> pick_doc(0, active.size() - 1);
    for (std::size_t s = 0; s < 1000; ++s) {
      auto d = active[pick_doc(sample_rng)];
      std::uniform_int_distribution<std::size_t> pick_word(0, docs[d].size() - 1);
      Sample smp{d, docs[d][pick_word(sample_rng)], {}};
      for (std::size_t q = 0; q < config.negatives; ++q) smp.negatives.push_back(vocab.sample_negative(sample_rng));
      probe.push_back(std::move(smp));
    }
  }

  ContentEmbeddings out;
  const double total_steps = static_cast<double>(config.epochs * total_tokens) + 1.0;
  std::size_t step = 0;
  RowVector grad_doc(k);
  std::vector<std::uint32_t> order = active;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto d : order) {
      for (auto word : docs[d]) {
        const double lr = config.lr * std::max(1e-4, 1.0 - static_cast<double>(step++) / total_steps);
        grad_doc.setZero();
        auto dv = doc_vecs.row(d);
        for (std::size_t q = 0; q <= config.negatives; ++q) {
          std::uint32_t target = word;
          double label = 1.0;
          if (q > 0) {
            target = vocab.sample_negative(rng);
            if (target == word) continue;
            label = 0.0;
          }
          auto wv = word_vecs.row(target);
          const double g = (label - sigmoid(dv.dot(wv))) * lr;
          grad_doc.noalias() += g * wv;
          wv.noalias() += g * dv;
        }
        dv += grad_doc;
      }
    }
    out.epoch_loss.push_back(sample_loss(doc_vecs, word_vecs, probe));
  }

  out.users = EmbeddingMatrix(doc_vecs.topRows(static_cast<Eigen::Index>(m)));
  out.items = EmbeddingMatrix(doc_vecs.bottomRows(static_cast<Eigen::Index>(n)));
  out.user_present.assign(m, false);
  out.item_present.assign(n, false);
  for (auto d : active) {
    if (d < m)
      out.user_present[d] = true;
    else
      out.item_present[d - m] = true;
  }
  return out;
}

double normalized_sim(const Eigen::Ref<const RowVector>& x, const Eigen::Ref<const RowVector>& y) {
  const double nx = x.norm(), ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return 0.0;
  const double cos = x.dot(y) / (nx * ny);
  return std::clamp((1.0 + cos) / 2.0, 0.0, 1.0);
}

}  // namespace gacdr
