#include "gacdr/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "gacdr/error.hpp"
#include "gacdr/text_util.hpp"

namespace gacdr {

const char* to_string(Objective objective) {
  return objective == Objective::Preliminary ? "preliminary" : "personalized";
}

Objective parse_objective(const std::string& text) {
  if (text == "preliminary") return Objective::Preliminary;
  if (text == "personalized") return Objective::Personalized;
  throw ConfigError("train.objective", "expected preliminary or personalized, got '" + text + "'");
}

const char* to_string(RegTarget target) { return target == RegTarget::Outputs ? "outputs" : "inputs"; }

RegTarget parse_reg_target(const std::string& text) {
  if (text == "outputs") return RegTarget::Outputs;
  if (text == "inputs") return RegTarget::Inputs;
  throw ConfigError("train.reg_target", "expected outputs or inputs, got '" + text + "'");
}

void TrainConfig::validate() const {
  if (negatives_per_positive < 1) throw ConfigError("train.negatives_per_positive", "must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr", "must be > 0");
  if (!(reg_lambda >= 0.0)) throw ConfigError("train.reg_lambda", "must be >= 0");
  if (!(theta > 0.0)) throw ConfigError("train.theta", "must be > 0");
}

std::vector<std::vector<std::uint32_t>> observed_items(const Dataset& dataset) {
  std::vector<std::vector<std::uint32_t>> out(dataset.desc.users);
  for (const auto& x : dataset.interactions) out[x.user].push_back(x.item);
  for (auto& v : out) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return out;
}

std::vector<Instance> positive_instances(const Dataset& dataset) {
  std::vector<Instance> out;
  out.reserve(dataset.interactions.size());
  for (const auto& x : dataset.interactions) out.push_back({x.user, x.item, x.rating});
  return out;
}

namespace {

std::vector<Instance> draw_negatives(const Dataset& dataset, const std::vector<std::vector<std::uint32_t>>& observed,
                                     const std::vector<Instance>& positives, std::size_t ratio, std::uint64_t seed) {
  const auto n = static_cast<std::uint32_t>(dataset.desc.items);
  Rng rng = make_rng(seed);
  std::vector<Instance> out;
  out.reserve(positives.size() * ratio);
  std::set<std::uint32_t> warned;
  if (n == 0) return out;
  std::uniform_int_distribution<std::uint32_t> any_item(0, n - 1);
  for (const auto& pos : positives) {
    const auto& seen = observed.at(pos.user);
    if (seen.size() >= n) {
      if (warned.insert(pos.user).second)
        spdlog::warn("dataset {}: user {} rated every item; no negatives drawn", dataset.desc.name,
                     dataset.user_ids[pos.user]);
      continue;
    }
    if (seen.size() * 2 > n) {
      // Dense user: draw from the explicit complement, same distribution as rejection.
      std::vector<std::uint32_t> unseen;
      for (std::uint32_t j = 0; j < n; ++j)
        if (!std::binary_search(seen.begin(), seen.end(), j)) unseen.push_back(j);
      std::uniform_int_distribution<std::size_t> pick(0, unseen.size() - 1);
      for (std::size_t r = 0; r < ratio; ++r) out.push_back({pos.user, unseen[pick(rng)], 0.0});
      continue;
    }
    for (std::size_t r = 0; r < ratio; ++r) {
      std::uint32_t j;
      do j = any_item(rng);
      while (std::binary_search(seen.begin(), seen.end(), j));
      out.push_back({pos.user, j, 0.0});
    }
  }
  return out;
}

}  // namespace

std::vector<Instance> sample_negatives(const Dataset& dataset, const std::vector<Instance>& positives,
                                       std::size_t ratio, std::uint64_t seed) {
  return draw_negatives(dataset, observed_items(dataset), positives, ratio, seed);
}

double nce_loss(double y, double max_rating, double prediction) {
  const double t = y / max_rating;
  return -(t * std::log(prediction) + (1.0 - t) * std::log(1.0 - prediction));
}

// ---------------------------------------------------------------------------------------------

ModelTape::ModelTape(ad::Tape& tape, const GaModel& model, bool finetune_base)
    : tape_(tape), model_(model), finetune_base_(finetune_base) {}

ad::Var ModelTape::base_rows(std::size_t dataset, EntityKind kind, const std::vector<std::uint32_t>& rows) {
  if (finetune_base_) return ad::gather_rows(tape_.param(model_.params(), GaModel::base_param_name(dataset, kind)), rows);
  const Matrix& base = model_.base(dataset, kind);
  Matrix out(static_cast<Eigen::Index>(rows.size()), base.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = base.row(rows[r]);
  return tape_.constant(std::move(out));
}

const std::vector<ad::Var>& ModelTape::weights(std::size_t group, std::size_t target) {
  auto key = std::make_pair(group, target);
  auto it = weight_cache_.find(key);
  if (it != weight_cache_.end()) return it->second;
  const auto& g = model_.groups().at(group);
  const auto s = g.members.size();
  std::vector<ad::Var> w;
  if (model_.fusion() == FusionMode::Average) {
    ad::Var uniform = tape_.constant(RowVector::Constant(static_cast<Eigen::Index>(model_.k()), 1.0 / static_cast<double>(s)));
    w.assign(s, uniform);
  } else {
    std::vector<ad::Var> logits;
    for (auto y : g.members) logits.push_back(tape_.param(model_.params(), attention_param_name(g.kind, target, y)));
    ad::Var soft = ad::softmax_over_rows(ad::stack_rows(logits));
    for (std::size_t p = 0; p < s; ++p) w.push_back(ad::gather_rows(soft, {static_cast<std::uint32_t>(p)}));
  }
  return weight_cache_.emplace(key, std::move(w)).first->second;
}

ad::Var ModelTape::inputs(std::size_t dataset, EntityKind kind, const std::vector<std::uint32_t>& rows) {
  if (rows.empty()) throw ShapeMismatch("inputs: no rows requested");
  std::map<std::int32_t, std::vector<std::pair<std::size_t, std::uint32_t>>> by_group;
  std::vector<std::size_t> plain_pos;
  std::vector<std::uint32_t> plain_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& s = model_.slot(dataset, kind, rows[i]);
    if (s.group < 0) {
      plain_pos.push_back(i);
      plain_rows.push_back(rows[i]);
    } else {
      by_group[s.group].emplace_back(i, s.row);
    }
  }

  std::vector<ad::Var> parts;
  std::vector<std::size_t> positions;
  for (const auto& [g, picks] : by_group) {
    const auto& group = model_.groups()[static_cast<std::size_t>(g)];
    const auto& w = weights(static_cast<std::size_t>(g), dataset);
    ad::Var acc;
    for (std::size_t p = 0; p < group.members.size(); ++p) {
      std::vector<std::uint32_t> src;
      src.reserve(picks.size());
      for (const auto& [pos, r] : picks) src.push_back(group.rows[p][r]);
      ad::Var part = ad::mul_row(base_rows(group.members[p], kind, src), w[p]);
      acc = p == 0 ? part : ad::add(acc, part);
    }
    parts.push_back(acc);
    for (const auto& [pos, r] : picks) positions.push_back(pos);
  }
  if (!plain_rows.empty()) {
    parts.push_back(base_rows(dataset, kind, plain_rows));
    positions.insert(positions.end(), plain_pos.begin(), plain_pos.end());
  }

  ad::Var stacked = parts.size() == 1 ? parts.front() : ad::stack_rows(parts);
  std::vector<std::uint32_t> perm(rows.size());
  bool identity = true;
  for (std::size_t s = 0; s < positions.size(); ++s) {
    perm[positions[s]] = static_cast<std::uint32_t>(s);
    identity = identity && positions[s] == s;
  }
  return identity ? stacked : ad::gather_rows(stacked, perm);
}

ad::Var ModelTape::outputs(std::size_t dataset, EntityKind kind, const std::vector<std::uint32_t>& rows) {
  ad::Var x = inputs(dataset, kind, rows);
  for (std::size_t l = 0; l < model_.structure().layers(); ++l)
    x = ad::relu(ad::matmul(x, tape_.param(model_.params(), tower_param_name(dataset, kind, l))));
  return x;
}

ad::Var ModelTape::pair_weights() {
  const auto& pairs = model_.pairs();
  if (pairs.empty()) throw NoCommonEntities("no dataset pair shares any entity");
  std::vector<ad::Var> logits;
  for (const auto& p : pairs) logits.push_back(tape_.param(model_.params(), GaModel::pair_param_name(p.a, p.b)));
  return ad::softmax_over_rows(ad::stack_rows(logits));
}

// ---------------------------------------------------------------------------------------------

namespace {

/// Sorted distinct values and, for each input, its position among them.
std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> dedupe(const std::vector<std::uint32_t>& v) {
  std::vector<std::uint32_t> uniq = v;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<std::uint32_t> index(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    index[i] = static_cast<std::uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), v[i]) - uniq.begin());
  return {std::move(uniq), std::move(index)};
}

}  // namespace

BatchTerms batch_terms(ModelTape& mt, std::size_t dataset, const std::vector<Instance>& batch,
                       const TrainConfig& config) {
  if (batch.empty()) throw ShapeMismatch("empty batch");
  const double max_r = mt.model().datasets().at(dataset).max_rating;
  std::vector<std::uint32_t> users, items;
  std::vector<double> targets;
  for (const auto& x : batch) {
    users.push_back(x.user);
    items.push_back(x.item);
    targets.push_back(x.target / max_r);
  }
  auto [uu, ui] = dedupe(users);
  auto [iu, ii] = dedupe(items);
  ad::Var p_in = mt.inputs(dataset, EntityKind::User, uu);
  ad::Var q_in = mt.inputs(dataset, EntityKind::Item, iu);
  ad::Var p = p_in, q = q_in;
  for (std::size_t l = 0; l < mt.model().structure().layers(); ++l) {
    p = ad::relu(ad::matmul(p, mt.tape().param(mt.model().params(), tower_param_name(dataset, EntityKind::User, l))));
    q = ad::relu(ad::matmul(q, mt.tape().param(mt.model().params(), tower_param_name(dataset, EntityKind::Item, l))));
  }
  ad::Var cos = ad::row_cosine(ad::gather_rows(p, ui), ad::gather_rows(q, ii));
  ad::Var yhat = ad::clamp(cos, kPredictionEps, 1.0 - kPredictionEps);
  BatchTerms out;
  out.nce = ad::soft_bce(yhat, targets);
  const bool on_outputs = config.reg_target == RegTarget::Outputs;
  out.reg = ad::scale(ad::add(ad::sum_squares(on_outputs ? p : p_in), ad::sum_squares(on_outputs ? q : q_in)),
                      config.reg_lambda);
  return out;
}

ad::Var preliminary_objective(ModelTape& mt, std::size_t dataset, const std::vector<Instance>& batch,
                              const TrainConfig& config) {
  auto terms = batch_terms(mt, dataset, batch, config);
  return ad::add(terms.nce, terms.reg);
}

namespace {

std::vector<std::size_t> sample_rows(std::size_t total, std::size_t cap, Rng* rng) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (cap == 0 || total <= cap) return idx;
  if (rng == nullptr) throw Error("penalty_sample needs a random stream");
  std::shuffle(idx.begin(), idx.end(), *rng);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

ad::Var attention_penalty(ModelTape& mt, const TrainConfig& config, Rng* rng) {
  const auto& pairs = mt.model().pairs();
  ad::Var lambda = mt.pair_weights();
  ad::Var total;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& link = pairs[p];
    ad::Var d2;
    for (EntityKind kind : {EntityKind::User, EntityKind::Item}) {
      const auto& rows = kind == EntityKind::User ? link.users : link.items;
      if (rows.empty()) continue;
      std::vector<std::uint32_t> ra, rb;
      for (auto i : sample_rows(rows.size(), config.penalty_sample, rng)) {
        ra.push_back(rows.rows_a[i]);
        rb.push_back(rows.rows_b[i]);
      }
      ad::Var term = ad::sum_squares(ad::sub(mt.outputs(link.a, kind, ra), mt.outputs(link.b, kind, rb)));
      d2 = d2.valid() ? ad::add(d2, term) : term;
    }
    ad::Var a = ad::add_scalar(ad::scale(ad::exp(ad::scale(d2, -1.0 / config.theta)), -1.0), 1.0);
    ad::Var weighted = ad::mul(ad::gather_rows(lambda, {static_cast<std::uint32_t>(p)}), a);
    total = total.valid() ? ad::add(total, weighted) : weighted;
  }
  return total;
}

ad::Var personalized_objective(ModelTape& mt, std::size_t dataset, const std::vector<Instance>& batch,
                               const TrainConfig& config, Rng* rng) {
  return ad::add(batch_terms(mt, dataset, batch, config).nce, attention_penalty(mt, config, rng));
}

double common_distance(const ModelOutputs& outputs, const PairLink& pair) {
  double total = 0.0;
  for (EntityKind kind : {EntityKind::User, EntityKind::Item}) {
    const auto& rows = kind == EntityKind::User ? pair.users : pair.items;
    const auto& a = kind == EntityKind::User ? outputs.users.at(pair.a) : outputs.items.at(pair.a);
    const auto& b = kind == EntityKind::User ? outputs.users.at(pair.b) : outputs.items.at(pair.b);
    for (std::size_t i = 0; i < rows.size(); ++i) total += (a.row(rows.rows_a[i]) - b.row(rows.rows_b[i])).squaredNorm();
  }
  return std::sqrt(total);
}

// ---------------------------------------------------------------------------------------------

std::vector<EpochRecord> train_loop(const Corpus& train_corpus, GaModel& model, const TrainConfig& config,
                                    const StepCallback& on_step) {
  config.validate();
  const std::size_t nd = train_corpus.dataset_count();
  if (nd != model.datasets().size()) throw ShapeMismatch("corpus and model disagree on the dataset count");
  for (std::size_t d = 0; d < nd; ++d) {
    const auto& a = train_corpus.dataset(d).desc;
    const auto& b = model.datasets()[d];
    if (a.name != b.name || a.users != b.users || a.items != b.items)
      throw ShapeMismatch("dataset " + a.name + " does not match the model's dataset " + b.name);
  }
  Objective objective = config.objective;
  if (objective == Objective::Personalized && model.pairs().empty()) {
    spdlog::warn("personalized objective requested but no datasets share entities; using the preliminary objective");
    objective = Objective::Preliminary;
  }

  std::vector<std::vector<Instance>> positives(nd);
  std::vector<std::vector<std::vector<std::uint32_t>>> observed(nd);
  std::vector<std::uint64_t> name_tags(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    positives[d] = positive_instances(train_corpus.dataset(d));
    observed[d] = observed_items(train_corpus.dataset(d));
    name_tags[d] = fnv1a(train_corpus.dataset(d).desc.name);
  }
  ad::AdamConfig adam;
  adam.lr = config.lr;
  Rng penalty_rng = make_rng(derive_seed(config.seed, 0x70656e616c7479ULL));

  std::vector<EpochRecord> trace;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::vector<std::vector<Instance>>> batches(nd);
    std::size_t steps = 0;
    for (std::size_t d = 0; d < nd; ++d) {
      std::vector<Instance> all = positives[d];
      auto neg = draw_negatives(train_corpus.dataset(d), observed[d], positives[d], config.negatives_per_positive,
                                derive_seed(config.seed, name_tags[d], epoch, 1));
      all.insert(all.end(), neg.begin(), neg.end());
      Rng shuffle_rng = make_rng(derive_seed(config.seed, name_tags[d], epoch, 2));
      std::shuffle(all.begin(), all.end(), shuffle_rng);
      for (std::size_t at = 0; at < all.size(); at += config.batch_size)
        batches[d].emplace_back(all.begin() + static_cast<std::ptrdiff_t>(at),
                                all.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), at + config.batch_size)));
      steps = std::max(steps, batches[d].size());
    }

    std::vector<double> nce_sum(nd, 0.0), reg_sum(nd, 0.0), pen_sum(nd, 0.0);
    std::vector<std::size_t> inst(nd, 0), active_steps(nd, 0);
    for (std::size_t s = 0; s < steps; ++s) {
      ad::Tape tape;
      ModelTape mt(tape, model, config.finetune_base);
      ad::Var loss;
      std::vector<std::size_t> active;
      for (std::size_t d = 0; d < nd; ++d) {
        if (s >= batches[d].size()) continue;
        active.push_back(d);
        auto terms = batch_terms(mt, d, batches[d][s], config);
        nce_sum[d] += terms.nce.scalar();
        inst[d] += batches[d][s].size();
        ++active_steps[d];
        ad::Var part = terms.nce;
        if (objective == Objective::Preliminary) {
          part = ad::add(terms.nce, terms.reg);
          reg_sum[d] += terms.reg.scalar();
        }
        loss = loss.valid() ? ad::add(loss, part) : part;
      }
      if (objective == Objective::Personalized) {
        // Each active dataset's objective carries the shared penalty once.
        ad::Var pen = attention_penalty(mt, config, &penalty_rng);
        for (auto d : active) pen_sum[d] += pen.scalar();
        loss = ad::add(loss, ad::scale(pen, static_cast<double>(active.size())));
      }
      const double value = loss.scalar();
      if (!std::isfinite(value)) throw NonFinite("training loss is not finite at epoch " + std::to_string(epoch));
      ad::adam_step(model.params(), tape.backward(loss), adam);
      ++step;
      if (on_step) on_step(StepInfo{epoch, step, model.pair_weights()}, model);
    }

    std::vector<double> distances;
    if (!model.pairs().empty()) {
      auto outputs = ModelOutputs::of(model);
      for (const auto& p : model.pairs()) distances.push_back(common_distance(outputs, p));
    }
    const auto lambda = model.pair_weights();
    for (std::size_t d = 0; d < nd; ++d) {
      EpochRecord rec;
      rec.epoch = epoch;
      rec.dataset = d;
      rec.instances = inst[d];
      const double n = inst[d] ? static_cast<double>(inst[d]) : 1.0;
      rec.mean_nce = nce_sum[d] / n;
      rec.objective = (nce_sum[d] + reg_sum[d] + pen_sum[d]) / n;
      rec.penalty = active_steps[d] ? pen_sum[d] / static_cast<double>(active_steps[d]) : 0.0;
      rec.lambda = lambda;
      rec.pair_distance = distances;
      trace.push_back(std::move(rec));
    }
    spdlog::debug("epoch {} done after {} steps", epoch, step);
  }
  return trace;
}

void write_trace_csv(const std::filesystem::path& path, const GaModel& model, const std::vector<EpochRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,dataset,objective,mean_nce,penalty";
  for (const auto& p : model.pairs())
    out << ",lambda_" << model.datasets()[p.a].name << "_" << model.datasets()[p.b].name;
  out << '\n';
  for (const auto& r : trace) {
    out << r.epoch << ',' << model.datasets().at(r.dataset).name << ',' << text::format_real(r.objective) << ','
        << text::format_real(r.mean_nce) << ',' << text::format_real(r.penalty);
    for (double l : r.lambda) out << ',' << text::format_real(l);
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace gacdr
