#include "gacdr/fusion.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "gacdr/autodiff.hpp"
#include "gacdr/error.hpp"
#include "gacdr/text_util.hpp"

namespace gacdr {

const char* to_string(FusionMode mode) { return mode == FusionMode::Attention ? "attention" : "average"; }

FusionMode parse_fusion_mode(const std::string& text) {
  if (text == "attention") return FusionMode::Attention;
  if (text == "average") return FusionMode::Average;
  throw ConfigError("fusion.mode", "expected attention or average, got '" + text + "'");
}

std::optional<std::size_t> SharingGroup::position(std::size_t dataset) const {
  auto it = std::find(members.begin(), members.end(), dataset);
  if (it == members.end()) return std::nullopt;
  return static_cast<std::size_t>(it - members.begin());
}

std::vector<SharingGroup> build_sharing_groups(const Corpus& corpus) {
  std::vector<SharingGroup> out;
  for (EntityKind kind : {EntityKind::User, EntityKind::Item}) {
    std::map<std::vector<std::size_t>, SharingGroup> by_members;
    for (const auto& cls : corpus.alignment().classes(kind)) {
      std::vector<std::size_t> members;
      for (const auto& ref : cls) members.push_back(ref.dataset);
      auto& group = by_members[members];
      if (group.members.empty()) {
        group.kind = kind;
        group.members = members;
        group.rows.resize(members.size());
      }
      for (std::size_t p = 0; p < cls.size(); ++p) group.rows[p].push_back(cls[p].index);
    }
    for (auto& [members, group] : by_members) out.push_back(std::move(group));
  }
  return out;
}

AttentionParams AttentionParams::for_groups(const std::vector<SharingGroup>& groups, std::size_t dim) {
  AttentionParams params;
  params.dim = dim;
  for (const auto& g : groups)
    for (auto x : g.members)
      for (auto y : g.members) params.logits.try_emplace(Key{g.kind, x, y}, RowVector::Zero(static_cast<Eigen::Index>(dim)));
  return params;
}

const RowVector& AttentionParams::logit(EntityKind kind, std::size_t target, std::size_t source) const {
  auto it = logits.find(Key{kind, target, source});
  if (it == logits.end())
    throw ShapeMismatch("no attention logits for " + std::string(to_string(kind)) + " pair (" +
                        std::to_string(target) + ", " + std::to_string(source) + ")");
  return it->second;
}

std::string attention_param_name(EntityKind kind, std::size_t target, std::size_t source) {
  return std::string("attn/") + to_string(kind) + "/" + std::to_string(target) + "/" + std::to_string(source);
}

std::vector<RowVector> attention_weights(const SharingGroup& group, const AttentionParams& params, FusionMode mode,
                                         std::size_t target) {
  if (!group.position(target)) throw ShapeMismatch("dataset " + std::to_string(target) + " is not in the group");
  const auto s = group.members.size();
  const auto k = static_cast<Eigen::Index>(params.dim);
  std::vector<RowVector> weights;
  if (mode == FusionMode::Average) {
    weights.assign(s, RowVector::Constant(k, 1.0 / static_cast<double>(s)));
    return weights;
  }
  Matrix logits(static_cast<Eigen::Index>(s), k);
  for (std::size_t p = 0; p < s; ++p) {
    const auto& row = params.logit(group.kind, target, group.members[p]);
    if (row.size() != k) throw DimMismatch("attention logits have the wrong width");
    logits.row(static_cast<Eigen::Index>(p)) = row;
  }
  Matrix w = ad::softmax_columns(logits);
  for (std::size_t p = 0; p < s; ++p) weights.emplace_back(w.row(static_cast<Eigen::Index>(p)));
  return weights;
}

Matrix fuse(const SharingGroup& group, const std::vector<RowVector>& weights, const std::vector<Matrix>& embeddings) {
  if (weights.size() != group.members.size()) throw DimMismatch("one weight row per member required");
  const auto n = static_cast<Eigen::Index>(group.size());
  Matrix out;
  for (std::size_t p = 0; p < group.members.size(); ++p) {
    const Matrix& e = embeddings.at(group.members[p]);
    if (e.cols() != weights[p].size())
      throw DimMismatch("embedding width " + std::to_string(e.cols()) + " differs from weight width " +
                        std::to_string(weights[p].size()));
    Matrix part(n, e.cols());
    for (Eigen::Index r = 0; r < n; ++r) part.row(r) = e.row(group.rows[p][static_cast<std::size_t>(r)]);
    part.array().rowwise() *= weights[p].array();
    if (p == 0) {
      out = std::move(part);
    } else {
      if (out.cols() != part.cols()) throw DimMismatch("member embeddings differ in width");
      out = out + part;
    }
  }
  return out;
}

Matrix fuse_users(const SharingGroup& group, const AttentionParams& params, FusionMode mode,
                  const std::vector<Matrix>& embeddings, std::size_t target) {
  return fuse(group, attention_weights(group, params, mode, target), embeddings);
}

Matrix fuse_items(const SharingGroup& group, const AttentionParams& params, FusionMode mode,
                  const std::vector<Matrix>& embeddings, std::size_t target) {
  return fuse(group, attention_weights(group, params, mode, target), embeddings);
}

FusedRows collect_fused_rows(EntityKind kind, std::size_t dataset, const std::vector<SharingGroup>& groups,
                             const AttentionParams& params, FusionMode mode, const std::vector<Matrix>& embeddings) {
  FusedRows out;
  std::vector<Matrix> parts;
  Eigen::Index total = 0;
  for (const auto& g : groups) {
    if (g.kind != kind) continue;
    auto pos = g.position(dataset);
    if (!pos) continue;
    parts.push_back(fuse(g, attention_weights(g, params, mode, dataset), embeddings));
    total += parts.back().rows();
    out.rows.insert(out.rows.end(), g.rows[*pos].begin(), g.rows[*pos].end());
  }
  out.values = Matrix(total, static_cast<Eigen::Index>(params.dim));
  Eigen::Index at = 0;
  for (const auto& part : parts) {
    out.values.middleRows(at, part.rows()) = part;
    at += part.rows();
  }
  return out;
}

namespace {

Matrix assemble_one(const Corpus& corpus, std::size_t dataset, EntityKind kind, const FusedRows& fused,
                    const Matrix& base) {
  const auto& ds = corpus.dataset(dataset);
  if (static_cast<std::size_t>(base.rows()) != ds.entity_count(kind))
    throw ShapeMismatch(std::string("base ") + to_string(kind) + " embedding has " + std::to_string(base.rows()) +
                        " rows, dataset has " + std::to_string(ds.entity_count(kind)));
  std::set<std::uint32_t> common;
  for (const auto& cls : corpus.alignment().classes(kind))
    for (const auto& ref : cls)
      if (ref.dataset == dataset) common.insert(ref.index);
  std::set<std::uint32_t> covered(fused.rows.begin(), fused.rows.end());
  for (auto r : common)
    if (!covered.count(r))
      throw CoverageGap(std::string("common ") + to_string(kind) + " '" + ds.raw_id(kind, r) + "' of dataset " +
                        ds.desc.name + " has no fused row");
  for (auto r : covered)
    if (!common.count(r))
      throw CoverageGap(std::string(to_string(kind)) + " row " + std::to_string(r) + " of dataset " + ds.desc.name +
                        " is fused but not aligned");
  if (fused.values.rows() != static_cast<Eigen::Index>(fused.rows.size()) ||
      (!fused.rows.empty() && fused.values.cols() != base.cols()))
    throw DimMismatch("fused rows do not match the base embedding width");

  Matrix out = base;
  for (std::size_t r = 0; r < fused.rows.size(); ++r) out.row(fused.rows[r]) = fused.values.row(static_cast<Eigen::Index>(r));
  return out;
}

}  // namespace

std::pair<Matrix, Matrix> assemble_inputs(const Corpus& corpus, std::size_t dataset, const FusedRows& users,
                                          const FusedRows& items, const Matrix& base_users, const Matrix& base_items) {
  return {assemble_one(corpus, dataset, EntityKind::User, users, base_users),
          assemble_one(corpus, dataset, EntityKind::Item, items, base_items)};
}

void write_attention_weights(const std::filesystem::path& path, const Corpus& corpus,
                             const std::vector<SharingGroup>& groups, const AttentionParams& params,
                             FusionMode mode) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& g : groups) {
    for (auto x : g.members) {
      auto w = attention_weights(g, params, mode, x);
      for (std::size_t p = 0; p < g.members.size(); ++p) {
        out << to_string(g.kind) << '\t' << corpus.dataset(x).desc.name << '\t'
            << corpus.dataset(g.members[p]).desc.name << '\t';
        for (Eigen::Index c = 0; c < w[p].size(); ++c) out << (c ? " " : "") << text::format_real(w[p][c]);
        out << '\n';
      }
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace gacdr
