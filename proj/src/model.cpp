#include "gacdr/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "gacdr/error.hpp"
#include "gacdr/text_util.hpp"

namespace gacdr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

GaModel GaModel::create(const Corpus& corpus, const std::vector<EntityEmbeddings>& base, const ModelConfig& config) {
  if (base.size() != corpus.dataset_count())
    throw ShapeMismatch("need base embeddings for " + std::to_string(corpus.dataset_count()) + " datasets, got " +
                        std::to_string(base.size()));
  GaModel m;
  m.k_ = config.k;
  m.structure_ = config.structure;
  m.fusion_ = config.fusion;
  for (std::size_t d = 0; d < corpus.dataset_count(); ++d) {
    const auto& ds = corpus.dataset(d);
    m.datasets_.push_back(ds.desc);
    const auto& e = base[d];
    if (e.users.rows() != ds.desc.users || e.items.rows() != ds.desc.items)
      throw ShapeMismatch("base embeddings of " + ds.desc.name + " do not match its entity counts");
    if (e.users.dim() != config.k || e.items.dim() != config.k)
      throw DimMismatch("base embeddings of " + ds.desc.name + " have dim " + std::to_string(e.users.dim()) +
                        ", model k is " + std::to_string(config.k));
    m.params_.add(base_param_name(d, EntityKind::User), e.users.data);
    m.params_.add(base_param_name(d, EntityKind::Item), e.items.data);
    init_towers(m.params_, d, ds.desc.name, config.k, config.structure, config.seed, config.init_sigma);
  }
  if (config.share) m.groups_ = build_sharing_groups(corpus);
  if (m.fusion_ == FusionMode::Attention) {
    for (const auto& [key, row] : AttentionParams::for_groups(m.groups_, config.k).logits) {
      auto [kind, x, y] = key;
      m.params_.add(attention_param_name(kind, x, y), Matrix(row));
    }
  }
  m.index();
  for (const auto& p : m.pairs_) m.params_.add(pair_param_name(p.a, p.b), Matrix::Zero(1, 1));
  return m;
}

void GaModel::index() {
  std::map<std::pair<std::size_t, std::size_t>, PairLink> links;
  user_slots_.assign(datasets_.size(), {});
  item_slots_.assign(datasets_.size(), {});
  for (std::size_t d = 0; d < datasets_.size(); ++d) {
    user_slots_[d].assign(datasets_[d].users, GroupSlot{});
    item_slots_[d].assign(datasets_[d].items, GroupSlot{});
  }
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& group = groups_[g];
    for (std::size_t p = 0; p < group.members.size(); ++p) {
      auto& slots = group.kind == EntityKind::User ? user_slots_.at(group.members[p]) : item_slots_.at(group.members[p]);
      for (std::size_t r = 0; r < group.size(); ++r)
        slots.at(group.rows[p][r]) = GroupSlot{static_cast<std::int32_t>(g), static_cast<std::uint32_t>(r)};
      for (std::size_t q = p + 1; q < group.members.size(); ++q) {
        auto& link = links[{group.members[p], group.members[q]}];
        link.a = group.members[p];
        link.b = group.members[q];
        auto& rows = group.kind == EntityKind::User ? link.users : link.items;
        rows.rows_a.insert(rows.rows_a.end(), group.rows[p].begin(), group.rows[p].end());
        rows.rows_b.insert(rows.rows_b.end(), group.rows[q].begin(), group.rows[q].end());
      }
    }
  }
  pairs_.clear();
  for (auto& [key, link] : links) {
    for (CommonRows* rows : {&link.users, &link.items}) {
      std::vector<std::pair<std::uint32_t, std::uint32_t>> zipped;
      for (std::size_t i = 0; i < rows->size(); ++i) zipped.emplace_back(rows->rows_a[i], rows->rows_b[i]);
      std::sort(zipped.begin(), zipped.end());
      for (std::size_t i = 0; i < zipped.size(); ++i) std::tie(rows->rows_a[i], rows->rows_b[i]) = zipped[i];
    }
    pairs_.push_back(std::move(link));
  }
}

std::string GaModel::base_param_name(std::size_t dataset, EntityKind kind) {
  return "base/" + std::to_string(dataset) + "/" + to_string(kind);
}

std::string GaModel::pair_param_name(std::size_t a, std::size_t b) {
  return "pair/" + std::to_string(a) + "/" + std::to_string(b);
}

const GroupSlot& GaModel::slot(std::size_t dataset, EntityKind kind, std::uint32_t row) const {
  return (kind == EntityKind::User ? user_slots_ : item_slots_).at(dataset).at(row);
}

std::optional<std::size_t> GaModel::find_dataset(const std::string& name) const {
  for (std::size_t d = 0; d < datasets_.size(); ++d)
    if (datasets_[d].name == name) return d;
  return std::nullopt;
}

AttentionParams GaModel::attention() const {
  AttentionParams a = AttentionParams::for_groups(groups_, k_);
  if (fusion_ == FusionMode::Attention)
    for (auto& [key, row] : a.logits) {
      auto [kind, x, y] = key;
      row = params_.value(attention_param_name(kind, x, y)).row(0);
    }
  return a;
}

const Matrix& GaModel::base(std::size_t dataset, EntityKind kind) const {
  return params_.value(base_param_name(dataset, kind));
}

Matrix GaModel::inputs(std::size_t dataset, EntityKind kind) const {
  std::vector<Matrix> bases;
  for (std::size_t d = 0; d < datasets_.size(); ++d) bases.push_back(base(d, kind));
  auto fused = collect_fused_rows(kind, dataset, groups_, attention(), fusion_, bases);
  Matrix out = bases[dataset];
  for (std::size_t r = 0; r < fused.rows.size(); ++r) out.row(fused.rows[r]) = fused.values.row(static_cast<Eigen::Index>(r));
  return out;
}

Matrix GaModel::outputs(std::size_t dataset, EntityKind kind) const {
  return tower_forward(tower_layers(params_, dataset, kind, structure_.layers()), inputs(dataset, kind));
}

std::vector<double> GaModel::pair_weights() const {
  if (pairs_.empty()) return {};
  Matrix logits(static_cast<Eigen::Index>(pairs_.size()), 1);
  for (std::size_t p = 0; p < pairs_.size(); ++p)
    logits(static_cast<Eigen::Index>(p), 0) = params_.value(pair_param_name(pairs_[p].a, pairs_[p].b))(0, 0);
  Matrix w = ad::softmax_columns(logits);
  return std::vector<double>(w.data(), w.data() + w.size());
}

bool GaModel::operator==(const GaModel& other) const {
  if (k_ != other.k_ || !(structure_ == other.structure_) || fusion_ != other.fusion_ ||
      !(datasets_ == other.datasets_) || groups_.size() != other.groups_.size())
    return false;
  for (std::size_t g = 0; g < groups_.size(); ++g)
    if (groups_[g].kind != other.groups_[g].kind || groups_[g].members != other.groups_[g].members ||
        groups_[g].rows != other.groups_[g].rows)
      return false;
  return params_ == other.params_;
}

ModelOutputs ModelOutputs::of(const GaModel& model) {
  ModelOutputs out;
  for (std::size_t d = 0; d < model.datasets().size(); ++d) {
    out.users.push_back(model.outputs(d, EntityKind::User));
    out.items.push_back(model.outputs(d, EntityKind::Item));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

namespace {

constexpr const char* kMagic = "gacdr-checkpoint 1";

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const GaModel& model) {
  std::ostringstream head;
  head << kMagic << '\n';
  head << "k " << model.k() << '\n';
  head << "structure " << model.structure().to_string() << '\n';
  head << "fusion " << to_string(model.fusion()) << '\n';
  head << "datasets " << model.datasets().size() << '\n';
  for (const auto& d : model.datasets())
    head << "dataset " << d.name << ' ' << text::format_real(d.max_rating) << ' ' << d.users << ' ' << d.items << '\n';
  head << "groups " << model.groups().size() << '\n';
  for (const auto& g : model.groups()) {
    head << "group " << to_string(g.kind) << ' ' << g.members.size() << ' ' << g.size();
    for (auto m : g.members) head << ' ' << m;
    head << '\n';
    for (const auto& rows : g.rows) {
      head << "rows";
      for (auto r : rows) head << ' ' << r;
      head << '\n';
    }
  }
  const auto& values = model.params().values();
  head << "tensors " << values.size() << '\n';
  std::uint64_t offset = 0;
  for (const auto& [name, m] : values) {
    head << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << ' ' << offset << '\n';
    offset += static_cast<std::uint64_t>(m.size());
  }
  head << "end\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::string text = head.str();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(&offset), sizeof offset);
  for (const auto& [name, m] : values) out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!out) throw Error("failed writing " + path.string());
}

GaModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("load", path.string());
  const std::string file = path.string();
  std::size_t line_no = 0;
  auto next = [&](const char* expect) {
    std::string line;
    if (!std::getline(in, line)) throw MalformedLine(file, line_no + 1, std::string("expected ") + expect);
    ++line_no;
    auto fields = text::split_ws(line);
    if (fields.empty() || fields[0] != expect) throw MalformedLine(file, line_no, std::string("expected ") + expect);
    return fields;
  };
  auto number = [&](const std::string& s) -> std::uint64_t {
    try {
      std::size_t used = 0;
      auto v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw MalformedLine(file, line_no, "bad integer '" + s + "'");
    }
  };
  auto arity = [&](const std::vector<std::string>& f, std::size_t n) {
    if (f.size() != n) throw MalformedLine(file, line_no, "expected " + std::to_string(n - 1) + " fields");
  };

  std::string magic;
  std::getline(in, magic);
  ++line_no;
  if (magic != kMagic) throw MalformedLine(file, line_no, "not a checkpoint");

  GaModel m;
  auto f = next("k");
  arity(f, 2);
  m.k_ = number(f[1]);
  f = next("structure");
  arity(f, 2);
  try {
    m.structure_ = TowerStructure::parse(f[1]);
  } catch (const BadStructure& e) {
    throw MalformedLine(file, line_no, e.what());
  }
  f = next("fusion");
  arity(f, 2);
  try {
    m.fusion_ = parse_fusion_mode(f[1]);
  } catch (const ConfigError& e) {
    throw MalformedLine(file, line_no, e.what());
  }
  f = next("datasets");
  arity(f, 2);
  const auto nd = number(f[1]);
  for (std::uint64_t d = 0; d < nd; ++d) {
    f = next("dataset");
    arity(f, 5);
    DatasetDescriptor desc;
    desc.name = f[1];
    try {
      desc.max_rating = std::stod(f[2]);
    } catch (const std::exception&) {
      throw MalformedLine(file, line_no, "bad max rating");
    }
    desc.users = number(f[3]);
    desc.items = number(f[4]);
    m.datasets_.push_back(desc);
  }
  f = next("groups");
  arity(f, 2);
  const auto ng = number(f[1]);
  for (std::uint64_t g = 0; g < ng; ++g) {
    f = next("group");
    if (f.size() < 4) throw MalformedLine(file, line_no, "short group line");
    SharingGroup group;
    try {
      group.kind = parse_entity_kind(f[1]);
    } catch (const ValidationError& e) {
      throw MalformedLine(file, line_no, e.what());
    }
    const auto members = number(f[2]);
    const auto size = number(f[3]);
    arity(f, 4 + members);
    for (std::uint64_t p = 0; p < members; ++p) {
      group.members.push_back(number(f[4 + p]));
      if (group.members.back() >= nd) throw MalformedLine(file, line_no, "member out of range");
    }
    for (std::uint64_t p = 0; p < members; ++p) {
      f = next("rows");
      arity(f, 1 + size);
      std::vector<std::uint32_t> rows;
      const auto& owner = m.datasets_[group.members[p]];
      const auto limit = group.kind == EntityKind::User ? owner.users : owner.items;
      for (std::uint64_t r = 0; r < size; ++r) {
        rows.push_back(static_cast<std::uint32_t>(number(f[1 + r])));
        if (rows.back() >= limit) throw MalformedLine(file, line_no, "row out of range");
      }
      group.rows.push_back(std::move(rows));
    }
    m.groups_.push_back(std::move(group));
  }
  f = next("tensors");
  arity(f, 2);
  const auto nt = number(f[1]);
  struct Entry {
    std::string name;
    std::uint64_t rows, cols, offset;
  };
  std::vector<Entry> entries;
  for (std::uint64_t t = 0; t < nt; ++t) {
    f = next("tensor");
    arity(f, 5);
    entries.push_back({f[1], number(f[2]), number(f[3]), number(f[4])});
  }
  next("end");

  std::uint64_t count = 0;
  if (!in.read(reinterpret_cast<char*>(&count), sizeof count)) throw MalformedLine(file, line_no + 1, "missing data block");
  std::vector<double> data(count);
  if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(double))))
    throw MalformedLine(file, line_no + 1, "truncated data block");
  for (const auto& e : entries) {
    if (e.offset + e.rows * e.cols > count) throw MalformedLine(file, line_no, "tensor " + e.name + " exceeds the data block");
    Matrix v(static_cast<Eigen::Index>(e.rows), static_cast<Eigen::Index>(e.cols));
    std::memcpy(v.data(), data.data() + e.offset, e.rows * e.cols * sizeof(double));
    m.params_.add(e.name, std::move(v));
  }
  m.index();
  for (std::size_t d = 0; d < m.datasets_.size(); ++d)
    for (EntityKind kind : {EntityKind::User, EntityKind::Item}) {
      if (!m.params_.contains(GaModel::base_param_name(d, kind)))
        throw ValidationError(file + ": missing base embedding for dataset " + m.datasets_[d].name);
      for (std::size_t l = 0; l < m.structure_.layers(); ++l)
        if (!m.params_.contains(tower_param_name(d, kind, l)))
          throw ValidationError(file + ": missing tower layer " + tower_param_name(d, kind, l));
    }
  return m;
}

}  // namespace gacdr
