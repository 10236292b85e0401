#include "gacdr/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "gacdr/error.hpp"
#include "gacdr/text_util.hpp"

namespace gacdr {

const char* to_string(EntityKind kind) { return kind == EntityKind::User ? "user" : "item"; }

EntityKind parse_entity_kind(const std::string& text) {
  if (text == "user") return EntityKind::User;
  if (text == "item") return EntityKind::Item;
  throw ValidationError("unknown entity kind '" + text + "'");
}

std::optional<std::uint32_t> Dataset::user_index(const std::string& raw) const {
  auto it = user_lookup_.find(raw);
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> Dataset::item_index(const std::string& raw) const {
  auto it = item_lookup_.find(raw);
  if (it == item_lookup_.end()) return std::nullopt;
  return it->second;
}

const std::string& Dataset::raw_id(EntityKind kind, std::uint32_t index) const {
  return kind == EntityKind::User ? user_ids.at(index) : item_ids.at(index);
}

bool Dataset::operator==(const Dataset& other) const {
  return desc == other.desc && user_ids == other.user_ids && item_ids == other.item_ids &&
         interactions == other.interactions && user_docs == other.user_docs && item_docs == other.item_docs &&
         has_timestamps == other.has_timestamps;
}

void Dataset::reindex() {
  user_lookup_.clear();
  item_lookup_.clear();
  for (std::uint32_t i = 0; i < user_ids.size(); ++i) user_lookup_.emplace(user_ids[i], i);
  for (std::uint32_t j = 0; j < item_ids.size(); ++j) item_lookup_.emplace(item_ids[j], j);
}

CommonRows AlignmentMap::common(std::size_t a, std::size_t b, EntityKind kind) const {
  CommonRows out;
  if (a == b) return out;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> rows;
  for (const auto& cls : classes(kind)) {
    std::optional<std::uint32_t> ia, ib;
    for (const auto& ref : cls) {
      if (ref.dataset == a) ia = ref.index;
      if (ref.dataset == b) ib = ref.index;
    }
    if (ia && ib) rows.emplace_back(*ia, *ib);
  }
  std::sort(rows.begin(), rows.end());
  for (auto [ra, rb] : rows) {
    out.rows_a.push_back(ra);
    out.rows_b.push_back(rb);
  }
  return out;
}

std::optional<std::size_t> Corpus::find_dataset(const std::string& name) const {
  for (std::size_t d = 0; d < datasets_.size(); ++d)
    if (datasets_[d].desc.name == name) return d;
  return std::nullopt;
}

Corpus Corpus::with_interactions(std::size_t dataset, std::vector<Interaction> interactions) const {
  Corpus copy = *this;
  Dataset& ds = copy.datasets_.at(dataset);
  for (const auto& x : interactions) {
    if (x.user >= ds.desc.users || x.item >= ds.desc.items)
      throw ShapeMismatch("interaction references an entity outside dataset " + ds.desc.name);
  }
  ds.interactions = std::move(interactions);
  ds.has_timestamps =
      std::all_of(ds.interactions.begin(), ds.interactions.end(), [](const Interaction& x) { return x.timestamp.has_value(); });
  return copy;
}

// ---------------------------------------------------------------------------------------------

std::size_t CorpusBuilder::add_dataset(const std::string& name, double max_rating) {
  if (name.empty()) throw ValidationError("dataset name must be non-empty");
  if (std::any_of(name.begin(), name.end(), [](unsigned char c) { return std::isspace(c) || c == ','; }))
    throw ValidationError("dataset name '" + name + "' must not contain whitespace or commas");
  if (!(max_rating > 0.0)) throw ValidationError("dataset " + name + ": max_rating must be positive");
  for (std::size_t d = 0; d < datasets_.size(); ++d) {
    if (datasets_[d].name != name) continue;
    if (datasets_[d].max_rating != max_rating)
      throw ConflictingMaxRating("dataset " + name + " declared with max_rating " +
                                 std::to_string(datasets_[d].max_rating) + " and " + std::to_string(max_rating));
    return d;
  }
  datasets_.push_back(RawDataset{name, max_rating, {}, {}, {}});
  return datasets_.size() - 1;
}

void CorpusBuilder::add_rating(std::size_t dataset, const std::string& user, const std::string& item, double rating,
                               std::optional<std::int64_t> timestamp) {
  auto& ds = datasets_.at(dataset);
  if (!(rating > 0.0) || rating > ds.max_rating)
    throw RatingOutOfRange("dataset " + ds.name + ": rating " + std::to_string(rating) + " for (" + user + ", " + item +
                           ") outside (0, " + std::to_string(ds.max_rating) + "]");
  ds.ratings.push_back(RawRating{user, item, rating, timestamp});
}

void CorpusBuilder::add_document(std::size_t dataset, EntityKind kind, const std::string& raw_id,
                                 const std::string& text) {
  auto& docs = kind == EntityKind::User ? datasets_.at(dataset).user_docs : datasets_.at(dataset).item_docs;
  auto& slot = docs[raw_id];
  if (!slot.empty()) slot += ' ';
  slot += text;
}

void CorpusBuilder::add_alignment(EntityKind kind, const std::string& dataset_a, const std::string& raw_a,
                                  const std::string& dataset_b, const std::string& raw_b) {
  links_.push_back(RawLink{kind, dataset_a, raw_a, dataset_b, raw_b});
}

namespace {

Dataset intern_dataset(const std::string& name, double max_rating, const std::vector<std::string>& users_raw,
                       const std::vector<std::string>& items_raw, std::size_t min_interactions,
                       const auto& ratings, const auto& user_docs, const auto& item_docs) {
  // Duplicate (user, item) pairs: the later line wins.
  std::map<std::pair<std::string, std::string>, std::size_t> last;
  for (std::size_t r = 0; r < ratings.size(); ++r) last[{ratings[r].user, ratings[r].item}] = r;
  std::vector<std::size_t> kept;
  kept.reserve(last.size());
  for (std::size_t r = 0; r < ratings.size(); ++r)
    if (last[{ratings[r].user, ratings[r].item}] == r) kept.push_back(r);

  // Drop users below the threshold until nothing changes.
  std::unordered_set<std::string> dropped;
  for (;;) {
    std::unordered_map<std::string, std::size_t> count;
    for (auto r : kept)
      if (!dropped.count(ratings[r].user)) ++count[ratings[r].user];
    std::size_t before = dropped.size();
    for (const auto& [user, c] : count)
      if (c < min_interactions) dropped.insert(user);
    if (dropped.size() == before) break;
  }

  Dataset ds;
  ds.desc.name = name;
  ds.desc.max_rating = max_rating;
  std::set<std::string> users;
  for (const auto& u : users_raw)
    if (!dropped.count(u)) users.insert(u);
  std::set<std::string> items(items_raw.begin(), items_raw.end());
  ds.user_ids.assign(users.begin(), users.end());
  ds.item_ids.assign(items.begin(), items.end());
  ds.desc.users = ds.user_ids.size();
  ds.desc.items = ds.item_ids.size();
  ds.reindex();

  ds.has_timestamps = true;
  for (auto r : kept) {
    const auto& raw = ratings[r];
    auto u = ds.user_index(raw.user);
    if (!u) continue;
    Interaction x;
    x.user = *u;
    x.item = *ds.item_index(raw.item);
    x.rating = raw.rating;
    x.timestamp = raw.timestamp;
    x.order = ds.interactions.size();
    if (!x.timestamp) ds.has_timestamps = false;
    ds.interactions.push_back(x);
  }

  ds.user_docs.assign(ds.desc.users, {});
  ds.item_docs.assign(ds.desc.items, {});
  for (const auto& [raw, text] : user_docs)
    if (auto u = ds.user_index(raw)) ds.user_docs[*u] = text;
  for (const auto& [raw, text] : item_docs)
    if (auto j = ds.item_index(raw)) ds.item_docs[*j] = text;
  return ds;
}

struct UnionFind {
  std::map<EntityRef, EntityRef> parent;
  EntityRef find(EntityRef x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent.emplace(x, x);
      return x;
    }
    if (it->second == x) return x;
    EntityRef root = find(it->second);
    parent[x] = root;
    return root;
  }
  void unite(EntityRef a, EntityRef b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace

Corpus CorpusBuilder::build(const LoadOptions& options) const {
  Corpus corpus;
  for (const auto& raw : datasets_) {
    std::vector<std::string> users, items;
    for (const auto& r : raw.ratings) {
      users.push_back(r.user);
      items.push_back(r.item);
    }
    corpus.datasets_.push_back(intern_dataset(raw.name, raw.max_rating, users, items,
                                              options.min_interactions_per_user, raw.ratings, raw.user_docs,
                                              raw.item_docs));
    const auto& ds = corpus.datasets_.back();
    if (ds.desc.users == 0) spdlog::warn("dataset {} has no users after filtering", ds.desc.name);
  }

  UnionFind uf[2];
  for (const auto& link : links_) {
    auto da = corpus.find_dataset(link.dataset_a);
    auto db = corpus.find_dataset(link.dataset_b);
    if (!da || !db)
      throw ValidationError("alignment references unknown dataset '" + (da ? link.dataset_b : link.dataset_a) + "'");
    if (*da == *db) throw ValidationError("alignment links two entities of dataset " + link.dataset_a);
    const Dataset& a = corpus.datasets_[*da];
    const Dataset& b = corpus.datasets_[*db];
    auto ia = link.kind == EntityKind::User ? a.user_index(link.raw_a) : a.item_index(link.raw_a);
    auto ib = link.kind == EntityKind::User ? b.user_index(link.raw_b) : b.item_index(link.raw_b);
    if (!ia || !ib) {
      spdlog::debug("alignment {} {}:{} <-> {}:{} skipped (entity absent)", to_string(link.kind), link.dataset_a,
                    link.raw_a, link.dataset_b, link.raw_b);
      continue;
    }
    uf[static_cast<int>(link.kind)].unite(EntityRef{link.kind, *da, *ia}, EntityRef{link.kind, *db, *ib});
  }

  for (EntityKind kind : {EntityKind::User, EntityKind::Item}) {
    auto& u = uf[static_cast<int>(kind)];
    std::map<EntityRef, std::vector<EntityRef>> by_root;
    std::vector<EntityRef> keys;
    for (const auto& [ref, _] : u.parent) keys.push_back(ref);
    for (const auto& ref : keys) by_root[u.find(ref)].push_back(ref);

    auto& classes = kind == EntityKind::User ? corpus.alignment_.user_classes_ : corpus.alignment_.item_classes_;
    auto& links = kind == EntityKind::User ? corpus.alignment_.user_links_ : corpus.alignment_.item_links_;
    for (auto& [root, members] : by_root) {
      std::sort(members.begin(), members.end());
      for (std::size_t i = 1; i < members.size(); ++i) {
        if (members[i].dataset == members[i - 1].dataset) {
          const auto& ds = corpus.datasets_[members[i].dataset];
          throw DuplicateAlignment(std::string(to_string(kind)) + " " + ds.raw_id(kind, members[i - 1].index) +
                                   " and " + ds.raw_id(kind, members[i].index) + " of dataset " + ds.desc.name +
                                   " are aligned to the same entity");
        }
      }
      for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j) links.emplace_back(members[i], members[j]);
      classes.push_back(std::move(members));
    }
    std::sort(classes.begin(), classes.end());
    std::sort(links.begin(), links.end());
  }
  return corpus;
}

// ---------------------------------------------------------------------------------------------

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

double parse_real(const std::string& field, const std::string& file, std::size_t line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw MalformedLine(file, line_no, "expected a number, got '" + field + "'");
  return value;
}

std::int64_t parse_int(const std::string& field, const std::string& file, std::size_t line_no) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw MalformedLine(file, line_no, "expected an integer, got '" + field + "'");
  return value;
}

}  // namespace

CorpusManifest CorpusManifest::read(const std::filesystem::path& path) {
  auto in = open_input(path);
  const auto base = path.parent_path();
  const std::string file = path.string();
  CorpusManifest manifest;
  std::map<std::string, std::size_t> index;
  std::set<std::string> seen_max;
  auto dataset_for = [&](const std::string& name, std::size_t line_no) -> DatasetFiles& {
    auto it = index.find(name);
    if (it == index.end()) throw MalformedLine(file, line_no, "dataset '" + name + "' used before declaration");
    return manifest.datasets[it->second];
  };
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    auto text = text::trim(line);
    if (text.empty() || text.front() == '#') continue;
    auto eq = text.find('=');
    if (eq == std::string::npos) throw MalformedLine(file, line_no, "expected 'key = value'");
    std::string key(text::trim(text.substr(0, eq)));
    std::string value(text::trim(text.substr(eq + 1)));
    if (key.empty() || value.empty()) throw MalformedLine(file, line_no, "empty key or value");

    if (key == "dataset") {
      if (index.count(value)) throw MalformedLine(file, line_no, "dataset '" + value + "' declared twice");
      index[value] = manifest.datasets.size();
      manifest.datasets.push_back(DatasetFiles{value, {}, std::nullopt, 0.0});
    } else if (key == "alignment") {
      manifest.alignment = resolve(value);
    } else {
      auto dot = key.rfind('.');
      if (dot == std::string::npos) throw MalformedLine(file, line_no, "unknown key '" + key + "'");
      auto& ds = dataset_for(key.substr(0, dot), line_no);
      auto field = key.substr(dot + 1);
      if (field == "ratings") {
        ds.ratings = resolve(value);
      } else if (field == "content") {
        ds.content = resolve(value);
      } else if (field == "max_rating") {
        double r = parse_real(value, file, line_no);
        if (seen_max.count(ds.name) && ds.max_rating != r)
          throw ConflictingMaxRating("dataset " + ds.name + " declares max_rating twice with different values");
        seen_max.insert(ds.name);
        ds.max_rating = r;
      } else {
        throw MalformedLine(file, line_no, "unknown key '" + key + "'");
      }
    }
  }
  for (const auto& ds : manifest.datasets) {
    if (ds.ratings.empty()) throw ValidationError(file + ": dataset " + ds.name + " has no ratings file");
    if (!seen_max.count(ds.name)) throw ValidationError(file + ": dataset " + ds.name + " has no max_rating");
  }
  if (manifest.datasets.empty()) throw ValidationError(file + ": no datasets declared");
  return manifest;
}

Corpus load_corpus(const CorpusManifest& manifest, const LoadOptions& options) {
  CorpusBuilder builder;
  for (const auto& files : manifest.datasets) {
    const std::size_t d = builder.add_dataset(files.name, files.max_rating);

    auto in = open_input(files.ratings);
    const std::string file = files.ratings.string();
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
      if (line.empty() || line.front() == '#') continue;
      auto f = text::split(line, '\t');
      if (f.size() < 3 || f.size() > 4) throw MalformedLine(file, line_no, "expected 3 or 4 tab-separated fields");
      if (f[0].empty() || f[1].empty()) throw MalformedLine(file, line_no, "empty raw id");
      double rating = parse_real(f[2], file, line_no);
      std::optional<std::int64_t> ts;
      if (f.size() == 4 && !f[3].empty()) ts = parse_int(f[3], file, line_no);
      builder.add_rating(d, f[0], f[1], rating, ts);
    }

    if (files.content) {
      auto cin = open_input(*files.content);
      const std::string cfile = files.content->string();
      for (std::size_t line_no = 1; std::getline(cin, line); ++line_no) {
        if (line.empty() || line.front() == '#') continue;
        auto f = text::split(line, '\t', 3);
        if (f.size() != 3) throw MalformedLine(cfile, line_no, "expected kind<TAB>raw_id<TAB>text");
        EntityKind kind;
        try {
          kind = parse_entity_kind(f[0]);
        } catch (const ValidationError& e) {
          throw MalformedLine(cfile, line_no, e.what());
        }
        builder.add_document(d, kind, f[1], f[2]);
      }
    }
  }

  if (manifest.alignment) {
    auto in = open_input(*manifest.alignment);
    const std::string file = manifest.alignment->string();
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
      if (line.empty() || line.front() == '#') continue;
      auto f = text::split(line, '\t');
      if (f.size() != 5) throw MalformedLine(file, line_no, "expected 5 tab-separated fields");
      EntityKind kind;
      try {
        kind = parse_entity_kind(f[0]);
      } catch (const ValidationError& e) {
        throw MalformedLine(file, line_no, e.what());
      }
      builder.add_alignment(kind, f[1], f[2], f[3], f[4]);
    }
  }
  return builder.build(options);
}

Corpus load_corpus(const std::filesystem::path& manifest_path, const LoadOptions& options) {
  return load_corpus(CorpusManifest::read(manifest_path), options);
}

CommonRows common_entities(const Corpus& corpus, std::size_t a, std::size_t b, EntityKind kind) {
  return corpus.alignment().common(a, b, kind);
}

MatrixStats interaction_matrix_stats(const Corpus& corpus, std::size_t dataset) {
  const auto& ds = corpus.dataset(dataset);
  MatrixStats s;
  s.users = ds.desc.users;
  s.items = ds.desc.items;
  s.interactions = ds.interactions.size();
  const double cells = static_cast<double>(s.users) * static_cast<double>(s.items);
  s.density = cells > 0 ? static_cast<double>(s.interactions) / cells : 0.0;
  return s;
}

}  // namespace gacdr
