#include "gacdr/embedding.hpp"

#include <charconv>
#include <fstream>
#include <optional>

#include "gacdr/error.hpp"
#include "gacdr/text_util.hpp"

namespace gacdr {

void write_embedding_file(const std::filesystem::path& path, const Dataset& dataset, const EntityEmbeddings& emb,
                          bool dim_header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::size_t k = emb.users.dim() ? emb.users.dim() : emb.items.dim();
  if (dim_header) out << "#dim " << k << '\n';
  auto emit = [&](EntityKind kind, const EmbeddingMatrix& m, const std::vector<bool>& present) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (!present.empty() && !present[r]) continue;
      out << to_string(kind) << '\t' << dataset.raw_id(kind, static_cast<std::uint32_t>(r)) << '\t';
      for (std::size_t c = 0; c < m.dim(); ++c) {
        if (c) out << ' ';
        out << text::format_float(static_cast<float>(m.data(r, c)));
      }
      out << '\n';
    }
  };
  emit(EntityKind::User, emb.users, emb.user_present);
  emit(EntityKind::Item, emb.items, emb.item_present);
  if (!out) throw Error("write failed: " + path.string());
}

EntityEmbeddings read_embedding_file(const std::filesystem::path& path, const Dataset& dataset) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string file = path.string();
  std::optional<std::size_t> dim;
  struct Row {
    EntityKind kind;
    std::uint32_t index;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto f = text::split_ws(line.substr(1));
      if (f.size() == 2 && f[0] == "dim") dim = std::stoul(f[1]);
      continue;
    }
    auto f = text::split(line, '\t', 3);
    if (f.size() != 3) throw MalformedLine(file, line_no, "expected kind<TAB>raw_id<TAB>values");
    EntityKind kind;
    try {
      kind = parse_entity_kind(f[0]);
    } catch (const ValidationError& e) {
      throw MalformedLine(file, line_no, e.what());
    }
    auto idx = kind == EntityKind::User ? dataset.user_index(f[1]) : dataset.item_index(f[1]);
    std::vector<double> values;
    for (const auto& tok : text::split_ws(f[2])) {
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw MalformedLine(file, line_no, "bad number '" + tok + "'");
      values.push_back(static_cast<double>(v));
    }
    if (!dim) dim = values.size();
    if (values.size() != *dim) throw MalformedLine(file, line_no, "row has wrong dimension");
    if (idx) rows.push_back(Row{kind, *idx, std::move(values)});
  }
  const std::size_t k = dim.value_or(0);
  EntityEmbeddings emb;
  emb.users = EmbeddingMatrix(dataset.desc.users, k);
  emb.items = EmbeddingMatrix(dataset.desc.items, k);
  emb.user_present.assign(dataset.desc.users, false);
  emb.item_present.assign(dataset.desc.items, false);
  for (const auto& r : rows) {
    auto& m = r.kind == EntityKind::User ? emb.users : emb.items;
    auto& present = r.kind == EntityKind::User ? emb.user_present : emb.item_present;
    for (std::size_t c = 0; c < k; ++c) m.data(r.index, c) = r.values[c];
    present[r.index] = true;
  }
  return emb;
}

}  // namespace gacdr
