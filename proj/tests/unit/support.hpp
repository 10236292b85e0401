#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "gacdr/corpus.hpp"

namespace gacdr::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gacdr-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Two small datasets "a" and "b" with users u0..u{m-1} and items; users u0..u{shared-1} aligned.
/// Every user rates `per_user` items chosen by a seeded stream; documents mention a cluster token.
inline Corpus toy_corpus(std::size_t users, std::size_t items, std::size_t per_user, std::size_t shared,
                         std::uint64_t seed = 3) {
  CorpusBuilder b;
  std::mt19937_64 rng(seed);
  for (const char* name : {"a", "b"}) {
    const auto d = b.add_dataset(name, 5.0);
    for (std::size_t u = 0; u < users; ++u) {
      const std::string uid = "u" + std::to_string(u);
      std::vector<std::size_t> picks;
      while (picks.size() < per_user) {
        std::size_t i = rng() % items;
        if (std::find(picks.begin(), picks.end(), i) == picks.end()) picks.push_back(i);
      }
      std::int64_t t = 0;
      for (auto i : picks) b.add_rating(d, uid, "i" + std::to_string(i), 1.0 + static_cast<double>(rng() % 5), ++t);
      b.add_document(d, EntityKind::User, uid, "topic" + std::to_string(u % 3) + " words here");
    }
    for (std::size_t i = 0; i < items; ++i)
      b.add_document(d, EntityKind::Item, "i" + std::to_string(i), "topic" + std::to_string(i % 3) + " item text");
  }
  for (std::size_t u = 0; u < shared; ++u)
    b.add_alignment(EntityKind::User, "a", "u" + std::to_string(u), "b", "u" + std::to_string(u));
  return b.build();
}

}  // namespace gacdr::testing
