#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "gacdr/corpus.hpp"
#include "gacdr/matrix.hpp"

namespace gacdr {

/// Dense per-entity vectors; row index is the dense entity index.
struct EmbeddingMatrix {
  Matrix data;

  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(Matrix m) : data(std::move(m)) {}
  EmbeddingMatrix(std::size_t rows, std::size_t dim) : data(Matrix::Zero(rows, dim)) {}

  std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }
  bool all_finite() const { return data.allFinite(); }
};

/// User and item vectors of one dataset, plus which rows carry real content.
struct EntityEmbeddings {
  EmbeddingMatrix users;
  EmbeddingMatrix items;
  std::vector<bool> user_present;
  std::vector<bool> item_present;
};

/// TSV rows `kind<TAB>raw_id<TAB>f1 f2 ... fk`, written at float32 precision.
/// With `dim_header` the file starts with `#dim k`.
void write_embedding_file(const std::filesystem::path& path, const Dataset& dataset, const EntityEmbeddings& emb,
                          bool dim_header);

/// Reads a file written by write_embedding_file (header optional). Entities absent from the file
/// get zero rows and present=false; raw ids unknown to the dataset are skipped.
EntityEmbeddings read_embedding_file(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace gacdr
