#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gacdr {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, inconsistent configs, missing artifacts.
/// The CLI maps these to exit code 1; everything else is exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class MalformedLine : public ValidationError {
 public:
  MalformedLine(std::string file, std::size_t line_no, const std::string& why)
      : ValidationError(file + ":" + std::to_string(line_no) + ": " + why),
        file_(std::move(file)),
        line_no_(line_no) {}
  const std::string& file() const { return file_; }
  std::size_t line_no() const { return line_no_; }

 private:
  std::string file_;
  std::size_t line_no_;
};

class DuplicateAlignment : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RatingOutOfRange : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConflictingMaxRating : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::string key, const std::string& why = "")
      : ValidationError("config: " + key + (why.empty() ? "" : ": " + why)), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class MissingArtifact : public ValidationError {
 public:
  MissingArtifact(std::string stage, std::string path)
      : ValidationError("stage '" + stage + "' requires missing artifact " + path),
        stage_(std::move(stage)),
        path_(std::move(path)) {}
  const std::string& stage() const { return stage_; }
  const std::string& path() const { return path_; }

 private:
  std::string stage_;
  std::string path_;
};

class EmptyVocabulary : public Error {
 public:
  using Error::Error;
};

class MissingContent : public Error {
 public:
  using Error::Error;
};

class IsolatedNode : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class DimMismatch : public Error {
 public:
  using Error::Error;
};

class CoverageGap : public Error {
 public:
  using Error::Error;
};

class BadStructure : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class NoCommonEntities : public Error {
 public:
  using Error::Error;
};

class InfeasibleDensity : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace gacdr
