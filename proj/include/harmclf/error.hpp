#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace harmclf {

// Process exit codes used by the CLI.
enum class ExitCode : int {
  ok = 0,
  config_error = 2,
  data_error = 3,
  training_failure = 4,
  partial_failure = 5,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::data_error; }
};

class DataError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::training_failure; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::config_error; }
};

// corpus
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateId : public DataError {
 public:
  explicit DuplicateId(const std::string& id) : DataError("duplicate id '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class UnknownLabel : public DataError {
 public:
  UnknownLabel(std::size_t line, const std::string& label)
      : DataError("line " + std::to_string(line) + ": unmapped label value '" + label + "'"),
        label_(label) {}
  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

class EmptyText : public DataError {
 public:
  EmptyText(std::size_t line, const std::string& id)
      : DataError("line " + std::to_string(line) + ": empty text for id '" + id + "'") {}
};

class DegenerateClass : public DataError {
 public:
  using DataError::DataError;
};

class EmptyDataset : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

// embeddings
class BatchEmbedError : public DataError {
 public:
  BatchEmbedError(const std::string& id, const std::string& reason)
      : DataError("embedding failed for id '" + id + "': " + reason), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class MissingEmbedding : public DataError {
 public:
  explicit MissingEmbedding(const std::string& id)
      : DataError("no embedding for id '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class RaggedEmbeddings : public DataError {
 public:
  using DataError::DataError;
};

class NonFiniteEmbedding : public DataError {
 public:
  using DataError::DataError;
};

// models
class NonFiniteInput : public TrainingError {
 public:
  using TrainingError::TrainingError;
};

class NonFiniteGradient : public TrainingError {
 public:
  explicit NonFiniteGradient(const std::string& parameter)
      : TrainingError("non-finite gradient in parameter '" + parameter + "'"),
        parameter_(parameter) {}
  const std::string& parameter() const noexcept { return parameter_; }

 private:
  std::string parameter_;
};

class EmptySequence : public DataError {
 public:
  using DataError::DataError;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

// metrics
class DegenerateLabels : public DataError {
 public:
  using DataError::DataError;
};

// Wraps a downstream failure with the pipeline stage it happened in.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(stage + ": " + cause.what()), stage_(std::move(stage)), code_(cause.exit_code()) {}
  StageError(std::string stage, const std::exception& cause)
      : Error(stage + ": " + cause.what()),
        stage_(std::move(stage)),
        code_(ExitCode::training_failure) {}
  const std::string& stage() const noexcept { return stage_; }
  ExitCode exit_code() const noexcept override { return code_; }

 private:
  std::string stage_;
  ExitCode code_;
};

}  // namespace harmclf
