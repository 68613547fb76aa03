#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace wopl {

enum class ErrorKind {
  InvalidArgument,
  Data,
  Parse,
  State,
  Shape,
  Divergence,
  Selection,
  Io,
};

const char* error_kind_name(ErrorKind kind);

// Base of every error the library throws. The kind drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::InvalidArgument, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(ErrorKind::Parse, what + " (at byte " + std::to_string(offset) + ")"),
        detail_(what),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::uint64_t offset_;
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(ErrorKind::State, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::Shape, what) {}
};

// Non-finite loss, gradient or parameter during training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, std::int64_t step)
      : Error(ErrorKind::Divergence, what + " (epoch " + std::to_string(epoch) +
                                         ", step " + std::to_string(step) + ")"),
        epoch_(epoch),
        step_(step) {}
  int epoch() const noexcept { return epoch_; }
  std::int64_t step() const noexcept { return step_; }

 private:
  int epoch_;
  std::int64_t step_;
};

class SelectionError : public Error {
 public:
  explicit SelectionError(const std::string& what) : Error(ErrorKind::Selection, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace wopl
