#pragma once

#include <stdexcept>
#include <string>

namespace hvs {

// Base of every error raised by the engine. The CLI prints what() on a single
// line, prefixed by kind(), so each subclass carries a stable machine tag.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

class InputTooSmallError : public Error {
 public:
  explicit InputTooSmallError(const std::string& m) : Error("input-too-small", m) {}
};

class InvalidArgumentError : public Error {
 public:
  explicit InvalidArgumentError(const std::string& m) : Error("invalid-argument", m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

// HVSF decoding failures. The tag distinguishes bad magic, unsupported
// version, unknown dtype and truncated/oversized payloads.
class FormatError : public Error {
 public:
  FormatError(std::string tag, const std::string& m) : Error("format:" + tag, m) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& m)
      : Error("parse", file + ":" + std::to_string(line) + ": " + m), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(std::size_t epoch, std::size_t step, const std::string& m)
      : Error("diverged", "epoch " + std::to_string(epoch) + " step " + std::to_string(step) + ": " + m) {}
};

}  // namespace hvs
