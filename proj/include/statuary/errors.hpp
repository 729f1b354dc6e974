#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace statuary {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NormalizationError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class ParameterError : public Error {
public:
  using Error::Error;
};

class FieldError : public Error {
public:
  using Error::Error;
};

class QueryError : public Error {
public:
  using Error::Error;
};

class NoLabelError : public Error {
public:
  using Error::Error;
};

class EmptyInputError : public Error {
public:
  using Error::Error;
};

/// Malformed VECF data; carries the byte offset at which decoding failed.
class FormatError : public Error {
public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  [[nodiscard]] auto offset() const noexcept -> std::uint64_t { return offset_; }

private:
  std::uint64_t offset_;
};

/// Override script failure; line is 1-based within the script.
class OverrideError : public Error {
public:
  OverrideError(std::size_t line, const std::string& what)
      : Error("override line " + std::to_string(line) + ": " + what), line_(line) {}

  [[nodiscard]] auto line() const noexcept -> std::size_t { return line_; }

private:
  std::size_t line_;
};

/// Malformed text input (gazetteer, manifest, config); line is 1-based, 0 if unknown.
class ParseError : public Error {
public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  [[nodiscard]] auto line() const noexcept -> std::size_t { return line_; }

private:
  std::size_t line_;
};

}  // namespace statuary
