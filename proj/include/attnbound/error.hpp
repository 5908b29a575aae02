#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace attnbound {

enum class ErrorKind {
  format,
  unsupported_dtype,
  data,
  io,
  manifest,
  missing_file,
  dimension,
  range,
  contract,
  capacity,
  packing,
  input,
  assumption_violation,
  degenerate_embedding,
  no_complement,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every recoverable failure raised by the library. The kind lets callers
/// (the CLI in particular) tell bad input apart from internal faults.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::unsupported_dtype: return "unsupported-dtype";
    case ErrorKind::data: return "data";
    case ErrorKind::io: return "io";
    case ErrorKind::manifest: return "manifest";
    case ErrorKind::missing_file: return "missing-file";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::range: return "range";
    case ErrorKind::contract: return "contract";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::packing: return "packing";
    case ErrorKind::input: return "input";
    case ErrorKind::assumption_violation: return "assumption-violation";
    case ErrorKind::degenerate_embedding: return "degenerate-embedding";
    case ErrorKind::no_complement: return "no-complement";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace attnbound
