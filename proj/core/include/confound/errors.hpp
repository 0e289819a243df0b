#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace confound {

enum class ErrorKind {
  InvalidInput,
  SingularPoint,
  NoSolution,
  RankDeficient,
  Degenerate,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Numerical or contract failure raised by the library. The kind is stable
/// and is what the CLI and the grid harness key their handling on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

}  // namespace confound
