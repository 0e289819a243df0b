#include "confound/errors.hpp"

namespace confound {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::SingularPoint: return "SingularPoint";
    case ErrorKind::NoSolution: return "NoSolution";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::Degenerate: return "Degenerate";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace confound
