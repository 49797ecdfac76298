#include "fedrep/error.hpp"

namespace fedrep {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNonFinite: return "NonFinite";
    case ErrorKind::kSingular: return "Singular";
    case ErrorKind::kDimMismatch: return "DimMismatch";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kConfig: return "Config";
    case ErrorKind::kNumerical: return "Numerical";
  }
  return "Unknown";
}

}  // namespace fedrep
