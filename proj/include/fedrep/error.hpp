#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedrep {

enum class ErrorKind {
  kNonFinite,
  kSingular,
  kDimMismatch,
  kEmptyInput,
  kConfig,
  kNumerical,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-checkable kind alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace fedrep
