#pragma once

#include <stdexcept>
#include <string>

namespace gwe {

/// Broad failure class; the CLI maps each to a process exit code.
enum class ErrorKind {
  kUsage = 1,
  kData = 2,
  kNumeric = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return Error(ErrorKind::kUsage, what); }
inline Error data_error(const std::string& what) { return Error(ErrorKind::kData, what); }
inline Error numeric_error(const std::string& what) { return Error(ErrorKind::kNumeric, what); }

}  // namespace gwe
