#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpgp {

enum class ErrorCode {
  invalid_argument,
  numerical_symmetry,
  singular_matrix,
  not_positive_definite,
  rank_deficient_basis,
  numerical_failure,
  initialization_failure,
  fit_failure,
  oracle_misuse,
  config_error,
  io_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::numerical_symmetry: return "numerical_symmetry";
    case ErrorCode::singular_matrix: return "singular_matrix";
    case ErrorCode::not_positive_definite: return "not_positive_definite";
    case ErrorCode::rank_deficient_basis: return "rank_deficient_basis";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::initialization_failure: return "initialization_failure";
    case ErrorCode::fit_failure: return "fit_failure";
    case ErrorCode::oracle_misuse: return "oracle_misuse";
    case ErrorCode::config_error: return "config_error";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

/// Exception type thrown by every cpgp routine. The code is stable and is
/// what the command line tool maps onto its exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::invalid_argument, what);
}

}  // namespace detail
}  // namespace cpgp
