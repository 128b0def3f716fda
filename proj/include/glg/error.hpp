#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace glg {

enum class ErrorCode {
  validation,      // bad arguments, shape mismatch, malformed input
  numeric,         // SVD failure, non-finite values
  degenerate,      // zero-norm gradients
  ambiguous_label, // label inference criterion not unique
  unrecoverable,   // analytic recovery preconditions fail
  undefined_metric,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Validation and I/O problems are the caller's fault; everything else is a
  // numeric failure of the computation itself.
  bool is_validation() const noexcept {
    return code_ == ErrorCode::validation || code_ == ErrorCode::io;
  }

 private:
  ErrorCode code_;
};

// Raised by multi-node recoveries when a subset of nodes cannot be recovered.
class PartialRecoveryError : public Error {
 public:
  PartialRecoveryError(std::vector<int> nodes, const std::string& what)
      : Error(ErrorCode::unrecoverable, what), nodes_(std::move(nodes)) {}

  const std::vector<int>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<int> nodes_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorCode::validation, what);
}

}  // namespace glg
