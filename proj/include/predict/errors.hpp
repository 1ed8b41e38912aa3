#pragma once

#include <stdexcept>
#include <string>

namespace predict {

enum class ErrorCode {
  invalid_input = 1,
  ill_conditioned = 2,        // constraint covariance not usable (not SPD / condition > limit)
  unsupported_order = 3,      // Wick moment order above the supported maximum
  degenerate_constraints = 4, // constraint rows not full rank
  tuning = 5,                 // chain acceptance rate outside the healthy window
  divergence = 6,             // non-finite state during integration
  invalid_profile = 7,        // covariance profile does not define an SPD prior
  io = 8,
  config = 9,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

} // namespace predict
