#pragma once

#include <stdexcept>
#include <string>

namespace qnoise {

enum class Errc {
  config,           // violated parameter invariant
  validation,       // run-config document failed validation
  parse,            // malformed input document
  io,               // missing or unreadable file
  non_finite,       // NaN/Inf in an integrated trajectory
  small_angle,      // polarimeter rotation outside the linear regime
  alias,            // decimation violates Nyquist
  non_convergence,  // fitter or bootstrap failed
  singular,         // degenerate design matrix
  non_positive,     // log-log regression on non-positive values
  undefined,        // quantity not defined for the inputs (dB of a negative coefficient)
  internal,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::config: return "ConfigError";
    case Errc::validation: return "ValidationError";
    case Errc::parse: return "ParseError";
    case Errc::io: return "IoError";
    case Errc::non_finite: return "NonFinite";
    case Errc::small_angle: return "SmallAngleViolation";
    case Errc::alias: return "AliasError";
    case Errc::non_convergence: return "NonConvergence";
    case Errc::singular: return "Singular";
    case Errc::non_positive: return "NonPositive";
    case Errc::undefined: return "Undefined";
    case Errc::internal: return "InternalError";
  }
  return "InternalError";
}

// Errors caused by what the user supplied (exit status 1); everything else is 2.
inline bool is_user_error(Errc c) {
  return c == Errc::config || c == Errc::validation || c == Errc::parse || c == Errc::io;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace qnoise
