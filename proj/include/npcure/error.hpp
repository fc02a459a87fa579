#pragma once

#include <stdexcept>
#include <string>

namespace npcure {

//! Failure classes raised by the estimators, experiments and the oracle.
enum class ErrorKind
{
  invalid_argument,
  empty_sample,
  empty_neighborhood,
  no_uncensored,
  degenerate_cure,
  all_failed,
  support_guard,
  degenerate_density,
  bias_free,
  parse,
  io,
};

inline const char* to_string(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::empty_sample: return "empty sample";
    case ErrorKind::empty_neighborhood: return "empty neighborhood";
    case ErrorKind::no_uncensored: return "no uncensored observations";
    case ErrorKind::degenerate_cure: return "degenerate: all mass cured";
    case ErrorKind::all_failed: return "all replicates failed";
    case ErrorKind::support_guard: return "outside support guard";
    case ErrorKind::degenerate_density: return "degenerate covariate density";
    case ErrorKind::bias_free: return "bias-free degenerate";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::io: return "i/o error";
  }
  return "unknown";
}

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what)
    , kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

  //! True for failures caused by the data at hand rather than by the caller.
  bool is_numerical() const noexcept
  {
    switch (kind_) {
      case ErrorKind::empty_neighborhood:
      case ErrorKind::no_uncensored:
      case ErrorKind::degenerate_cure:
      case ErrorKind::all_failed:
      case ErrorKind::support_guard:
      case ErrorKind::degenerate_density:
      case ErrorKind::bias_free:
        return true;
      default:
        return false;
    }
  }

private:
  ErrorKind kind_;
};

inline void require(bool condition, const std::string& what)
{
  if (!condition)
    throw Error(ErrorKind::invalid_argument, what);
}

} // namespace npcure
