#pragma once

#include <stdexcept>
#include <string>

namespace xbt {

// Error categories shared between the C++ core and the C API status codes.
enum class ErrorCode {
  ok = 0,
  argument = 1,
  dimension = 2,
  range = 3,
  format = 4,
  mapping = 5,
  deployment = 6,
  catalog = 7,
  io = 8,
  numeric = 9,
  internal = 10,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) raise(code, what);
}

}  // namespace xbt
