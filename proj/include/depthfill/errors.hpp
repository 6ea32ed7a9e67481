#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace depthfill {

/// Base class for all library errors. Subclasses map onto the CLI exit-code
/// contract: validation/contract failures exit 1, IO/format failures exit 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};
class RangeError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class EmptyObservationError : public Error {
 public:
  using Error::Error;
};
class IntegrityError : public Error {
 public:
  using Error::Error;
};
class NonFiniteError : public Error {
 public:
  using Error::Error;
};
class UsageError : public Error {
 public:
  using Error::Error;
};

// IO-side failures (exit code 2).
class IoError : public Error {
 public:
  using Error::Error;
};
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

namespace detail {
inline void str_append(std::ostringstream&) {}
template <typename A, typename... R>
void str_append(std::ostringstream& os, A&& a, R&&... rest) {
  os << std::forward<A>(a);
  str_append(os, std::forward<R>(rest)...);
}
}  // namespace detail

/// Concatenates arbitrary streamable arguments into a std::string.
template <typename... A>
std::string strcat_(A&&... a) {
  std::ostringstream os;
  detail::str_append(os, std::forward<A>(a)...);
  return os.str();
}

template <typename E, typename... A>
[[noreturn]] void raise(A&&... a) {
  throw E(strcat_(std::forward<A>(a)...));
}

}  // namespace depthfill
