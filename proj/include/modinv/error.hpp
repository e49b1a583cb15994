#pragma once

#include <stdexcept>
#include <string>

namespace modinv {

// Error taxonomy shared by the library and the CLI exit-code contract:
// usage/config problems map to exit 64, I/O failures to 2, data and
// format integrity problems to 3, check failures to 1.
enum class ErrorKind {
  config,        // invalid configuration or flag combination
  shape,         // tensor dimension mismatch
  data,          // empty/unusable dataset
  format,        // bad magic or version in a file
  corruption,    // truncated or internally inconsistent file
  integrity,     // conflicting records (duplicate ids, label clashes)
  availability,  // instance left without any usable modality
  label,         // class index out of range
  contract,      // API precondition violated (e.g. missing rng)
  domain,        // numeric argument outside the metric's domain
  metric,        // metric undefined on the given inputs
  io,            // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
      return 64;
    case ErrorKind::io:
      return 2;
    default:
      return 3;
  }
}

}  // namespace modinv
