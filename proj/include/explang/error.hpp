#pragma once

#include <stdexcept>
#include <string>

namespace explang {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters or violated preconditions supplied by a caller.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent configuration (profiles, registry, config files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Text carries too little language signal to be classified.
class UndetectableError : public Error {
 public:
  using Error::Error;
};

/// File system failures; the message always carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace explang
