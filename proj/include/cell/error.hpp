#pragma once

#include <stdexcept>
#include <string>

namespace cell {

/// Base for every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidPose : public Error {
public:
  using Error::Error;
};

class EncodeError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class UnsupportedSchema : public Error {
public:
  using Error::Error;
};

}  // namespace cell
