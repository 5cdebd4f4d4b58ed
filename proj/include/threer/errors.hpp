#pragma once

#include <stdexcept>
#include <string>

namespace threer {

// Error taxonomy shared by the library and the CLI exit-code contract
// (0 ok, 1 config, 2 I/O, 3 shape, 4 numeric).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

}  // namespace threer
