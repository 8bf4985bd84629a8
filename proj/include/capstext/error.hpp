#pragma once

#include <stdexcept>
#include <string>

namespace capstext {

// Error taxonomy shared by all modules. The CLI maps these to exit codes:
// usage -> 1, data errors (input/parse/io/shape/config/contract/eval) -> 2,
// numeric check failures -> 3.

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericCheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace capstext
