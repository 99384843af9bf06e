#pragma once

#include <stdexcept>
#include <string>

namespace depman {

/// Evaluation point too close to a field source (object driven into an electrode).
class FieldDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace depman
