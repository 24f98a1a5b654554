#pragma once

#include <stdexcept>
#include <string>

namespace sfcrl {

// Invalid scenario or experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: out-of-range action, backward without forward, etc.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Argument outside a function's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Broken internal invariant (failed audit, unknown event target).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sfcrl
