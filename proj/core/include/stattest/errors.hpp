#pragma once

#include <stdexcept>
#include <string>

namespace stattest {

/// Raised when a combinatorial guard (cell count, subset count, switch
/// count, ...) would be exceeded.
class guard_error : public std::runtime_error {
 public:
  explicit guard_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an iterative solver gives up (max_iter). Callers must treat
/// this as failure, never as a definite answer.
class solver_error : public std::runtime_error {
 public:
  explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

/// File / serialization problems.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stattest
