#ifndef SCM_ERRORS_HPP
#define SCM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scm {

struct SourcePos {
  int line = 0;  // 1-based
  int col = 0;   // 1-based
};

/// Malformed assembly text. Carries the location of the offending token.
class parse_error : public std::runtime_error {
 public:
  parse_error(SourcePos pos, const std::string& what)
      : std::runtime_error("parse error at " + std::to_string(pos.line) + ":" +
                           std::to_string(pos.col) + ": " + what),
        pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

/// Program failed static checks against a registry and machine config.
class validation_error : public std::runtime_error {
 public:
  /// Validation failure not tied to a particular instruction (e.g. a bad
  /// config or cost-model file).
  explicit validation_error(const std::string& what)
      : std::runtime_error(what), instr_index_(size_t(-1)) {}
  validation_error(size_t instr_index, const std::string& what)
      : std::runtime_error("instruction " + std::to_string(instr_index) + ": " +
                           what),
        instr_index_(instr_index) {}
  size_t instr_index() const { return instr_index_; }

 private:
  size_t instr_index_;
};

/// Error raised while a program is running (codelet fault, bad memory
/// range, guard trip, ...).
class runtime_fault : public std::runtime_error {
 public:
  explicit runtime_fault(const std::string& what) : std::runtime_error(what) {}
};

/// A compute codelet tried to touch main memory.
class sandbox_violation : public runtime_fault {
 public:
  explicit sandbox_violation(const std::string& what) : runtime_fault(what) {}
};

/// The event loop has in-flight work but nothing can make progress.
class deadlock_error : public std::runtime_error {
 public:
  explicit deadlock_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace scm

#endif  // SCM_ERRORS_HPP
