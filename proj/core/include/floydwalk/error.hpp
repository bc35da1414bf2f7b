#pragma once

#include <stdexcept>
#include <string>

namespace floydwalk {

// Error taxonomy. Hypothesis errors mean "the math hypothesis is not supported
// by the evidence on this input" (e.g. recurrent walk fed to the Green-based
// table builder); everything else is a usage or internal failure. The CLI maps
// Hypothesis to its own exit code so scripted pipelines can tell them apart.
enum class ErrKind {
  Config,       // bad or inconsistent configuration / arguments
  Range,        // query outside a documented domain (table range, ball radius)
  CapExceeded,  // resource guard hit (ball size, BFS frontier, subset count)
  Hypothesis,   // hypothesis evidence fails
  Numeric,      // solver / iteration did not converge where required
};

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrKind kind() const { return kind_; }

 private:
  ErrKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& what) { throw Error(ErrKind::Config, what); }
[[noreturn]] inline void throw_range(const std::string& what) { throw Error(ErrKind::Range, what); }
[[noreturn]] inline void throw_cap(const std::string& what) { throw Error(ErrKind::CapExceeded, what); }
[[noreturn]] inline void throw_hypothesis(const std::string& what) { throw Error(ErrKind::Hypothesis, what); }
[[noreturn]] inline void throw_numeric(const std::string& what) { throw Error(ErrKind::Numeric, what); }

}  // namespace floydwalk
