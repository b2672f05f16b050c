#pragma once

#include <stdexcept>
#include <string>

namespace modeljoin {

enum class ErrorKind {
  Schema,              // malformed metadata/data, invariant violations at load
  Resolution,          // unknown tables/attributes, unbound sources
  UnsupportedShape,    // non-path skeletons, conflicting model orientations
  Capability,          // model asked for something its backend cannot answer
  EmptyJoin,           // sampling requested but the join is empty
  BudgetExceeded,      // rejection sampling ran out of attempts
  Parameter,           // infeasible user parameters
  ModelInconsistency,  // a model violates the support contracts inference relies on
  Io,                  // file system / serialization failures
  Internal,
};

const char* to_string(ErrorKind kind);

// Process exit code for the CLI; each kind gets a distinct nonzero code.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace modeljoin
