#include "modeljoin/errors.hpp"

namespace modeljoin {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Resolution: return "resolution error";
    case ErrorKind::UnsupportedShape: return "unsupported shape";
    case ErrorKind::Capability: return "capability error";
    case ErrorKind::EmptyJoin: return "empty join";
    case ErrorKind::BudgetExceeded: return "budget exceeded";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::ModelInconsistency: return "model inconsistency";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Internal: return "internal error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return 2;
    case ErrorKind::Resolution: return 3;
    case ErrorKind::UnsupportedShape: return 4;
    case ErrorKind::Capability: return 5;
    case ErrorKind::EmptyJoin: return 6;
    case ErrorKind::BudgetExceeded: return 7;
    case ErrorKind::Parameter: return 8;
    case ErrorKind::ModelInconsistency: return 9;
    case ErrorKind::Io: return 10;
    case ErrorKind::Internal: return 11;
  }
  return 1;
}

}  // namespace modeljoin
