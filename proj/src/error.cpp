#include "gcnseg/error.hpp"

namespace gcnseg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidDimension: return "invalid dimension";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kContractViolation: return "contract violation";
    case ErrorKind::kNumericalFailure: return "numerical failure";
    case ErrorKind::kDegenerateSpectrum: return "degenerate spectrum";
    case ErrorKind::kInvalidArchitecture: return "invalid architecture";
    case ErrorKind::kInvalidLabel: return "invalid label";
    case ErrorKind::kInvalidDataset: return "invalid dataset";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kConfig: return "config error";
  }
  return "error";
}

}  // namespace gcnseg
