#pragma once

#include <stdexcept>
#include <string>

namespace elastic {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or layer hyperparameters are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A slot id that was never recorded on the tape.
class UnknownSlotError : public Error {
 public:
  using Error::Error;
};

/// Invalid backbone, training or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed graph (missing anchors, bad channel counts, un-inferred shapes).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint container could not be read back.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// No exit fits under the requested compute budget.
class BudgetInfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace elastic
