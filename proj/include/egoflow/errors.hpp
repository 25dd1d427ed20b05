// Error hierarchy shared by the whole library.  Every exception carries an
// ErrorKind so command-line front ends can map failures onto exit codes
// without string matching.
#pragma once

#include <stdexcept>
#include <string>

namespace egoflow {

enum class ErrorKind {
  usage = 1,          // caller passed an out-of-contract argument
  missing_input = 2,  // input absent or empty
  format = 3,         // malformed data, shape or label contract violated
  numeric = 4,        // numeric failure (non-finite values, singularities)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Input container (directory, list, dataset) has no usable entries.
struct EmptyInput : Error {
  explicit EmptyInput(const std::string& m) : Error(ErrorKind::missing_input, m) {}
};

// A referenced file does not exist or cannot be opened.
struct MissingInput : Error {
  explicit MissingInput(const std::string& m) : Error(ErrorKind::missing_input, m) {}
};

// Frame timestamps are not strictly increasing or rates are non-positive.
struct InvalidTimestamps : Error {
  explicit InvalidTimestamps(const std::string& m) : Error(ErrorKind::format, m) {}
};

// Two objects that must agree on dimensions do not.
struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& m) : Error(ErrorKind::format, m) {}
};

// A tensor operation was asked to produce or consume an impossible shape.
struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error(ErrorKind::format, m) {}
};

// Fewer frames or flow fields than an operation needs.
struct InsufficientFrames : Error {
  explicit InsufficientFrames(const std::string& m) : Error(ErrorKind::format, m) {}
};

// A block window does not satisfy the stacking contract.
struct InvalidWindow : Error {
  explicit InvalidWindow(const std::string& m) : Error(ErrorKind::format, m) {}
};

// A class label is out of range or inconsistent with the label set.
struct LabelError : Error {
  explicit LabelError(const std::string& m) : Error(ErrorKind::format, m) {}
};

// A training/evaluation dataset violates its contract (e.g. empty class).
struct DatasetError : Error {
  explicit DatasetError(const std::string& m) : Error(ErrorKind::format, m) {}
};

// Normalization statistics are missing, non-positive, or inconsistent.
struct NormalizationError : Error {
  explicit NormalizationError(const std::string& m) : Error(ErrorKind::format, m) {}
};

// A dataset split request cannot be satisfied.
struct SplitError : Error {
  explicit SplitError(const std::string& m) : Error(ErrorKind::format, m) {}
};

// An index (kernel id, class id, ...) is out of range.
struct IndexError : Error {
  explicit IndexError(const std::string& m) : Error(ErrorKind::usage, m) {}
};

// A serialized file does not match its format contract.
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error(ErrorKind::format, m) {}
};

// A computation produced non-finite values.
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

}  // namespace egoflow
