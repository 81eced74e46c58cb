#pragma once

#include <stdexcept>
#include <string>

namespace stackptr {

/// Bad input data: malformed treebank lines, invalid trees, inconsistent files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or shape disagreement between tensors or parameters.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An internal invariant was breached (e.g. a decoder produced an invalid tree).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Training produced a non-finite loss or gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stackptr
