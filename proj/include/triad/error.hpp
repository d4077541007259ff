#pragma once

#include <stdexcept>
#include <string>

namespace triad {

/// Operand shapes do not satisfy an operation's requirements.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An API contract was violated (wrong phase, tape reuse, missing data).
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values reached an operation that requires finite math.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A token id fell outside the vocabulary.
class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Persisted data (JSONL, checkpoint, config file) is malformed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The run configuration is inconsistent or incompatible.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure (missing path, refused overwrite, short write).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace triad
