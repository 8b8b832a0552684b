#pragma once

#include <stdexcept>
#include <string>

namespace dpcc {

// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes incompatible with the requested op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Precondition on an argument value (counts, ranges, empty inputs).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed file or container (PLY, checkpoint, config).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Corrupted or truncated bitstream. `offset` is the byte position where
// decoding gave up.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        reason_(what),
        offset_(offset) {}
  const std::string& reason() const { return reason_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string reason_;
  std::size_t offset_;
};

// Bitstream produced by a different model or format version.
class ModelMismatchError : public Error {
 public:
  using Error::Error;
};

// Training diverged.
class NanLossError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpcc
