#pragma once

#include <stdexcept>

namespace twophoton {

// File could not be read or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Content that cannot be decoded at all (bad JSON, non-numeric CSV cell).
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Decoded content that violates a schema rule (unsorted times, bad dtype,
// counts below one).
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Binary payload length disagrees with the header dimensions.
class SizeMismatchError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// NaN or Inf encountered where finite data is required.
class DataIntegrityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// No acceptable transform exists: every candidate fell below the
// valid-pixel floor of the registration objective.
class AlignmentFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Synthetic generator configuration that cannot be realized.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A frame whose mean makes the requested normalization undefined.
class DegenerateFrameError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Temporal statistics requested on too few frames.
class InsufficientFramesError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace twophoton
