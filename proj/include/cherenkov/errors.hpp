#pragma once

#include <stdexcept>
#include <string>

namespace cherenkov {

// Base of every error raised by the toolkit. The CLI maps subclasses onto
// distinct exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class RangeError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class GridMismatchError : public Error {
public:
  using Error::Error;
};

// The electron never reaches the phase velocity of the guided mode.
class BelowThresholdError : public Error {
public:
  using Error::Error;
};

// Raised by the sub-threshold reference when the electron is in fact above
// threshold; callers may downgrade it to a warning.
class ThresholdWarning : public Error {
public:
  using Error::Error;
};

class DegenerateSpectrumError : public Error {
public:
  using Error::Error;
};

class TruncationError : public Error {
public:
  using Error::Error;
};

class NoPeakError : public Error {
public:
  using Error::Error;
};

class FitFailure : public Error {
public:
  using Error::Error;
};

class MissingInputError : public Error {
public:
  using Error::Error;
};

class UnsupportedInputError : public Error {
public:
  using Error::Error;
};

}  // namespace cherenkov
