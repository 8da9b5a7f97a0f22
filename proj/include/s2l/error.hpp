#pragma once

#include <stdexcept>
#include <string>

namespace s2l {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input shape is inconsistent (mismatched lengths, duplicate ids, empty input).
class StructuralError : public Error {
public:
    using Error::Error;
};

/// A requested time/index range falls outside the data.
class RangeError : public Error {
public:
    using Error::Error;
};

/// A parameter violates its precondition.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents or schema violation.
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// External speech-to-text backend failed; message carries its diagnostics.
class BackendError : public Error {
public:
    using Error::Error;
};

/// Overflow/underflow or a sampling failure in numeric code.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Metric requested on an empty confusion matrix.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

}  // namespace s2l
