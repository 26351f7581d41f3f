#pragma once

#include <stdexcept>
#include <string>

namespace actnet {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes: IoError -> 2, everything else -> 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error { public: using Error::Error; };
class ParameterError : public Error { public: using Error::Error; };
class InputError : public Error { public: using Error::Error; };
class DataError : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class EvaluationError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

// Raised by forward_head when the projected vector has (numerically) zero norm.
class DegenerateDescriptorError : public DataError { public: using DataError::DataError; };

} // namespace actnet
