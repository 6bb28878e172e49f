#ifndef SEGQA_ERROR_HPP
#define SEGQA_ERROR_HPP

#include <stdexcept>
#include <string>

namespace segqa {

// Base of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Inputs are well-formed but violate a precondition or invariant.
class ValidationError : public Error {
  public:
    using Error::Error;
};

// Filesystem failures: missing files, unwritable paths, short reads.
class IoError : public Error {
  public:
    using Error::Error;
};

// A document (NIfTI, JSON, CSV, affine text) could not be parsed.
class FormatError : public Error {
  public:
    using Error::Error;
};

// Process exit codes used by the command-line front end.
enum class ExitCode : int { ok = 0, validation = 1, io = 2 };

inline ExitCode exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e) != nullptr || dynamic_cast<const FormatError*>(&e) != nullptr) {
        return ExitCode::io;
    }
    return ExitCode::validation;
}

}  // namespace segqa

#endif  // SEGQA_ERROR_HPP
