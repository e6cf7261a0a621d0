#pragma once

#include <stdexcept>
#include <string>

namespace vser {

// Base for everything thrown by the library. The CLI maps subclasses to
// process exit codes, so new error types should pick one of the families
// below rather than deriving from Error directly.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- configuration problems (CLI exit code 2) ------------------------------
struct ConfigError : Error {
    using Error::Error;
};
struct InvalidConfig : ConfigError {
    using ConfigError::ConfigError;
};
struct InvalidRatio : ConfigError {
    using ConfigError::ConfigError;
};
struct InvalidSigma : ConfigError {
    using ConfigError::ConfigError;
};

// -- missing prerequisites, e.g. a stage checkpoint (exit code 3) ----------
struct PrereqError : Error {
    using Error::Error;
};

// -- data problems: audio, datasets, file formats (exit code 4) ------------
struct DataError : Error {
    using Error::Error;
};
struct InvalidAudio : DataError {
    using DataError::DataError;
};
struct InvalidFrequency : DataError {
    using DataError::DataError;
};
struct InvalidAugment : DataError {
    using DataError::DataError;
};
struct IngestError : DataError {
    using DataError::DataError;
};
struct StratifyError : DataError {
    using DataError::DataError;
};
struct InvalidDataset : DataError {
    using DataError::DataError;
};
struct FormatError : DataError {
    using DataError::DataError;
};

// -- programming / contract violations (exit code 1) -----------------------
struct ShapeError : Error {
    using Error::Error;
};
struct InvalidLabel : Error {
    using Error::Error;
};
struct MatchError : Error {
    using Error::Error;
};

}  // namespace vser
