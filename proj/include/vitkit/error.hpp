#pragma once

#include <stdexcept>
#include <string>

namespace vitkit {

// Base class for every error raised by the toolkit. The CLI maps these to
// exit codes; library users can catch subtypes.
class Error : public std::runtime_error {
   public:
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// Operand shapes do not satisfy an operation's contract.
class ShapeError : public Error {
   public:
    using Error::Error;
};

// A value is outside its domain (non-finite input, label out of range,
// invalid class index, ...).
class ValueError : public Error {
   public:
    using Error::Error;
};

// Dataset-level problems: empty class directory, undecodable file, ...
class DataError : public Error {
   public:
    using Error::Error;
};

// Filesystem / stream failures.
class IoError : public Error {
   public:
    using Error::Error;
};

// Checkpoint file problems, one subtype per failure mode.
class CheckpointError : public Error {
   public:
    using Error::Error;
};

class BadMagicError : public CheckpointError {
   public:
    using CheckpointError::CheckpointError;
};

class TruncatedPayloadError : public CheckpointError {
   public:
    using CheckpointError::CheckpointError;
};

class DimMismatchError : public CheckpointError {
   public:
    using CheckpointError::CheckpointError;
};

// Training produced a non-finite loss.
class DivergedError : public Error {
   public:
    DivergedError(const std::string &msg, long step) : Error(msg), step_(step) {}
    long step() const { return step_; }

   private:
    long step_;
};

}  // namespace vitkit
