#pragma once

#include <stdexcept>
#include <string>

namespace nudge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// An event asked for a state transition the lifecycle does not permit.
class IllegalTransition : public Error {
  public:
    using Error::Error;
};

/// An event's timestamp precedes the last event already applied to the PR.
class StaleEvent : public Error {
  public:
    using Error::Error;
};

/// Malformed input text. Carries a 1-based line number when one is known.
class ParseError : public Error {
  public:
    explicit ParseError(const std::string& what, int line = -1)
        : Error(what), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

class CorruptStore : public Error {
  public:
    using Error::Error;
};

class UnknownPr : public Error {
  public:
    using Error::Error;
};

class TerminalPr : public Error {
  public:
    using Error::Error;
};

class UnknownNotification : public Error {
  public:
    using Error::Error;
};

class InsufficientData : public Error {
  public:
    using Error::Error;
};

class NonFiniteInput : public Error {
  public:
    using Error::Error;
};

class DegenerateInput : public Error {
  public:
    using Error::Error;
};

class SchemaMismatch : public Error {
  public:
    using Error::Error;
};

class VersionMismatch : public Error {
  public:
    using Error::Error;
};

class CorruptModel : public Error {
  public:
    using Error::Error;
};

class ConfigInvalid : public Error {
  public:
    using Error::Error;
};

}  // namespace nudge
