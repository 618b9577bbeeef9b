#pragma once

#include <stdexcept>
#include <string>

namespace histreg {

/// Base class for all histreg error conditions.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- preprocessing ---
class DegenerateRange : public Error {
 public:
  using Error::Error;
};
class DegenerateHistogram : public Error {
 public:
  using Error::Error;
};

// --- stain / color ---
class DegenerateStats : public Error {
 public:
  using Error::Error;
};
class InsufficientTissue : public Error {
 public:
  using Error::Error;
};
class RankDeficient : public Error {
 public:
  using Error::Error;
};
class CoverageGap : public Error {
 public:
  using Error::Error;
};
class MissingTile : public Error {
 public:
  using Error::Error;
};

// --- geometry / registration ---
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class TooFewMatches : public Error {
 public:
  using Error::Error;
};
class NoConsensus : public Error {
 public:
  using Error::Error;
};
class DegenerateWeights : public Error {
 public:
  using Error::Error;
};
class SingularSystem : public Error {
 public:
  using Error::Error;
};

// --- evaluation / I/O ---
class EmptyInput : public Error {
 public:
  using Error::Error;
};
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line) : Error(msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = -1;
};
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace histreg
