#pragma once

#include <compare>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lmf {

// Abstract simulation time. Delay 1, Delay 2 and word durations are all in ticks.
using Tick = std::uint64_t;

// Word indices run 1..K; 0 is never a valid word.
using WordId = std::uint32_t;

using EpisodeId = std::uint64_t;

// Ordered word pair (i, j): the timing filter, learn register and switch
// routing word i's done to word j's delayed enable.
struct Pair {
  WordId src = 0;
  WordId dst = 0;

  friend auto operator<=>(const Pair&, const Pair&) = default;
};

inline std::string to_string(const Pair& p) {
  return "(" + std::to_string(p.src) + "," + std::to_string(p.dst) + ")";
}

inline std::ostream& operator<<(std::ostream& os, const Pair& p) {
  return os << to_string(p);
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

// Internal logic bug: something tried to schedule behind the clock.
class SchedulingInPast : public Error {
 public:
  using Error::Error;
};

class UnknownWord : public Error {
 public:
  using Error::Error;
};

class SelfPair : public Error {
 public:
  using Error::Error;
};

class InvalidPlan : public Error {
 public:
  using Error::Error;
};

// Errors tied to a line of some text input (scenario or trace).
class LineError : public Error {
 public:
  LineError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ParseError : public LineError {
 public:
  using LineError::LineError;
};

class ValidationError : public LineError {
 public:
  using LineError::LineError;
};

class MalformedTrace : public LineError {
 public:
  using LineError::LineError;
};

}  // namespace lmf
