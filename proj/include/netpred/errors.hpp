#pragma once

#include <stdexcept>
#include <string>

namespace netpred {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input row or file; `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class CoverageError : public Error {
 public:
  CoverageError(const std::string& symbol, const std::string& what)
      : Error(symbol + ": " + what), symbol_(symbol) {}
  const std::string& symbol() const noexcept { return symbol_; }

 private:
  std::string symbol_;
};

class InsufficientHistoryError : public Error {
 public:
  using Error::Error;
};

class WindowError : public Error {
 public:
  WindowError(const std::string& what, std::size_t required, std::size_t available)
      : Error(what + " (required " + std::to_string(required) + " trading days, available " +
              std::to_string(available) + ")"),
        required_(required),
        available_(available) {}
  std::size_t required() const noexcept { return required_; }
  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t required_;
  std::size_t available_;
};

class InputError : public Error {
 public:
  using Error::Error;
};

/// A learner was asked to fit a training set that contains a single class.
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, double learning_rate)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + " (learning rate " +
              std::to_string(learning_rate) + ")"),
        epoch_(epoch),
        learning_rate_(learning_rate) {}
  std::size_t epoch() const noexcept { return epoch_; }
  double learning_rate() const noexcept { return learning_rate_; }

 private:
  std::size_t epoch_;
  double learning_rate_;
};

class LookaheadError : public Error {
 public:
  using Error::Error;
};

/// Failure of one stage of a forecast day, tagged with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace netpred
