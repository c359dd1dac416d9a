#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semloc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario file; `where` is a field path or "line N".
class ConfigError : public Error {
 public:
  ConfigError(std::string where, const std::string& what)
      : Error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// Malformed line/record in one of the text formats. `index` is the
/// 1-based line number or 0-based record index depending on the format.
class ParseError : public Error {
 public:
  ParseError(std::size_t index, const std::string& what)
      : Error("record " + std::to_string(index) + ": " + what), index_(index) {}
  explicit ParseError(const std::string& what) : Error(what), index_(0) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Every masked pixel had depth <= 0; the detection must be dropped.
class NoValidDepth : public Error {
 public:
  NoValidDepth() : Error("mask contains no pixel with positive depth") {}
};

/// A survey row with fewer than two landmarks cannot form a wall.
class RowTooSmall : public Error {
 public:
  explicit RowTooSmall(int row_id)
      : Error("row " + std::to_string(row_id) + " has fewer than 2 landmarks"),
        row_id_(row_id) {}
  int row_id() const { return row_id_; }

 private:
  int row_id_;
};

/// Trajectories share no timestamps within the association window.
class EmptyAssociation : public Error {
 public:
  EmptyAssociation() : Error("no estimate could be associated with ground truth") {}
};

}  // namespace semloc
