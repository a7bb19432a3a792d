#pragma once

#include <stdexcept>
#include <string>

namespace jsee {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when input data violates the corpus / graph / embedding schema.
class SchemaError : public Error {
 public:
  SchemaError(std::string sentence_id, std::string field, const std::string& what)
      : Error(format(sentence_id, field, what)),
        sentence_id_(std::move(sentence_id)),
        field_(std::move(field)) {}

  const std::string& sentence_id() const { return sentence_id_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(const std::string& sid, const std::string& field,
                            const std::string& what) {
    std::string out = "schema error";
    if (!sid.empty()) out += " in sentence '" + sid + "'";
    if (!field.empty()) out += " at field '" + field + "'";
    return out + ": " + what;
  }

  std::string sentence_id_;
  std::string field_;
};

// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace jsee
