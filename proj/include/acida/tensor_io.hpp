#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "acida/types.hpp"

namespace acida {

// Flat container of named double matrices and string attributes with a
// little-endian binary encoding. Doubles are stored bit-exactly, so a
// round-tripped model reproduces its scores bit for bit.
class TensorArchive {
 public:
  void put(const std::string& name, const MatrixXd& value) { tensors_[name] = value; }
  void put_vector(const std::string& name, const VectorXd& value) { tensors_[name] = value; }
  void put_scalar(const std::string& name, double value);
  void put_string(const std::string& name, const std::string& value) { strings_[name] = value; }

  const MatrixXd& get(const std::string& name) const;
  VectorXd get_vector(const std::string& name) const;
  double get_scalar(const std::string& name) const;
  const std::string& get_string(const std::string& name) const;
  bool has(const std::string& name) const { return tensors_.contains(name) || strings_.contains(name); }

  // Copies every entry of `other` under `prefix`.
  void merge(const TensorArchive& other, const std::string& prefix);
  // Entries under `prefix` with the prefix stripped.
  TensorArchive subset(const std::string& prefix) const;

  std::string serialize() const;
  static TensorArchive parse(const std::string& bytes);

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  std::map<std::string, MatrixXd> tensors_;
  std::map<std::string, std::string> strings_;
};

}  // namespace acida
