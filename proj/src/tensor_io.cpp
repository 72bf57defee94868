#include "acida/tensor_io.hpp"

#include <bit>
#include <cstring>

#include "acida/io_util.hpp"

namespace acida {

namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor archive encoding assumes a little-endian host");

constexpr char kMagic[4] = {'A', 'C', 'D', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kMatrixKind = 0;
constexpr std::uint8_t kStringKind = 1;

template <typename T>
void append(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T read() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string read_bytes(std::size_t n) {
    need(n);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void read_into(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ModelError("tensor archive is truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void TensorArchive::put_scalar(const std::string& name, double value) {
  tensors_[name] = MatrixXd::Constant(1, 1, value);
}

const MatrixXd& TensorArchive::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ModelError("tensor archive lacks '" + name + "'");
  return it->second;
}

VectorXd TensorArchive::get_vector(const std::string& name) const {
  const MatrixXd& m = get(name);
  if (m.cols() != 1 && m.size() != 0) throw ModelError("tensor '" + name + "' is not a vector");
  return m.col(0);
}

double TensorArchive::get_scalar(const std::string& name) const {
  const MatrixXd& m = get(name);
  if (m.size() != 1) throw ModelError("tensor '" + name + "' is not a scalar");
  return m(0, 0);
}

const std::string& TensorArchive::get_string(const std::string& name) const {
  const auto it = strings_.find(name);
  if (it == strings_.end()) throw ModelError("tensor archive lacks attribute '" + name + "'");
  return it->second;
}

void TensorArchive::merge(const TensorArchive& other, const std::string& prefix) {
  for (const auto& [k, v] : other.tensors_) tensors_[prefix + k] = v;
  for (const auto& [k, v] : other.strings_) strings_[prefix + k] = v;
}

TensorArchive TensorArchive::subset(const std::string& prefix) const {
  TensorArchive out;
  for (const auto& [k, v] : tensors_) {
    if (k.starts_with(prefix)) out.tensors_[k.substr(prefix.size())] = v;
  }
  for (const auto& [k, v] : strings_) {
    if (k.starts_with(prefix)) out.strings_[k.substr(prefix.size())] = v;
  }
  return out;
}

std::string TensorArchive::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  append<std::uint32_t>(out, kVersion);
  append<std::uint64_t>(out, tensors_.size() + strings_.size());
  for (const auto& [name, m] : tensors_) {
    append<std::uint8_t>(out, kMatrixKind);
    append<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    append<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    append<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.append(reinterpret_cast<const char*>(m.data()),
               static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  for (const auto& [name, s] : strings_) {
    append<std::uint8_t>(out, kStringKind);
    append<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    append<std::uint64_t>(out, s.size());
    out += s;
  }
  return out;
}

TensorArchive TensorArchive::parse(const std::string& bytes) {
  Reader in(bytes);
  if (in.read_bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw ModelError("not a tensor archive");
  }
  if (const auto version = in.read<std::uint32_t>(); version != kVersion) {
    throw ModelError("unsupported tensor archive version " + std::to_string(version));
  }
  TensorArchive archive;
  const auto count = in.read<std::uint64_t>();
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto kind = in.read<std::uint8_t>();
    const auto name = in.read_bytes(in.read<std::uint32_t>());
    if (kind == kMatrixKind) {
      const auto rows = in.read<std::uint64_t>();
      const auto cols = in.read<std::uint64_t>();
      if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw ModelError("tensor archive is corrupt");
      MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      in.read_into(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
      archive.tensors_[name] = std::move(m);
    } else if (kind == kStringKind) {
      archive.strings_[name] = in.read_bytes(in.read<std::uint64_t>());
    } else {
      throw ModelError("tensor archive entry '" + name + "' has unknown kind");
    }
  }
  if (!in.done()) throw ModelError("tensor archive has trailing bytes");
  return archive;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ModelError("missing model file " + path.string());
  return parse(read_file(path));
}

}  // namespace acida
