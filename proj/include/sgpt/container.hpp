#pragma once

// Versioned tensor container used for checkpoints and prompt states.
//
// Layout (all integers little-endian):
//   magic      8 bytes   e.g. "SGPTCKPT" / "SGPTPRMT"
//   version    u32
//   meta_len   u32, then meta_len bytes of `key=value\n` text
//   count      u32
//   count x { name_len u32, name bytes, rows u64, cols u64 }   (shape table)
//   payload    float64 values of every tensor, in table order, row-major
//   digest     32 bytes SHA-256 over everything above

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"

namespace sgpt {

inline std::array<unsigned char, 32> sha256_bytes(std::string_view data) {
  std::array<unsigned char, 32> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
    throw Error("sha256: digest failed");
  return md;
}

inline std::string sha256_hex(std::string_view data) {
  const auto md = sha256_bytes(data);
  std::ostringstream os;
  for (unsigned char c : md) os << std::hex << std::setw(2) << std::setfill('0') << int(c);
  return os.str();
}

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct TensorContainer {
  std::string magic;  // exactly 8 chars
  std::uint32_t version = 1;
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  const Matrix& tensor(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t.value;
    throw CorruptFileError("container: missing tensor '" + name + "'");
  }
  const std::string& meta_value(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw CorruptFileError("container: missing meta key '" + key + "'");
    return it->second;
  }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view buf) : buf_(buf) {}
  std::string_view take(std::size_t n) {
    if (n > buf_.size() - pos_) throw CorruptFileError("container: truncated file");
    auto s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t uint(int bytes) {
    const auto s = take(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

 private:
  std::string_view buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_container(const TensorContainer& c) {
  if (c.magic.size() != 8) throw PreconditionError("container: magic must be 8 bytes");
  std::string out = c.magic;
  detail::put_u32(out, c.version);
  std::string meta;
  for (const auto& [k, v] : c.meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw PreconditionError("container: meta key/value contains a separator");
    meta += k + "=" + v + "\n";
  }
  detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  detail::put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put_u64(out, t.value.rows());
    detail::put_u64(out, t.value.cols());
  }
  for (const auto& t : c.tensors)
    for (double x : t.value.storage()) detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
  const auto md = sha256_bytes(out);
  out.append(reinterpret_cast<const char*>(md.data()), md.size());
  return out;
}

inline TensorContainer parse_container(std::string_view buf, std::string_view expected_magic) {
  if (buf.size() < 8 + 32) throw CorruptFileError("container: truncated file");
  const auto body = buf.substr(0, buf.size() - 32);
  const auto md = sha256_bytes(body);
  if (std::string_view(reinterpret_cast<const char*>(md.data()), md.size()) != buf.substr(body.size()))
    throw CorruptFileError("container: digest mismatch (file truncated or corrupted)");
  detail::Reader r(body);
  TensorContainer c;
  c.magic = std::string(r.take(8));
  if (c.magic != expected_magic)
    throw CorruptFileError("container: magic '" + c.magic + "' but expected '" +
                           std::string(expected_magic) + "'");
  c.version = static_cast<std::uint32_t>(r.uint(4));
  if (c.version != 1) throw CorruptFileError("container: unsupported version " + std::to_string(c.version));
  const std::string meta(r.take(r.uint(4)));
  std::istringstream ms(meta);
  std::string line;
  while (std::getline(ms, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CorruptFileError("container: malformed meta line");
    c.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = r.uint(4);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = std::string(r.take(r.uint(4)));
    const auto rows = r.uint(8), cols = r.uint(8);
    if (cols && rows > r.remaining() / 8 / cols) throw CorruptFileError("container: implausible shape");
    shapes.emplace_back(rows, cols);
    c.tensors.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    Matrix m(shapes[i].first, shapes[i].second);
    for (double& x : m.storage()) x = std::bit_cast<double>(r.uint(8));
    c.tensors[i].value = std::move(m);
  }
  if (r.remaining() != 0) throw CorruptFileError("container: trailing bytes");
  return c;
}

inline void write_container(const std::string& path, const TensorContainer& c) {
  const std::string bytes = serialize_container(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

inline TensorContainer read_container(const std::string& path, std::string_view expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_container(bytes, expected_magic);
}

}  // namespace sgpt
