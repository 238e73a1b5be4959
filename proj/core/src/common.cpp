#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

#include "gwe/adagrad.hpp"
#include "gwe/error.hpp"
#include "gwe/matrix.hpp"
#include "gwe/rng.hpp"
#include "gwe/tensor_file.hpp"
#include "gwe/utf8.hpp"
#include "le_io.hpp"

namespace gwe {

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::size_t checksum(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return static_cast<std::size_t>(h);
}

void adagrad_step(std::span<double> param, std::span<const double> grad, AdagradState& state,
                  double lr) {
  if (state.accum.empty()) state.accum.assign(param.size(), 0.0);
  if (state.accum.size() != param.size() || grad.size() != param.size()) {
    throw usage_error("adagrad_step: parameter, gradient and state sizes differ");
  }
  adagrad_update(param, grad, state.accum, lr, state.epsilon);
}

void adagrad_update(std::span<double> param, std::span<const double> grad, std::span<double> accum,
                    double lr, double epsilon) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    if (g == 0.0) continue;
    accum[i] += g * g;
    param[i] -= lr * g / (std::sqrt(accum[i]) + epsilon);
  }
}

// ---------------------------------------------------------------------------
// UTF-8

namespace utf8 {

std::vector<char32_t> decode(std::string_view text, std::size_t base_offset) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  auto fail = [&](std::size_t at) {
    throw data_error("invalid UTF-8 at byte offset " + std::to_string(base_offset + at));
  };
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len;
    char32_t cp;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xe0) == 0xc0) {
      len = 2;
      cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
      len = 3;
      cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      fail(i);
    }
    if (i + len > text.size()) fail(i);
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xc0) != 0x80) fail(i + k);
      cp = (cp << 6) | (b & 0x3f);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                          (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) fail(i);
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode(char32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    s.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    s.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    s.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
  return s;
}

std::string encode(const std::vector<char32_t>& cps) {
  std::string s;
  for (char32_t cp : cps) s += encode(cp);
  return s;
}

std::string codepoint_label(char32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
  return buf;
}

char32_t parse_codepoint(std::string_view text) {
  if (text.size() > 2 && (text[0] == 'U' || text[0] == 'u') && text[1] == '+') {
    std::uint32_t v = 0;
    if (text.size() > 10) throw data_error("malformed codepoint '" + std::string(text) + "'");
    for (char c : text.substr(2)) {
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint32_t>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint32_t>(c - 'A' + 10);
      else throw data_error("malformed codepoint '" + std::string(text) + "'");
    }
    if (v > 0x10ffff) throw data_error("codepoint out of range '" + std::string(text) + "'");
    return static_cast<char32_t>(v);
  }
  const auto cps = decode(text);
  if (cps.size() != 1) throw data_error("expected a single character, got '" + std::string(text) + "'");
  return cps.front();
}

}  // namespace utf8

// ---------------------------------------------------------------------------
// Tensor container

namespace {

constexpr char kTensorMagic[8] = {'G', 'W', 'E', 'T', 'N', 'S', 'R', '1'};

using detail::put_le;

template <typename T>
T get_le(std::istream& in) {
  return detail::get_le<T>(in, "tensor file");
}

void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get_le<std::uint32_t>(in);
  if (n > (1u << 20)) throw data_error("tensor file: implausible string length");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw data_error("tensor file truncated");
  return s;
}

}  // namespace

std::int64_t TensorFile::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw data_error("tensor file: missing header key '" + key + "'");
}

const NamedTensor& TensorFile::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw data_error("tensor file: missing tensor '" + name + "'");
}

void write_tensor_file(std::ostream& out, const TensorFile& file) {
  out.write(kTensorMagic, sizeof kTensorMagic);
  put_le<std::uint32_t>(out, TensorFile::kVersion);
  put_string(out, file.kind);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(file.meta.size()));
  for (const auto& [k, v] : file.meta) {
    put_string(out, k);
    put_le<std::int64_t>(out, v);
  }
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(file.tensors.size()));
  for (const auto& t : file.tensors) {
    std::uint64_t count = 1;
    for (auto d : t.shape) count *= d;
    if (count != t.data.size()) throw usage_error("tensor '" + t.name + "': shape/data mismatch");
    put_string(out, t.name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_le<std::uint64_t>(out, d);
    for (double v : t.data) put_le<double>(out, v);
  }
  if (!out) throw data_error("tensor file: write failed");
}

TensorFile read_tensor_file(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kTensorMagic)) {
    throw data_error("tensor file: bad magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != TensorFile::kVersion) {
    throw data_error("tensor file: unsupported version " + std::to_string(version));
  }
  TensorFile file;
  file.kind = get_string(in);
  const auto n_meta = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto key = get_string(in);
    file.meta.emplace_back(std::move(key), get_le<std::int64_t>(in));
  }
  const auto n_tensors = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = get_string(in);
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > 8) throw data_error("tensor file: implausible rank for '" + t.name + "'");
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(get_le<std::uint64_t>(in));
      count *= t.shape.back();
    }
    if (count > (std::uint64_t{1} << 32)) throw data_error("tensor file: implausible size");
    t.data.resize(count);
    for (auto& v : t.data) v = get_le<double>(in);
    file.tensors.push_back(std::move(t));
  }
  return file;
}

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open '" + path.string() + "' for writing");
  write_tensor_file(out, file);
}

TensorFile load_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  return read_tensor_file(in);
}

}  // namespace gwe
