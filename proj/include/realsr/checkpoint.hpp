#pragma once

// Versioned binary checkpoint container. Layout (little-endian):
//   magic "RSRCKPT1", u32 version
//   string kind, string config, i64 step, string rng_state
//   u32 set count, per set: string name, i64 optimizer step, u32 array count,
//     per array: string name, u32 rank, i32 dims[rank], u8 trainable,
//                u8 element bytes, value[], m[], v[] (moments only if trainable)
//   u32 history length, per record: i64 step, u32 field count, f64 fields[]
// Strings are u64 length + bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "realsr/error.hpp"
#include "realsr/nn.hpp"

namespace realsr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'R', 'S', 'R', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// FNV-1a 64-bit, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 15];
  return out;
}

struct StepRecord {
  std::int64_t step = 0;
  std::vector<double> fields;  // meaning fixed by the trainer (see training.hpp)
};

template <typename T>
struct NamedSet {
  std::string name;
  ParameterSet<T> params;
};

template <typename T>
struct Checkpoint {
  std::string kind;  // "dsgan" or "sr"
  std::string config;
  std::int64_t step = 0;
  std::string rng_state;
  std::vector<NamedSet<T>> sets;
  std::vector<StepRecord> history;

  const ParameterSet<T>& set(const std::string& name) const {
    for (const auto& s : sets)
      if (s.name == name) return s.params;
    throw DataError("checkpoint has no parameter set '" + name + "'");
  }
};

namespace ckpt_detail {

class Writer {
 public:
  template <typename V>
  void pod(V v) {
    static_assert(std::is_trivially_copyable_v<V>);
    const char* p = reinterpret_cast<const char*>(&v);
    buf.append(p, sizeof(V));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    buf += s;
  }
  template <typename V, typename A>
  void array(const std::vector<V, A>& v) {
    buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(V));
  }
  std::string buf;
};

class Reader {
 public:
  explicit Reader(const std::string& b) : buf(b) {}
  template <typename V>
  V pod() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, buf.data() + pos, sizeof(V));
    pos += sizeof(V);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  template <typename V, typename A>
  void array(std::vector<V, A>& v, std::size_t n) {
    need(n * sizeof(V));
    v.resize(n);
    std::memcpy(v.data(), buf.data() + pos, n * sizeof(V));
    pos += n * sizeof(V);
  }
  bool done() const { return pos == buf.size(); }

 private:
  void need(std::size_t n) const {
    if (n > buf.size() - pos) throw DataError("checkpoint truncated");
  }
  const std::string& buf;
  std::size_t pos = 0;
};

}  // namespace ckpt_detail

template <typename T>
std::string encode_checkpoint(const Checkpoint<T>& c) {
  ckpt_detail::Writer w;
  w.buf.append(kCheckpointMagic, 8);
  w.pod(kCheckpointVersion);
  w.str(c.kind);
  w.str(c.config);
  w.pod<std::int64_t>(c.step);
  w.str(c.rng_state);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(c.sets.size()));
  for (const auto& s : c.sets) {
    w.str(s.name);
    w.pod<std::int64_t>(s.params.step);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(s.params.size()));
    for (const auto& p : s.params.params) {
      w.str(p.name);
      w.pod<std::uint32_t>(static_cast<std::uint32_t>(p.shape.size()));
      for (int d : p.shape) w.pod<std::int32_t>(d);
      w.pod<std::uint8_t>(p.trainable ? 1 : 0);
      w.pod<std::uint8_t>(sizeof(T));
      w.array(p.value);
      if (p.trainable) {
        w.array(p.m);
        w.array(p.v);
      }
    }
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(c.history.size()));
  for (const auto& r : c.history) {
    w.pod<std::int64_t>(r.step);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(r.fields.size()));
    w.array(r.fields);
  }
  return w.buf;
}

template <typename T>
Checkpoint<T> decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw DataError("not a realsr checkpoint");
  ckpt_detail::Reader r(bytes);
  for (int i = 0; i < 8; ++i) r.pod<char>();
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint<T> c;
  c.kind = r.str();
  c.config = r.str();
  c.step = r.pod<std::int64_t>();
  c.rng_state = r.str();
  const auto nsets = r.pod<std::uint32_t>();
  for (std::uint32_t s = 0; s < nsets; ++s) {
    NamedSet<T> ns;
    ns.name = r.str();
    ns.params.step = r.pod<std::int64_t>();
    const auto np = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < np; ++i) {
      Param<T> p;
      p.name = r.str();
      const auto rank = r.pod<std::uint32_t>();
      std::size_t n = 1;
      for (std::uint32_t d = 0; d < rank; ++d) {
        const auto dim = r.pod<std::int32_t>();
        if (dim < 0) throw DataError("checkpoint: negative dimension");
        p.shape.push_back(dim);
        n *= static_cast<std::size_t>(dim);
      }
      p.trainable = r.pod<std::uint8_t>() != 0;
      if (r.pod<std::uint8_t>() != sizeof(T)) throw DataError("checkpoint: element type mismatch for " + p.name);
      r.array(p.value, n);
      if (p.trainable) {
        r.array(p.m, n);
        r.array(p.v, n);
      }
      ns.params.params.push_back(std::move(p));
    }
    c.sets.push_back(std::move(ns));
  }
  const auto nh = r.pod<std::uint32_t>();
  c.history.resize(nh);
  for (auto& rec : c.history) {
    rec.step = r.pod<std::int64_t>();
    r.array(rec.fields, r.pod<std::uint32_t>());
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return c;
}

/// Copies values, moments and step from src into dst; names and shapes must match.
template <typename T>
void restore_parameters(ParameterSet<T>& dst, const ParameterSet<T>& src) {
  if (dst.size() != src.size()) throw DataError("checkpoint does not match the network spec (array count)");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const auto& s = src[i];
    auto& d = dst[i];
    if (s.name != d.name || s.shape != d.shape || s.trainable != d.trainable)
      throw DataError("checkpoint does not match the network spec at '" + d.name + "'");
    d.value = s.value;
    if (d.trainable) {
      d.m = s.m;
      d.v = s.v;
    }
  }
  dst.step = src.step;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& c) {
  write_file_bytes(path, encode_checkpoint(c));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<T>(read_file_bytes(path));
}

inline std::string checkpoint_hash(const std::filesystem::path& path) { return fnv1a_hex(read_file_bytes(path)); }

}  // namespace realsr
