#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "depthfill/blocks.hpp"
#include "depthfill/errors.hpp"

namespace depthfill {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct CheckpointEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

/// Single-archive checkpoint: a text manifest (config line, fingerprint, step,
/// tensor names and shapes) followed by raw little-endian float32 arrays in
/// manifest order.
struct Checkpoint {
  std::string config;  // canonical config string the fingerprint hashes
  std::int64_t step = 0;
  std::vector<CheckpointEntry> entries;

  std::uint64_t fingerprint() const { return fnv1a64(config); }

  const CheckpointEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }

  void add(const std::string& name, const std::vector<int>& shape,
           const float* data, std::size_t count) {
    CheckpointEntry e;
    e.name = name;
    e.shape = shape;
    e.data.assign(data, data + count);
    entries.push_back(std::move(e));
  }
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise<IoError>("cannot write checkpoint '", path, "'");
  out << "depthfill-checkpoint v1\n";
  out << "config " << ck.config << "\n";
  out << "fingerprint " << hex64(ck.fingerprint()) << "\n";
  out << "step " << ck.step << "\n";
  out << "tensors " << ck.entries.size() << "\n";
  for (const auto& e : ck.entries) {
    out << e.name;
    for (int d : e.shape) out << ' ' << d;
    out << '\n';
  }
  out << "data\n";
  for (const auto& e : ck.entries)
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size() * sizeof(float)));
  if (!out) raise<IoError>("short write on checkpoint '", path, "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise<IoError>("cannot open checkpoint '", path, "'");
  std::string line;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line))
      raise<FormatError>("'", path, "': truncated checkpoint manifest");
    return line;
  };
  if (next_line() != "depthfill-checkpoint v1")
    raise<FormatError>("'", path, "' is not a depthfill checkpoint");
  Checkpoint ck;
  std::uint64_t stored_fp = 0;
  std::size_t count = 0;
  {
    std::string& l = next_line();
    if (l.rfind("config ", 0) != 0) raise<FormatError>("'", path, "': missing config line");
    ck.config = l.substr(7);
  }
  {
    std::istringstream is(next_line());
    std::string key, hex;
    is >> key >> hex;
    if (key != "fingerprint" || hex.size() != 16)
      raise<FormatError>("'", path, "': missing fingerprint line");
    stored_fp = std::stoull(hex, nullptr, 16);
  }
  {
    std::istringstream is(next_line());
    std::string key;
    is >> key >> ck.step;
    if (key != "step") raise<FormatError>("'", path, "': missing step line");
  }
  {
    std::istringstream is(next_line());
    std::string key;
    is >> key >> count;
    if (key != "tensors") raise<FormatError>("'", path, "': missing tensor count");
  }
  ck.entries.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream is(next_line());
    CheckpointEntry& e = ck.entries[i];
    is >> e.name;
    int d;
    std::size_t total = 1;
    while (is >> d) {
      e.shape.push_back(d);
      total *= static_cast<std::size_t>(d);
    }
    if (e.name.empty() || e.shape.empty())
      raise<FormatError>("'", path, "': malformed tensor line ", i);
    e.data.resize(total);
  }
  if (next_line() != "data") raise<FormatError>("'", path, "': missing data marker");
  for (auto& e : ck.entries) {
    in.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(e.data.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != e.data.size() * sizeof(float))
      raise<FormatError>("'", path, "': truncated tensor data for '", e.name, "'");
  }
  // The stored fingerprint must match the stored config; otherwise the file
  // was tampered with or corrupted.
  if (stored_fp != ck.fingerprint())
    raise<IntegrityError>("'", path, "': fingerprint ", hex64(stored_fp),
                          " does not match config hash ", hex64(ck.fingerprint()));
  return ck;
}

/// Fills a checkpoint from the live parameter set (casting to float32).
template <typename T>
void pack_params(const nn::ParamRefs<T>& refs, Checkpoint& ck) {
  for (const nn::Param<T>* p : refs.params) {
    CheckpointEntry e;
    e.name = p->name;
    e.shape = p->shape;
    e.data.resize(p->value.size());
    for (std::size_t i = 0; i < e.data.size(); ++i)
      e.data[i] = static_cast<float>(p->value[i]);
    ck.entries.push_back(std::move(e));
  }
  for (const auto& b : refs.buffers) {
    CheckpointEntry e;
    e.name = b.name;
    e.shape = {static_cast<int>(b.data->size())};
    e.data.resize(b.data->size());
    for (std::size_t i = 0; i < e.data.size(); ++i)
      e.data[i] = static_cast<float>((*b.data)[i]);
    ck.entries.push_back(std::move(e));
  }
}

/// Strict restore: every live parameter/buffer must exist with the right
/// element count, and the checkpoint may not carry unknown non-"opt." tensors.
template <typename T>
void unpack_params(const Checkpoint& ck, nn::ParamRefs<T>& refs,
                   const std::string& expected_config) {
  if (ck.config != expected_config)
    raise<IntegrityError>("checkpoint fingerprint ", hex64(ck.fingerprint()),
                          " (", ck.config, ") does not match this configuration ",
                          hex64(fnv1a64(expected_config)), " (", expected_config, ")");
  std::map<std::string, const CheckpointEntry*> index;
  for (const auto& e : ck.entries) index[e.name] = &e;
  auto take = [&](const std::string& name, std::size_t count) {
    auto it = index.find(name);
    if (it == index.end())
      raise<IntegrityError>("checkpoint missing tensor '", name, "'");
    if (it->second->data.size() != count)
      raise<IntegrityError>("checkpoint tensor '", name, "' has ",
                            it->second->data.size(), " values, expected ", count);
    const CheckpointEntry* e = it->second;
    index.erase(it);
    return e;
  };
  for (nn::Param<T>* p : refs.params) {
    const CheckpointEntry* e = take(p->name, p->value.size());
    for (std::size_t i = 0; i < p->value.size(); ++i)
      p->value[i] = static_cast<T>(e->data[i]);
  }
  for (auto& b : refs.buffers) {
    const CheckpointEntry* e = take(b.name, b.data->size());
    for (std::size_t i = 0; i < b.data->size(); ++i)
      (*b.data)[i] = static_cast<T>(e->data[i]);
  }
  for (const auto& [name, e] : index)
    if (name.rfind("opt.", 0) != 0)
      raise<IntegrityError>("checkpoint carries unknown tensor '", name, "'");
}

}  // namespace depthfill
