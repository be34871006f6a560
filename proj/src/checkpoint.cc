#include "mcn/checkpoint.h"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "mcn/binary_io.h"

namespace mcn {

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write("MCNP", 4);
  binio::put_u32(os, kCheckpointVersion);
  binio::put_bytes(os, checkpoint.config_text);
  binio::put_u32(os, static_cast<std::uint32_t>(checkpoint.params.size()));
  for (const auto& [name, t] : checkpoint.params.entries()) {
    binio::put_bytes(os, name);
    binio::put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) binio::put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : t.data) binio::put_f64(os, v);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  binio::read_exact(is, magic, 4, "checkpoint magic");
  if (std::string(magic, 4) != "MCNP") throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint32_t version = binio::get_u32(is, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint version " + std::to_string(version) +
                             " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint out;
  out.config_text = binio::get_bytes(is, "checkpoint config");
  const std::uint32_t count = binio::get_u32(is, "checkpoint entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = binio::get_bytes(is, "checkpoint entry name");
    const std::uint32_t rank = binio::get_u32(is, "checkpoint entry rank");
    if (rank > 4) throw std::runtime_error("checkpoint entry " + name + " has rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(binio::get_u32(is, "checkpoint dims"));
    Tensor t(shape);
    for (auto& v : t.data) v = binio::get_f64(is, "checkpoint values");
    out.params.add(name, std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("trailing bytes after checkpoint entries: " + path);
  }
  return out;
}

std::string file_digest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for digest: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::istreambuf_iterator<char> it(is), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mcn
