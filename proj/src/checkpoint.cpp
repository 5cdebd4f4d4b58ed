#include <cstring>
#include <fstream>
#include <map>

#include "threer/network.hpp"

namespace threer {

namespace {

constexpr char kMagic[5] = {'3', 'R', 'I', 'N', 'N'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

bool read_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

bool read_f32(std::istream& in, float& v) {
  std::uint32_t bits;
  if (!read_u32(in, bits)) return false;
  std::memcpy(&v, &bits, 4);
  return true;
}

struct Record {
  Shape shape;
  std::vector<float> values;
};

}  // namespace

template <class T>
void save_checkpoint(const ThreeRNet<T>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kMagic, 5);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(net.arch().dim_zg));
  write_f32(out, static_cast<float>(net.finetune_rate));
  for (const auto& p : net.params()) {
    write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(out, static_cast<std::uint32_t>(p.value.shape().size()));
    for (int e : p.value.shape()) write_u32(out, static_cast<std::uint32_t>(e));
    for (T v : p.value.data()) write_f32(out, static_cast<float>(v));
  }
  if (!out) throw IoError("write failed for checkpoint " + path);
}

template <class T>
ThreeRNet<T> load_checkpoint(const std::string& path, double clamp_alpha) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[5];
  in.read(magic, 5);
  if (in.gcount() != 5 || std::memcmp(magic, kMagic, 5) != 0) {
    throw IoError(path + ": bad magic");
  }
  std::uint32_t version = 0, dim_zg = 0;
  float rate = 0.0f;
  if (!read_u32(in, version) || !read_u32(in, dim_zg) || !read_f32(in, rate)) {
    throw IoError(path + ": truncated checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  }

  std::map<std::string, Record> records;
  std::vector<std::string> order;
  for (;;) {
    std::uint32_t name_len = 0;
    in.peek();
    if (in.eof()) break;
    if (!read_u32(in, name_len)) throw IoError(path + ": truncated checkpoint");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      throw IoError(path + ": truncated checkpoint");
    }
    std::uint32_t rank = 0;
    if (!read_u32(in, rank) || rank > 8) throw IoError(path + ": truncated checkpoint");
    Record rec;
    std::int64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint32_t e = 0;
      if (!read_u32(in, e) || e == 0) throw IoError(path + ": truncated checkpoint");
      rec.shape.push_back(static_cast<int>(e));
      count *= e;
    }
    rec.values.resize(static_cast<size_t>(count));
    for (auto& v : rec.values) {
      if (!read_f32(in, v)) throw IoError(path + ": truncated checkpoint");
    }
    if (records.count(name)) throw IoError(path + ": duplicate parameter " + name);
    order.push_back(name);
    records.emplace(std::move(name), std::move(rec));
  }

  // Architecture comes from the records: block count from the names, growth
  // from the first scale-net layer.
  int num_blocks = 0;
  while (records.count("block" + std::to_string(num_blocks) + ".phi.conv1.weight")) {
    ++num_blocks;
  }
  const auto growth_it = records.find("block0.phi.conv1.weight");
  if (num_blocks == 0 || growth_it == records.end()) {
    throw IoError(path + ": checkpoint has no coupling blocks");
  }
  NetworkArch arch;
  arch.num_blocks = num_blocks;
  arch.growth = growth_it->second.shape.at(0);
  arch.dim_zg = static_cast<int>(dim_zg);
  arch.clamp_alpha = clamp_alpha;

  ThreeRNet<T> net(arch);
  net.finetune_rate = static_cast<double>(rate);
  size_t used = 0;
  for (auto& p : net.params()) {
    const auto it = records.find(p.name);
    if (it == records.end()) throw IoError(path + ": missing parameter " + p.name);
    if (it->second.shape != p.value.shape()) {
      throw IoError(path + ": parameter " + p.name + " has shape " +
                    shape_str(it->second.shape) + ", expected " + shape_str(p.value.shape()));
    }
    auto& dst = p.value.data();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second.values[i]);
    ++used;
  }
  if (used != records.size()) {
    throw IoError(path + ": checkpoint contains " + std::to_string(records.size() - used) +
                  " unexpected parameters");
  }
  return net;
}

template void save_checkpoint(const ThreeRNet<float>&, const std::string&);
template void save_checkpoint(const ThreeRNet<double>&, const std::string&);
template ThreeRNet<float> load_checkpoint(const std::string&, double);
template ThreeRNet<double> load_checkpoint(const std::string&, double);

}  // namespace threer
