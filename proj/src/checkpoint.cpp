#include "scaseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace scaseg {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'A', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(uint8_t(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(uint8_t(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string str(uint32_t len) {
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  size_t pos() const { return pos_; }

 private:
  void need(size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
    }
  }
  const std::string& bytes_;
  size_t pos_ = 0;
};

struct TensorEntry {
  std::string name;
  std::vector<int> dims;
  std::vector<double> values;
};

std::vector<TensorEntry> collect_tensors(const Network& net) {
  std::vector<TensorEntry> tensors;
  const NetworkConfig& c = net.config;
  auto scalar = [&](const std::string& name, double v) {
    tensors.push_back(TensorEntry{name, {1}, {v}});
  };
  scalar("config/image_h", c.image_h);
  scalar("config/image_w", c.image_w);
  scalar("config/enc_width1", c.enc_width1);
  scalar("config/enc_width2", c.enc_width2);
  scalar("config/downsample", c.downsample);
  scalar("config/sca_n", c.sca_n);
  scalar("config/sca_m", c.sca_m);
  scalar("config/cdp_layers", c.cdp_layers);
  scalar("config/cdp_channels", c.cdp_channels);
  scalar("config/classes", c.num_classes);
  scalar("config/mode", static_cast<int>(c.mode));
  for (const ParamRef& ref : param_refs(const_cast<Network&>(net))) {
    TensorEntry e;
    e.name = ref.name;
    e.dims = ref.dims;
    e.values.assign(ref.values.begin(), ref.values.end());
    tensors.push_back(std::move(e));
  }
  return tensors;
}

}  // namespace

std::string serialize_network(const Network& net) {
  const std::vector<TensorEntry> tensors = collect_tensors(net);
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const TensorEntry& t : tensors) {
    put_u32(out, static_cast<uint32_t>(t.name.size()));
    out.append(t.name);
    put_u32(out, static_cast<uint32_t>(t.dims.size()));
    for (int d : t.dims) put_u32(out, static_cast<uint32_t>(d));
  }
  for (const TensorEntry& t : tensors) {
    for (double v : t.values) put_f64(out, v);
  }
  return out;
}

Network deserialize_network(const std::string& bytes) {
  Reader r(bytes);
  const std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic at byte 0 (expected SCA1)");
  }
  const uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const uint32_t count = r.u32();

  std::vector<TensorEntry> tensors(count);
  for (TensorEntry& t : tensors) {
    const uint32_t name_len = r.u32();
    t.name = r.str(name_len);
    const uint32_t rank = r.u32();
    size_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      const uint32_t d = r.u32();
      t.dims.push_back(static_cast<int>(d));
      numel *= d;
    }
    t.values.resize(numel);
  }
  for (TensorEntry& t : tensors) {
    for (double& v : t.values) v = r.f64();
  }

  std::map<std::string, const TensorEntry*> by_name;
  for (const TensorEntry& t : tensors) by_name[t.name] = &t;
  auto get = [&](const std::string& name) -> const TensorEntry& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
    return *it->second;
  };
  auto get_int = [&](const std::string& name) {
    return static_cast<int>(get(name).values.at(0));
  };

  NetworkConfig cfg;
  cfg.image_h = get_int("config/image_h");
  cfg.image_w = get_int("config/image_w");
  cfg.enc_width1 = get_int("config/enc_width1");
  cfg.enc_width2 = get_int("config/enc_width2");
  cfg.downsample = get_int("config/downsample");
  cfg.sca_n = get_int("config/sca_n");
  cfg.sca_m = get_int("config/sca_m");
  cfg.cdp_layers = get_int("config/cdp_layers");
  cfg.cdp_channels = get_int("config/cdp_channels");
  cfg.num_classes = get_int("config/classes");
  cfg.mode = static_cast<Mode>(get_int("config/mode"));

  Network net = build_network(cfg, 0);
  for (ParamRef& ref : param_refs(net)) {
    const TensorEntry& t = get(ref.name);
    if (t.values.size() != ref.values.size()) {
      throw DataError("checkpoint: tensor '" + ref.name + "' has " +
                      std::to_string(t.values.size()) + " values, expected " +
                      std::to_string(ref.values.size()));
    }
    for (size_t i = 0; i < t.values.size(); ++i) ref.values[i] = static_cast<real>(t.values[i]);
  }
  return net;
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  const std::string bytes = serialize_network(net);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("checkpoint: write failed for '" + path + "'");
}

Network load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_network(buf.str());
}

}  // namespace scaseg
