#include "tapelab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tapelab/serialize.hpp"

namespace tapelab {
namespace {

using nlohmann::json;
constexpr std::string_view kMagic = "TAPELAB1";
constexpr int kVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[static_cast<std::size_t>(i)]);
  return v;
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
double get_f64(std::string_view in) { return std::bit_cast<double>(get_u64(in)); }

struct Blob {
  std::string bytes;
  std::uint64_t count = 0;

  std::uint64_t append(const double* data, Eigen::Index n) {
    const std::uint64_t offset = count;
    for (Eigen::Index i = 0; i < n; ++i) put_f64(bytes, data[i]);
    count += static_cast<std::uint64_t>(n);
    return offset;
  }
};

json tensor(std::string_view name, std::uint64_t offset, Eigen::Index rows, Eigen::Index cols) {
  return {{"name", name}, {"offset", offset}, {"shape", {rows, cols}}};
}

// Per-layer tensors as stored: column-major matrices, then the bias vector.
json layer_tensors(const nn::Network& net, std::uint64_t base) {
  json out = json::array();
  const auto& layers = net.spec().layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const nn::Shape in = net.shapes()[i];
    const std::uint64_t at = base + static_cast<std::uint64_t>(net.parameter_offset(i));
    json entry = {{"layer", i}, {"tensors", json::array()}};
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          Eigen::Index rows = 0, cols = 0, bias = 0;
          if constexpr (std::is_same_v<T, nn::Conv1d>) {
            rows = l.out_channels, cols = in.channels * l.kernel, bias = l.out_channels;
          } else if constexpr (std::is_same_v<T, nn::ConvTranspose1d>) {
            rows = l.out_channels * l.kernel, cols = in.channels, bias = l.out_channels;
          } else if constexpr (std::is_same_v<T, nn::Dense>) {
            rows = l.units, cols = in.size(), bias = l.bias ? l.units : 0;
          }
          if (rows == 0) return;
          entry["tensors"].push_back(tensor("weight", at, rows, cols));
          if (bias > 0)
            entry["tensors"].push_back(
                tensor("bias", at + static_cast<std::uint64_t>(rows * cols), bias, 1));
        },
        layers[i]);
    if (!entry["tensors"].empty()) out.push_back(std::move(entry));
  }
  return out;
}

json write_network(std::string_view name, const nn::Network& net, Blob& blob) {
  const std::uint64_t offset = blob.append(net.parameters().data(), net.parameter_count());
  return {{"name", name},
          {"spec", net.spec()},
          {"init_seed", net.init_seed()},
          {"parameter_count", net.parameter_count()},
          {"offset", offset},
          {"layers", layer_tensors(net, offset)}};
}

json write_basis(std::string_view name, const LatentBasis<double>& basis, Blob& blob) {
  const std::uint64_t modes = blob.append(basis.modes.data(), basis.modes.size());
  const std::uint64_t values = blob.append(basis.singular_values.data(), basis.singular_values.size());
  return {{"name", name},
          {"modes", tensor("modes", modes, basis.modes.rows(), basis.modes.cols())},
          {"singular_values",
           tensor("singular_values", values, basis.singular_values.size(), 1)}};
}

class Reader {
 public:
  Reader(const json& header, std::string_view blob, std::string_view source)
      : header_(header), blob_(blob), source_(source) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw InvalidData(std::string(source_) + ": " + why);
  }

  Eigen::VectorXd doubles(std::uint64_t offset, std::uint64_t count) const {
    if (offset > blob_.size() / 8 || count > blob_.size() / 8 - offset)
      fail("tensor range exceeds the data blob");
    Eigen::VectorXd v(static_cast<Eigen::Index>(count));
    for (std::uint64_t i = 0; i < count; ++i)
      v(static_cast<Eigen::Index>(i)) = get_f64(blob_.substr((offset + i) * 8, 8));
    return v;
  }

  const json& entry(const char* list, std::string_view name) const {
    if (!header_.contains(list)) fail(std::string("header has no '") + list + "'");
    for (const auto& e : header_.at(list))
      if (e.value("name", "") == name) return e;
    fail(std::string("missing ") + list + " entry '" + std::string(name) + "'");
  }

  bool has(const char* list, std::string_view name) const {
    if (!header_.contains(list)) return false;
    for (const auto& e : header_.at(list))
      if (e.value("name", "") == name) return true;
    return false;
  }

  nn::Network network(std::string_view name) const {
    const json& e = entry("networks", name);
    try {
      nn::Network net(e.at("spec").get<nn::NetworkSpec>());
      const auto count = e.at("parameter_count").get<std::uint64_t>();
      if (count != static_cast<std::uint64_t>(net.parameter_count()))
        fail("network '" + std::string(name) + "' parameter count disagrees with its layers");
      net.restore(doubles(e.at("offset").get<std::uint64_t>(), count),
                  e.at("init_seed").get<std::uint64_t>());
      return net;
    } catch (const json::exception& ex) {
      fail("network '" + std::string(name) + "': " + ex.what());
    } catch (const ShapeError& ex) {
      fail("network '" + std::string(name) + "': " + ex.what());
    } catch (const InvalidArgument& ex) {
      fail("network '" + std::string(name) + "': " + ex.what());
    }
  }

  LatentBasis<double> basis(std::string_view name) const {
    const json& e = entry("bases", name);
    try {
      const auto matrix = [&](const json& t) {
        const auto rows = t.at("shape").at(0).get<Eigen::Index>();
        const auto cols = t.at("shape").at(1).get<Eigen::Index>();
        const Eigen::VectorXd v = doubles(t.at("offset").get<std::uint64_t>(),
                                          static_cast<std::uint64_t>(rows * cols));
        return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols));
      };
      LatentBasis<double> b;
      b.modes = matrix(e.at("modes"));
      b.singular_values = matrix(e.at("singular_values"));
      return b;
    } catch (const json::exception& ex) {
      fail("basis '" + std::string(name) + "': " + ex.what());
    }
  }

 private:
  const json& header_;
  std::string_view blob_;
  std::string_view source_;
};

void write_rrae(const RraeModel& m, std::string_view prefix, json& nets, json& bases, Blob& blob) {
  const std::string p(prefix);
  nets.push_back(write_network(p + "encoder", m.encoder, blob));
  nets.push_back(write_network(p + "decoder", m.decoder, blob));
  nets.push_back(write_network(p + "classifier", m.classifier, blob));
  nets.push_back(write_network(p + "dic_head", m.dic_head, blob));
  if (m.bottleneck) nets.push_back(write_network(p + "bottleneck", *m.bottleneck, blob));
  if (!m.basis.empty()) bases.push_back(write_basis(p + "latent", m.basis, blob));
}

RraeModel read_rrae(const Reader& r, const TrainConfig& config, std::string_view prefix) {
  const std::string p(prefix);
  RraeModel m;
  m.arch = config.net;
  m.k_max = config.k_max;
  m.class_target = config.class_target;
  m.encoder = r.network(p + "encoder");
  m.decoder = r.network(p + "decoder");
  m.classifier = r.network(p + "classifier");
  m.dic_head = r.network(p + "dic_head");
  if (r.has("networks", p + "bottleneck")) m.bottleneck = r.network(p + "bottleneck");
  if (r.has("bases", p + "latent")) m.basis = r.basis(p + "latent");
  return m;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  Blob blob;
  json nets = json::array(), bases = json::array();
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RraeModel>) {
          write_rrae(m, "", nets, bases, blob);
        } else if constexpr (std::is_same_v<T, ExtendedModel>) {
          write_rrae(m.m1, "m1.", nets, bases, blob);
          nets.push_back(write_network("m2.encoder", m.m2.encoder, blob));
          nets.push_back(write_network("m2.decoder", m.m2.decoder, blob));
          bases.push_back(write_basis("m2.latent", m.m2.basis, blob));
          if (c.m2_pretrained) {
            nets.push_back(write_network("m2_pretrained.encoder", c.m2_pretrained->encoder, blob));
            nets.push_back(write_network("m2_pretrained.decoder", c.m2_pretrained->decoder, blob));
            bases.push_back(write_basis("m2_pretrained.latent", c.m2_pretrained->basis, blob));
          }
        } else {
          nets.push_back(write_network("net", m.net, blob));
        }
      },
      c.model);

  const json header = {{"format", "tapelab-checkpoint"},
                       {"version", kVersion},
                       {"byte_order", "little"},
                       {"scalar", "float64"},
                       {"config", c.config},
                       {"stats", c.stats},
                       {"split", {{"train", c.train_ids}, {"test", c.test_ids}}},
                       {"provenance", c.provenance},
                       {"networks", nets},
                       {"bases", bases},
                       {"blob_values", blob.count}};
  const std::string text = header.dump();
  std::string out(kMagic);
  put_u64(out, text.size());
  out += text;
  out += blob.bytes;
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, std::string_view source) {
  const std::string src(source);
  if (bytes.size() < 16 || bytes.substr(0, 8) != kMagic)
    throw InvalidData(src + ": not a tape-lab checkpoint");
  const std::uint64_t length = get_u64(bytes.substr(8, 8));
  if (length > bytes.size() - 16) throw InvalidData(src + ": truncated header");
  json header;
  try {
    header = json::parse(bytes.substr(16, length));
  } catch (const json::exception& e) {
    throw InvalidData(src + ": header is not valid JSON (" + e.what() + ")");
  }
  const std::string_view blob = bytes.substr(16 + length);
  if (header.value("version", 0) != kVersion)
    throw InvalidData(src + ": unsupported checkpoint version");
  if (header.value("blob_values", std::uint64_t{0}) * 8 != blob.size())
    throw InvalidData(src + ": data blob has " + std::to_string(blob.size()) +
                      " bytes, header expects " +
                      std::to_string(header.value("blob_values", std::uint64_t{0}) * 8));

  Checkpoint c;
  try {
    from_json(header.at("config"), c.config);
    from_json(header.at("stats"), c.stats);
    c.train_ids = header.at("split").at("train").get<std::vector<std::string>>();
    c.test_ids = header.at("split").at("test").get<std::vector<std::string>>();
    c.provenance = header.value("provenance", json::object());
  } catch (const json::exception& e) {
    throw InvalidData(src + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidData(src + ": " + e.what());
  }

  const Reader r(header, blob, source);
  switch (c.config.arch) {
    case Architecture::kRrae:
    case Architecture::kClassicalAe:
      c.model = read_rrae(r, c.config, "");
      break;
    case Architecture::kExtended: {
      ExtendedModel m;
      m.m1 = read_rrae(r, c.config, "m1.");
      m.m2.r_max = c.config.r_max;
      m.m2.encoder = r.network("m2.encoder");
      m.m2.decoder = r.network("m2.decoder");
      m.m2.basis = r.basis("m2.latent");
      if (r.has("networks", "m2_pretrained.encoder")) {
        DicAutoencoder pre;
        pre.r_max = c.config.r_max;
        pre.encoder = r.network("m2_pretrained.encoder");
        pre.decoder = r.network("m2_pretrained.decoder");
        pre.basis = r.basis("m2_pretrained.latent");
        c.m2_pretrained = std::move(pre);
      }
      c.model = std::move(m);
      break;
    }
    case Architecture::kEncDec:
      c.model = EncDecModel{c.config.net, r.network("net")};
      break;
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ResourceError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidData("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_checkpoint(buffer.str(), path.string());
}

}  // namespace tapelab
