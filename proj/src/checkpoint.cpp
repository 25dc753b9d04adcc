#include "elastic/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "elastic/dataset.hpp"
#include "json.hpp"

namespace elastic {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

using nlohmann::json;

constexpr char kMagic[8] = {'E', 'L', 'N', 'E', 'T', '1', '\0', '\0'};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  const auto at = out.size();
  out.resize(at + sizeof(U));
  std::memcpy(out.data() + at, &v, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* field) {
    need(sizeof(U), field);
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  const std::uint8_t* take(std::uint64_t n, const char* field) {
    need(n, field);
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::uint64_t n, const char* field) const {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + field);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

json feature_json(const FeatureShape& s) { return json::array({s.height, s.width, s.channels}); }

FeatureShape feature_from(const json& j) {
  return FeatureShape{j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>(),
                      j.at(2).get<std::size_t>()};
}

json config_json(const BackboneConfig& c) {
  return json{{"name", c.name},
              {"family", std::string(to_string(c.family))},
              {"scale", c.scale == Scale::mini ? "mini" : "full-audit"},
              {"input", feature_json(c.input)},
              {"stem_channels", c.stem_channels},
              {"stem_kernel", c.stem_kernel},
              {"stem_stride", c.stem_stride},
              {"stem_max_pool", c.stem_max_pool},
              {"stage_convs", c.stage_convs},
              {"stage_channels", c.stage_channels},
              {"alpha", c.alpha},
              {"rho", c.rho},
              {"block_channels", c.block_channels},
              {"block_strides", c.block_strides},
              {"growth_rate", c.growth_rate},
              {"dense_layers", c.dense_layers},
              {"bottleneck", c.bottleneck},
              {"compression", c.compression},
              {"stage_blocks", c.stage_blocks},
              {"bottleneck_ratio", c.bottleneck_ratio},
              {"final_feature_anchor", c.final_feature_anchor},
              {"concat_blocks", c.concat_blocks}};
}

BackboneConfig config_from(const json& j) {
  BackboneConfig c;
  c.name = j.at("name").get<std::string>();
  c.family = family_from_string(j.at("family").get<std::string>());
  c.scale = j.at("scale").get<std::string>() == "mini" ? Scale::mini : Scale::full_audit;
  c.input = feature_from(j.at("input"));
  j.at("stem_channels").get_to(c.stem_channels);
  j.at("stem_kernel").get_to(c.stem_kernel);
  j.at("stem_stride").get_to(c.stem_stride);
  j.at("stem_max_pool").get_to(c.stem_max_pool);
  j.at("stage_convs").get_to(c.stage_convs);
  j.at("stage_channels").get_to(c.stage_channels);
  j.at("alpha").get_to(c.alpha);
  j.at("rho").get_to(c.rho);
  j.at("block_channels").get_to(c.block_channels);
  j.at("block_strides").get_to(c.block_strides);
  j.at("growth_rate").get_to(c.growth_rate);
  j.at("dense_layers").get_to(c.dense_layers);
  j.at("bottleneck").get_to(c.bottleneck);
  j.at("compression").get_to(c.compression);
  j.at("stage_blocks").get_to(c.stage_blocks);
  j.at("bottleneck_ratio").get_to(c.bottleneck_ratio);
  j.at("final_feature_anchor").get_to(c.final_feature_anchor);
  j.at("concat_blocks").get_to(c.concat_blocks);
  return c;
}

struct Parsed {
  json manifest;
  const std::uint8_t* payload = nullptr;
  std::uint64_t payload_size = 0;
};

Parsed parse_container(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const auto* magic = r.take(sizeof kMagic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("bad magic: not an ELNET1 checkpoint");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto manifest_size = r.get<std::uint64_t>("manifest length");
  const auto* manifest = r.take(manifest_size, "manifest");
  Parsed p;
  try {
    p.manifest = json::parse(manifest, manifest + manifest_size);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("manifest is not valid JSON: ") + e.what());
  }
  p.payload_size = r.get<std::uint64_t>("payload length");
  p.payload = r.take(p.payload_size, "payload");
  const auto stored = r.get<std::uint32_t>("checksum");
  if (r.remaining() != 0) {
    throw CheckpointError(std::to_string(r.remaining()) + " trailing bytes after checksum");
  }
  const auto actual = crc32_of(p.payload, p.payload_size);
  if (stored != actual) {
    throw CheckpointError("payload checksum mismatch (stored " + std::to_string(stored) +
                          ", computed " + std::to_string(actual) + ")");
  }
  return p;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(ElasticNetwork& net) {
  if (!net.config()) throw CheckpointError("network carries no backbone config to record");
  if (!net.backbone().allocated()) throw CheckpointError("cannot save a shape-only network");
  json exits = json::array();
  for (const auto& e : net.exits()) {
    exits.push_back({{"anchor", e.anchor},
                     {"features", e.features},
                     {"dropout", e.dropout},
                     {"loss_weight", e.loss_weight}});
  }
  json tensors = json::array();
  std::vector<std::uint8_t> payload;
  for (const auto& ref : net.parameters()) {
    const auto& t = *ref.param->value;
    const std::uint64_t length = t.size() * sizeof(float);
    tensors.push_back({{"name", ref.name},
                       {"shape", t.shape()},
                       {"offset", payload.size()},
                       {"length", length}});
    const auto at = payload.size();
    payload.resize(at + length);
    std::memcpy(payload.data() + at, t.raw(), length);
  }
  const json manifest{{"backbone", config_json(*net.config())},
                      {"classes", net.classes()},
                      {"exits", exits},
                      {"tensors", tensors}};
  const std::string text = manifest.dump(1);

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  put<std::uint64_t>(out, payload.size());
  out.insert(out.end(), payload.begin(), payload.end());
  put<std::uint32_t>(out, crc32_of(payload.data(), payload.size()));
  return out;
}

ElasticNetwork deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  const auto p = parse_container(bytes);
  const json& m = p.manifest;
  try {
    const BackboneConfig config = config_from(m.at("backbone"));
    const auto classes = m.at("classes").get<std::size_t>();
    const json& exits = m.at("exits");
    if (!exits.is_array() || exits.empty()) throw CheckpointError("manifest field 'exits' is empty");

    HeadConfig head{classes, exits.back().at("dropout").get<double>()};
    auto rng = substream(0, "checkpoint");
    ElasticNetwork full = elasticize(build_backbone(config), head, rng, config);

    std::set<std::size_t> keep;
    std::vector<std::size_t> anchors;
    for (const auto& e : exits) anchors.push_back(e.at("anchor").get<std::size_t>());
    if (anchors.back() != full.exit(full.exit_count()).anchor) {
      throw CheckpointError("manifest field 'exits': last exit is not at the final anchor");
    }
    for (std::size_t k = 0; k + 1 < anchors.size(); ++k) {
      if (anchors[k] < 1 || anchors[k] >= full.exit_count()) {
        throw CheckpointError("manifest field 'exits': anchor " + std::to_string(anchors[k]) +
                              " out of range");
      }
      keep.insert(anchors[k]);
    }
    ElasticNetwork net = prune_exits(full, keep);
    if (net.exit_count() != exits.size()) {
      throw CheckpointError("manifest field 'exits': duplicate or unordered anchors");
    }
    for (std::size_t i = 0; i < exits.size(); ++i) {
      auto& e = net.exit(i + 1);
      if (e.features != exits[i].at("features").get<std::size_t>()) {
        throw CheckpointError("manifest field 'exits': feature count of exit " +
                              std::to_string(i + 1) + " disagrees with the backbone");
      }
      e.dropout = exits[i].at("dropout").get<double>();
      e.loss_weight = exits[i].at("loss_weight").get<double>();
    }

    const json& tensors = m.at("tensors");
    auto refs = net.parameters();
    if (tensors.size() != refs.size()) {
      throw CheckpointError("manifest field 'tensors' lists " + std::to_string(tensors.size()) +
                            " tensors, network has " + std::to_string(refs.size()));
    }
    std::uint64_t expected = 0;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const json& t = tensors[k];
      const auto name = t.at("name").get<std::string>();
      auto& value = *refs[k].param->value;
      if (name != refs[k].name) {
        throw CheckpointError("manifest tensor " + std::to_string(k) + " is '" + name +
                              "', expected '" + refs[k].name + "'");
      }
      if (t.at("shape").get<Shape>() != value.shape()) {
        throw CheckpointError("manifest tensor '" + name + "' has shape " +
                              shape_string(t.at("shape").get<Shape>()) + ", expected " +
                              shape_string(value.shape()));
      }
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto length = t.at("length").get<std::uint64_t>();
      if (length != value.size() * sizeof(float)) {
        throw CheckpointError("manifest tensor '" + name + "' length disagrees with its shape");
      }
      if (offset > p.payload_size || length > p.payload_size - offset) {
        throw CheckpointError("manifest tensor '" + name + "' offset lies outside the payload");
      }
      std::memcpy(value.raw(), p.payload + offset, length);
      expected += length;
    }
    if (expected != p.payload_size) {
      throw CheckpointError("payload length " + std::to_string(p.payload_size) +
                            " != sum of tensor sizes " + std::to_string(expected));
    }
    return net;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed manifest: ") + e.what());
  }
}

std::string checkpoint_manifest(const std::vector<std::uint8_t>& bytes) {
  return parse_container(bytes).manifest.dump(1);
}

void save_checkpoint(ElasticNetwork& net, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("short write to " + path.string());
}

ElasticNetwork load_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const FormatError& e) {
    throw CheckpointError(e.what());
  }
  return deserialize_checkpoint(bytes);
}

std::uint32_t parameter_checksum(ElasticNetwork& net, bool backbone_only) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& ref : net.parameters()) {
    if (backbone_only && ref.in_head) continue;
    const auto& t = *ref.param->value;
    crc = crc32(crc, reinterpret_cast<const Bytef*>(t.raw()),
                static_cast<uInt>(t.size() * sizeof(float)));
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace elastic
