#include "dpcc/codec/model.hpp"

#include <algorithm>
#include <cstdio>

#include "dpcc/autodiff/checkpoint.hpp"
#include "dpcc/entropy/quantize.hpp"
#include "dpcc/entropy/range_coder.hpp"
#include "dpcc/geometry/metrics.hpp"
#include "dpcc/error.hpp"
#include "dpcc/io/bytes.hpp"

namespace dpcc {
namespace {

using ad::Tensor;

// Rough spread of trained bottleneck features.
constexpr double kFeatureInitScale = 10.0;

std::string hex_id(std::uint64_t id) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(id));
  return buf;
}

DecodeError rebased(const DecodeError& e, std::size_t base) {
  return DecodeError(e.reason(), base + e.offset());
}

}  // namespace

CodecModel::CodecModel(const CodecConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  encoder_ = Encoder(cfg_, store_, rng);
  decoder_ = Decoder(cfg_, store_, rng);
  feature_prior_ =
      FactorizedEntropyModel(store_, "entropy.features", cfg_.embed_dim, kFeatureInitScale, rng);
  position_prior_ = FactorizedEntropyModel(store_, "entropy.positions", 3,
                                           std::ldexp(1.0, cfg_.position_bits - 2), rng);
}

CodecModel CodecModel::from_checkpoint(std::span<const std::uint8_t> bytes) {
  const ad::Checkpoint ck = ad::parse_checkpoint(bytes);
  CodecModel model(parse_codec_config(ck.config_text), 0);
  ad::load_checkpoint(ck, model.store_);
  model.feature_prior_.load_tables(model.store_);
  model.position_prior_.load_tables(model.store_);
  return model;
}

CodecModel CodecModel::load(const std::string& path) {
  return from_checkpoint(io::read_file(path));
}

std::vector<std::uint8_t> CodecModel::checkpoint() const {
  return ad::serialize_checkpoint(store_, format_codec_config(cfg_));
}

void CodecModel::save(const std::string& path) const { io::write_file_atomic(path, checkpoint()); }

std::uint64_t CodecModel::model_id() const { return io::fnv1a64(checkpoint()); }

void CodecModel::freeze(const std::vector<PointCloud>& blocks) {
  std::vector<double> features, positions;
  for (const PointCloud& b : blocks) {
    if (b.empty()) continue;
    const EncoderOutput enc = encoder_.encode(b);
    features.insert(features.end(), enc.features.data().begin(), enc.features.data().end());
    for (std::int32_t s : position_symbols(enc.bottleneck, cfg_.position_bits)) {
      positions.push_back(s);
    }
  }
  feature_prior_.freeze(store_, features);
  position_prior_.freeze(store_, positions, true);
}

bool CodecModel::frozen() const { return feature_prior_.frozen() && position_prior_.frozen(); }

Tensor quantized_positions(const PointCloud& bottleneck, int bits) {
  std::vector<double> flat;
  flat.reserve(bottleneck.size() * 3);
  for (const Vec3& p : bottleneck.positions)
    for (double x : p) flat.push_back(dequantize_position(quantize_position(x, bits), bits));
  return Tensor::from({bottleneck.size(), 3}, std::move(flat));
}

std::vector<std::int32_t> position_symbols(const PointCloud& bottleneck, int bits) {
  std::vector<std::int32_t> out;
  out.reserve(bottleneck.size() * 3);
  for (const Vec3& p : bottleneck.positions)
    for (double x : p) out.push_back(center_position_index(quantize_position(x, bits), bits));
  return out;
}

double BlockStats::bpp() const { return bits_per_point(bytes, input_points); }

double CompressedCloud::bpp() const { return bits_per_point(bytes.size(), input_points); }

CompressedBlock compress_block(const CodecModel& model, const Block& block) {
  if (!model.frozen()) throw ArgumentError("compress: the model has no entropy tables; freeze it first");
  const CodecConfig& cfg = model.config();
  const int bits = cfg.position_bits;
  const EncoderOutput enc = model.encoder().encode(block.cloud);
  const std::size_t m = enc.bottleneck.size();

  CompressedBlock out;
  out.stats.input_points = block.cloud.size();
  out.stats.bottleneck_points = m;

  BlockBitstream bs;
  bs.header.origin = {static_cast<float>(block.origin[0]), static_cast<float>(block.origin[1]),
                      static_cast<float>(block.origin[2])};
  bs.header.scale = static_cast<float>(block.scale);
  bs.header.count = static_cast<std::uint32_t>(m);
  bs.header.position_bits = static_cast<std::uint8_t>(bits);
  bs.header.model_id = model.model_id();

  std::vector<std::uint32_t> indices;
  indices.reserve(3 * m);
  for (const Vec3& p : enc.bottleneck.positions)
    for (double x : p) indices.push_back(quantize_position(x, bits));
  bs.positions = pack_bits(indices, bits);
  bs.header.position_coding = PositionCoding::kRaw;
  if (cfg.learned_positions) {
    const auto& prior = model.position_prior();
    std::vector<std::int32_t> symbols;
    bool fits = true;
    for (std::size_t i = 0; i < indices.size() && fits; ++i) {
      const std::int32_t s = quantize(center_position_index(indices[i], bits), prior.offsets()[i % 3]);
      fits = prior.tables()[i % 3].contains(s);
      symbols.push_back(s);
    }
    if (fits) {
      auto learned = range_encode(symbols, prior.tables());
      if (learned.size() < bs.positions.size()) {
        bs.positions = std::move(learned);
        bs.header.position_coding = PositionCoding::kLearned;
      }
    }
  }
  out.stats.position_coding = bs.header.position_coding;

  const auto& fprior = model.feature_prior();
  const std::size_t d = cfg.embed_dim;
  std::vector<std::int32_t> symbols;
  symbols.reserve(m * d);
  for (std::size_t i = 0; i < m * d; ++i) {
    const FrequencyTable& t = fprior.tables()[i % d];
    const std::int32_t q = quantize(enc.features.at(i), fprior.offsets()[i % d]);
    const std::int32_t c = std::clamp(q, t.lo(), t.hi());
    out.stats.clamped_symbols += c != q;
    symbols.push_back(c);
  }
  bs.features = range_encode(symbols, fprior.tables());

  out.bytes = serialize_block(bs);
  out.stats.bytes = out.bytes.size();
  return out;
}

DecompressedBlock decompress_block(const CodecModel& model, std::span<const std::uint8_t> bytes) {
  const CodecConfig& cfg = model.config();
  const BlockBitstream bs = parse_block(bytes);
  const BlockHeader& h = bs.header;
  if (h.version != kBitstreamVersion) {
    throw ModelMismatchError("bitstream version " + std::to_string(h.version) +
                             ", this build reads version " + std::to_string(kBitstreamVersion));
  }
  const std::uint64_t id = model.model_id();
  if (h.model_id != id) {
    throw ModelMismatchError("bitstream was written by model " + hex_id(h.model_id) +
                             ", loaded model is " + hex_id(id));
  }
  if (h.position_bits != cfg.position_bits) {
    throw ModelMismatchError("bitstream uses " + std::to_string(h.position_bits) +
                             "-bit positions, model expects " + std::to_string(cfg.position_bits));
  }
  if (!model.frozen()) throw ArgumentError("decompress: the model has no entropy tables");

  DecompressedBlock out;
  out.header = h;
  out.cloud.frame = Frame::kWorld;
  const std::size_t m = h.count, d = cfg.embed_dim;
  if (m == 0) return out;
  const int bits = h.position_bits;

  const std::size_t pos_base = kBlockHeaderBytes + 4;
  const std::size_t feat_base = pos_base + bs.positions.size() + 4;
  std::vector<std::uint32_t> indices;
  try {
    if (h.position_coding == PositionCoding::kRaw) {
      indices = unpack_bits(bs.positions, bits, 3 * m);
    } else {
      const auto& prior = model.position_prior();
      const auto symbols = range_decode(bs.positions, prior.tables(), 3 * m);
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        const std::int32_t centered = symbols[i] + static_cast<std::int32_t>(prior.offsets()[i % 3]);
        const std::uint32_t idx = uncenter_position_symbol(centered, bits);
        if (idx >= (1u << bits)) throw DecodeError("position index off the grid", 0);
        indices.push_back(idx);
      }
    }
  } catch (const DecodeError& e) {
    throw rebased(e, pos_base);
  }
  std::vector<std::int32_t> fsym;
  try {
    fsym = range_decode(bs.features, model.feature_prior().tables(), m * d);
  } catch (const DecodeError& e) {
    throw rebased(e, feat_base);
  }

  std::vector<double> pts(3 * m), feats(m * d);
  for (std::size_t i = 0; i < 3 * m; ++i) pts[i] = dequantize_position(indices[i], bits);
  for (std::size_t i = 0; i < m * d; ++i) {
    feats[i] = dequantize(fsym[i], model.feature_prior().offsets()[i % d]);
  }
  const DecoderOutput dec = model.decoder().decode(Tensor::from({m, 3}, std::move(pts)),
                                                   Tensor::from({m, d}, std::move(feats)));
  const std::size_t n = dec.points.dim(0);
  out.cloud.positions.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) {
      out.cloud.positions[i][a] = static_cast<double>(h.origin[a]) +
                                  static_cast<double>(h.scale) * dec.points.at(i, a);
    }
  if (cfg.normals) {
    out.cloud.normals.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a) out.cloud.normals[i][a] = dec.normals.at(i, a);
  }
  return out;
}

CompressedCloud compress_cloud(const CodecModel& model, const PointCloud& world) {
  CompressedCloud out;
  out.input_points = world.size();
  std::vector<std::vector<std::uint8_t>> payloads;
  for (const Block& b : partition_blocks(world, model.config().block_size)) {
    CompressedBlock c = compress_block(model, b);
    out.blocks.push_back(c.stats);
    payloads.push_back(std::move(c.bytes));
  }
  out.bytes = serialize_container(payloads);
  return out;
}

DecompressedCloud decompress_cloud(const CodecModel& model, std::span<const std::uint8_t> bytes) {
  DecompressedCloud out;
  out.cloud.frame = Frame::kWorld;
  const auto offsets = container_offsets(bytes);
  const auto payloads = parse_container(bytes);
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    try {
      out.blocks.push_back(decompress_block(model, payloads[i]));
    } catch (const DecodeError& e) {
      throw rebased(e, offsets[i]);
    }
    const PointCloud& c = out.blocks.back().cloud;
    out.cloud.positions.insert(out.cloud.positions.end(), c.positions.begin(), c.positions.end());
    out.cloud.normals.insert(out.cloud.normals.end(), c.normals.begin(), c.normals.end());
  }
  return out;
}

}  // namespace dpcc
