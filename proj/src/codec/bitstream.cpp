#include "dpcc/codec/bitstream.hpp"

#include "dpcc/error.hpp"
#include "dpcc/io/bytes.hpp"

namespace dpcc {
namespace {

constexpr char kBlockMagic[] = "DPCB";
constexpr char kContainerMagic[] = "DPCF";

void expect_magic(io::ByteReader& r, const char* magic) {
  const std::size_t at = r.offset();
  if (r.text(4) != std::string(magic, 4)) {
    throw DecodeError(std::string("bad magic, expected ") + magic, at);
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_block(const BlockBitstream& block) {
  const BlockHeader& h = block.header;
  io::ByteWriter w;
  w.raw(std::string_view(kBlockMagic, 4));
  w.u16(h.version);
  for (float v : h.origin) w.f32(v);
  w.f32(h.scale);
  w.u32(h.count);
  w.u8(h.position_bits);
  w.u8(static_cast<std::uint8_t>(h.position_coding));
  w.u64(h.model_id);
  w.segment(block.positions);
  w.segment(block.features);
  return w.take();
}

BlockBitstream parse_block(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  expect_magic(r, kBlockMagic);
  BlockBitstream b;
  BlockHeader& h = b.header;
  h.version = r.u16();
  for (float& v : h.origin) v = r.f32();
  h.scale = r.f32();
  h.count = r.u32();
  h.position_bits = r.u8();
  const std::size_t mode_at = r.offset();
  const std::uint8_t mode = r.u8();
  if (mode > 1) throw DecodeError("unknown position coding " + std::to_string(mode), mode_at);
  h.position_coding = static_cast<PositionCoding>(mode);
  h.model_id = r.u64();
  auto pos = r.segment();
  b.positions.assign(pos.begin(), pos.end());
  auto feat = r.segment();
  b.features.assign(feat.begin(), feat.end());
  if (r.remaining() != 0) {
    throw DecodeError(std::to_string(r.remaining()) + " trailing bytes after block", r.offset());
  }
  return b;
}

std::vector<std::uint8_t> serialize_container(
    const std::vector<std::vector<std::uint8_t>>& blocks) {
  io::ByteWriter w;
  w.raw(std::string_view(kContainerMagic, 4));
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) w.segment(b);
  return w.take();
}

std::vector<std::size_t> container_offsets(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  expect_magic(r, kContainerMagic);
  const std::uint32_t n = r.u32();
  std::vector<std::size_t> offsets;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t len = r.u32();
    offsets.push_back(r.offset());
    r.raw(len);
  }
  if (r.remaining() != 0) {
    throw DecodeError(std::to_string(r.remaining()) + " trailing bytes after container",
                      r.offset());
  }
  return offsets;
}

std::vector<std::vector<std::uint8_t>> parse_container(std::span<const std::uint8_t> bytes) {
  std::vector<std::vector<std::uint8_t>> blocks;
  for (std::size_t at : container_offsets(bytes)) {
    io::ByteReader len(bytes.subspan(at - 4, 4));
    const auto payload = bytes.subspan(at, len.u32());
    blocks.emplace_back(payload.begin(), payload.end());
  }
  return blocks;
}

}  // namespace dpcc
