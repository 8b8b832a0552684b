#include "dpcc/autodiff/checkpoint.hpp"

#include <algorithm>

#include "dpcc/error.hpp"
#include "dpcc/io/bytes.hpp"

namespace dpcc::ad {

std::vector<std::uint8_t> serialize_checkpoint(const ParameterStore& store,
                                               const std::string& config_text) {
  io::ByteWriter w;
  w.raw("DPCC");
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  w.u32(static_cast<std::uint32_t>(config_text.size()));
  w.raw(config_text);
  for (const Parameter& p : store.entries()) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.raw(p.name);
    w.u8(p.trainable ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p.tensor.data()) w.f64(v);
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (r.text(4) != "DPCC") throw FormatError("checkpoint: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  Checkpoint ck;
  ck.config_text = r.text(r.u32());
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.text(r.u16());
    e.trainable = (r.u8() & 1) != 0;
    const std::uint8_t rank = r.u8();
    for (std::uint8_t d = 0; d < rank; ++d) e.shape.push_back(r.u32());
    const std::size_t n = numel(e.shape);
    if (n * 8 > r.remaining()) {
      throw DecodeError("checkpoint: truncated values of '" + e.name + "'",
                        r.offset());
    }
    e.values.resize(n);
    for (double& v : e.values) v = r.f64();
    ck.entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) {
    throw FormatError("checkpoint: " + std::to_string(r.remaining()) +
                      " trailing bytes");
  }
  return ck;
}

void load_checkpoint(const Checkpoint& checkpoint, ParameterStore& store) {
  for (const CheckpointEntry& e : checkpoint.entries) {
    if (!store.contains(e.name)) {
      if (!e.trainable) {
        store.set_buffer(e.name, e.shape, e.values);
        continue;
      }
      throw FormatError("checkpoint: parameter '" + e.name +
                        "' not present in model");
    }
    Parameter& p = store.at(e.name);
    if (!p.trainable && !e.trainable) {
      // Frozen buffers (entropy tables) are sized by the data they were built from.
      store.set_buffer(e.name, e.shape, e.values);
      continue;
    }
    if (p.tensor.shape() != e.shape) {
      throw FormatError("checkpoint: '" + e.name + "' has shape " +
                        shape_str(e.shape) + ", model expects " +
                        shape_str(p.tensor.shape()));
    }
    std::copy(e.values.begin(), e.values.end(), p.tensor.mutable_data().begin());
  }
  for (const Parameter& p : store.entries()) {
    const bool found = std::any_of(
        checkpoint.entries.begin(), checkpoint.entries.end(),
        [&](const CheckpointEntry& e) { return e.name == p.name; });
    if (!found && p.trainable) {
      throw FormatError("checkpoint: missing parameter '" + p.name + "'");
    }
  }
}

}  // namespace dpcc::ad
