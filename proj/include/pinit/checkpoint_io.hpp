#pragma once

// Versioned binary container for trained checkpoints.
//
// Layout (version 1, all multi-byte fields little-endian):
//
//   offset  size  field
//   0       8     magic "PNCKPT01"
//   8       2     u16 format version (= 1)
//   10      8     u64 architecture digest (recomputed and checked on read)
//   18      ...   architecture section:
//                   u32 input width, u32 input height, u32 input channels
//                   u32 layer count, then per layer:
//                     u8 kind, u32 out_channels, u32 kernel, u32 stride,
//                     u32 pad, u32 size, u32 units, u32 classes
//           ...   provenance:
//                   u32 length + initialization scheme name bytes
//                   u32 epoch count + per epoch f64 loss, f64 accuracy
//                   u8 fingerprint flag + u64 dataset fingerprint (0 if none)
//           ...   parameters: u32 tensor count, then per tensor:
//                   u32 length + name bytes (e.g. "conv1.weight")
//                   u8 rank + per dimension u32 extent
//                   f64 values (row-major, raw IEEE-754 bits)
//
// A file declaring a later version raises VersionError; any structural
// problem raises FormatError with the byte offset of the fault.

#include <cstdint>
#include <string>
#include <vector>

#include "pinit/pipeline.hpp"

namespace pinit::io {

std::vector<uint8_t> encode_checkpoint(const pipeline::Checkpoint& ckpt);
pipeline::Checkpoint decode_checkpoint(const std::vector<uint8_t>& bytes,
                                       const std::string& source = "checkpoint");
void write_checkpoint(const pipeline::Checkpoint& ckpt,
                      const std::string& path);
pipeline::Checkpoint read_checkpoint(const std::string& path);

}  // namespace pinit::io
