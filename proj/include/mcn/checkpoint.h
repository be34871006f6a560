#ifndef MCN_CHECKPOINT_H_
#define MCN_CHECKPOINT_H_

// Named-parameter checkpoint file shared by the encoder and the trainer.
// "MCNP", version (LE u32), config text (LE u32 length + bytes), entry count
// (LE u32), then per entry: name (LE u32 length + bytes), rank (LE u32), dims
// (LE u32 each), values (LE f64).

#include <cstdint>
#include <string>

#include "mcn/autodiff.h"

namespace mcn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParamSet params;
  std::string config_text;  // resolved configuration echo
};

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

// Hex digest (FNV-1a 64) of the file bytes; names a checkpoint in reports.
std::string file_digest(const std::string& path);

}  // namespace mcn

#endif  // MCN_CHECKPOINT_H_
