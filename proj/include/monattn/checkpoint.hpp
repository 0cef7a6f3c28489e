#pragma once

#include <cstdint>
#include <string>

#include "monattn/seq2seq.hpp"

namespace monattn {

// Serialized training state: named flat parameter arrays (row-major) with
// dimensions, the full config, the step count, and RNG stream counters.
struct Checkpoint {
    ModelParams params;
    uint64_t task_seed = 0;
    int task_vocab = 0;
    uint64_t task_digest = 0;  // task_hash of the generating TaskSpec
    TrainConfig config;
    long step = 0;
    uint64_t batch_counter = 0;
    uint64_t noise_counter = 0;
};

// Single structured text document with an integrity checksum over the payload.
// Round-trips byte-exactly: to_text(from_text(s)) == s for any s it produced.
std::string checkpoint_to_text(const Checkpoint& ckpt);
Checkpoint checkpoint_from_text(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace monattn
