#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfdebias/model.hpp"

namespace cfdebias {

/// Binary model checkpoint. All integers and floats are little-endian.
///
///   offset  field
///   0       8 bytes   magic "CFDBCKPT"
///   8       u32       format version (1)
///   12      u64       seed
///   20      u64       config text length L
///   28      L bytes   config text (canonical key = value lines)
///           u64       gender latent size k
///           u32       network count (5)
///   then per network, in the order encoder, decoder, classifier,
///   adversary, generator:
///           u32       name length, then the name bytes
///           u32       output activation (0 tanh, 1 sigmoid, 2 linear)
///           u64 x 3   n_in, hidden, n_out
///           f64       w1 (hidden x n_in), row-major
///           f64       b1 (hidden)
///           f64       w2 (n_out x hidden), row-major
///           f64       b2 (n_out)
struct Checkpoint {
    ModelParams params;
    std::uint64_t seed = 0;
    std::string config_text;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<char> checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(const std::vector<char>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws IoError, or CheckpointMismatch on a malformed container.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace cfdebias
