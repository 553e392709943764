#ifndef SCASEG_CHECKPOINT_HPP_
#define SCASEG_CHECKPOINT_HPP_

#include <string>

#include "scaseg/network.hpp"

namespace scaseg {

// Checkpoint container, little-endian:
//   magic "SCA1", format version u32,
//   tensor count u32,
//   per tensor: name length u32, name bytes, rank u32, dims u32 each,
//   then row-major float64 payloads in manifest order.
// Configuration values are stored as scalar tensors under "config/".
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

// In-memory forms, used by the round-trip tests and the save/load paths.
std::string serialize_network(const Network& net);
Network deserialize_network(const std::string& bytes);

}  // namespace scaseg

#endif  // SCASEG_CHECKPOINT_HPP_
