#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "hecta/nn/tensor.hpp"

namespace hecta {

using Params = nn::ParamStore<double>;

// Binary container: magic "HECTACKP", format version, a string metadata map, then
// named shaped float64 arrays. Values round-trip bit-exactly.
struct Checkpoint {
    std::map<std::string, std::string> metadata;
    Params params;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckp);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies every entry of `src` into `dst` under "<prefix>/<name>".
void merge_prefixed(Params& dst, const Params& src, const std::string& prefix);
// Inverse of merge_prefixed; entries without the prefix are ignored.
Params extract_prefixed(const Params& src, const std::string& prefix);

}  // namespace hecta
