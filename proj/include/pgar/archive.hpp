#ifndef PGAR_ARCHIVE_HPP
#define PGAR_ARCHIVE_HPP

#include "pgar/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace pgar {

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> values;

  std::int64_t element_count() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

/// Named-tensor container shared by backbone weight files and checkpoints.
///
/// Layout (little-endian):
///   8 bytes   magic "PGARARC\0"
///   uint32    format version
///   uint64    header length L
///   L bytes   JSON header {"meta": {...}, "tensors": [{"name", "shape", "offset"}]}
///   float32[] tensor payloads, concatenated in header order
struct Archive {
  static constexpr std::uint32_t kFormatVersion = 1;

  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

/// Writes atomically: the payload goes to a temporary file that is renamed
/// over `path` only once complete.
void write_archive(const std::string& path, const Archive& archive);
Archive read_archive(const std::string& path);

}  // namespace pgar

#endif  // PGAR_ARCHIVE_HPP
