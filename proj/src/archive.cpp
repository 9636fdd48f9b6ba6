#include "pgar/archive.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace pgar {

namespace {

constexpr char kMagic[8] = {'P', 'G', 'A', 'R', 'A', 'R', 'C', '\0'};

static_assert(std::endian::native == std::endian::little, "archive IO assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& is, T& v) {
  return bool(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

const NamedTensor* Archive::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_archive(const std::string& path, const Archive& archive) {
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::int64_t offset = 0;
  for (const auto& t : archive.tensors) {
    if (std::int64_t(t.values.size()) != t.element_count()) {
      throw Error("archive tensor " + t.name + " has " + std::to_string(t.values.size()) +
                  " values for its shape");
    }
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.element_count();
  }
  const std::string text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp + " for writing");
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, Archive::kFormatVersion);
    write_pod(os, std::uint64_t(text.size()));
    os.write(text.data(), std::streamsize(text.size()));
    for (const auto& t : archive.tensors) {
      os.write(reinterpret_cast<const char*>(t.values.data()), std::streamsize(t.values.size() * sizeof(float)));
    }
    if (!os) throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open archive " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw LoadError(path + " is not a tensor archive");
  }
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  if (!read_pod(is, version) || !read_pod(is, len)) throw LoadError(path + ": truncated header");
  if (version != Archive::kFormatVersion) {
    throw LoadError(path + ": unsupported format version " + std::to_string(version));
  }
  std::string text(len, '\0');
  if (!is.read(text.data(), std::streamsize(len))) throw LoadError(path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": corrupt header: " + e.what());
  }

  Archive a;
  a.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    t.values.resize(std::size_t(t.element_count()));
    if (!is.read(reinterpret_cast<char*>(t.values.data()), std::streamsize(t.values.size() * sizeof(float)))) {
      throw LoadError(path + ": tensor " + t.name + " is truncated");
    }
    a.tensors.push_back(std::move(t));
  }
  return a;
}

}  // namespace pgar
