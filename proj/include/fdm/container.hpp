#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fdm/subspace.hpp"

namespace fdm {

/// Self-describing matrix container:
///   8-byte magic "FDMCNTR1"
///   u64 little-endian header length, then UTF-8 "key=value\n" lines
///   each array in header order as row-major little-endian f64.
/// The header lists array names under `arrays` and each shape under
/// `shape.<name>` as "rows,cols".
struct Container {
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Mat>> arrays;

  const Mat& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
  const std::string& meta(const std::string& key) const;
};

inline constexpr char kContainerMagic[9] = "FDMCNTR1";

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);
std::string encode_container(const Container& c);
Container decode_container(const std::string& bytes);

Container subspace_container(const Subspace& sub);
Subspace subspace_from_container(const Container& c);
void save_subspace(const std::filesystem::path& path, const Subspace& sub);
Subspace load_subspace(const std::filesystem::path& path);

}  // namespace fdm
