#include "fdm/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fdm {

namespace {

static_assert(std::endian::native == std::endian::little, "container IO assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::pair<Index, Index> parse_shape(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw InputError("container: malformed shape '" + s + "'");
  try {
    const long long r = std::stoll(s.substr(0, comma));
    const long long c = std::stoll(s.substr(comma + 1));
    if (r < 0 || c < 0) throw InputError("container: negative shape");
    return {static_cast<Index>(r), static_cast<Index>(c)};
  } catch (const std::logic_error&) {
    throw InputError("container: malformed shape '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

void check_token(const std::string& s, bool is_key) {
  if (s.find('\n') != std::string::npos || (is_key && (s.find('=') != std::string::npos || s.empty())))
    throw InputError("container: invalid header token '" + s + "'");
}

}  // namespace

const Mat& Container::array(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return m;
  throw InputError("container: missing array '" + name + "'");
}

bool Container::has_array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.first == name) return true;
  return false;
}

const std::string& Container::meta(const std::string& key) const {
  const auto it = metadata.find(key);
  if (it == metadata.end()) throw InputError("container: missing header key '" + key + "'");
  return it->second;
}

std::string encode_container(const Container& c) {
  std::map<std::string, std::string> header = c.metadata;
  std::string names;
  for (const auto& [name, m] : c.arrays) {
    if (name.find(';') != std::string::npos) throw InputError("container: array names may not contain ';'");
    check_token(name, true);
    names += (names.empty() ? "" : ";") + name;
    header["shape." + name] = std::to_string(m.rows()) + "," + std::to_string(m.cols());
  }
  header["arrays"] = names;
  std::string text;
  for (const auto& [k, v] : header) {
    check_token(k, true);
    check_token(v, false);
    text += k + "=" + v + "\n";
  }
  std::string out(kContainerMagic, 8);
  put_u64(out, text.size());
  out += text;
  for (const auto& [name, m] : c.arrays) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.append(reinterpret_cast<const char*>(rm.data()), static_cast<std::size_t>(rm.size()) * sizeof(double));
  }
  return out;
}

Container decode_container(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 8, kContainerMagic, 8) != 0) throw InputError("container: bad magic");
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) throw InputError("container: truncated header");
  const std::string text = bytes.substr(16, header_len);

  Container c;
  for (const auto& line : split(text, '\n')) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("container: malformed header line '" + line + "'");
    c.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  std::size_t offset = 16 + header_len;
  for (const auto& name : split(c.meta("arrays"), ';')) {
    const auto [rows, cols] = parse_shape(c.meta("shape." + name));
    const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (count > (bytes.size() - offset) / sizeof(double)) throw InputError("container: truncated array '" + name + "'");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    std::memcpy(rm.data(), bytes.data() + offset, count * sizeof(double));
    offset += count * sizeof(double);
    c.arrays.emplace_back(name, Mat(rm));
    c.metadata.erase("shape." + name);
  }
  if (offset != bytes.size()) throw InputError("container: trailing bytes after last array");
  c.metadata.erase("arrays");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const std::string bytes = encode_container(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open container: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_container(ss.str());
}

Container subspace_container(const Subspace& sub) {
  Container c;
  c.metadata["kind"] = "subspace";
  c.metadata["version"] = "1";
  c.metadata["prior_label"] = sub.prior_label;
  c.metadata["path"] = to_string(sub.path);
  c.metadata["dofs"] = std::to_string(sub.dofs());
  c.metadata["modes"] = std::to_string(sub.modes());
  c.arrays.emplace_back("basis", sub.basis);
  c.arrays.emplace_back("eigenvalues", sub.eigenvalues);
  c.arrays.emplace_back("mean", sub.mean);
  return c;
}

Subspace subspace_from_container(const Container& c) {
  if (c.meta("kind") != "subspace") throw InputError("container does not hold a subspace");
  Subspace sub;
  sub.basis = c.array("basis");
  const Mat& values = c.array("eigenvalues");
  const Mat& mean = c.array("mean");
  if (values.cols() != 1 || values.rows() != sub.basis.cols() || mean.cols() != 1 || mean.rows() != sub.basis.rows())
    throw InputError("subspace container arrays have inconsistent shapes");
  sub.eigenvalues = values.col(0);
  sub.mean = mean.col(0);
  sub.prior_label = c.meta("prior_label");
  sub.path = parse_build_path(c.meta("path"));
  return sub;
}

void save_subspace(const std::filesystem::path& path, const Subspace& sub) {
  write_container(path, subspace_container(sub));
}

Subspace load_subspace(const std::filesystem::path& path) { return subspace_from_container(read_container(path)); }

}  // namespace fdm
