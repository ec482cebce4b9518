#include "cgat/checkpoint.hpp"

#include <fstream>

#include "cgat/binary_io.hpp"
#include "cgat/errors.hpp"

namespace cgat::diff {

namespace {

constexpr char kMagic[5] = "CGCK";
constexpr std::uint32_t kVersion = 1;

CheckpointHeader read_header(std::istream& in, const std::filesystem::path& path) {
  binio::expect_magic(in, kMagic, "checkpoint");
  if (binio::read_le<std::uint32_t>(in) != kVersion) {
    throw InputError("unsupported checkpoint version in " + path.string());
  }
  CheckpointHeader h;
  h.d = binio::read_le<std::uint32_t>(in);
  h.users = binio::read_le<std::uint32_t>(in);
  h.entities = binio::read_le<std::uint32_t>(in);
  h.relations = binio::read_le<std::uint32_t>(in);
  return h;
}

}  // namespace

void save_checkpoint(const ParamRegistry& registry, const CheckpointHeader& header,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  binio::write_magic(out, kMagic);
  binio::write_le<std::uint32_t>(out, kVersion);
  binio::write_le<std::uint32_t>(out, header.d);
  binio::write_le<std::uint32_t>(out, header.users);
  binio::write_le<std::uint32_t>(out, header.entities);
  binio::write_le<std::uint32_t>(out, header.relations);
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(registry.size()));
  for (ParamId id : registry.ids()) {
    const std::string& name = registry.name(id);
    const Tensor& v = registry.value(id);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.rows()));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.cols()));
    for (double x : v.data()) binio::write_f64(out, x);
  }
  if (!out) throw InputError("failed writing " + path.string());
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return read_header(in, path);
}

void load_checkpoint(const std::filesystem::path& path, const CheckpointHeader& expected,
                     ParamRegistry& registry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  if (read_header(in, path) != expected) {
    throw InputError(path.string() + ": checkpoint dimensions do not match the configuration");
  }
  const auto count = binio::read_le<std::uint32_t>(in);
  if (count != registry.size()) {
    throw InputError(path.string() + ": parameter count mismatch");
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = binio::read_le<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw InputError("truncated checkpoint " + path.string());
    const auto id = registry.find(name);
    if (!id) throw InputError(path.string() + ": unknown parameter '" + name + "'");
    Tensor& v = registry.value(*id);
    const auto rows = binio::read_le<std::uint32_t>(in);
    const auto cols = binio::read_le<std::uint32_t>(in);
    if (rows != v.rows() || cols != v.cols()) {
      throw InputError(path.string() + ": shape mismatch for '" + name + "'");
    }
    for (double& x : v.data()) x = binio::read_f64(in);
  }
}

}  // namespace cgat::diff
