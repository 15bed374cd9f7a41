#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "pathchaos/engine.hpp"

namespace pathchaos {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'C', 'L'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw IoError("truncated cloud file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_cloud(std::ostream& out, const ReferenceCloud& cloud) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, cloud.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.d()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.order()));
  put<std::uint64_t>(out, cloud.grid().n_steps() + 1);
  put<double>(out, cloud.grid().dt());
  const std::size_t d = cloud.d();
  for (std::size_t s = 0; s <= cloud.grid().n_steps(); ++s) {
    auto xs = cloud.positions_at(s);
    for (std::size_t m = 0; m < cloud.size(); ++m) {
      for (std::size_t k = 0; k < d; ++k) put<double>(out, xs[m * d + k]);
      if (cloud.order() == Order::second) {
        auto vs = cloud.velocities_at(s);
        for (std::size_t k = 0; k < d; ++k) put<double>(out, vs[m * d + k]);
      }
    }
  }
  if (!out) throw IoError("failed writing cloud stream");
}

void write_cloud(const std::string& path, const ReferenceCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_cloud(out, cloud);
}

ReferenceCloud read_cloud(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a cloud file (bad magic)");
  if (get<std::uint32_t>(in) != kVersion) throw IoError("unsupported cloud file version");
  const auto m = get<std::uint64_t>(in);
  const auto d = get<std::uint32_t>(in);
  const auto order_code = get<std::uint32_t>(in);
  const auto rows = get<std::uint64_t>(in);
  const auto dt = get<double>(in);
  if (order_code != 1 && order_code != 2) throw IoError("cloud file has invalid order");
  if (m == 0 || d == 0 || rows < 2) throw IoError("cloud file header describes an empty cloud");
  const auto order = static_cast<Order>(order_code);
  const TimeGrid grid = TimeGrid::make(dt * static_cast<double>(rows - 1), dt);
  if (grid.n_steps() + 1 != rows) throw IoError("cloud file grid is inconsistent");

  std::vector<double> xs(rows * m * d);
  std::vector<double> vs(order == Order::second ? rows * m * d : 0);
  for (std::size_t s = 0; s < rows; ++s) {
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t k = 0; k < d; ++k) xs[(s * m + p) * d + k] = get<double>(in);
      if (order == Order::second)
        for (std::size_t k = 0; k < d; ++k) vs[(s * m + p) * d + k] = get<double>(in);
    }
  }
  CloudProvenance prov;
  prov.note = "loaded from cloud file";
  return ReferenceCloud(order, m, d, grid, std::move(xs), std::move(vs), std::move(prov));
}

ReferenceCloud read_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cloud file " + path);
  return read_cloud(in);
}

}  // namespace pathchaos
