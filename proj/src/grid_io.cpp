#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "safeteleop/grid_map.hpp"

namespace safeteleop {

namespace {

static_assert(std::endian::native == std::endian::little, "grid dump is little-endian on disk");

constexpr std::array<char, 4> kMagic{'S', 'T', 'O', 'G'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw std::runtime_error("truncated grid dump");
  return value;
}

}  // namespace

void write_grid(std::ostream& os, const GridSnapshot& grid) {
  const MapConfig& c = grid.config();
  os.write(kMagic.data(), kMagic.size());
  put(os, kVersion);
  for (int a = 0; a < 3; ++a) put(os, c.origin[a]);
  for (int a = 0; a < 3; ++a) put(os, c.extent[a]);
  put(os, c.resolution);
  put(os, c.log_odds_hit);
  put(os, c.log_odds_miss);
  put(os, c.log_odds_min);
  put(os, c.log_odds_max);
  put(os, c.occupied_band);
  for (int a = 0; a < 3; ++a) put(os, static_cast<std::int32_t>(grid.geometry().dims()[a]));
  const auto cells = grid.cells();
  os.write(reinterpret_cast<const char*>(cells.data()), static_cast<std::streamsize>(cells.size_bytes()));
  if (!os) throw std::runtime_error("failed to write grid dump");
}

GridSnapshot read_grid(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("not a grid dump");
  if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("unsupported grid dump version");
  MapConfig c;
  for (int a = 0; a < 3; ++a) c.origin[a] = get<double>(is);
  for (int a = 0; a < 3; ++a) c.extent[a] = get<double>(is);
  c.resolution = get<double>(is);
  c.log_odds_hit = get<double>(is);
  c.log_odds_miss = get<double>(is);
  c.log_odds_min = get<double>(is);
  c.log_odds_max = get<double>(is);
  c.occupied_band = get<double>(is);
  Eigen::Vector3i dims;
  for (int a = 0; a < 3; ++a) dims[a] = get<std::int32_t>(is);
  if (dims != GridGeometry::from_config(c).dims()) throw std::runtime_error("grid dump dimensions disagree with header");
  auto cells = std::make_shared<std::vector<float>>(static_cast<std::size_t>(dims.x()) * dims.y() * dims.z());
  if (!is.read(reinterpret_cast<char*>(cells->data()), static_cast<std::streamsize>(cells->size() * sizeof(float))))
    throw std::runtime_error("truncated grid dump");
  return GridSnapshot(c, std::move(cells));
}

}  // namespace safeteleop
