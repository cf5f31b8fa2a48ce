#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvlab::simcache {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LevelConfig {
  std::size_t capacity_bytes = 0;
  unsigned associativity = 0;
};

// Geometry of the simulated write-back hierarchy. Levels are ordered from
// innermost (L1) to the last level; the last level writes back to memory.
struct CacheConfig {
  std::size_t line_size = 64;
  std::vector<LevelConfig> levels;

  // Simulated memory image is capped so a runaway workload fails fast
  // instead of eating the host.
  std::size_t max_memory_bytes = std::size_t{1} << 30;

  std::size_t sets_at(std::size_t level) const {
    return levels[level].capacity_bytes / (std::size_t{levels[level].associativity} * line_size);
  }
  std::size_t lines_at(std::size_t level) const {
    return levels[level].capacity_bytes / line_size;
  }
  std::size_t llc_lines() const { return lines_at(levels.size() - 1); }

  // Throws ConfigError: line_size must be a power of two, every capacity an
  // exact multiple of associativity*line_size, capacities non-decreasing
  // outward, at least one level.
  void validate() const;

  // Desktop-class three-level geometry: 32KB/8, 1MB/12, 19.25MB/11, 64B lines.
  static CacheConfig desktop();

  // Tiny hierarchy used by most tests: forces evictions with toy footprints.
  // L1 2 sets x 2 ways, L2 2 sets x 4 ways, L3 4 sets x 4 ways.
  static CacheConfig tiny();

  // JSON object with keys line_size and levels[].{capacity_bytes,associativity}.
  static CacheConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

}  // namespace nvlab::simcache
