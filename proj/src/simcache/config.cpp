#include "nvlab/simcache/config.hpp"

#include <json.hpp>

namespace nvlab::simcache {

void CacheConfig::validate() const {
  if (line_size == 0 || (line_size & (line_size - 1)) != 0)
    throw ConfigError("line_size must be a power of two, got " + std::to_string(line_size));
  if (levels.empty()) throw ConfigError("cache needs at least one level");
  std::size_t prev = 0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& lv = levels[i];
    if (lv.associativity == 0)
      throw ConfigError("level " + std::to_string(i) + ": associativity must be positive");
    const std::size_t way_bytes = std::size_t{lv.associativity} * line_size;
    if (lv.capacity_bytes == 0 || lv.capacity_bytes % way_bytes != 0)
      throw ConfigError("level " + std::to_string(i) +
                        ": capacity must be a positive multiple of associativity*line_size");
    if (lv.capacity_bytes < prev)
      throw ConfigError("level " + std::to_string(i) + ": capacity smaller than inner level");
    prev = lv.capacity_bytes;
  }
}

CacheConfig CacheConfig::desktop() {
  CacheConfig c;
  c.line_size = 64;
  // 1MB does not divide into 12 ways of 64B lines; use the largest 12-way
  // capacity below 1MB (1365 sets) to keep the set count integral.
  c.levels = {
      {32 * 1024, 8},
      {12 * 64 * 1365, 12},
      {static_cast<std::size_t>(19.25 * 1024 * 1024), 11},
  };
  return c;
}

CacheConfig CacheConfig::tiny() {
  CacheConfig c;
  c.line_size = 64;
  c.levels = {
      {2 * 2 * 64, 2},
      {2 * 4 * 64, 4},
      {4 * 4 * 64, 4},
  };
  return c;
}

CacheConfig CacheConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cache config is not valid JSON: ") + e.what());
  }
  CacheConfig c;
  c.levels.clear();
  try {
    c.line_size = j.at("line_size").get<std::size_t>();
    for (const auto& lv : j.at("levels")) {
      c.levels.push_back({lv.at("capacity_bytes").get<std::size_t>(),
                          lv.at("associativity").get<unsigned>()});
    }
    if (j.contains("max_memory_bytes"))
      c.max_memory_bytes = j.at("max_memory_bytes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cache config missing or mistyped field: ") + e.what());
  }
  c.validate();
  return c;
}

std::string CacheConfig::to_json_text() const {
  nlohmann::ordered_json j;
  j["line_size"] = line_size;
  j["levels"] = nlohmann::ordered_json::array();
  for (const auto& lv : levels)
    j["levels"].push_back({{"capacity_bytes", lv.capacity_bytes},
                           {"associativity", lv.associativity}});
  return j.dump(2);
}

}  // namespace nvlab::simcache
