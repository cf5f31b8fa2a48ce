#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nvlab/rng.hpp"
#include "nvlab/simcache/machine.hpp"

// Shadow-memory oracle for the cache simulator: replays a random op sequence
// against a plain map of last-written byte values and checks, independently
// of any cache bookkeeping, that
//   - reads always return the last written value,
//   - inconsistent_rate equals a byte diff of shadow vs the memory image,
//   - after a full flush, the crash snapshot equals the shadow exactly.
namespace nvlab::testsupport {

struct ShadowOutcome {
  bool ok = true;
  std::string detail;
};

inline ShadowOutcome run_shadow_sequence(std::uint64_t seed) {
  using namespace nvlab::simcache;
  std::mt19937_64 rng(seed);

  CacheConfig cfg = CacheConfig::tiny();
  SimMachine m(cfg);

  const Addr obj_base = 0x1000 + bounded_draw(rng, 48);
  const std::size_t obj_len = 64 + bounded_draw(rng, 240);
  // Decoy range shares cache sets with the object to force evictions.
  const Addr decoy_base = 0x3000;
  const std::size_t decoy_len = 512;

  std::map<Addr, std::uint8_t> shadow;
  auto remember = [&](Addr a, const std::vector<std::uint8_t>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) shadow[a + i] = v[i];
  };
  auto random_bytes = [&](std::size_t n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = static_cast<std::uint8_t>(bounded_draw(rng, 256));
    return v;
  };

  auto init = random_bytes(obj_len);
  m.preload(obj_base, init);
  remember(obj_base, init);
  auto dinit = random_bytes(decoy_len);
  m.preload(decoy_base, dinit);
  remember(decoy_base, dinit);

  const int n_ops = 5 + static_cast<int>(bounded_draw(rng, 56));
  for (int i = 0; i < n_ops; ++i) {
    const bool on_decoy = bounded_draw(rng, 4) == 0;
    const Addr base = on_decoy ? decoy_base : obj_base;
    const std::size_t len = on_decoy ? decoy_len : obj_len;
    const std::size_t off = bounded_draw(rng, len);
    const std::size_t n = 1 + bounded_draw(rng, len - off);
    switch (bounded_draw(rng, 6)) {
      case 0:
      case 1: {  // write
        auto v = random_bytes(n);
        m.write(base + off, v);
        remember(base + off, v);
        break;
      }
      case 2: {  // read and check freshness
        std::vector<std::uint8_t> out(n);
        m.read(base + off, out);
        for (std::size_t k = 0; k < n; ++k) {
          if (out[k] != shadow.at(base + off + k)) {
            std::ostringstream os;
            os << "seed " << seed << ": read mismatch at " << (base + off + k);
            return {false, os.str()};
          }
        }
        break;
      }
      case 3: {  // flush one line
        static const FlushKind kinds[] = {FlushKind::FlushInvalidate, FlushKind::FlushOpt,
                                          FlushKind::WritebackNoInv};
        m.flush_line(base + off, kinds[bounded_draw(rng, 3)]);
        break;
      }
      case 4: {  // flush a sub-range
        static const FlushKind kinds[] = {FlushKind::FlushInvalidate, FlushKind::FlushOpt,
                                          FlushKind::WritebackNoInv};
        m.flush_range(base + off, n, kinds[bounded_draw(rng, 3)]);
        break;
      }
      case 5: {
        if (bounded_draw(rng, 4) == 0) m.writeback_all(bounded_draw(rng, 2) == 0);
        break;
      }
    }
  }

  // Oracle: diff shadow vs the raw memory image over the object bytes.
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < obj_len; ++i) {
    const Addr a = obj_base + i;
    const Addr line = a & ~static_cast<Addr>(cfg.line_size - 1);
    const auto* mem = m.memory().find_line(line);
    const std::uint8_t want = shadow.at(a);
    if (!mem || (*mem)[a - line] != want) ++mismatched;
  }
  const double oracle = static_cast<double>(mismatched) / static_cast<double>(obj_len);
  const double measured = m.inconsistent_rate(obj_base, obj_len);
  if (measured != oracle) {
    std::ostringstream os;
    os << "seed " << seed << ": inconsistent_rate " << measured << " != oracle " << oracle;
    return {false, os.str()};
  }

  // Freshness sweep after the rate check (fills can evict dirty lines and
  // legally change the memory image).
  std::vector<std::uint8_t> all(obj_len);
  m.read(obj_base, all);
  for (std::size_t i = 0; i < obj_len; ++i) {
    if (all[i] != shadow.at(obj_base + i)) {
      std::ostringstream os;
      os << "seed " << seed << ": freshness sweep mismatch at offset " << i;
      return {false, os.str()};
    }
  }

  // Durability: flush everything, crash, compare the snapshot to the shadow.
  static const FlushKind kinds[] = {FlushKind::FlushInvalidate, FlushKind::FlushOpt,
                                    FlushKind::WritebackNoInv};
  m.flush_range(obj_base, obj_len, kinds[bounded_draw(rng, 3)]);
  MemoryImage snap = std::move(m).crash_snapshot();
  for (std::size_t i = 0; i < obj_len; ++i) {
    const Addr a = obj_base + i;
    const Addr line = a & ~static_cast<Addr>(cfg.line_size - 1);
    const auto* mem = snap.find_line(line);
    if (!mem || (*mem)[a - line] != shadow.at(a)) {
      std::ostringstream os;
      os << "seed " << seed << ": post-flush snapshot mismatch at offset " << i;
      return {false, os.str()};
    }
  }
  return {true, {}};
}

}  // namespace nvlab::testsupport
