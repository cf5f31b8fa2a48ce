#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "nvlab/simcache/machine.hpp"

using namespace nvlab::simcache;

namespace {

std::vector<std::uint8_t> bytes(std::initializer_list<int> vals) {
  std::vector<std::uint8_t> out;
  for (int v : vals) out.push_back(static_cast<std::uint8_t>(v));
  return out;
}

// Single tiny level: 2 sets x 2 ways of 64B lines. Lines 0,128,256 collide
// in set 0; 64,192 in set 1.
CacheConfig one_level() {
  CacheConfig c;
  c.line_size = 64;
  c.levels = {{256, 2}};
  return c;
}

void fill_line(SimMachine& m, Addr addr, std::uint8_t v) {
  std::vector<std::uint8_t> buf(64, v);
  m.write(addr, buf);
}

std::uint8_t peek(SimMachine& m, Addr addr) {
  std::uint8_t b;
  m.read(addr, {&b, 1});
  return b;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(CacheConfig::tiny().validate());
  CHECK_NOTHROW(CacheConfig::desktop().validate());

  CacheConfig c = CacheConfig::tiny();
  c.line_size = 48;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = CacheConfig::tiny();
  c.levels[0].capacity_bytes = 200;  // not a multiple of 2*64
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = CacheConfig::tiny();
  c.levels[2].capacity_bytes = 128;  // shrinks outward
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = CacheConfig::tiny();
  c.levels.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config json round trip") {
  CacheConfig c = CacheConfig::desktop();
  CacheConfig d = CacheConfig::from_json_text(c.to_json_text());
  CHECK(d.line_size == c.line_size);
  REQUIRE(d.levels.size() == c.levels.size());
  for (std::size_t i = 0; i < d.levels.size(); ++i) {
    CHECK(d.levels[i].capacity_bytes == c.levels[i].capacity_bytes);
    CHECK(d.levels[i].associativity == c.levels[i].associativity);
  }
  CHECK_THROWS_AS(CacheConfig::from_json_text("not json"), ConfigError);
  CHECK_THROWS_AS(CacheConfig::from_json_text("{\"line_size\": 64}"), ConfigError);
}

TEST_CASE("desktop geometry derived quantities") {
  CacheConfig c = CacheConfig::desktop();
  CHECK(c.sets_at(0) == 64);
  CHECK(c.sets_at(1) == 1365);
  CHECK(c.sets_at(2) == 28672);
  CHECK(c.llc_lines() == 28672 * 11);
}

TEST_CASE("read returns preloaded memory") {
  SimMachine m(CacheConfig::tiny());
  auto v = bytes({9});
  m.preload(0x200, v);
  CHECK(peek(m, 0x200) == 9);
  CHECK(m.op_count() == 1);
}

TEST_CASE("uninitialized read throws") {
  SimMachine m(CacheConfig::tiny());
  std::uint8_t b;
  CHECK_THROWS_AS(m.read(0x100, {&b, 1}), UninitializedRead);
  // A one-byte write initializes exactly one byte.
  auto v = bytes({7});
  m.write(0x100, v);
  CHECK(peek(m, 0x100) == 7);
  CHECK_THROWS_AS(m.read(0x101, {&b, 1}), UninitializedRead);
}

TEST_CASE("write is volatile until flushed") {
  SimMachine m(one_level());
  fill_line(m, 0, 0xaa);
  CHECK(m.nvm_write_count() == 0);
  MemoryImage img = std::move(m).crash_snapshot();
  CHECK_FALSE(img.has_line(0));
}

TEST_CASE("flush_invalidate makes a write durable and drops residency") {
  SimMachine m(one_level());
  fill_line(m, 0, 0xaa);
  CHECK(m.flush_line(0, FlushKind::FlushInvalidate));
  CHECK(m.nvm_write_count() == 1);
  // Re-read must refill from memory and still see the value.
  CHECK(peek(m, 0) == 0xaa);
  MemoryImage img = std::move(m).crash_snapshot();
  REQUIRE(img.has_line(0));
  CHECK((*img.find_line(0))[0] == 0xaa);
}

TEST_CASE("flush_opt behaves like flush_invalidate for durability") {
  SimMachine m(one_level());
  fill_line(m, 0, 0xbb);
  CHECK(m.flush_line(0, FlushKind::FlushOpt));
  CHECK(m.nvm_write_count() == 1);
  MemoryImage img = std::move(m).crash_snapshot();
  REQUIRE(img.has_line(0));
  CHECK((*img.find_line(0))[0] == 0xbb);
}

TEST_CASE("writeback_noinv keeps the line resident and clean") {
  SimMachine m(one_level());
  fill_line(m, 0, 0xcc);
  CHECK(m.flush_line(0, FlushKind::WritebackNoInv));
  CHECK(m.nvm_write_count() == 1);
  // Second flush of the now-clean line writes nothing.
  CHECK_FALSE(m.flush_line(0, FlushKind::WritebackNoInv));
  CHECK(m.nvm_write_count() == 1);
  // Still resident: the read hits without touching memory state.
  CHECK(peek(m, 0) == 0xcc);
}

TEST_CASE("flushing clean or non-resident lines writes nothing") {
  SimMachine m(one_level());
  auto v = bytes({1});
  m.preload(0, v);
  CHECK(peek(m, 0) == 1);  // resident clean after fill
  CHECK_FALSE(m.flush_line(0, FlushKind::FlushInvalidate));
  CHECK_FALSE(m.flush_line(0x1000, FlushKind::FlushOpt));  // never touched
  CHECK(m.nvm_write_count() == 0);
}

TEST_CASE("multi-level dirty line flushes its freshest copy once") {
  SimMachine m(CacheConfig::tiny());
  // Dirty line 0 in L1, force it out to L2 by filling set 0 of L1 with
  // lines 128 and 256, then write line 0 again so L1 holds a fresher copy
  // than the dirty one sitting in L2.
  fill_line(m, 0, 1);
  fill_line(m, 128, 2);
  fill_line(m, 256, 3);
  fill_line(m, 0, 4);
  const auto before = m.nvm_write_count();
  CHECK(m.flush_line(0, FlushKind::FlushInvalidate));
  CHECK(m.nvm_write_count() == before + 1);
  MemoryImage img = std::move(m).crash_snapshot();
  REQUIRE(img.has_line(0));
  CHECK((*img.find_line(0))[0] == 4);
}

TEST_CASE("lru eviction writes back the dirty victim") {
  SimMachine m(one_level());
  fill_line(m, 0, 1);
  fill_line(m, 128, 2);
  // Touch line 0 so 128 becomes LRU, then allocate a third set-0 line.
  CHECK(peek(m, 0) == 1);
  fill_line(m, 256, 3);
  CHECK(m.nvm_write_count() == 1);
  MemoryImage img = std::move(m).crash_snapshot();
  REQUIRE(img.has_line(128));
  CHECK((*img.find_line(128))[0] == 2);
  CHECK_FALSE(img.has_line(0));
}

TEST_CASE("clean eviction is silent") {
  SimMachine m(one_level());
  auto v = std::vector<std::uint8_t>(64, 5);
  m.preload(0, v);
  m.preload(128, v);
  m.preload(256, v);
  // Three set-0 lines cycle through a 2-way set; the clean victims vanish
  // without memory traffic.
  CHECK(peek(m, 0) == 5);
  CHECK(peek(m, 128) == 5);
  CHECK(peek(m, 256) == 5);
  CHECK(peek(m, 0) == 5);
  CHECK(m.nvm_write_count() == 0);
}

TEST_CASE("writeback_all flushes every dirty line once") {
  SimMachine m(CacheConfig::tiny());
  fill_line(m, 0, 1);
  fill_line(m, 64, 2);
  fill_line(m, 128, 3);
  const std::size_t wrote = m.writeback_all(true);
  CHECK(wrote == 3);
  CHECK(m.nvm_write_count() == 3);
  // Everything invalidated: reads refill from memory with correct values.
  CHECK(peek(m, 0) == 1);
  CHECK(peek(m, 64) == 2);
  CHECK(peek(m, 128) == 3);
  // No dirty lines remain, so a second pass writes nothing.
  CHECK(m.writeback_all(false) == 0);
}

TEST_CASE("op counting: accesses count one op even across line splits") {
  SimMachine m(CacheConfig::tiny());
  std::vector<std::uint8_t> buf(16, 7);
  m.write(60, buf);  // straddles lines 0 and 64
  CHECK(m.op_count() == 1);
  std::vector<std::uint8_t> out(16);
  m.read(60, out);
  CHECK(m.op_count() == 2);
  CHECK(out == buf);

  // flush_range counts one op per covered line, zero for empty ranges.
  CHECK(m.flush_range(60, 0, FlushKind::FlushOpt) == 0);
  CHECK(m.op_count() == 2);
  m.flush_range(60, 16, FlushKind::FlushOpt);
  CHECK(m.op_count() == 4);
  m.writeback_all(false);
  CHECK(m.op_count() == 5);
}

TEST_CASE("crash trap fires after the op completes and leaves state intact") {
  SimMachine m(one_level());
  fill_line(m, 0, 1);
  m.arm_crash(3);
  fill_line(m, 64, 2);
  bool crashed = false;
  try {
    fill_line(m, 128, 3);  // op 3
    fill_line(m, 192, 4);
  } catch (const CrashInterrupt& c) {
    crashed = true;
    CHECK(c.op_count == 3);
  }
  REQUIRE(crashed);
  CHECK(m.op_count() == 3);
  // The interrupted machine still answers analysis queries: line 128's
  // write completed before the trap fired.
  CHECK(m.inconsistent_rate(128, 64) == 1.0);
  MemoryImage img = std::move(m).crash_snapshot();
  CHECK_FALSE(img.has_line(128));
}

TEST_CASE("inconsistent_rate counts stale bytes against memory") {
  SimMachine m(CacheConfig::tiny());
  // 128-byte object, both lines durable, then overwrite 16 bytes of the
  // first line in cache only: 16 of 128 bytes diverge.
  std::vector<std::uint8_t> obj(128, 0x11);
  m.preload(0x400, obj);
  std::vector<std::uint8_t> patch(16, 0x99);
  m.write(0x400, patch);
  CHECK(m.inconsistent_rate(0x400, 128) == doctest::Approx(16.0 / 128.0));

  // Flushing reconciles memory and the rate drops to zero.
  m.flush_range(0x400, 128, FlushKind::WritebackNoInv);
  CHECK(m.inconsistent_rate(0x400, 128) == 0.0);

  // Rewriting identical bytes dirties the line but no byte differs.
  m.write(0x400, patch);
  CHECK(m.inconsistent_rate(0x400, 128) == 0.0);
}

TEST_CASE("inconsistent_rate sees dirty bytes with no memory backing as stale") {
  SimMachine m(CacheConfig::tiny());
  std::vector<std::uint8_t> obj(64, 0x42);
  m.write(0x800, obj);
  CHECK(m.inconsistent_rate(0x800, 64) == 1.0);
}

TEST_CASE("memory dump is line-aligned, sorted, lower-case hex") {
  SimMachine m(one_level());
  auto v = bytes({0xab, 0xcd});
  m.preload(0x83, v);  // lands in line 0x80
  auto w = bytes({0x01});
  m.preload(0x40, w);
  const std::string d = m.memory().dump();
  const std::string line1 = d.substr(0, d.find('\n'));
  CHECK(line1.substr(0, 5) == "0x40 ");
  CHECK(line1.size() == 5 + 128);
  CHECK(d.find("0x80 ") != std::string::npos);
  CHECK(d.find("abcd") != std::string::npos);
}

TEST_CASE("typed accessors round-trip doubles and integers") {
  SimMachine m(CacheConfig::tiny());
  m.write_f64(0x100, 3.25);
  m.write_i64(0x108, -17);
  CHECK(m.read_f64(0x100) == 3.25);
  CHECK(m.read_i64(0x108) == -17);
}

TEST_CASE("address space cap") {
  CacheConfig c = CacheConfig::tiny();
  c.max_memory_bytes = 4 * 64;
  SimMachine m(c);
  auto v = bytes({1});
  for (int i = 0; i < 4; ++i) m.write(static_cast<Addr>(i) * 64, v);
  CHECK_THROWS_AS(m.write(4 * 64, v), AddressSpaceExceeded);
}
