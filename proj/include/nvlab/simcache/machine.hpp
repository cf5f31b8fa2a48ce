#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvlab/simcache/config.hpp"

namespace nvlab::simcache {

using Addr = std::uint64_t;

struct UninitializedRead : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AddressSpaceExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown by SimMachine when an armed crash point is reached. Not an error:
// the machine stays intact so the caller can sample inconsistency rates and
// take the crash snapshot.
struct CrashInterrupt {
  std::uint64_t op_count = 0;
};

// Persistence-instruction flavours. FlushInvalidate and FlushOpt both write
// back a dirty line and drop every cached copy; WritebackNoInv keeps copies
// resident but clean.
enum class FlushKind { FlushInvalidate, FlushOpt, WritebackNoInv };

// Byte-addressable non-volatile memory, stored as line-aligned sparse lines.
// nvm_write_count increments once per dirty line written back, which is the
// currency the write-traffic comparisons trade in.
class MemoryImage {
 public:
  explicit MemoryImage(std::size_t line_size = 64) : line_size_(line_size) {}

  std::size_t line_size() const { return line_size_; }
  std::uint64_t nvm_write_count() const { return write_count_; }
  std::size_t line_count() const { return lines_.size(); }

  bool has_line(Addr line_addr) const { return lines_.count(line_addr) != 0; }
  const std::vector<std::uint8_t>* find_line(Addr line_addr) const;

  // Runtime write-back of a full dirty line; bumps nvm_write_count.
  void write_back(Addr line_addr, std::span<const std::uint8_t> data);

  // Setup-time store (initial images, snapshot restore). No write counted.
  void set_bytes(Addr addr, std::span<const std::uint8_t> data);

  // One line per row: "0x<line_addr> <2*line_size hex chars>", sorted by
  // address, lower-case hex.
  std::string dump() const;

  bool operator==(const MemoryImage&) const = default;

 private:
  std::size_t line_size_;
  std::map<Addr, std::vector<std::uint8_t>> lines_;
  std::uint64_t write_count_ = 0;
};

// Value-tracking multi-level cache simulator over a MemoryImage. Write-back,
// write-allocate, LRU within each set, non-inclusive across levels. Reads and
// writes move real bytes so a crash leaves memory exactly as the write-back
// traffic left it.
class SimMachine {
 public:
  explicit SimMachine(CacheConfig config);

  const CacheConfig& config() const { return cfg_; }
  std::uint64_t op_count() const { return op_count_; }
  std::uint64_t nvm_write_count() const { return memory_.nvm_write_count(); }
  const MemoryImage& memory() const { return memory_; }

  // Seeds memory directly (initial NVM contents, snapshot restore). Marks the
  // covered bytes initialized. Not a dynamic op.
  void preload(Addr addr, std::span<const std::uint8_t> data);

  // One dynamic op each, even when the access straddles a line boundary.
  // read throws UninitializedRead if any requested byte was never written
  // or preloaded.
  void read(Addr addr, std::span<std::uint8_t> out);
  void write(Addr addr, std::span<const std::uint8_t> data);

  double read_f64(Addr addr);
  void write_f64(Addr addr, double v);
  std::int64_t read_i64(Addr addr);
  void write_i64(Addr addr, std::int64_t v);

  // One dynamic op. Returns true if a dirty copy was written back (at most
  // one memory write per line regardless of how many levels held it).
  // Flushing a clean or non-resident line writes nothing.
  bool flush_line(Addr addr, FlushKind kind);

  // flush_line over every line overlapping [addr, addr+len); one op per line,
  // zero ops when len == 0. Returns the number of lines written back.
  std::size_t flush_range(Addr addr, std::size_t len, FlushKind kind);

  // Writes back every dirty line in the hierarchy (innermost copy wins),
  // optionally invalidating all copies. One dynamic op. Returns lines written.
  std::size_t writeback_all(bool invalidate);

  // Fraction of the object's bytes whose freshest cached value differs from
  // memory, judged by byte comparison on lines that are dirty somewhere in
  // the hierarchy. Clean and non-resident lines contribute zero. Analysis
  // helper: not a dynamic op, does not disturb cache state.
  double inconsistent_rate(Addr addr, std::size_t len) const;

  // The crash: cache contents are lost, memory survives. Consumes the
  // machine (its hierarchy is gone afterwards).
  MemoryImage crash_snapshot() &&;

  // Arms a trap that throws CrashInterrupt as soon as op_count reaches
  // at_op_count (checked after each completed op).
  void arm_crash(std::uint64_t at_op_count) { trap_ = at_op_count; }
  void disarm_crash() { trap_.reset(); }

 private:
  struct Way {
    Addr tag = 0;
    bool valid = false;
    bool dirty = false;
    std::uint64_t lru_tick = 0;
    std::vector<std::uint8_t> data;
  };
  struct Level {
    std::size_t n_sets = 0;
    unsigned n_ways = 0;
    std::vector<Way> ways;  // n_sets * n_ways, row-major by set
    std::uint64_t tick = 0;
    Way* at(std::size_t set, unsigned way) { return &ways[set * n_ways + way]; }
  };

  Addr line_of(Addr addr) const { return addr & ~static_cast<Addr>(cfg_.line_size - 1); }
  std::size_t set_of(std::size_t level, Addr line_addr) const {
    return (line_addr / cfg_.line_size) % levels_[level].n_sets;
  }
  Addr tag_of(std::size_t level, Addr line_addr) const {
    return (line_addr / cfg_.line_size) / levels_[level].n_sets;
  }

  Way* probe(std::size_t level, Addr line_addr);
  const Way* probe(std::size_t level, Addr line_addr) const;

  // Innermost valid copy of the line, or nullptr. That copy always holds the
  // freshest value: writes land in L1 and values only move outward through
  // evictions.
  const Way* freshest(Addr line_addr) const;

  // Installs data into the given level (allocating, evicting the LRU victim
  // first if needed) and returns the installed way.
  Way* install(std::size_t level, Addr line_addr, std::span<const std::uint8_t> data, bool dirty);
  void evict(std::size_t level, Way& way, Addr line_addr);

  // Makes the line resident in L1, filling every missing level on the path
  // from the innermost holder (or memory) inward. Returns the L1 way.
  Way* ensure_resident(Addr line_addr);

  void bump_op();
  bool flush_line_nocount(Addr line_addr, FlushKind kind);

  // Initialized-byte tracking, one bit per byte within each touched line.
  std::vector<std::uint64_t>* init_mask(Addr line_addr, bool create);
  bool all_initialized(Addr line_addr, std::size_t offset, std::size_t n) const;
  void mark_initialized(Addr line_addr, std::size_t offset, std::size_t n);

  CacheConfig cfg_;
  std::vector<Level> levels_;
  MemoryImage memory_;
  std::map<Addr, std::vector<std::uint64_t>> init_;
  std::uint64_t op_count_ = 0;
  std::optional<std::uint64_t> trap_;
  bool consumed_ = false;
};

}  // namespace nvlab::simcache
