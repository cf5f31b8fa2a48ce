#include "nvlab/simcache/machine.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

namespace nvlab::simcache {

const std::vector<std::uint8_t>* MemoryImage::find_line(Addr line_addr) const {
  auto it = lines_.find(line_addr);
  return it == lines_.end() ? nullptr : &it->second;
}

void MemoryImage::write_back(Addr line_addr, std::span<const std::uint8_t> data) {
  auto& line = lines_[line_addr];
  line.assign(data.begin(), data.end());
  ++write_count_;
}

void MemoryImage::set_bytes(Addr addr, std::span<const std::uint8_t> data) {
  std::size_t i = 0;
  while (i < data.size()) {
    const Addr a = addr + i;
    const Addr line_addr = a & ~static_cast<Addr>(line_size_ - 1);
    const std::size_t off = static_cast<std::size_t>(a - line_addr);
    const std::size_t n = std::min(line_size_ - off, data.size() - i);
    auto& line = lines_[line_addr];
    if (line.empty()) line.assign(line_size_, 0);
    std::memcpy(line.data() + off, data.data() + i, n);
    i += n;
  }
}

std::string MemoryImage::dump() const {
  std::string out;
  char head[32];
  for (const auto& [addr, line] : lines_) {
    std::snprintf(head, sizeof head, "0x%llx ", static_cast<unsigned long long>(addr));
    out += head;
    static const char* hex = "0123456789abcdef";
    for (std::uint8_t b : line) {
      out += hex[b >> 4];
      out += hex[b & 0xf];
    }
    out += '\n';
  }
  return out;
}

SimMachine::SimMachine(CacheConfig config) : cfg_(std::move(config)), memory_(cfg_.line_size) {
  cfg_.validate();
  levels_.resize(cfg_.levels.size());
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    levels_[i].n_sets = cfg_.sets_at(i);
    levels_[i].n_ways = cfg_.levels[i].associativity;
    levels_[i].ways.resize(levels_[i].n_sets * levels_[i].n_ways);
  }
}

SimMachine::Way* SimMachine::probe(std::size_t level, Addr line_addr) {
  Level& lv = levels_[level];
  const std::size_t set = set_of(level, line_addr);
  const Addr tag = tag_of(level, line_addr);
  for (unsigned w = 0; w < lv.n_ways; ++w) {
    Way* way = lv.at(set, w);
    if (way->valid && way->tag == tag) return way;
  }
  return nullptr;
}

const SimMachine::Way* SimMachine::probe(std::size_t level, Addr line_addr) const {
  return const_cast<SimMachine*>(this)->probe(level, line_addr);
}

const SimMachine::Way* SimMachine::freshest(Addr line_addr) const {
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (const Way* way = probe(i, line_addr)) return way;
  return nullptr;
}

void SimMachine::evict(std::size_t level, Way& way, Addr line_addr) {
  way.valid = false;
  if (!way.dirty) return;
  way.dirty = false;
  if (level + 1 == levels_.size()) {
    memory_.write_back(line_addr, way.data);
    return;
  }
  if (Way* outer = probe(level + 1, line_addr)) {
    outer->data = way.data;
    outer->dirty = true;
    outer->lru_tick = ++levels_[level + 1].tick;
    return;
  }
  install(level + 1, line_addr, way.data, true);
}

SimMachine::Way* SimMachine::install(std::size_t level, Addr line_addr,
                                     std::span<const std::uint8_t> data, bool dirty) {
  Level& lv = levels_[level];
  const std::size_t set = set_of(level, line_addr);
  Way* victim = nullptr;
  for (unsigned w = 0; w < lv.n_ways; ++w) {
    Way* way = lv.at(set, w);
    if (!way->valid) {
      victim = way;
      break;
    }
    if (!victim || way->lru_tick < victim->lru_tick) victim = way;
  }
  if (victim->valid) {
    const Addr victim_line = (victim->tag * lv.n_sets + set) * cfg_.line_size;
    evict(level, *victim, victim_line);
  }
  victim->tag = tag_of(level, line_addr);
  victim->valid = true;
  victim->dirty = dirty;
  victim->data.assign(data.begin(), data.end());
  victim->lru_tick = ++lv.tick;
  return victim;
}

SimMachine::Way* SimMachine::ensure_resident(Addr line_addr) {
  std::size_t hit_level = levels_.size();
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (Way* way = probe(i, line_addr)) {
      if (i == 0) {
        way->lru_tick = ++levels_[0].tick;
        return way;
      }
      hit_level = i;
      way->lru_tick = ++levels_[i].tick;
      break;
    }
  }
  std::vector<std::uint8_t> buf;
  if (hit_level < levels_.size()) {
    buf = probe(hit_level, line_addr)->data;
  } else if (const auto* line = memory_.find_line(line_addr)) {
    buf = *line;
  } else {
    buf.assign(cfg_.line_size, 0);
  }
  // Fill every missing level on the path, innermost last so L1 cannot lose
  // the line to its own eviction cascade.
  for (std::size_t j = hit_level; j-- > 0;) install(j, line_addr, buf, false);
  Way* l1 = probe(0, line_addr);
  l1->lru_tick = ++levels_[0].tick;
  return l1;
}

void SimMachine::bump_op() {
  ++op_count_;
  if (trap_ && op_count_ >= *trap_) {
    trap_.reset();
    throw CrashInterrupt{op_count_};
  }
}

std::vector<std::uint64_t>* SimMachine::init_mask(Addr line_addr, bool create) {
  auto it = init_.find(line_addr);
  if (it != init_.end()) return &it->second;
  if (!create) return nullptr;
  if ((init_.size() + 1) * cfg_.line_size > cfg_.max_memory_bytes)
    throw AddressSpaceExceeded("simulated address space cap exceeded at line " +
                               std::to_string(line_addr));
  auto& mask = init_[line_addr];
  mask.assign((cfg_.line_size + 63) / 64, 0);
  return &mask;
}

bool SimMachine::all_initialized(Addr line_addr, std::size_t offset, std::size_t n) const {
  auto it = init_.find(line_addr);
  if (it == init_.end()) return false;
  for (std::size_t i = offset; i < offset + n; ++i)
    if (!(it->second[i / 64] >> (i % 64) & 1)) return false;
  return true;
}

void SimMachine::mark_initialized(Addr line_addr, std::size_t offset, std::size_t n) {
  auto* mask = init_mask(line_addr, true);
  for (std::size_t i = offset; i < offset + n; ++i) (*mask)[i / 64] |= std::uint64_t{1} << (i % 64);
}

void SimMachine::preload(Addr addr, std::span<const std::uint8_t> data) {
  memory_.set_bytes(addr, data);
  std::size_t i = 0;
  while (i < data.size()) {
    const Addr a = addr + i;
    const Addr line_addr = line_of(a);
    const std::size_t off = static_cast<std::size_t>(a - line_addr);
    const std::size_t n = std::min(cfg_.line_size - off, data.size() - i);
    mark_initialized(line_addr, off, n);
    i += n;
  }
}

void SimMachine::read(Addr addr, std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    const Addr a = addr + i;
    const Addr line_addr = line_of(a);
    const std::size_t off = static_cast<std::size_t>(a - line_addr);
    const std::size_t n = std::min(cfg_.line_size - off, out.size() - i);
    if (!all_initialized(line_addr, off, n))
      throw UninitializedRead("read of never-written byte at address " + std::to_string(a));
    i += n;
  }
  i = 0;
  while (i < out.size()) {
    const Addr a = addr + i;
    const Addr line_addr = line_of(a);
    const std::size_t off = static_cast<std::size_t>(a - line_addr);
    const std::size_t n = std::min(cfg_.line_size - off, out.size() - i);
    Way* way = ensure_resident(line_addr);
    std::memcpy(out.data() + i, way->data.data() + off, n);
    i += n;
  }
  bump_op();
}

void SimMachine::write(Addr addr, std::span<const std::uint8_t> data) {
  std::size_t i = 0;
  while (i < data.size()) {
    const Addr a = addr + i;
    const Addr line_addr = line_of(a);
    const std::size_t off = static_cast<std::size_t>(a - line_addr);
    const std::size_t n = std::min(cfg_.line_size - off, data.size() - i);
    Way* way = ensure_resident(line_addr);
    std::memcpy(way->data.data() + off, data.data() + i, n);
    way->dirty = true;
    mark_initialized(line_addr, off, n);
    i += n;
  }
  bump_op();
}

double SimMachine::read_f64(Addr addr) {
  std::uint8_t buf[8];
  read(addr, buf);
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}

void SimMachine::write_f64(Addr addr, double v) {
  std::uint8_t buf[8];
  std::memcpy(buf, &v, 8);
  write(addr, buf);
}

std::int64_t SimMachine::read_i64(Addr addr) {
  std::uint8_t buf[8];
  read(addr, buf);
  std::int64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

void SimMachine::write_i64(Addr addr, std::int64_t v) {
  std::uint8_t buf[8];
  std::memcpy(buf, &v, 8);
  write(addr, buf);
}

bool SimMachine::flush_line_nocount(Addr line_addr, FlushKind kind) {
  bool dirty_any = false;
  for (std::size_t i = 0; i < levels_.size() && !dirty_any; ++i)
    if (const Way* way = probe(i, line_addr)) dirty_any = way->dirty;
  std::vector<std::uint8_t> fresh;
  if (dirty_any) {
    fresh = freshest(line_addr)->data;
    memory_.write_back(line_addr, fresh);
  }
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (Way* way = probe(i, line_addr)) {
      if (kind == FlushKind::WritebackNoInv) {
        // Stale outer copies must also take the written-back value, or a
        // later clean eviction of the inner copy would expose them.
        if (dirty_any) way->data = fresh;
        way->dirty = false;
      } else {
        way->valid = false;
      }
    }
  }
  return dirty_any;
}

bool SimMachine::flush_line(Addr addr, FlushKind kind) {
  const bool wrote = flush_line_nocount(line_of(addr), kind);
  bump_op();
  return wrote;
}

std::size_t SimMachine::flush_range(Addr addr, std::size_t len, FlushKind kind) {
  if (len == 0) return 0;
  std::size_t wrote = 0;
  const Addr first = line_of(addr);
  const Addr last = line_of(addr + len - 1);
  for (Addr line = first; line <= last; line += cfg_.line_size)
    if (flush_line(line, kind)) ++wrote;
  return wrote;
}

std::size_t SimMachine::writeback_all(bool invalidate) {
  std::size_t wrote = 0;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    Level& lv = levels_[i];
    for (std::size_t s = 0; s < lv.n_sets; ++s) {
      for (unsigned w = 0; w < lv.n_ways; ++w) {
        Way* way = lv.at(s, w);
        if (!way->valid || !way->dirty) continue;
        const Addr line_addr = (way->tag * lv.n_sets + s) * cfg_.line_size;
        const std::vector<std::uint8_t> fresh = freshest(line_addr)->data;
        memory_.write_back(line_addr, fresh);
        ++wrote;
        for (std::size_t j = 0; j < levels_.size(); ++j) {
          if (Way* copy = probe(j, line_addr)) {
            copy->data = fresh;
            copy->dirty = false;
          }
        }
      }
    }
  }
  if (invalidate)
    for (Level& lv : levels_)
      for (Way& way : lv.ways) way.valid = false;
  bump_op();
  return wrote;
}

double SimMachine::inconsistent_rate(Addr addr, std::size_t len) const {
  if (len == 0) return 0.0;
  std::size_t mismatched = 0;
  const Addr first = line_of(addr);
  const Addr last = line_of(addr + len - 1);
  for (Addr line = first; line <= last; line += cfg_.line_size) {
    bool dirty_any = false;
    for (std::size_t i = 0; i < levels_.size() && !dirty_any; ++i)
      if (const Way* way = probe(i, line)) dirty_any = way->dirty;
    if (!dirty_any) continue;
    const Way* fresh = freshest(line);
    const auto* mem = memory_.find_line(line);
    const std::size_t lo = static_cast<std::size_t>(std::max(addr, line) - line);
    const std::size_t hi =
        static_cast<std::size_t>(std::min<Addr>(addr + len, line + cfg_.line_size) - line);
    for (std::size_t b = lo; b < hi; ++b)
      if (!mem || fresh->data[b] != (*mem)[b]) ++mismatched;
  }
  return static_cast<double>(mismatched) / static_cast<double>(len);
}

MemoryImage SimMachine::crash_snapshot() && {
  consumed_ = true;
  levels_.clear();
  return std::move(memory_);
}

}  // namespace nvlab::simcache
