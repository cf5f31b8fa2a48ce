#include "kernel_base.hpp"

#include <algorithm>

namespace nvlab::workloads {

using simcache::FlushKind;

std::vector<DataObject> DataObjectRegistry::candidates() const {
  std::vector<DataObject> out;
  for (const auto& o : objects)
    if (!o.read_only) out.push_back(o);
  return out;
}

const DataObject* DataObjectRegistry::find(const std::string& name) const {
  for (const auto& o : objects)
    if (o.name == name) return &o;
  return nullptr;
}

RunContext::RunContext(simcache::SimMachine& m, const KernelModel& model,
                       const FlushSchedule* schedule)
    : m_(m), model_(model), iterator_addr_(model.registry.iterator_addr) {
  region_ops_.assign(model_.regions.size(), 0);
  region_ticks_.assign(model_.regions.size(), 0);
  freq_.assign(model_.regions.size(), 0);
  if (schedule && !schedule->empty()) {
    for (const auto& name : schedule->objects) {
      const DataObject* obj = model_.registry.find(name);
      if (!obj) throw SpecError("schedule names unknown object '" + name + "'");
      targets_.emplace_back(obj->base, obj->size);
    }
    for (const auto& [rid, x] : schedule->frequency) {
      if (rid < 0 || static_cast<std::size_t>(rid) >= freq_.size())
        throw SpecError("schedule names unknown region " + std::to_string(rid));
      if (x < 0) throw SpecError("schedule frequency must be non-negative");
      freq_[rid] = x;
    }
  }
}

void RunContext::window_begin() {
  window_start_ = mark_ = m_.op_count();
}

void RunContext::account_to_here() {
  const std::uint64_t now = m_.op_count();
  if (region_ >= 0) region_ops_[region_] += now - mark_;
  mark_ = now;
}

void RunContext::begin_iteration(long it) {
  iteration_ = it;
  ++visits_;
}

void RunContext::enter_region(int id) {
  account_to_here();
  region_ = id;
}

void RunContext::persistence_op() {
  std::uint64_t wrote = 0;
  for (const auto& [base, size] : targets_) wrote += m_.flush_range(base, size, FlushKind::WritebackNoInv);
  if (m_.flush_line(iterator_addr_, FlushKind::WritebackNoInv)) ++wrote;
  flush_writes_ += wrote;
  max_op_writes_ = std::max(max_op_writes_, wrote);
  ++persist_ops_;
  persist_end_ops_.push_back(m_.op_count() - window_start_);
}

void RunContext::loop_tick(long inner_it) {
  ++region_ticks_[region_];
  const int x = freq_[region_];
  if (!targets_.empty() && x > 0 && (inner_it + 1) % x == 0) persistence_op();
}

void RunContext::end_straight_region() {
  if (!targets_.empty() && freq_[region_] > 0) persistence_op();
}

void RunContext::end_iteration(long next_it) {
  m_.write_i64(iterator_addr_, next_it);
  m_.flush_line(iterator_addr_, FlushKind::WritebackNoInv);
}

void RunContext::finish() {
  account_to_here();
}

std::uint64_t RunContext::window_ops() const {
  return m_.op_count() - window_start_;
}

Addr Kernel::alloc(const std::string& name, std::size_t bytes, bool read_only) {
  const Addr base = next_addr_;
  const std::size_t line = 64;
  next_addr_ += (bytes + line - 1) / line * line + line;  // one guard line between objects
  model_.registry.objects.push_back({name, base, bytes, read_only});
  return base;
}

void Kernel::alloc_iterator() {
  model_.registry.iterator_addr = next_addr_;
  next_addr_ += 2 * 64;
}

void Kernel::add_region(int id, RegionKind kind, const std::string& name) {
  model_.regions.push_back({id, kind, name});
}

std::unique_ptr<Kernel> make_kernel(const KernelSpec& spec) {
  if (spec.size <= 0) throw SpecError("kernel size must be positive");
  if (spec.tolerance <= 0.0) throw SpecError("kernel tolerance must be positive");
  if (spec.kernel == "jacobi2d") return make_jacobi2d(spec);
  if (spec.kernel == "cgsolve") return make_cgsolve(spec);
  if (spec.kernel == "kmeans") return make_kmeans(spec);
  throw SpecError("unknown kernel '" + spec.kernel + "'");
}

}  // namespace nvlab::workloads
