#include <cmath>
#include <random>

#include "kernel_base.hpp"
#include "nvlab/rng.hpp"

namespace nvlab::workloads {
namespace {

constexpr long kBlock = 16;

// Conjugate gradient on the SPD operator A = 4.5*I - adjacency of a g x g
// grid (zero outside). Both r.r dot products are recomputed from the vectors
// every iteration, so no scalar state is carried across iterations and a
// restart resumes from the persisted vectors alone. The recurrence-coupled
// vectors x, r, p make this the fragile end of the kernel set: stale lines
// break the residual recurrence and show up as a verification failure.
class CgSolve final : public Kernel {
 public:
  explicit CgSolve(const KernelSpec& spec) : spec_(spec), g_(spec.size), n_(g_ * g_) {
    if (g_ < 4) throw SpecError("cgsolve size must be at least 4");
    const std::size_t bytes = static_cast<std::size_t>(n_) * 8;
    b_ = alloc("b", bytes, true);
    x_ = alloc("x", bytes, false);
    r_ = alloc("r", bytes, false);
    p_ = alloc("p", bytes, false);
    q_ = alloc("q", bytes, false);
    scalars_ = alloc("scalars", 16, false);
    alloc_iterator();
    add_region(0, RegionKind::Loop, "matvec");
    add_region(1, RegionKind::Loop, "dot_pq");
    add_region(2, RegionKind::Loop, "dot_rr");
    add_region(3, RegionKind::Loop, "update_xr");
    add_region(4, RegionKind::Loop, "dot_rr2");
    add_region(5, RegionKind::Loop, "update_p");
    add_region(6, RegionKind::Straight, "reduce");
  }

  void init(simcache::SimMachine& m) override {
    std::mt19937_64 rng(spec_.seed ^ 0xbb67ae8584caa73bULL);
    std::vector<double> b(static_cast<std::size_t>(n_));
    double norm2 = 0.0;
    for (auto& v : b) {
      v = 2.0 * unit_draw(rng) - 1.0;
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (long i = 0; i < n_; ++i) {
      const double bi = b[static_cast<std::size_t>(i)] * inv;
      m.write_f64(b_ + static_cast<Addr>(i) * 8, bi);
      m.write_f64(x_ + static_cast<Addr>(i) * 8, 0.0);
      m.write_f64(r_ + static_cast<Addr>(i) * 8, bi);
      m.write_f64(p_ + static_cast<Addr>(i) * 8, bi);
      m.write_f64(q_ + static_cast<Addr>(i) * 8, 0.0);
    }
    m.write_f64(scalars_, 0.0);
    m.write_f64(scalars_ + 8, 1e30);
    m.write_i64(model_.registry.iterator_addr, 1);
  }

  std::pair<long, bool> main_loop(simcache::SimMachine& m, RunContext& ctx, long start_it,
                                  long max_it) override {
    bool converged = false;
    long it = start_it;
    while (it <= max_it) {
      ctx.begin_iteration(it);

      ctx.enter_region(0);
      for (long i = 0; i < g_; ++i) {
        for (long j = 0; j < g_; ++j) {
          double v = 4.5 * m.read_f64(vec(p_, i * g_ + j));
          if (i > 0) v -= m.read_f64(vec(p_, (i - 1) * g_ + j));
          if (i < g_ - 1) v -= m.read_f64(vec(p_, (i + 1) * g_ + j));
          if (j > 0) v -= m.read_f64(vec(p_, i * g_ + j - 1));
          if (j < g_ - 1) v -= m.read_f64(vec(p_, i * g_ + j + 1));
          m.write_f64(vec(q_, i * g_ + j), v);
        }
        ctx.loop_tick(i);
      }

      ctx.enter_region(1);
      const double s_pq = dot(m, ctx, p_, q_);

      ctx.enter_region(2);
      const double s_rr = dot(m, ctx, r_, r_);

      if (!std::isfinite(s_pq) || !std::isfinite(s_rr) || s_pq <= 0.0)
        throw KernelDiverged("cgsolve lost positive definiteness");
      const double alpha = s_rr / s_pq;

      ctx.enter_region(3);
      for (long k0 = 0; k0 < n_; k0 += kBlock) {
        for (long k = k0; k < std::min(k0 + kBlock, n_); ++k) {
          m.write_f64(vec(x_, k), m.read_f64(vec(x_, k)) + alpha * m.read_f64(vec(p_, k)));
          m.write_f64(vec(r_, k), m.read_f64(vec(r_, k)) - alpha * m.read_f64(vec(q_, k)));
        }
        ctx.loop_tick(k0 / kBlock);
      }

      ctx.enter_region(4);
      const double s_rr2 = dot(m, ctx, r_, r_);
      if (!std::isfinite(s_rr2) || s_rr2 > 1e24)
        throw KernelDiverged("cgsolve residual out of range");
      const double beta = s_rr2 / s_rr;

      ctx.enter_region(5);
      for (long k0 = 0; k0 < n_; k0 += kBlock) {
        for (long k = k0; k < std::min(k0 + kBlock, n_); ++k)
          m.write_f64(vec(p_, k), m.read_f64(vec(r_, k)) + beta * m.read_f64(vec(p_, k)));
        ctx.loop_tick(k0 / kBlock);
      }

      ctx.enter_region(6);
      const double relres = std::sqrt(s_rr2);
      m.write_f64(scalars_, s_rr2);
      m.write_f64(scalars_ + 8, relres);
      converged = relres <= spec_.tolerance;
      ctx.end_straight_region();
      ctx.end_iteration(it + 1);
      if (converged) break;
      ++it;
    }
    return {std::min(it, max_it), converged};
  }

  AcceptanceResult verify(simcache::SimMachine& m, long iterations_used, bool converged,
                          const GoldenStats*) override {
    // True residual ||b - A x|| against the unit-norm right-hand side. The
    // loop stops on the recurrence residual, which drifts slightly from the
    // true one, hence the 5% slack on the threshold.
    double res2 = 0.0;
    for (long i = 0; i < g_; ++i)
      for (long j = 0; j < g_; ++j) {
        double ax = 4.5 * m.read_f64(vec(x_, i * g_ + j));
        if (i > 0) ax -= m.read_f64(vec(x_, (i - 1) * g_ + j));
        if (i < g_ - 1) ax -= m.read_f64(vec(x_, (i + 1) * g_ + j));
        if (j > 0) ax -= m.read_f64(vec(x_, i * g_ + j - 1));
        if (j < g_ - 1) ax -= m.read_f64(vec(x_, i * g_ + j + 1));
        const double d = m.read_f64(vec(b_, i * g_ + j)) - ax;
        res2 += d * d;
      }
    const double residual = std::sqrt(res2);
    return {converged && residual <= spec_.tolerance * 1.05, iterations_used, residual};
  }

 private:
  Addr vec(Addr base, long k) const { return base + static_cast<Addr>(k) * 8; }

  double dot(simcache::SimMachine& m, RunContext& ctx, Addr a, Addr b) {
    double s = 0.0;
    for (long k0 = 0; k0 < n_; k0 += kBlock) {
      if (a == b) {
        for (long k = k0; k < std::min(k0 + kBlock, n_); ++k) {
          const double v = m.read_f64(vec(a, k));
          s += v * v;
        }
      } else {
        for (long k = k0; k < std::min(k0 + kBlock, n_); ++k)
          s += m.read_f64(vec(a, k)) * m.read_f64(vec(b, k));
      }
      ctx.loop_tick(k0 / kBlock);
    }
    return s;
  }

  KernelSpec spec_;
  long g_;
  long n_;
  Addr b_ = 0, x_ = 0, r_ = 0, p_ = 0, q_ = 0, scalars_ = 0;
};

}  // namespace

std::unique_ptr<Kernel> make_cgsolve(const KernelSpec& spec) {
  return std::make_unique<CgSolve>(spec);
}

}  // namespace nvlab::workloads
