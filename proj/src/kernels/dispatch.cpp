#include <cstdlib>
#include <stdexcept>
#include <string>

#include "trajcl/kernels.hpp"

namespace trajcl::kernels {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(TRAJCL_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw std::runtime_error("kernel ISA not available: " + std::string(to_string(isa)));
  }
#if defined(TRAJCL_HAVE_AVX2)
  if (isa == Isa::avx2) return detail::avx2_table();
#endif
  return detail::scalar_table();
}

namespace {

Isa select_isa() {
  if (const char* env = std::getenv("TRAJCL_SIMD")) {
    const std::string_view v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && isa_available(Isa::avx2)) return Isa::avx2;
  }
  return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("kernel size mismatch: ") + what);
}

}  // namespace

Isa active_isa() {
  static const Isa isa = select_isa();
  return isa;
}

const KernelTable& active() {
  static const KernelTable& t = table(active_isa());
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "sq_dist");
  return active().sq_dist(a.data(), b.data(), a.size());
}

void gemv(std::span<const double> w, std::span<const double> x,
          std::span<const double> bias, std::span<double> y) {
  require(w.size() == y.size() * x.size(), "gemv weights");
  require(bias.empty() || bias.size() == y.size(), "gemv bias");
  active().gemv(w.data(), x.data(), bias.empty() ? nullptr : bias.data(), y.data(),
                y.size(), x.size());
}

void gemv_t_acc(std::span<const double> w, std::span<const double> g,
                std::span<double> out) {
  require(w.size() == g.size() * out.size(), "gemv_t_acc");
  active().gemv_t_acc(w.data(), g.data(), out.data(), g.size(), out.size());
}

void outer_acc(std::span<const double> g, std::span<const double> x,
               std::span<double> dw) {
  require(dw.size() == g.size() * x.size(), "outer_acc");
  active().outer_acc(g.data(), x.data(), dw.data(), g.size(), x.size());
}

}  // namespace trajcl::kernels
