#pragma once

// Dense double-precision kernels behind every inner loop of the library.
//
// Each kernel has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant compiled in its own translation unit. The variant is chosen once at
// first use from CPUID; TRAJCL_SIMD=scalar in the environment pins the
// reference path. All variants agree to rounding (see tests/test_kernels.cpp),
// and a given process always uses one variant, so runs stay reproducible.

#include <cstddef>
#include <span>
#include <string_view>

namespace trajcl::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

/// Function table for one instruction set. Matrices are row-major.
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i (a_i - b_i)^2
  double (*sq_dist)(const double* a, const double* b, std::size_t n);
  // y = W x + bias   (W: rows x cols, bias may be null)
  void (*gemv)(const double* w, const double* x, const double* bias, double* y,
               std::size_t rows, std::size_t cols);
  // out += W^T g
  void (*gemv_t_acc)(const double* w, const double* g, double* out,
                     std::size_t rows, std::size_t cols);
  // dW += g x^T
  void (*outer_acc)(const double* g, const double* x, double* dw,
                    std::size_t rows, std::size_t cols);
};

bool isa_available(Isa isa);

/// Table for a specific ISA. Throws std::runtime_error if the ISA is not
/// available on this machine or was not compiled in.
const KernelTable& table(Isa isa);

/// ISA selected for this process.
Isa active_isa();
const KernelTable& active();

// Span front-ends over the active table. Sizes are checked.
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double sq_dist(std::span<const double> a, std::span<const double> b);
void gemv(std::span<const double> w, std::span<const double> x,
          std::span<const double> bias, std::span<double> y);
void gemv_t_acc(std::span<const double> w, std::span<const double> g,
                std::span<double> out);
void outer_acc(std::span<const double> g, std::span<const double> x,
               std::span<double> dw);

namespace detail {
const KernelTable& scalar_table();
#if defined(TRAJCL_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace trajcl::kernels
