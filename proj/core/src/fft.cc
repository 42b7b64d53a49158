#include "fft.h"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace sgski::detail {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::shared_ptr<const RealFftPlan> RealFftPlan::get(Index n) {
  static std::map<Index, std::shared_ptr<const RealFftPlan>> cache;
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::shared_ptr<const RealFftPlan> plan(new RealFftPlan(n));
  cache.emplace(n, plan);
  return plan;
}

// Caller holds planner_mutex(); the FFTW planner is not thread-safe.
RealFftPlan::RealFftPlan(Index n) : n_(n) {
  FftBuffer scratch(n);
  forward_plan_ = fftw_plan_dft_r2c_1d(
      static_cast<int>(n), scratch.real(),
      reinterpret_cast<fftw_complex*>(scratch.spectrum()), FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(
      static_cast<int>(n), reinterpret_cast<fftw_complex*>(scratch.spectrum()),
      scratch.real(), FFTW_ESTIMATE);
}

RealFftPlan::~RealFftPlan() {
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void RealFftPlan::forward(double* in, std::complex<double>* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), in,
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFftPlan::inverse(std::complex<double>* in, double* out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(in), out);
}

FftBuffer::FftBuffer(Index n)
    : real_(fftw_alloc_real(static_cast<std::size_t>(n))),
      spectrum_(reinterpret_cast<std::complex<double>*>(
          fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1)))) {}

FftBuffer::~FftBuffer() {
  fftw_free(real_);
  fftw_free(spectrum_);
}

}  // namespace sgski::detail
