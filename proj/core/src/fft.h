#ifndef SGSKI_SRC_FFT_H_
#define SGSKI_SRC_FFT_H_

#include <complex>
#include <memory>

#include "sgski/matrix.h"

namespace sgski::detail {

// Real-to-complex / complex-to-real transform pair of a fixed power-of-two
// length, shared across all Toeplitz operators of that length. Execution is
// re-entrant; buffers must come from FftBuffer (FFTW alignment).
class RealFftPlan {
 public:
  static std::shared_ptr<const RealFftPlan> get(Index n);

  ~RealFftPlan();
  RealFftPlan(const RealFftPlan&) = delete;
  RealFftPlan& operator=(const RealFftPlan&) = delete;

  Index size() const { return n_; }
  Index spectrum_size() const { return n_ / 2 + 1; }

  void forward(double* in, std::complex<double>* out) const;
  // Unnormalized: inverse(forward(x)) == n * x. Destroys `in`.
  void inverse(std::complex<double>* in, double* out) const;

 private:
  explicit RealFftPlan(Index n);

  Index n_;
  void* forward_plan_;
  void* inverse_plan_;
};

class FftBuffer {
 public:
  explicit FftBuffer(Index n);
  ~FftBuffer();
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  double* real() { return real_; }
  std::complex<double>* spectrum() { return spectrum_; }

 private:
  double* real_;
  std::complex<double>* spectrum_;
};

}  // namespace sgski::detail

#endif  // SGSKI_SRC_FFT_H_
