#pragma once

// Thin wrapper around Eigen's FFT with the sign/normalization conventions
// pinned: fwd computes sum_j a_j e^{-2 pi i j k / n}, inv includes the 1/n.

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace dwell {

class Fft {
public:
  void fwd(std::vector<std::complex<double>>& freq, const std::vector<std::complex<double>>& time) {
    impl_.fwd(freq, time);
  }
  void inv(std::vector<std::complex<double>>& time, const std::vector<std::complex<double>>& freq) {
    impl_.inv(time, freq);
  }

private:
  Eigen::FFT<double> impl_;
};

// Signed momentum index of FFT bin j on an n-point grid: 0, 1, ..., n/2-1,
// -n/2, ..., -1.  With the cell length equal to one wavelength the plane wave
// in bin j carries momentum m(j) photon recoils (hbar k units, k = 2 pi / lambda).
inline int momentum_index(int j, int n) { return j < (n + 1) / 2 ? j : j - n; }

} // namespace dwell
