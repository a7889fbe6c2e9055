#pragma once

#include <cmath>
#include <vector>

#include "gpmu/numerics/tensor.hpp"

namespace testsupport {

// Classic cyclic Jacobi rotations for a small symmetric matrix. Written
// from the textbook recurrence so spectral checks do not lean on the same
// library the code under test uses for its linear algebra.
inline std::vector<double> jacobi_eigenvalues(gpmu::Tensor a,
                                              int sweeps = 64) {
  const gpmu::Index n = a.rows();
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (gpmu::Index p = 0; p < n; ++p) {
      for (gpmu::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-28) break;
    for (gpmu::Index p = 0; p < n; ++p) {
      for (gpmu::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double sn = t * c;
        for (gpmu::Index k = 0; k < n; ++k) {
          double akp = a(k, p);
          double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (gpmu::Index k = 0; k < n; ++k) {
          double apk = a(p, k);
          double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (gpmu::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  return ev;
}

}  // namespace testsupport
