#pragma once

#include <cmath>

namespace oracle {

struct AdamScalar {
  double p, m = 0, v = 0;
  int t = 0;

  void step(double g, double lr, double b1, double b2, double eps, double wd) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    p -= lr * (mh / (std::sqrt(vh) + eps) + wd * p);
  }
};

}  // namespace oracle
