#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

// Direct formulas over a row-major truth×predicted count matrix.
struct Scores {
  double accuracy, precision, recall, f1, kappa, mcc;
};

inline Scores direct_scores(const std::vector<std::vector<std::uint64_t>>& m) {
  const std::size_t C = m.size();
  double n = 0, diag = 0;
  std::vector<double> row(C, 0), col(C, 0);
  for (std::size_t i = 0; i < C; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      n += m[i][j];
      row[i] += m[i][j];
      col[j] += m[i][j];
    }
    diag += m[i][i];
  }
  Scores s{};
  s.accuracy = diag / n;
  double p = 0, r = 0, f = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double tp = m[c][c], fp = col[c] - tp, fn = row[c] - tp;
    const double pc = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rc = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    p += pc;
    r += rc;
    f += pc + rc > 0 ? 2 * pc * rc / (pc + rc) : 0.0;
  }
  s.precision = p / C;
  s.recall = r / C;
  s.f1 = f / C;
  double pe = 0;
  for (std::size_t c = 0; c < C; ++c) pe += (row[c] / n) * (col[c] / n);
  s.kappa = pe == 1.0 ? 1.0 : (s.accuracy - pe) / (1 - pe);
  // Pearson correlation of the one-hot truth and prediction indicators.
  double cov_tp = 0, cov_tt = 0, cov_pp = 0;
  for (std::size_t k = 0; k < C; ++k) {
    for (std::size_t i = 0; i < C; ++i) {
      for (std::size_t j = 0; j < C; ++j) {
        const double cnt = m[i][j];
        const double t = (i == k) - row[k] / n, q = (j == k) - col[k] / n;
        cov_tp += cnt * t * q;
        cov_tt += cnt * t * t;
        cov_pp += cnt * q * q;
      }
    }
  }
  s.mcc = cov_tt * cov_pp > 0 ? cov_tp / std::sqrt(cov_tt * cov_pp) : 0.0;
  return s;
}

inline double binary_mcc(double tp, double tn, double fp, double fn) {
  const double d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  return d > 0 ? (tp * tn - fp * fn) / std::sqrt(d) : 0.0;
}

}  // namespace oracle
