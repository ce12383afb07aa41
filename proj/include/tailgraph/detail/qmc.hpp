#pragma once

#include <boost/random/sobol.hpp>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tailgraph/detail/rng.hpp"

namespace tailgraph::detail {

// Sobol low-discrepancy points in (0,1)^dim.
class SobolSequence {
 public:
  explicit SobolSequence(int dim) : dim_(dim), eng_(static_cast<std::size_t>(dim)) {
    if (dim < 1) throw std::invalid_argument("SobolSequence: dim must be >= 1");
  }

  void next(std::vector<double>& point) {
    point.resize(dim_);
    for (int j = 0; j < dim_; ++j) {
      point[j] = (static_cast<double>(eng_()) + 0.5) /
                 (static_cast<double>(boost::random::sobol::max()) + 1.0);
    }
  }

 private:
  int dim_;
  boost::random::sobol eng_;
};

struct QmcEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Randomized QMC mean of f over (0,1)^dim: `replicates` Cranley-Patterson
// rotations of one Sobol stream, standard error from the replicate spread.
inline QmcEstimate qmc_mean(const std::function<double(const std::vector<double>&)>& f,
                            int dim, int n_points, std::uint64_t seed, int replicates = 8) {
  SobolSequence sobol(dim);
  std::vector<std::vector<double>> shifts(replicates, std::vector<double>(dim));
  for (int r = 0; r < replicates; ++r) {
    auto eng = make_engine(seed, 1000 + r);
    for (int j = 0; j < dim; ++j) shifts[r][j] = uniform01(eng);
  }
  std::vector<double> sums(replicates, 0.0);
  std::vector<double> p, q(dim);
  int per_rep = n_points / replicates;
  if (per_rep < 1) per_rep = 1;
  for (int i = 0; i < per_rep; ++i) {
    sobol.next(p);
    for (int r = 0; r < replicates; ++r) {
      for (int j = 0; j < dim; ++j) {
        double v = p[j] + shifts[r][j];
        q[j] = v - static_cast<int>(v);
        if (q[j] <= 0.0) q[j] = 1e-300;
      }
      sums[r] += f(q);
    }
  }
  QmcEstimate out;
  double mean = 0.0;
  for (int r = 0; r < replicates; ++r) mean += sums[r] / per_rep;
  mean /= replicates;
  double var = 0.0;
  for (int r = 0; r < replicates; ++r) {
    double d = sums[r] / per_rep - mean;
    var += d * d;
  }
  var /= (replicates > 1 ? replicates * (replicates - 1) : 1);
  out.value = mean;
  out.std_error = std::sqrt(var);
  return out;
}

}  // namespace tailgraph::detail
