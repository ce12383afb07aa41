#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailgraph/detail/rng.hpp"

namespace tailgraph {

// A point of the censored space F^d = ((-inf,-1] U {0} U [1,inf))^d.
struct CensoredPoint {
  Eigen::VectorXd values;
  bool is_atom = false;

  static CensoredPoint checked(Eigen::VectorXd v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      double a = std::abs(v(i));
      if (a != 0.0 && a < 1.0)
        throw std::invalid_argument("CensoredPoint: entry with |value| in (0,1)");
    }
    CensoredPoint p;
    p.is_atom = (v.size() == 0) || (v.cwiseAbs().maxCoeff() == 0.0);
    p.values = std::move(v);
    return p;
  }

  std::vector<int> pattern() const {
    std::vector<int> a;
    for (Eigen::Index i = 0; i < values.size(); ++i)
      if (values(i) != 0.0) a.push_back(static_cast<int>(i));
    return a;
  }

  std::uint32_t pattern_mask() const {
    std::uint32_t m = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i)
      if (values(i) != 0.0) m |= (1u << i);
    return m;
  }
};

// Entries with |x_i| < 1 are set to zero; |x_i| >= 1 is kept (boundary
// included). Idempotent.
inline CensoredPoint censor_point(const Eigen::VectorXd& x) {
  Eigen::VectorXd v = x;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) < 1.0) v(i) = 0.0;
  CensoredPoint p;
  p.values = std::move(v);
  p.is_atom = (p.values.size() == 0) || (p.values.cwiseAbs().maxCoeff() == 0.0);
  return p;
}

struct CensoredSample {
  std::vector<CensoredPoint> points;
  double p_hat = 0.0;                  // empirical Pr(||transformed||_inf >= 1)
  Eigen::MatrixXd thresholds;          // d x 2 original-scale thresholds (pos, neg), NaN if none
  double tail_fraction = 0.0;

  int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().values.size()); }

  // the S-marginal censored sample (atoms recomputed from the restriction)
  CensoredSample restrict(const std::vector<int>& S) const {
    CensoredSample out;
    out.p_hat = p_hat;
    out.tail_fraction = tail_fraction;
    for (const auto& p : points) {
      Eigen::VectorXd v(S.size());
      for (std::size_t j = 0; j < S.size(); ++j) v(j) = p.values(S[j]);
      out.points.push_back(CensoredPoint::checked(std::move(v)));
    }
    return out;
  }
};

struct TransformResult {
  Eigen::MatrixXd transformed;  // n x d, tails on unit Pareto scale, middle in (-1,1)
  double p_hat = 0.0;
  Eigen::MatrixXd thresholds;   // d x 2 (positive, negative) original-scale thresholds
  std::vector<std::string> warnings;
  double tail_fraction = 0.0;
};

// Rank transform to the unit Pareto tail scale, per margin and sign: the
// largest floor(tf*n) positive values map to (n_tail+1)/rank, the most
// negative floor(tf*n) negative values map to -(n_tail+1)/rank, everything
// else monotonically into (-1,1).
inline TransformResult transform_to_pareto(const Eigen::MatrixXd& sample, double tail_fraction,
                                           int min_n = 50) {
  const int n = static_cast<int>(sample.rows());
  const int d = static_cast<int>(sample.cols());
  if (!(tail_fraction > 0.0) || !(tail_fraction < 1.0))
    throw std::invalid_argument("transform_to_pareto: tail_fraction must be in (0,1)");
  if (n < min_n)
    throw std::invalid_argument("transform_to_pareto: need at least " + std::to_string(min_n) +
                                " observations");
  const int k = std::max(1, static_cast<int>(std::floor(tail_fraction * n)));
  TransformResult out;
  out.tail_fraction = tail_fraction;
  out.transformed.resize(n, d);
  out.thresholds.resize(d, 2);
  out.thresholds.setConstant(std::numeric_limits<double>::quiet_NaN());

  std::vector<int> order(n);
  for (int j = 0; j < d; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return sample(a, j) > sample(b, j) || (sample(a, j) == sample(b, j) && a < b);
    });
    // tie diagnostics
    std::map<double, int> counts;
    for (int i = 0; i < n; ++i) ++counts[sample(i, j)];
    int max_tie = 0;
    for (auto& [v, c] : counts) max_tie = std::max(max_tie, c);
    if (max_tie > n / 5)
      out.warnings.push_back("margin " + std::to_string(j) + ": ties exceed 20% of observations");

    std::vector<int> pos_tail, neg_tail, mid;
    for (int i = 0; i < k; ++i)
      if (sample(order[i], j) > 0) pos_tail.push_back(order[i]);
    for (int i = 0; i < k; ++i)
      if (sample(order[n - 1 - i], j) < 0) neg_tail.push_back(order[n - 1 - i]);
    {
      std::vector<char> used(n, 0);
      for (int i : pos_tail) used[i] = 1;
      for (int i : neg_tail) used[i] = 1;
      for (int i = 0; i < n; ++i)
        if (!used[order[i]]) mid.push_back(order[i]);  // descending order
    }
    const int np = static_cast<int>(pos_tail.size());
    const int nn = static_cast<int>(neg_tail.size());
    for (int r = 0; r < np; ++r) out.transformed(pos_tail[r], j) = (np + 1.0) / (r + 1.0);
    for (int r = 0; r < nn; ++r) out.transformed(neg_tail[r], j) = -(nn + 1.0) / (r + 1.0);
    const int nm = static_cast<int>(mid.size());
    for (int r = 0; r < nm; ++r) {
      // mid is sorted descending: rank r=0 is the largest
      double u = 1.0 - 2.0 * (r + 1.0) / (nm + 1.0);
      out.transformed(mid[r], j) = u;
    }
    if (np > 0) out.thresholds(j, 0) = sample(pos_tail.back(), j);
    if (nn > 0) out.thresholds(j, 1) = sample(neg_tail.back(), j);
  }
  int count = 0;
  for (int i = 0; i < n; ++i)
    if (out.transformed.row(i).cwiseAbs().maxCoeff() >= 1.0) ++count;
  out.p_hat = static_cast<double>(count) / n;
  if (count < 5)
    throw std::invalid_argument("transform_to_pareto: too few exceedances after the transform");
  return out;
}

inline CensoredSample censor_sample(const TransformResult& t) {
  CensoredSample out;
  out.p_hat = t.p_hat;
  out.thresholds = t.thresholds;
  out.tail_fraction = t.tail_fraction;
  out.points.reserve(t.transformed.rows());
  for (int i = 0; i < t.transformed.rows(); ++i)
    out.points.push_back(censor_point(t.transformed.row(i).transpose()));
  return out;
}

struct LawEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  long n_event = 0;
  long n_cone = 0;
};

// Empirical estimate of
//   p Pr(sigma_x X_{D cap A} >= t|x|, |X_{D cap A^c}| < t) / Pr(||X||_inf >= t),
// the law of the censored sequence at threshold t.
inline LawEstimate censored_sequence_law(
    const std::function<Eigen::MatrixXd(int, std::uint64_t)>& sampler, double t,
    const std::vector<int>& D, const std::vector<int>& A, const Eigen::VectorXd& x, int n,
    std::uint64_t seed, double p = 1.0) {
  if (A.size() > D.size()) throw std::invalid_argument("censored_sequence_law: A must be in D");
  for (int a : A)
    if (std::find(D.begin(), D.end(), a) == D.end())
      throw std::invalid_argument("censored_sequence_law: A must be a subset of D");
  if (static_cast<int>(A.size()) != x.size())
    throw std::invalid_argument("censored_sequence_law: x must match A");
  if (x.size() > 0 && x.cwiseAbs().minCoeff() < 1.0)
    throw std::domain_error("censored_sequence_law: |x| >= 1 required");
  Eigen::MatrixXd X = sampler(n, seed);
  long n_cone = 0, n_event = 0;
  for (int r = 0; r < X.rows(); ++r) {
    if (X.row(r).cwiseAbs().maxCoeff() < t) continue;
    ++n_cone;
    bool ok = true;
    for (std::size_t j = 0; j < A.size() && ok; ++j) {
      double sgn = (x(j) > 0) ? 1.0 : -1.0;
      if (!(sgn * X(r, A[j]) >= t * std::abs(x(j)))) ok = false;
    }
    for (int dcoord : D) {
      if (!ok) break;
      if (std::find(A.begin(), A.end(), dcoord) != A.end()) continue;
      if (!(std::abs(X(r, dcoord)) < t)) ok = false;
    }
    if (ok) ++n_event;
  }
  if (n_cone == 0) throw std::runtime_error("censored_sequence_law: no exceedances at t");
  LawEstimate est;
  est.n_event = n_event;
  est.n_cone = n_cone;
  double pe = static_cast<double>(n_event) / n_cone;
  est.estimate = p * pe;
  est.std_error = p * std::sqrt(std::max(pe * (1 - pe), 1e-12) / n_cone);
  return est;
}

// Density of a censored law with respect to the mixed base measure: Lebesgue
// components registered per exceedance pattern, a point mass at 0.
struct Mu0Density {
  std::map<std::uint32_t, std::function<double(const Eigen::VectorXd&)>> components;
  double atom_mass = 0.0;

  double operator()(const CensoredPoint& p) const {
    if (p.is_atom) return atom_mass;
    auto it = components.find(p.pattern_mask());
    if (it == components.end())
      throw std::invalid_argument("Mu0Density: no component registered for this pattern");
    auto a = p.pattern();
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v(i) = p.values(a[i]);
    return it->second(v);
  }
};

inline double mu0_density(const Mu0Density& f, const CensoredPoint& p) { return f(p); }

// ---------------------------------------------------------------------------
// Finite-threshold residual of asymptotic conditional independence between
// margins i and j given the rest: histogram plug-in of
//   int g (f_V f_C - f_{iC} f_{jC}) dmu0
// over the censored sample at each threshold. Crude by design; a diagnostic,
// not a test.

struct AciResult {
  double t = 0.0;
  std::vector<double> residuals;   // one per test function
  std::vector<double> std_errors;  // 10-fold subsample spread
};

namespace censor_detail {

// per-coordinate histogram on the bounded scale u = sign(y)/y in [-1,1]
struct CoordBins {
  std::vector<double> edges;  // ascending, first=-1, last=1
  int find(double u) const {
    int lo = 0, hi = static_cast<int>(edges.size()) - 2;
    while (lo < hi) {
      int mid = (lo + hi + 1) / 2;
      if (u >= edges[mid]) lo = mid;
      else hi = mid - 1;
    }
    return lo;
  }
  double width(int b) const { return edges[b + 1] - edges[b]; }
  int count() const { return static_cast<int>(edges.size()) - 1; }
};

inline CoordBins fd_bins(std::vector<double> u) {
  CoordBins cb;
  if (u.size() < 4) {
    cb.edges = {-1.0, 0.0, 1.0};
    return cb;
  }
  std::sort(u.begin(), u.end());
  double q1 = u[u.size() / 4], q3 = u[(3 * u.size()) / 4];
  double iqr = std::max(q3 - q1, 1e-3);
  double h = 2.0 * iqr / std::cbrt(static_cast<double>(u.size()));
  int nb = std::clamp(static_cast<int>(std::ceil(2.0 / h)), 2, 24);
  cb.edges.resize(nb + 1);
  for (int i = 0; i <= nb; ++i) cb.edges[i] = -1.0 + 2.0 * i / nb;
  return cb;
}

}  // namespace censor_detail

inline std::vector<std::function<double(const Eigen::VectorXd&)>> default_aci_test_functions(
    int d) {
  std::vector<std::function<double(const Eigen::VectorXd&)>> g;
  g.push_back([](const Eigen::VectorXd&) { return 1.0; });
  g.push_back([](const Eigen::VectorXd& u) {
    double v = 1.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) v *= std::cos(0.5 * 3.14159265358979 * u(i));
    return v;
  });
  g.push_back([d](const Eigen::VectorXd& u) {
    for (Eigen::Index i = 0; i < u.size(); ++i)
      if (std::abs(u(i)) > 0.5) return 0.0;
    return 1.0;
  });
  return g;
}

// sampler_t(t, n, seed) draws n raw vectors at threshold level t; the
// censored sequence is censor(X/t).
inline std::vector<AciResult> aci_residual(
    const std::function<Eigen::MatrixXd(double, int, std::uint64_t)>& sampler_t, int i, int j,
    const std::vector<double>& t_grid,
    const std::vector<std::function<double(const Eigen::VectorXd&)>>& test_functions, int n,
    std::uint64_t seed) {
  std::vector<AciResult> out;
  const int K = 10;  // folds for the spread
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    double t = t_grid[ti];
    Eigen::MatrixXd X = sampler_t(t, n, detail::derive_seed(seed, ti));
    const int d = static_cast<int>(X.cols());
    if (i < 0 || j < 0 || i >= d || j >= d || i == j)
      throw std::invalid_argument("aci_residual: bad vertex pair");
    // bounded scale u = sign/|y| per coordinate; 0 stays the atom
    Eigen::MatrixXd U(X.rows(), d);
    for (int r = 0; r < X.rows(); ++r)
      for (int c = 0; c < d; ++c) {
        double y = X(r, c) / t;
        U(r, c) = (std::abs(y) >= 1.0) ? 1.0 / y : 0.0;
      }
    std::vector<censor_detail::CoordBins> bins(d);
    for (int c = 0; c < d; ++c) {
      std::vector<double> vals;
      for (int r = 0; r < U.rows(); ++r)
        if (U(r, c) != 0.0) vals.push_back(U(r, c));
      if (vals.size() < 8)
        throw std::runtime_error("aci_residual: bandwidth degeneracy (too few exceedances)");
      bins[c] = censor_detail::fd_bins(std::move(vals));
    }

    std::vector<int> Cset;
    for (int c = 0; c < d; ++c)
      if (c != i && c != j) Cset.push_back(c);
    std::vector<int> Vall(d);
    std::iota(Vall.begin(), Vall.end(), 0);
    std::vector<int> iC = Cset, jC = Cset;
    iC.push_back(i);
    std::sort(iC.begin(), iC.end());
    jC.push_back(j);
    std::sort(jC.begin(), jC.end());

    using CellKey = std::pair<std::uint32_t, std::vector<int>>;
    using Hist = std::map<CellKey, double>;

    // bin index per (row, coordinate); -1 marks a censored entry
    Eigen::MatrixXi cell_of(U.rows(), d);
    for (int r = 0; r < U.rows(); ++r)
      for (int c = 0; c < d; ++c)
        cell_of(r, c) = (U(r, c) != 0.0) ? bins[c].find(U(r, c)) : -1;

    auto key_for = [&](int r, const std::vector<int>& S) {
      CellKey k{0, {}};
      for (int c : S)
        if (cell_of(r, c) >= 0) {
          k.first |= (1u << c);
          k.second.push_back(cell_of(r, c));
        }
      return k;
    };
    auto restrict_key = [&](const CellKey& full, const std::vector<int>& S) {
      CellKey k{0, {}};
      std::vector<int> posf;
      for (int c = 0; c < d; ++c)
        if (full.first & (1u << c)) posf.push_back(c);
      for (int c : S) {
        if (!(full.first & (1u << c))) continue;
        int idx = static_cast<int>(std::find(posf.begin(), posf.end(), c) - posf.begin());
        k.first |= (1u << c);
        k.second.push_back(full.second[idx]);
      }
      return k;
    };
    auto cell_volume = [&](const CellKey& k) {
      double vol = 1.0;
      int q = 0;
      for (int c = 0; c < d; ++c)
        if (k.first & (1u << c)) vol *= bins[c].width(k.second[q++]);
      return vol;
    };

    auto run = [&](const std::vector<int>& rows, std::vector<double>& res) {
      Hist hV, hC, hiC, hjC;
      const double n_rows = static_cast<double>(rows.size());
      for (int r : rows) {
        hV[key_for(r, Vall)] += 1.0 / n_rows;
        hC[key_for(r, Cset)] += 1.0 / n_rows;
        hiC[key_for(r, iC)] += 1.0 / n_rows;
        hjC[key_for(r, jC)] += 1.0 / n_rows;
      }
      auto dens = [&](const Hist& h, const CellKey& k) {
        auto it = h.find(k);
        if (it == h.end()) return 0.0;
        return it->second / cell_volume(k);
      };
      // the integrand is supported on occupied joint cells and on joins of
      // occupied (iC, jC) cells sharing their C-restriction
      std::set<CellKey> support;
      for (const auto& [key, pr] : hV) support.insert(key);
      std::map<CellKey, std::vector<CellKey>> by_ci, by_cj;
      for (const auto& [key, pr] : hiC) by_ci[restrict_key(key, Cset)].push_back(key);
      for (const auto& [key, pr] : hjC) by_cj[restrict_key(key, Cset)].push_back(key);
      for (const auto& [ckey, ikeys] : by_ci) {
        auto it = by_cj.find(ckey);
        if (it == by_cj.end()) continue;
        for (const auto& ki : ikeys) {
          for (const auto& kj : it->second) {
            CellKey full{ki.first | kj.first, {}};
            int qi = 0, qj = 0;
            bool ok = true;
            for (int c = 0; c < d && ok; ++c) {
              bool in_i = ki.first & (1u << c), in_j = kj.first & (1u << c);
              if (in_i && in_j) {
                if (ki.second[qi] != kj.second[qj]) ok = false;
                else full.second.push_back(ki.second[qi]);
                ++qi; ++qj;
              } else if (in_i) {
                full.second.push_back(ki.second[qi++]);
              } else if (in_j) {
                full.second.push_back(kj.second[qj++]);
              }
            }
            if (ok) support.insert(std::move(full));
          }
        }
      }
      res.assign(test_functions.size(), 0.0);
      for (const auto& key : support) {
        double vol = cell_volume(key);
        Eigen::VectorXd center = Eigen::VectorXd::Zero(d);
        int q = 0;
        for (int c = 0; c < d; ++c)
          if (key.first & (1u << c)) {
            center(c) = 0.5 * (bins[c].edges[key.second[q]] + bins[c].edges[key.second[q] + 1]);
            ++q;
          }
        double fV = dens(hV, key);
        double fC = dens(hC, restrict_key(key, Cset));
        double fiC = dens(hiC, restrict_key(key, iC));
        double fjC = dens(hjC, restrict_key(key, jC));
        double diff = fV * fC - fiC * fjC;
        for (std::size_t gix = 0; gix < test_functions.size(); ++gix)
          res[gix] += test_functions[gix](center) * diff * vol;
      }
    };

    AciResult ar;
    ar.t = t;
    std::vector<int> all(X.rows());
    std::iota(all.begin(), all.end(), 0);
    run(all, ar.residuals);
    // K-fold spread
    std::vector<std::vector<double>> fold_res(K);
    for (int f = 0; f < K; ++f) {
      std::vector<int> rows;
      for (int r = f; r < X.rows(); r += K) rows.push_back(r);
      run(rows, fold_res[f]);
    }
    ar.std_errors.assign(test_functions.size(), 0.0);
    for (std::size_t gix = 0; gix < test_functions.size(); ++gix) {
      double mean = 0.0;
      for (int f = 0; f < K; ++f) mean += fold_res[f][gix];
      mean /= K;
      double var = 0.0;
      for (int f = 0; f < K; ++f) {
        double dlt = fold_res[f][gix] - mean;
        var += dlt * dlt;
      }
      ar.std_errors[gix] = std::sqrt(var / (K * (K - 1.0)));
    }
    out.push_back(std::move(ar));
  }
  return out;
}

}  // namespace tailgraph
