#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <iostream>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailgraph/detail/mvn.hpp"
#include "tailgraph/detail/qmc.hpp"
#include "tailgraph/detail/quadrature.hpp"
#include "tailgraph/detail/rng.hpp"

namespace tailgraph::models {

struct NormalizationEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

namespace model_detail {

inline void check_subset(const std::vector<int>& A, int d, const char* who) {
  if (A.empty()) throw std::invalid_argument(std::string(who) + ": empty index set");
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (A[i] < 0 || A[i] >= d) throw std::invalid_argument(std::string(who) + ": index out of range");
    if (i > 0 && A[i] <= A[i - 1])
      throw std::invalid_argument(std::string(who) + ": indices must be strictly increasing");
  }
}

inline std::vector<int> complement(const std::vector<int>& A, int d) {
  std::vector<int> B;
  std::size_t k = 0;
  for (int i = 0; i < d; ++i) {
    if (k < A.size() && A[k] == i) {
      ++k;
    } else {
      B.push_back(i);
    }
  }
  return B;
}

// nodes/weights of N-point Gauss-Legendre on [-1,1]
inline void gauss_legendre(int N, std::vector<double>& nodes, std::vector<double>& weights) {
  using G = boost::math::quadrature::gauss<double, 24>;
  if (N != 24) throw std::invalid_argument("gauss_legendre: only N=24 wired");
  nodes.clear();
  weights.clear();
  const auto& ab = G::abscissa();
  const auto& w = G::weights();
  for (std::size_t i = ab.size(); i-- > 0;) {
    if (ab[i] > 0) {
      nodes.push_back(-ab[i]);
      weights.push_back(w[i]);
    }
  }
  for (std::size_t i = 0; i < ab.size(); ++i) {
    if (ab[i] == 0) {
      nodes.push_back(0.0);
      weights.push_back(w[i]);
    }
  }
  for (std::size_t i = 0; i < ab.size(); ++i) {
    if (ab[i] > 0) {
      nodes.push_back(ab[i]);
      weights.push_back(w[i]);
    }
  }
}

// tensor Gauss-Legendre integral of f over [-1,1]^m (m <= 4)
template <class F>
double tensor_gl(F&& f, int m) {
  std::vector<double> x, w;
  gauss_legendre(24, x, w);
  const int N = static_cast<int>(x.size());
  double total = 0.0;
  std::vector<int> idx(std::max(m, 1), 0);
  if (m == 0) return f(Eigen::VectorXd());
  std::int64_t count = 1;
  for (int i = 0; i < m; ++i) count *= N;
  Eigen::VectorXd pt(m);
  for (std::int64_t c = 0; c < count; ++c) {
    std::int64_t r = c;
    double wt = 1.0;
    for (int i = 0; i < m; ++i) {
      int j = static_cast<int>(r % N);
      r /= N;
      pt(i) = x[j];
      wt *= w[j];
    }
    total += wt * f(pt);
  }
  return total;
}

}  // namespace model_detail

// A normalized homogeneous density on the cone {||y||_inf >= 1} of its
// dimension, of order -alpha-d, with censoring, marginalization and
// sampling. Immutable; all evaluation methods are pure.
class HomogeneousTailDensity {
 public:
  virtual ~HomogeneousTailDensity() = default;
  virtual std::string family() const = 0;
  virtual int dim() const = 0;
  virtual double alpha() const = 0;
  virtual bool positive_cone() const = 0;

  // density at a cone point, normalized so the cone has mass one
  virtual double density(const Eigen::VectorXd& y) const = 0;

  // integral of the density over {|y_{A^c}| < 1} at fixed y_A (|y_A| >= 1
  // componentwise); the integration error bound is written to *err
  virtual double censored_density(const Eigen::VectorXd& yA, const std::vector<int>& A,
                                  double* err = nullptr) const = 0;

  // the A-marginal model conditioned on ||Y_A||_inf >= 1
  virtual std::shared_ptr<HomogeneousTailDensity> marginal(const std::vector<int>& A) const = 0;

  // Pr(||Y_S||_inf >= 1) under this model
  virtual double exceed_prob(const std::vector<int>& S) const = 0;

  virtual Eigen::MatrixXd sample(int n, std::uint64_t seed,
                                 double* acceptance = nullptr) const = 0;

  // cone integral of the unnormalized kernel: analytic Pareto radius times a
  // quasi-Monte Carlo angular integral, with a standard error
  virtual NormalizationEstimate normalizing_constant(int n_points = 1 << 16,
                                                     std::uint64_t seed = 0) const = 0;

  void require_on_cone(const Eigen::VectorXd& y) const {
    if (y.size() != dim()) throw std::domain_error(family() + ": dimension mismatch");
    if (positive_cone() && y.minCoeff() < 0.0)
      throw std::domain_error(family() + ": negative component outside the positive cone");
    if (y.cwiseAbs().maxCoeff() < 1.0)
      throw std::domain_error(family() + ": point below the unit sup-norm cone");
  }
};

using ModelPtr = std::shared_ptr<HomogeneousTailDensity>;

// ---------------------------------------------------------------------------
// Unit-Frechet-scale Pareto margin on [1, inf): density a x^{-a-1}.
class UnitPareto final : public HomogeneousTailDensity {
 public:
  explicit UnitPareto(double alpha = 1.0) : alpha_(alpha) {
    if (!(alpha > 0)) throw std::invalid_argument("UnitPareto: alpha must be > 0");
  }
  std::string family() const override { return "pareto"; }
  int dim() const override { return 1; }
  double alpha() const override { return alpha_; }
  bool positive_cone() const override { return true; }

  double density(const Eigen::VectorXd& y) const override {
    require_on_cone(y);
    return alpha_ * std::pow(y(0), -alpha_ - 1.0);
  }
  double censored_density(const Eigen::VectorXd& yA, const std::vector<int>& A,
                          double* err = nullptr) const override {
    model_detail::check_subset(A, 1, "UnitPareto::censored_density");
    if (err) *err = 0.0;
    return density(yA);
  }
  ModelPtr marginal(const std::vector<int>& A) const override {
    model_detail::check_subset(A, 1, "UnitPareto::marginal");
    return std::make_shared<UnitPareto>(alpha_);
  }
  double exceed_prob(const std::vector<int>& S) const override {
    model_detail::check_subset(S, 1, "UnitPareto::exceed_prob");
    return 1.0;
  }
  Eigen::MatrixXd sample(int n, std::uint64_t seed, double* acceptance = nullptr) const override {
    auto eng = detail::make_engine(seed);
    Eigen::MatrixXd out(n, 1);
    for (int i = 0; i < n; ++i) out(i, 0) = std::pow(detail::uniform01(eng), -1.0 / alpha_);
    if (acceptance) *acceptance = 1.0;
    return out;
  }
  NormalizationEstimate normalizing_constant(int, std::uint64_t) const override {
    return {1.0 / alpha_, 0.0};
  }

 private:
  double alpha_;
};

// ---------------------------------------------------------------------------
// Fixed bivariate fixture: density (4/3)(x+y)^{-3} on the positive cone
// {x,y > 0, max(x,y) >= 1}.
class BivariateSumModel final : public HomogeneousTailDensity {
 public:
  std::string family() const override { return "bivariate-sum"; }
  int dim() const override { return 2; }
  double alpha() const override { return 1.0; }
  bool positive_cone() const override { return true; }

  double density(const Eigen::VectorXd& y) const override {
    require_on_cone(y);
    return (4.0 / 3.0) * std::pow(y(0) + y(1), -3.0);
  }
  double censored_density(const Eigen::VectorXd& yA, const std::vector<int>& A,
                          double* err = nullptr) const override {
    model_detail::check_subset(A, 2, "BivariateSumModel::censored_density");
    if (err) *err = 0.0;
    if (A.size() == 2) return density(yA);
    double x = yA(0);
    if (x < 1.0) throw std::domain_error("BivariateSumModel: exceeding coordinate below 1");
    // (4/3) int_0^1 (x+u)^{-3} du
    return (2.0 / 3.0) * (std::pow(x, -2.0) - std::pow(x + 1.0, -2.0));
  }
  ModelPtr marginal(const std::vector<int>& A) const override {
    model_detail::check_subset(A, 2, "BivariateSumModel::marginal");
    if (A.size() == 2) return std::make_shared<BivariateSumModel>();
    return std::make_shared<UnitPareto>(1.0);
  }
  double exceed_prob(const std::vector<int>& S) const override {
    model_detail::check_subset(S, 2, "BivariateSumModel::exceed_prob");
    return S.size() == 2 ? 1.0 : 2.0 / 3.0;
  }
  Eigen::MatrixXd sample(int n, std::uint64_t seed, double* acceptance = nullptr) const override {
    auto eng = detail::make_engine(seed);
    Eigen::MatrixXd out(n, 2);
    for (int i = 0; i < n; ++i) {
      double r = 1.0 / detail::uniform01(eng);
      double s = std::pow(1.0 - 0.75 * detail::uniform01(eng), -0.5) - 1.0;
      if (detail::uniform01(eng) < 0.5) {
        out(i, 0) = r;
        out(i, 1) = s * r;
      } else {
        out(i, 0) = s * r;
        out(i, 1) = r;
      }
    }
    if (acceptance) *acceptance = 1.0;
    return out;
  }
  NormalizationEstimate normalizing_constant(int n_points = 1 << 16,
                                             std::uint64_t seed = 0) const override {
    // kernel (x+y)^{-3}; two symmetric faces
    auto est = detail::qmc_mean(
        [](const std::vector<double>& u) { return std::pow(1.0 + u[0], -3.0); }, 1,
        n_points, seed);
    return {2.0 * est.value / 1.0, 2.0 * est.std_error};  // alpha = 1 radial factor
  }
};

// ---------------------------------------------------------------------------
// Limit of a heavy-tailed elliptical-type density: c^{-1} (y' Q y)^{-(nu+d)/2}
// on {||y||_inf >= 1}, Q symmetric positive definite. alpha = nu.
class StudentLimit final : public HomogeneousTailDensity {
 public:
  StudentLimit(Eigen::MatrixXd Q, double nu) : Q_(std::move(Q)), nu_(nu) {
    d_ = static_cast<int>(Q_.rows());
    if (Q_.rows() != Q_.cols() || d_ < 1) throw std::invalid_argument("StudentLimit: bad Q");
    if (!Q_.isApprox(Q_.transpose(), 1e-10))
      throw std::invalid_argument("StudentLimit: Q must be symmetric");
    if (!(nu_ > 0)) throw std::invalid_argument("StudentLimit: nu must be > 0");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q_);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::invalid_argument("StudentLimit: Q must be positive definite");
    lambda_min_ = es.eigenvalues().minCoeff();
    cone_const_ = angular_integral_deterministic() / nu_;
  }

  std::string family() const override { return "student"; }
  int dim() const override { return d_; }
  double alpha() const override { return nu_; }
  bool positive_cone() const override { return false; }
  const Eigen::MatrixXd& Q() const { return Q_; }
  double dof() const { return nu_; }
  double cone_constant() const { return cone_const_; }

  double kernel(const Eigen::VectorXd& y) const {
    return std::pow(y.dot(Q_ * y), -(nu_ + d_) / 2.0);
  }
  double density(const Eigen::VectorXd& y) const override {
    require_on_cone(y);
    return kernel(y) / cone_const_;
  }

  // finite-threshold density ratio f_X(t x)/f_X(t 1) of the attracting
  // elliptical Student density (dispersion Q^{-1}); decreases to the limit
  // kernel ratio as t grows
  double finite_t_ratio(const Eigen::VectorXd& x, double t) const {
    double qx = x.dot(Q_ * x);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(d_);
    double q1 = ones.dot(Q_ * ones);
    return std::pow((1.0 + t * t * qx / nu_) / (1.0 + t * t * q1 / nu_), -(nu_ + d_) / 2.0);
  }

  double censored_density(const Eigen::VectorXd& yA, const std::vector<int>& A,
                          double* err = nullptr) const override {
    model_detail::check_subset(A, d_, "StudentLimit::censored_density");
    if (static_cast<int>(A.size()) != yA.size())
      throw std::invalid_argument("StudentLimit::censored_density: size mismatch");
    if (yA.cwiseAbs().minCoeff() < 1.0)
      throw std::domain_error("StudentLimit::censored_density: |y_A| >= 1 required");
    auto B = model_detail::complement(A, d_);
    if (B.empty()) {
      if (err) *err = 0.0;
      return density(yA);
    }
    const int m = static_cast<int>(B.size());
    auto assemble = [&](const Eigen::VectorXd& u) {
      Eigen::VectorXd y(d_);
      for (std::size_t i = 0; i < A.size(); ++i) y(A[i]) = yA(i);
      for (int i = 0; i < m; ++i) y(B[i]) = u(i);
      return y;
    };
    // the kernel is smooth on the censored box (y'Qy >= lambda_min there):
    // tensor Gauss-Legendre up to dimension four, quasi-Monte Carlo beyond
    double val, bound;
    if (m <= 4) {
      val = model_detail::tensor_gl([&](const Eigen::VectorXd& u) { return kernel(assemble(u)); },
                                    m) /
            cone_const_;
      bound = 1e-10 * std::abs(val);
    } else {
      auto est = detail::qmc_mean(
          [&](const std::vector<double>& u) {
            Eigen::VectorXd v(m);
            for (int i = 0; i < m; ++i) v(i) = 2.0 * u[i] - 1.0;  // box (-1,1)^m
            return kernel(assemble(v));
          },
          m, 1 << 16, 12345);
      double scale = std::pow(2.0, m) / cone_const_;
      val = est.value * scale;
      bound = est.std_error * scale;
    }
    if (err) *err = bound;
    if (val > 0 && bound > 1e-4 * val)
      throw std::runtime_error("StudentLimit::censored_density: integration error above bound");
    return val;
  }

  ModelPtr marginal(const std::vector<int>& A) const override {
    model_detail::check_subset(A, d_, "StudentLimit::marginal");
    if (static_cast<int>(A.size()) == d_) return std::make_shared<StudentLimit>(Q_, nu_);
    auto B = model_detail::complement(A, d_);
    Eigen::MatrixXd QAA(A.size(), A.size()), QAB(A.size(), B.size()), QBB(B.size(), B.size());
    for (std::size_t i = 0; i < A.size(); ++i)
      for (std::size_t j = 0; j < A.size(); ++j) QAA(i, j) = Q_(A[i], A[j]);
    for (std::size_t i = 0; i < A.size(); ++i)
      for (std::size_t j = 0; j < B.size(); ++j) QAB(i, j) = Q_(A[i], B[j]);
    for (std::size_t i = 0; i < B.size(); ++i)
      for (std::size_t j = 0; j < B.size(); ++j) QBB(i, j) = Q_(B[i], B[j]);
    Eigen::MatrixXd Qm = QAA - QAB * QBB.ldlt().solve(QAB.transpose());
    return std::make_shared<StudentLimit>(Qm, nu_);
  }

  double exceed_prob(const std::vector<int>& S) const override {
    model_detail::check_subset(S, d_, "StudentLimit::exceed_prob");
    if (static_cast<int>(S.size()) == d_) return 1.0;
    auto B = model_detail::complement(S, d_);
    Eigen::MatrixXd QBB(B.size(), B.size());
    for (std::size_t i = 0; i < B.size(); ++i)
      for (std::size_t j = 0; j < B.size(); ++j) QBB(i, j) = Q_(B[i], B[j]);
    const double m = static_cast<double>(B.size());
    auto marg = std::static_pointer_cast<StudentLimit>(marginal(S));
    double log_const_B = 0.5 * m * std::log(detail::kPi) -
                         0.5 * std::log(QBB.determinant()) +
                         std::lgamma((nu_ + S.size()) / 2.0) - std::lgamma((nu_ + d_) / 2.0);
    return std::exp(log_const_B) * marg->cone_constant() / cone_const_;
  }

  Eigen::MatrixXd sample(int n, std::uint64_t seed, double* acceptance = nullptr) const override {
    auto eng = detail::make_engine(seed);
    Eigen::MatrixXd out(n, d_);
    const double logM = -(nu_ + d_) / 2.0 * std::log(lambda_min_);
    long proposals = 0;
    for (int i = 0; i < n; ++i) {
      for (;;) {
        ++proposals;
        int face = static_cast<int>(eng() % static_cast<std::uint64_t>(d_));
        double sgn = detail::uniform01(eng) < 0.5 ? 1.0 : -1.0;
        Eigen::VectorXd w(d_);
        for (int j = 0; j < d_; ++j) w(j) = 2.0 * detail::uniform01(eng) - 1.0;
        w(face) = sgn;
        double logk = -(nu_ + d_) / 2.0 * std::log(w.dot(Q_ * w));
        if (std::log(detail::uniform01(eng)) < logk - logM) {
          double r = std::pow(detail::uniform01(eng), -1.0 / nu_);
          out.row(i) = (r * w).transpose();
          break;
        }
      }
    }
    double acc = static_cast<double>(n) / static_cast<double>(proposals);
    if (acceptance) *acceptance = acc;
    if (acc < 0.01)
      std::cerr << "StudentLimit::sample: low acceptance rate " << acc << "\n";
    return out;
  }

  NormalizationEstimate normalizing_constant(int n_points = 1 << 16,
                                             std::uint64_t seed = 0) const override {
    // radius integral of r^{-nu-1} is 1/nu; 2d sup-norm faces by QMC
    const int m = d_ - 1;
    double total = 0.0, var = 0.0;
    for (int face = 0; face < d_; ++face) {
      auto est = detail::qmc_mean(
          [&](const std::vector<double>& u) {
            Eigen::VectorXd w(d_);
            int k = 0;
            for (int j = 0; j < d_; ++j)
              w(j) = (j == face) ? 1.0 : 2.0 * u[k++] - 1.0;
            return kernel(w);
          },
          std::max(m, 1), std::max(n_points / std::max(d_, 1), 64), seed + face);
      double scale = 2.0 * std::pow(2.0, m);  // +/- faces, box volume
      total += scale * est.value;
      var += scale * scale * est.std_error * est.std_error;
    }
    return {total / nu_, std::sqrt(var) / nu_};
  }

 private:
  double angular_integral_deterministic() const {
    const int m = d_ - 1;
    double total = 0.0;
    for (int face = 0; face < d_; ++face) {
      total += 2.0 * model_detail::tensor_gl(
                         [&](const Eigen::VectorXd& u) {
                           Eigen::VectorXd w(d_);
                           int k = 0;
                           for (int j = 0; j < d_; ++j) w(j) = (j == face) ? 1.0 : u(k++);
                           return kernel(w);
                         },
                         m);
    }
    return total;
  }

  Eigen::MatrixXd Q_;
  double nu_;
  int d_;
  double lambda_min_ = 0.0;
  double cone_const_ = 0.0;
};

inline StudentLimit student_tail_limit(const Eigen::MatrixXd& Q, double nu) {
  return StudentLimit(Q, nu);
}

// ---------------------------------------------------------------------------
// Huesler-Reiss Pareto model with variogram matrix Gamma (zero diagonal,
// positive off-diagonal, conditionally negative definite). alpha = 1, unit
// Pareto margins, positive cone.
class HuslerReissPareto final : public HomogeneousTailDensity {
 public:
  explicit HuslerReissPareto(Eigen::MatrixXd Gamma) : G_(std::move(Gamma)) {
    d_ = static_cast<int>(G_.rows());
    if (G_.rows() != G_.cols() || d_ < 2)
      throw std::invalid_argument("HuslerReissPareto: Gamma must be d x d with d >= 2");
    for (int i = 0; i < d_; ++i) {
      if (G_(i, i) != 0.0)
        throw std::invalid_argument("HuslerReissPareto: Gamma diagonal must be zero");
      for (int j = 0; j < d_; ++j) {
        if (std::abs(G_(i, j) - G_(j, i)) > 1e-12)
          throw std::invalid_argument("HuslerReissPareto: Gamma must be symmetric");
        if (i != j && !(G_(i, j) > 0))
          throw std::invalid_argument("HuslerReissPareto: off-diagonal Gamma must be > 0");
      }
    }
    anchors_.resize(d_);
    for (int k = 0; k < d_; ++k) {
      Anchor& a = anchors_[k];
      a.idx.clear();
      for (int j = 0; j < d_; ++j)
        if (j != k) a.idx.push_back(j);
      const int m = d_ - 1;
      a.Sigma.resize(m, m);
      a.shift.resize(m);
      for (int i = 0; i < m; ++i) {
        a.shift(i) = -0.5 * G_(a.idx[i], k);
        for (int j = 0; j < m; ++j)
          a.Sigma(i, j) = 0.5 * (G_(a.idx[i], k) + G_(a.idx[j], k) - G_(a.idx[i], a.idx[j]));
      }
      a.llt.compute(a.Sigma);
      if (a.llt.info() != Eigen::Success)
        throw std::invalid_argument(
            "HuslerReissPareto: Gamma is not a valid variogram (anchor covariance not PD)");
      a.log_det = 2.0 * a.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }
    V1_ = 0.0;
    for (int k = 0; k < d_; ++k) {
      Eigen::VectorXd b = -anchors_[k].shift;  // Gamma_{jk}/2
      V1_ += detail::mvn_cdf(b, anchors_[k].Sigma);
    }
  }

  std::string family() const override { return "hr"; }
  int dim() const override { return d_; }
  double alpha() const override { return 1.0; }
  bool positive_cone() const override { return true; }
  const Eigen::MatrixXd& Gamma() const { return G_; }
  double cone_mass() const { return V1_; }  // exponent mass of {||y||_inf >= 1}

  // exponent-measure density lambda(y) on the positive orthant; anchor
  // independent (evaluated at the argmax anchor for stability)
  double exponent_density(const Eigen::VectorXd& y) const {
    int k;
    y.maxCoeff(&k);
    return anchor_lambda(y, k);
  }

  // the per-anchor closed form y_k^{-2} phi_lognormal(y_{-k} | y_k), the
  // density of Y | Y_k >= 1 on C_k (integrates to one there)
  double anchor_density(const Eigen::VectorXd& y, int k) const {
    if (k < 0 || k >= d_) throw std::invalid_argument("anchor_density: bad anchor");
    if (y(k) < 1.0) throw std::domain_error("anchor_density: y_k >= 1 required");
    return anchor_lambda(y, k);
  }

  double density(const Eigen::VectorXd& y) const override {
    require_on_cone(y);
    if (y.minCoeff() <= 0.0)
      throw std::domain_error("HuslerReissPareto: density needs y > 0");
    // anchor: argmax among coordinates >= 1, lowest index on ties
    int k = -1;
    double best = -1.0;
    for (int j = 0; j < d_; ++j)
      if (y(j) >= 1.0 && y(j) > best) {
        best = y(j);
        k = j;
      }
    return anchor_lambda(y, k) / V1_;
  }

  double censored_density(const Eigen::VectorXd& yA, const std::vector<int>& A,
                          double* err = nullptr) const override {
    model_detail::check_subset(A, d_, "HuslerReissPareto::censored_density");
    if (static_cast<int>(A.size()) != yA.size())
      throw std::invalid_argument("HuslerReissPareto::censored_density: size mismatch");
    if (yA.minCoeff() < 1.0)
      throw std::domain_error("HuslerReissPareto::censored_density: y_A >= 1 required");
    // anchor = argmax of the exceeding coordinates
    int loc;
    yA.maxCoeff(&loc);
    int k = A[loc];
    const Anchor& a = anchors_[k];
    const int m = d_ - 1;
    // split the anchor's companion coordinates into observed (in A) and
    // censored (the complement)
    std::vector<int> obs_pos, cen_pos;
    std::vector<double> obs_val;
    for (int i = 0; i < m; ++i) {
      int j = a.idx[i];
      auto it = std::lower_bound(A.begin(), A.end(), j);
      if (it != A.end() && *it == j) {
        obs_pos.push_back(i);
        obs_val.push_back(yA(static_cast<int>(it - A.begin())));
      } else {
        cen_pos.push_back(i);
      }
    }
    const double yk = yA(loc);
    const double log_yk = std::log(yk);
    const int p = static_cast<int>(obs_pos.size());
    const int q = static_cast<int>(cen_pos.size());
    Eigen::VectorXd mu(m);
    for (int i = 0; i < m; ++i) mu(i) = log_yk + a.shift(i);

    double logv = -2.0 * log_yk;
    Eigen::VectorXd mu_cond;
    Eigen::MatrixXd S_cond;
    if (p > 0) {
      Eigen::VectorXd zP(p), muP(p);
      Eigen::MatrixXd SPP(p, p);
      for (int i = 0; i < p; ++i) {
        zP(i) = std::log(obs_val[i]);
        muP(i) = mu(obs_pos[i]);
        for (int j = 0; j < p; ++j) SPP(i, j) = a.Sigma(obs_pos[i], obs_pos[j]);
      }
      Eigen::LLT<Eigen::MatrixXd> lltP(SPP);
      if (lltP.info() != Eigen::Success)
        throw std::runtime_error("HuslerReissPareto: degenerate observed block");
      Eigen::VectorXd resid = zP - muP;
      Eigen::VectorXd sol = lltP.solve(resid);
      double logdetP = 2.0 * lltP.matrixL().toDenseMatrix().diagonal().array().log().sum();
      logv += -0.5 * p * std::log(2.0 * detail::kPi) - 0.5 * logdetP - 0.5 * resid.dot(sol);
      for (double v : obs_val) logv -= std::log(v);
      if (q > 0) {
        Eigen::MatrixXd SQP(q, p), SQQ(q, q);
        for (int i = 0; i < q; ++i) {
          for (int j = 0; j < p; ++j) SQP(i, j) = a.Sigma(cen_pos[i], obs_pos[j]);
          for (int j = 0; j < q; ++j) SQQ(i, j) = a.Sigma(cen_pos[i], cen_pos[j]);
        }
        Eigen::VectorXd muQ(q);
        for (int i = 0; i < q; ++i) muQ(i) = mu(cen_pos[i]);
        mu_cond = muQ + SQP * lltP.solve(resid);
        S_cond = SQQ - SQP * lltP.solve(SQP.transpose());
      }
    } else if (q > 0) {
      mu_cond.resize(q);
      S_cond.resize(q, q);
      for (int i = 0; i < q; ++i) {
        mu_cond(i) = mu(cen_pos[i]);
        for (int j = 0; j < q; ++j) S_cond(i, j) = a.Sigma(cen_pos[i], cen_pos[j]);
      }
    }
    double orthant = 1.0;
    if (q > 0) orthant = detail::mvn_cdf(-mu_cond, S_cond);
    if (err) *err = 1e-10 * std::exp(logv) * orthant;
    return std::exp(logv) * orthant / V1_;
  }

  ModelPtr marginal(const std::vector<int>& A) const override {
    model_detail::check_subset(A, d_, "HuslerReissPareto::marginal");
    if (A.size() == 1) return std::make_shared<UnitPareto>(1.0);
    Eigen::MatrixXd GA(A.size(), A.size());
    for (std::size_t i = 0; i < A.size(); ++i)
      for (std::size_t j = 0; j < A.size(); ++j) GA(i, j) = G_(A[i], A[j]);
    return std::make_shared<HuslerReissPareto>(GA);
  }

  double exceed_prob(const std::vector<int>& S) const override {
    model_detail::check_subset(S, d_, "HuslerReissPareto::exceed_prob");
    if (static_cast<int>(S.size()) == d_) return 1.0;
    if (S.size() == 1) return 1.0 / V1_;
    auto marg = std::static_pointer_cast<HuslerReissPareto>(marginal(S));
    return marg->cone_mass() / V1_;
  }

  Eigen::MatrixXd sample(int n, std::uint64_t seed, double* acceptance = nullptr) const override {
    auto eng = detail::make_engine(seed);
    Eigen::MatrixXd out(n, d_);
    long proposals = 0;
    for (int i = 0; i < n; ++i) {
      for (;;) {
        ++proposals;
        int k = static_cast<int>(eng() % static_cast<std::uint64_t>(d_));
        const Anchor& a = anchors_[k];
        double yk = 1.0 / detail::uniform01(eng);
        Eigen::VectorXd z(d_ - 1);
        for (int j = 0; j < d_ - 1; ++j) z(j) = detail::normal(eng);
        Eigen::VectorXd ln = (a.llt.matrixL() * z).eval();
        Eigen::VectorXd y(d_);
        y(k) = yk;
        for (int j = 0; j < d_ - 1; ++j)
          y(a.idx[j]) = std::exp(std::log(yk) + a.shift(j) + ln(j));
        int N = 0;
        for (int j = 0; j < d_; ++j)
          if (y(j) >= 1.0) ++N;
        if (detail::uniform01(eng) < 1.0 / N) {
          out.row(i) = y.transpose();
          break;
        }
      }
    }
    double acc = static_cast<double>(n) / static_cast<double>(proposals);
    if (acceptance) *acceptance = acc;
    if (acc < 0.01)
      std::cerr << "HuslerReissPareto::sample: low acceptance rate " << acc << "\n";
    return out;
  }

  NormalizationEstimate normalizing_constant(int n_points = 1 << 16,
                                             std::uint64_t seed = 0) const override {
    const int m = d_ - 1;
    double total = 0.0, var = 0.0;
    for (int face = 0; face < d_; ++face) {
      auto est = detail::qmc_mean(
          [&](const std::vector<double>& u) {
            Eigen::VectorXd w(d_);
            int k = 0;
            for (int j = 0; j < d_; ++j) w(j) = (j == face) ? 1.0 : u[k++];
            return exponent_density(w);
          },
          std::max(m, 1), std::max(n_points / d_, 64), seed + face);
      total += est.value;
      var += est.std_error * est.std_error;
    }
    return {total, std::sqrt(var)};
  }

 private:
  struct Anchor {
    std::vector<int> idx;     // companion coordinates in increasing order
    Eigen::MatrixXd Sigma;    // covariance of log y_{-k} given the anchor
    Eigen::VectorXd shift;    // -Gamma_{jk}/2
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_det = 0.0;
  };

  double anchor_lambda(const Eigen::VectorXd& y, int k) const {
    const Anchor& a = anchors_[k];
    const int m = d_ - 1;
    double log_yk = std::log(y(k));
    Eigen::VectorXd resid(m);
    double log_jac = 0.0;
    for (int i = 0; i < m; ++i) {
      double yj = y(a.idx[i]);
      if (!(yj > 0)) throw std::domain_error("HuslerReissPareto: component must be > 0");
      double z = std::log(yj);
      resid(i) = z - (log_yk + a.shift(i));
      log_jac -= z;
    }
    Eigen::VectorXd sol = a.llt.solve(resid);
    double logv = -2.0 * log_yk + log_jac - 0.5 * m * std::log(2.0 * detail::kPi) -
                  0.5 * a.log_det - 0.5 * resid.dot(sol);
    return std::exp(logv);
  }

  Eigen::MatrixXd G_;
  int d_;
  double V1_ = 0.0;
  std::vector<Anchor> anchors_;
};

// ---------------------------------------------------------------------------
// Simulation helpers used by tests and the command line.

// i.i.d. draws from an elliptical Student-t with dispersion Sigma and dof nu.
inline Eigen::MatrixXd sample_student_t(const Eigen::MatrixXd& Sigma, double nu, int n,
                                        std::uint64_t seed) {
  const int d = static_cast<int>(Sigma.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("sample_student_t: Sigma not positive definite");
  auto eng = detail::make_engine(seed);
  std::gamma_distribution<double> gamma(nu / 2.0, 2.0);
  Eigen::MatrixXd out(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z(j) = detail::normal(eng);
    double w = gamma(eng);
    out.row(i) = (llt.matrixL() * z / std::sqrt(w / nu)).transpose();
  }
  return out;
}

// Raw positive data in the domain of attraction of the Huesler-Reiss model:
// X = P W with P unit Pareto and W the log-Gaussian spectral vector built
// from the variogram (anchored at coordinate 0, E W_j = 1).
inline Eigen::MatrixXd sample_hr_spectral(const Eigen::MatrixXd& Gamma, int n,
                                          std::uint64_t seed) {
  const int d = static_cast<int>(Gamma.rows());
  if (d < 2) throw std::invalid_argument("sample_hr_spectral: d >= 2 required");
  const int m = d - 1;
  Eigen::MatrixXd S(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      S(i, j) = 0.5 * (Gamma(i + 1, 0) + Gamma(j + 1, 0) - Gamma(i + 1, j + 1));
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("sample_hr_spectral: invalid variogram");
  auto eng = detail::make_engine(seed);
  Eigen::MatrixXd out(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z(m);
    for (int j = 0; j < m; ++j) z(j) = detail::normal(eng);
    Eigen::VectorXd g = llt.matrixL() * z;
    double p = 1.0 / detail::uniform01(eng);
    out(i, 0) = p;
    for (int j = 0; j < m; ++j) out(i, j + 1) = p * std::exp(g(j) - 0.5 * Gamma(j + 1, 0));
  }
  return out;
}

}  // namespace tailgraph::models
