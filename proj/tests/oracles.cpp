#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <unistd.h>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace panel = vacstrat::panel;

panel::PanelDesign random_design(std::mt19937_64& rng, int countries, int days, int slopes, int trend) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  panel::PanelDesign d;
  d.spec.trend = trend;
  for (int k = 0; k < slopes; ++k) d.names.push_back("x" + std::to_string(k));
  for (int c = 0; c < countries; ++c) d.countries.push_back("C" + std::to_string(c));

  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  VectorXd beta(slopes);
  for (int k = 0; k < slopes; ++k) beta[k] = z(rng);
  for (int c = 0; c < countries; ++c) {
    const double alpha = 2.0 * z(rng);
    std::vector<double> gamma(3);
    for (auto& g : gamma) g = z(rng);
    const double scale = 0.5 + u(rng);  // heteroskedastic across clusters
    for (int t = 0; t < days; ++t) {
      if (u(rng) < 0.1) continue;  // unbalanced
      const double tau = static_cast<double>(t) / (days - 1);
      std::vector<double> x(slopes);
      for (int k = 0; k < slopes; ++k) x[k] = z(rng) + 0.3 * c + (k == 0 ? tau : 0.0);
      double y = alpha + scale * z(rng);
      double p = tau;
      for (int k = 0; k < trend; ++k, p *= tau) y += gamma[static_cast<std::size_t>(k)] * p;
      for (int k = 0; k < slopes; ++k) y += beta[k] * x[static_cast<std::size_t>(k)];
      rows.push_back(x);
      ys.push_back(y);
      d.cluster.push_back(static_cast<std::size_t>(c));
      d.tau.push_back(tau);
      d.dates.push_back(vacstrat::Date(18500 + t));
    }
  }
  const auto n = static_cast<Eigen::Index>(ys.size());
  d.y.resize(n);
  d.x.resize(n, slopes);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.y[i] = ys[static_cast<std::size_t>(i)];
    for (int k = 0; k < slopes; ++k) d.x(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return d;
}

DummyFit dummy_ols(const panel::PanelDesign& d) {
  const Eigen::Index n = d.x.rows();
  const Eigen::Index k = d.x.cols();
  const int per = d.spec.trend + 1;
  const auto g = static_cast<Eigen::Index>(d.countries.size());
  MatrixXd dummies = MatrixXd::Zero(n, g * per);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(d.cluster[static_cast<std::size_t>(i)]);
    double p = 1.0;
    for (int j = 0; j < per; ++j, p *= d.tau[static_cast<std::size_t>(i)]) dummies(i, c * per + j) = p;
  }
  MatrixXd z(n, k + dummies.cols());
  z << d.x, dummies;
  const VectorXd theta = (z.transpose() * z).ldlt().solve(z.transpose() * d.y);

  DummyFit out;
  out.slopes = theta.head(k);
  out.residuals = d.y - z * theta;
  const MatrixXd dd = dummies.transpose() * dummies;
  out.x_within = d.x - dummies * dd.ldlt().solve(dummies.transpose() * d.x);
  return out;
}

MatrixXd naive_cluster_cov(const DummyFit& fit, const std::vector<std::size_t>& cluster, std::size_t groups) {
  const Eigen::Index n = fit.x_within.rows();
  const Eigen::Index k = fit.x_within.cols();
  const MatrixXd bread = (fit.x_within.transpose() * fit.x_within).inverse();
  MatrixXd meat = MatrixXd::Zero(k, k);
  for (std::size_t g = 0; g < groups; ++g) {
    VectorXd s = VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (cluster[static_cast<std::size_t>(i)] != g) continue;
      for (Eigen::Index j = 0; j < k; ++j) s[j] += fit.x_within(i, j) * fit.residuals[i];
    }
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) meat(a, b) += s[a] * s[b];
  }
  const double gd = static_cast<double>(groups);
  const double nd = static_cast<double>(n);
  const double c = gd / (gd - 1.0) * (nd - 1.0) / (nd - static_cast<double>(k));
  return c * bread * meat * bread;
}

ArmaSim simulate_armax(std::uint64_t seed, int n, const std::vector<double>& phi, const std::vector<double>& theta,
                       double c, const std::vector<double>& beta, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const int burn = 500;
  const int total = n + burn;
  std::vector<double> e(static_cast<std::size_t>(total)), noise(static_cast<std::size_t>(total), 0.0);
  for (auto& v : e) v = sigma * z(rng);
  for (int t = 0; t < total; ++t) {
    double v = e[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < phi.size(); ++i)
      if (t > static_cast<int>(i)) v += phi[i] * noise[static_cast<std::size_t>(t) - i - 1];
    for (std::size_t i = 0; i < theta.size(); ++i)
      if (t > static_cast<int>(i)) v -= theta[i] * e[static_cast<std::size_t>(t) - i - 1];
    noise[static_cast<std::size_t>(t)] = v;
  }
  ArmaSim out;
  out.y.resize(n);
  out.x.resize(n, static_cast<Eigen::Index>(beta.size()));
  for (int t = 0; t < n; ++t) {
    double y = c + noise[static_cast<std::size_t>(t + burn)];
    for (std::size_t j = 0; j < beta.size(); ++j) {
      const double x = z(rng);
      out.x(t, static_cast<Eigen::Index>(j)) = x;
      y += beta[j] * x;
    }
    out.y[t] = y;
  }
  return out;
}

Rollout queue_rollout(double stock, double capacity, int interval, int horizon) {
  Rollout r;
  r.v1.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  r.v2 = r.v1;
  double left = stock;
  for (int d = 1; d <= horizon; ++d) {
    const auto t = static_cast<std::size_t>(d);
    const double today = std::min(capacity, left);
    double waiting = 0.0;
    if (d > interval) waiting = r.v1[t - static_cast<std::size_t>(interval)] - r.v2[t - 1];
    double second = std::min(today / 2.0, waiting);
    if (d <= interval) second = 0.0;
    double first = std::min(today - second, 100.0 - r.v1[t - 1]);
    second = std::min(waiting, today - first);
    if (d <= interval) second = 0.0;
    r.v1[t] = r.v1[t - 1] + first;
    r.v2[t] = r.v2[t - 1] + second;
    left -= first + second;
  }
  return r;
}

std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto p = std::filesystem::temp_directory_path() /
                 ("vacstrat_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
