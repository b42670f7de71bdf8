#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vacstrat/panel.hpp"

namespace oracle {

// Random unbalanced panel with country intercepts and polynomial trends
// already built into y. Columns are named x0, x1, ...
vacstrat::panel::PanelDesign random_design(std::mt19937_64& rng, int countries, int days, int slopes, int trend);

struct DummyFit {
  Eigen::VectorXd slopes;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd x_within;  // X with the dummy block partialled out
};

// Least squares on [X, country dummies, dummy x tau^k] via normal equations.
DummyFit dummy_ols(const vacstrat::panel::PanelDesign& d);

// Cluster sandwich assembled row by row, one cluster at a time, with the
// G/(G-1) (N-1)/(N-K) small-sample factor.
Eigen::MatrixXd naive_cluster_cov(const DummyFit& fit, const std::vector<std::size_t>& cluster, std::size_t groups);

// y_t = c + x_t b + n_t with n_t = sum phi n_{t-i} + e_t - sum theta e_{t-i}.
struct ArmaSim {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
};
ArmaSim simulate_armax(std::uint64_t seed, int n, const std::vector<double>& phi, const std::vector<double>& theta,
                       double c, const std::vector<double>& beta, double sigma = 1.0);

// Day-by-day queue: first doses while the second-dose queue is empty, then
// capacity split in half with leftovers flowing to whichever side can use it.
struct Rollout {
  std::vector<double> v1, v2;
};
Rollout queue_rollout(double stock, double capacity, int interval, int horizon);

// Fresh directory under the system temp path.
std::filesystem::path temp_dir(const std::string& tag);

}  // namespace oracle
