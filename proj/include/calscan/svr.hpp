#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "calscan/descriptor.hpp"

namespace calscan {

struct SvrHyper {
  double C = 100.0;       // box constraint on each dual coefficient
  double epsilon = 0.2;   // insensitive-tube half width
  double gamma = 1.0;     // RBF width: k(a, b) = exp(-gamma |a - b|^2)
  double tol = 1e-3;      // maximal KKT violation at convergence
  int max_passes = 100;   // iteration budget, in multiples of the sample count
};

/// Trained epsilon-SVR with RBF kernel.
struct SvrModel {
  std::vector<Descriptor> support_vectors;
  std::vector<double> dual_coefs;  // alpha - alpha*, one per support vector
  double bias = 0.0;
  SvrHyper hyper;

  // Solver report; not used for prediction.
  bool converged = true;
  std::int64_t iterations = 0;
};

struct SvrTrainOptions {
  std::size_t cache_bytes = std::size_t{256} << 20;
};

/// Solves the epsilon-SVR dual by SMO with second-order working-set
/// selection. Hitting the iteration budget is reported via
/// SvrModel::converged, not as an error.
SvrModel svr_train(std::span<const Descriptor> features, std::span<const double> targets, const SvrHyper& hyper,
                   std::uint64_t seed, const SvrTrainOptions& options = {});

/// One model per target vector, all over the same features. The targets
/// share a kernel cache, so this is cheaper than separate svr_train calls.
std::vector<SvrModel> svr_train_shared(std::span<const Descriptor> features,
                                       std::span<const std::vector<double>> targets, const SvrHyper& hyper,
                                       std::uint64_t seed, const SvrTrainOptions& options = {});

double svr_predict(const SvrModel& model, const Descriptor& feature);

/// Squared Euclidean distance between two descriptors.
float squared_distance(const float* a, const float* b);

inline double rbf_kernel(const Descriptor& a, const Descriptor& b, double gamma) {
  return std::exp(-gamma * static_cast<double>(squared_distance(a.data(), b.data())));
}

}  // namespace calscan
