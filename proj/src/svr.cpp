#include "calscan/svr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "calscan/errors.hpp"

namespace calscan {

float squared_distance(const float* a, const float* b) {
  // GCC/Clang vector extension; eight independent lanes.
  using f8 = float __attribute__((vector_size(32)));
  f8 acc{};
  for (int k = 0; k < kDescriptorSize; k += 8) {
    f8 va, vb;
    std::memcpy(&va, a + k, sizeof va);
    std::memcpy(&vb, b + k, sizeof vb);
    const f8 d = va - vb;
    acc += d * d;
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Least-recently-used cache of full kernel rows, indexed by sample.
class KernelCache {
 public:
  KernelCache(const std::vector<Descriptor>& x, double gamma, std::size_t bytes)
      : x_(x), gamma_(gamma), n_(x.size()) {
    const std::size_t row_bytes = n_ * sizeof(float);
    capacity_ = std::clamp<std::size_t>(bytes / std::max<std::size_t>(row_bytes, 1), 2, n_);
    slot_of_.assign(n_, -1);
  }

  const float* row(int i) {
    ++clock_;
    if (slot_of_[i] >= 0) {
      Slot& s = slots_[slot_of_[i]];
      s.stamp = clock_;
      return s.data.data();
    }
    int victim;
    if (slots_.size() < capacity_) {
      victim = static_cast<int>(slots_.size());
      slots_.push_back({std::vector<float>(n_), -1, 0});
    } else {
      victim = 0;
      for (int k = 1; k < static_cast<int>(slots_.size()); ++k)
        if (slots_[k].stamp < slots_[victim].stamp) victim = k;
      slot_of_[slots_[victim].owner] = -1;
    }
    Slot& s = slots_[victim];
    s.owner = i;
    s.stamp = clock_;
    slot_of_[i] = victim;
    const float* xi = x_[i].data();
    for (std::size_t k = 0; k < n_; ++k) {
      s.data[k] = static_cast<float>(std::exp(-gamma_ * static_cast<double>(squared_distance(xi, x_[k].data()))));
    }
    return s.data.data();
  }

 private:
  struct Slot {
    std::vector<float> data;
    int owner;
    std::uint64_t stamp;
  };
  const std::vector<Descriptor>& x_;
  double gamma_;
  std::size_t n_;
  std::size_t capacity_ = 2;
  std::vector<int> slot_of_;
  std::vector<Slot> slots_;
  std::uint64_t clock_ = 0;
};

// Dual variables t in [0, 2l): t < l are alpha (y = +1), t >= l are alpha*
// (y = -1), both referring to sample t mod l. Working-set selection uses
// second-order information; bounded variables that are unlikely to move are
// shrunk out of the active set and the full gradient is rebuilt from
// grad_bar_ before the final optimality check.
class SmoSolver {
 public:
  SmoSolver(KernelCache& cache, std::span<const double> z, const SvrHyper& h)
      : l_(static_cast<int>(z.size())), n_(2 * l_), C_(h.C), cache_(cache) {
    alpha_.assign(n_, 0.0);
    grad_.resize(n_);
    grad_bar_.assign(n_, 0.0);
    p_.resize(n_);
    for (int i = 0; i < l_; ++i) {
      p_[i] = h.epsilon - z[i];
      p_[i + l_] = h.epsilon + z[i];
    }
    grad_ = p_;
    active_.resize(n_);
    std::iota(active_.begin(), active_.end(), 0);
  }

  // Returns true on convergence.
  bool solve(double tol, std::int64_t max_iter) {
    tol_ = tol;
    int counter = std::min(l_, 1000) + 1;
    while (iterations_ < max_iter) {
      if (--counter == 0) {
        counter = std::min(l_, 1000);
        shrink();
      }
      int i = -1, j = -1;
      if (!select(i, j)) {
        reconstruct_gradient();
        if (!select(i, j)) return true;
        counter = 1;
      }
      ++iterations_;
      update(i, j);
    }
    reconstruct_gradient();
    int i = -1, j = -1;
    return !select(i, j);
  }

  std::int64_t iterations() const { return iterations_; }
  double beta(int i) const { return alpha_[i] - alpha_[i + l_]; }

  double bias() const {
    double ub = kInf, lb = -kInf, sum_free = 0.0;
    int n_free = 0;
    for (int t = 0; t < n_; ++t) {
      const double y = sign(t);
      const double yg = y * grad_[t];
      if (at_upper(t)) {
        if (y < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (at_lower(t)) {
        if (y > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    return -rho;
  }

 private:
  double sign(int t) const { return t < l_ ? 1.0 : -1.0; }
  bool at_upper(int t) const { return alpha_[t] >= C_; }
  bool at_lower(int t) const { return alpha_[t] <= 0.0; }
  // Signed Q entry between dual variables s and t given the kernel row of s.
  double q(const float* krow_s, int s, int t) const {
    const double k = krow_s[t < l_ ? t : t - l_];
    return (s < l_) == (t < l_) ? k : -k;
  }

  bool select(int& out_i, int& out_j) {
    double gmax = -kInf;
    int gi = -1;
    for (int t : active_) {
      if (t < l_) {
        if (!at_upper(t) && -grad_[t] >= gmax) gmax = -grad_[t], gi = t;
      } else if (!at_lower(t) && grad_[t] >= gmax) {
        gmax = grad_[t], gi = t;
      }
    }

    double gmax2 = -kInf, best = kInf;
    int gj = -1;
    const float* ki = gi >= 0 ? cache_.row(gi % l_) : nullptr;
    for (int t : active_) {
      double diff;
      if (t < l_) {
        if (at_lower(t)) continue;
        gmax2 = std::max(gmax2, grad_[t]);
        diff = gmax + grad_[t];
      } else {
        if (at_upper(t)) continue;
        gmax2 = std::max(gmax2, -grad_[t]);
        diff = gmax - grad_[t];
      }
      if (diff > 0.0 && ki) {
        // QD_i + QD_j - 2 y_i Q_ij, with unit kernel diagonal
        double quad = 2.0 - 2.0 * ki[t % l_];
        if (quad <= 0.0) quad = kTau;
        const double obj = -(diff * diff) / quad;
        if (obj <= best) best = obj, gj = t;
      }
    }
    if (gmax + gmax2 < tol_ || gj < 0) return false;
    out_i = gi;
    out_j = gj;
    return true;
  }

  void update(int i, int j) {
    const float* ki = cache_.row(i % l_);
    const float* kj = cache_.row(j % l_);
    const double yi = sign(i), yj = sign(j);
    const double qij = q(ki, i, j);
    const double old_i = alpha_[i], old_j = alpha_[j];
    const bool upper_i = at_upper(i), upper_j = at_upper(j);
    double& ai = alpha_[i];
    double& aj = alpha_[j];

    if (yi != yj) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) aj = 0.0, ai = diff;
      } else if (ai < 0.0) {
        ai = 0.0, aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > C_) ai = C_, aj = C_ - diff;
      } else if (aj > C_) {
        aj = C_, ai = C_ + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C_) {
        if (ai > C_) ai = C_, aj = sum - C_;
      } else if (aj < 0.0) {
        aj = 0.0, ai = sum;
      }
      if (sum > C_) {
        if (aj > C_) aj = C_, ai = sum - C_;
      } else if (ai < 0.0) {
        ai = 0.0, aj = sum;
      }
    }

    const double di = ai - old_i;
    const double dj = aj - old_j;
    for (int t : active_) grad_[t] += q(ki, i, t) * di + q(kj, j, t) * dj;

    if (upper_i != at_upper(i)) shift_grad_bar(ki, i, upper_i ? -C_ : C_);
    if (upper_j != at_upper(j)) shift_grad_bar(kj, j, upper_j ? -C_ : C_);
  }

  void shift_grad_bar(const float* krow, int s, double amount) {
    for (int t = 0; t < n_; ++t) grad_bar_[t] += amount * q(krow, s, t);
  }

  bool be_shrunk(int t, double gmax1, double gmax2) const {
    if (at_upper(t)) return t < l_ ? -grad_[t] > gmax1 : -grad_[t] > gmax2;
    if (at_lower(t)) return t < l_ ? grad_[t] > gmax2 : grad_[t] > gmax1;
    return false;
  }

  void shrink() {
    double gmax1 = -kInf, gmax2 = -kInf;
    for (int t : active_) {
      if (t < l_) {
        if (!at_upper(t)) gmax1 = std::max(gmax1, -grad_[t]);
        if (!at_lower(t)) gmax2 = std::max(gmax2, grad_[t]);
      } else {
        if (!at_upper(t)) gmax2 = std::max(gmax2, -grad_[t]);
        if (!at_lower(t)) gmax1 = std::max(gmax1, grad_[t]);
      }
    }
    if (!unshrunk_ && gmax1 + gmax2 <= tol_ * 10.0) {
      unshrunk_ = true;
      reconstruct_gradient();
    }
    std::erase_if(active_, [&](int t) { return be_shrunk(t, gmax1, gmax2); });
  }

  void reconstruct_gradient() {
    if (static_cast<int>(active_.size()) == n_) return;
    std::vector<char> is_active(n_, 0);
    for (int t : active_) is_active[t] = 1;
    std::vector<int> inactive;
    for (int t = 0; t < n_; ++t) {
      if (!is_active[t]) {
        inactive.push_back(t);
        grad_[t] = grad_bar_[t] + p_[t];
      }
    }
    for (int s = 0; s < n_; ++s) {
      if (at_lower(s) || at_upper(s)) continue;
      const float* ks = cache_.row(s % l_);
      for (int t : inactive) grad_[t] += alpha_[s] * q(ks, s, t);
    }
    active_.resize(n_);
    std::iota(active_.begin(), active_.end(), 0);
  }

  int l_;
  int n_;
  double C_;
  double tol_ = 1e-3;
  bool unshrunk_ = false;
  KernelCache& cache_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
  std::vector<double> grad_bar_;  // sum over upper-bounded s of C * Q(t, s)
  std::vector<double> p_;
  std::vector<int> active_;
  std::int64_t iterations_ = 0;
};

}  // namespace

std::vector<SvrModel> svr_train_shared(std::span<const Descriptor> features,
                                       std::span<const std::vector<double>> targets, const SvrHyper& hyper,
                                       std::uint64_t seed, const SvrTrainOptions& options) {
  for (const auto& y : targets) {
    if (features.size() != y.size()) {
      throw ArgumentError("svr_train: " + std::to_string(features.size()) + " features but " +
                          std::to_string(y.size()) + " targets");
    }
    for (double t : y)
      if (!std::isfinite(t)) throw ArgumentError("svr_train: non-finite target");
  }
  if (features.size() < 2) throw ArgumentError("svr_train: need at least two samples");
  if (!(hyper.C > 0.0) || !(hyper.epsilon >= 0.0) || !(hyper.gamma > 0.0) || !(hyper.tol > 0.0) ||
      hyper.max_passes < 1) {
    throw ArgumentError("svr_train: invalid hyperparameters");
  }
  for (const Descriptor& f : features)
    for (float v : f)
      if (!std::isfinite(v)) throw ArgumentError("svr_train: non-finite feature");

  const int n = static_cast<int>(features.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Descriptor> x(n);
  for (int k = 0; k < n; ++k) x[k] = features[order[k]];
  KernelCache cache(x, hyper.gamma, options.cache_bytes);

  std::vector<SvrModel> out;
  for (const auto& y : targets) {
    std::vector<double> z(n);
    for (int k = 0; k < n; ++k) z[k] = y[order[k]];
    SmoSolver solver(cache, z, hyper);
    const bool converged = solver.solve(hyper.tol, static_cast<std::int64_t>(hyper.max_passes) * n);

    // Support vectors are emitted in input order.
    std::vector<double> beta(n, 0.0);
    for (int k = 0; k < n; ++k) beta[order[k]] = solver.beta(k);

    SvrModel model;
    model.hyper = hyper;
    model.bias = solver.bias();
    model.converged = converged;
    model.iterations = solver.iterations();
    for (int i = 0; i < n; ++i) {
      if (beta[i] != 0.0) {
        model.support_vectors.push_back(features[i]);
        model.dual_coefs.push_back(beta[i]);
      }
    }
    out.push_back(std::move(model));
  }
  return out;
}

SvrModel svr_train(std::span<const Descriptor> features, std::span<const double> targets, const SvrHyper& hyper,
                   std::uint64_t seed, const SvrTrainOptions& options) {
  const std::vector<std::vector<double>> one{std::vector<double>(targets.begin(), targets.end())};
  return std::move(svr_train_shared(features, one, hyper, seed, options).front());
}

double svr_predict(const SvrModel& model, const Descriptor& feature) {
  double acc = 0.0;
  for (std::size_t k = 0; k < model.support_vectors.size(); ++k) {
    acc += model.dual_coefs[k] * rbf_kernel(model.support_vectors[k], feature, model.hyper.gamma);
  }
  return acc + model.bias;
}

}  // namespace calscan
