#include "bbwm/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bbwm {

namespace {

// Kernel contributions beyond this many bandwidths are below 1e-14 of the
// peak and are skipped.
constexpr double kCutoff = 8.0;
constexpr std::size_t kTabulateFrom = 1000;
constexpr double kStepsPerBandwidth = 32.0;
constexpr double kMaxGridPoints = 4e6;

}  // namespace

DensityEstimate DensityEstimate::fit(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("kde: need at least two samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sigma = std::sqrt(ss / (n - 1.0));
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("kde: samples have zero variance");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  DensityEstimate f(std::move(sorted), sigma * std::pow(n, -0.2));
  if (f.sorted_.size() >= kTabulateFrom) f.tabulate();
  return f;
}

void DensityEstimate::tabulate() {
  const double h = bandwidth_;
  const double lo = sorted_.front() - kCutoff * h;
  const double hi = sorted_.back() + kCutoff * h;
  const double step = h / kStepsPerBandwidth;
  const double points = std::ceil((hi - lo) / step) + 1.0;
  // Wildly spread samples would need a huge grid; stay with the direct sum.
  if (points > kMaxGridPoints) return;
  const double norm = static_cast<double>(sorted_.size()) * h * std::sqrt(2.0 * std::numbers::pi);
  values_.resize(static_cast<std::size_t>(points));
  slopes_.resize(values_.size());
  auto lo_it = sorted_.begin();
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double x = lo + static_cast<double>(i) * step;
    while (lo_it != sorted_.end() && *lo_it < x - kCutoff * h) ++lo_it;
    double sum = 0.0, dsum = 0.0;
    for (auto it = lo_it; it != sorted_.end() && *it <= x + kCutoff * h; ++it) {
      const double z = (x - *it) / h;
      const double k = std::exp(-0.5 * z * z);
      sum += k;
      dsum -= z * k;
    }
    values_[i] = sum / norm;
    slopes_[i] = dsum / (norm * h);
  }
  grid_start_ = lo;
  grid_step_ = step;
}

double DensityEstimate::eval(double x) const {
  if (values_.empty()) return eval_exact(x);
  const double pos = (x - grid_start_) / grid_step_;
  if (!(pos >= 0.0) || pos >= static_cast<double>(values_.size() - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(pos);
  const double t = pos - static_cast<double>(i);
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  const double v = h00 * values_[i] + h10 * grid_step_ * slopes_[i] + h01 * values_[i + 1] +
                   h11 * grid_step_ * slopes_[i + 1];
  return std::max(v, 0.0);
}

double DensityEstimate::eval_exact(double x) const {
  const double h = bandwidth_;
  const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), x - kCutoff * h);
  const auto hi = std::upper_bound(lo, sorted_.end(), x + kCutoff * h);
  double sum = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double z = (x - *it) / h;
    sum += std::exp(-0.5 * z * z);
  }
  const double norm = static_cast<double>(sorted_.size()) * h * std::sqrt(2.0 * std::numbers::pi);
  return sum / norm;
}

double DensityEstimate::log_eval(double x, double floor) const {
  return std::log(std::max(eval(x), floor));
}

}  // namespace bbwm
