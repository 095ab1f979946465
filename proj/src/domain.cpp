#include "hjbrom/domain.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>

namespace hjbrom {

SnapshotSet collect_snapshots(const SeparableControlSystem& sys, const GaussianEnsemble& ensemble,
                              const Vector& mu, const SnapshotOptions& options) {
  require(options.count >= 2, "snapshot collection needs at least two draws");
  require(!options.times.empty(), "snapshot collection needs at least one time instant");
  const double dt = options.stepper.dt;
  std::vector<long> indices;
  for (double t : options.times) {
    require(t >= 0.0, "snapshot times must be non-negative");
    indices.push_back(std::lround(t / dt));
  }
  std::sort(indices.begin(), indices.end());
  const long last = indices.back();
  const Vector u = options.control.size() ? options.control : Vector::Zero(sys.control_dim());

  const TimeStepper stepper(sys, mu, options.stepper);
  const auto draws = sample_initial(ensemble, options.count, options.seed);
  SnapshotSet out;
  out.states.resize(sys.state_dim(), 0);
  std::vector<Vector> columns;
  for (const auto& x : draws) {
    std::vector<Vector> taken;
    Vector y = x;
    std::size_t next = 0;
    bool ok = true;
    for (long k = 0; k <= last && ok; ++k) {
      while (next < indices.size() && indices[next] == k) {
        taken.push_back(y);
        ++next;
      }
      if (k == last) break;
      try {
        y = stepper.step(y, u);
      } catch (const SolverError&) {
        ok = false;
      }
      if (ok && !(y.allFinite() && y.norm() <= kOverflowGuard)) ok = false;
    }
    if (!ok) {
      ++out.skipped;
      continue;
    }
    ++out.accepted;
    for (auto& v : taken) columns.push_back(std::move(v));
  }
  if (out.skipped > 0) {
    std::cerr << "warning: " << out.skipped << " snapshot trajectories diverged and were skipped\n";
  }
  out.states.resize(sys.state_dim(), static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) out.states.col(static_cast<Index>(j)) = columns[j];
  return out;
}

ComponentDistribution fit_component(const Eigen::Ref<const Vector>& samples) {
  require(samples.size() >= 2, "component fit needs at least two samples");
  ComponentDistribution dist;
  dist.sample_count = static_cast<std::size_t>(samples.size());
  dist.std = std::sqrt(samples.squaredNorm() / static_cast<double>(samples.size()));
  if (!(dist.std >= kStdFloor)) {
    std::cerr << "warning: degenerate reduced component, std floored to " << kStdFloor << "\n";
    dist.std = kStdFloor;
    dist.floored = true;
  }
  return dist;
}

ComponentDistribution fit_component(const std::vector<double>& samples) {
  return fit_component(Eigen::Map<const Vector>(samples.data(), static_cast<Index>(samples.size())));
}

namespace {

void check_grid_args(const ComponentDistribution& dist, int H, double coverage) {
  require(H >= 3 && H % 2 == 1, "grid size must be odd and at least 3");
  require(coverage > 0.0 && coverage < 0.5, "coverage must lie in (0, 0.5)");
  require(dist.std > 0.0, "distribution std must be positive");
}

}  // namespace

UnivariateGrid equal_mass_grid(const ComponentDistribution& dist, int H, double coverage) {
  check_grid_args(dist, H, coverage);
  const boost::math::normal_distribution<double> normal(0.0, dist.std);
  const int mid = H / 2;
  std::vector<double> nodes(static_cast<std::size_t>(H), 0.0);
  for (int k = 0; k < mid; ++k) {
    const double level = coverage + k * (1.0 - 2.0 * coverage) / (H - 1);
    const double s = boost::math::quantile(normal, level);
    nodes[static_cast<std::size_t>(k)] = s;
    nodes[static_cast<std::size_t>(H - 1 - k)] = -s;
  }
  return UnivariateGrid{std::move(nodes)};
}

UnivariateGrid equidistant_grid(const ComponentDistribution& dist, int H, double coverage) {
  check_grid_args(dist, H, coverage);
  const double half = -equal_mass_grid(dist, H, coverage).lower();
  const int mid = H / 2;
  std::vector<double> nodes(static_cast<std::size_t>(H), 0.0);
  for (int k = 0; k < mid; ++k) {
    const double s = -half * static_cast<double>(mid - k) / mid;
    nodes[static_cast<std::size_t>(k)] = s;
    nodes[static_cast<std::size_t>(H - 1 - k)] = -s;
  }
  return UnivariateGrid{std::move(nodes)};
}

TensorGrid::TensorGrid(std::vector<UnivariateGrid> axes) : axes_(std::move(axes)) {
  require(!axes_.empty(), "tensor grid needs at least one axis");
  strides_.assign(axes_.size(), 1);
  size_ = 1;
  for (std::size_t j = axes_.size(); j-- > 0;) {
    const auto& a = axes_[j].nodes;
    require(a.size() >= 2, "every grid axis needs at least two nodes");
    require(std::is_sorted(a.begin(), a.end()) &&
                std::adjacent_find(a.begin(), a.end()) == a.end(),
            "grid axis nodes must be strictly increasing");
    strides_[j] = size_;
    size_ *= static_cast<Index>(a.size());
  }
}

std::vector<Index> TensorGrid::multi_index(Index k) const {
  require(k >= 0 && k < size_, "grid node index out of range");
  std::vector<Index> multi(axes_.size());
  for (std::size_t j = 0; j < axes_.size(); ++j) {
    multi[j] = k / strides_[j];
    k %= strides_[j];
  }
  return multi;
}

Index TensorGrid::flat_index(const std::vector<Index>& multi) const {
  require(multi.size() == axes_.size(), "multi-index has wrong length");
  Index k = 0;
  for (std::size_t j = 0; j < axes_.size(); ++j) {
    require(multi[j] >= 0 && multi[j] < static_cast<Index>(axes_[j].size()),
            "multi-index out of range");
    k += multi[j] * strides_[j];
  }
  return k;
}

Vector TensorGrid::node(Index k) const {
  const auto multi = multi_index(k);
  Vector x(dim());
  for (std::size_t j = 0; j < axes_.size(); ++j) x(static_cast<Index>(j)) = axes_[j].nodes[multi[j]];
  return x;
}

Matrix TensorGrid::nodes() const {
  Matrix X(dim(), size_);
  for (Index k = 0; k < size_; ++k) X.col(k) = node(k);
  return X;
}

Vector TensorGrid::lower() const {
  Vector v(dim());
  for (Index j = 0; j < dim(); ++j) v(j) = axes_[j].lower();
  return v;
}

Vector TensorGrid::upper() const {
  Vector v(dim());
  for (Index j = 0; j < dim(); ++j) v(j) = axes_[j].upper();
  return v;
}

bool TensorGrid::interior(Index k) const {
  const auto multi = multi_index(k);
  for (std::size_t j = 0; j < axes_.size(); ++j) {
    if (multi[j] == 0 || multi[j] + 1 == static_cast<Index>(axes_[j].size())) return false;
  }
  return true;
}

std::vector<ComponentDistribution> fit_reduced(const Matrix& snapshots, const ReducedBasis& basis) {
  require(basis.size() >= 1, "grid construction needs a non-empty basis");
  require(snapshots.rows() == basis.full_dim(), "snapshot length does not match the basis");
  const Matrix reduced = basis.matrix().transpose() * snapshots;
  std::vector<ComponentDistribution> fits;
  for (Index j = 0; j < reduced.rows(); ++j) fits.push_back(fit_component(reduced.row(j).transpose()));
  return fits;
}

TensorGrid make_grid(const std::vector<ComponentDistribution>& fits, const GridOptions& options) {
  require(!options.points.empty(), "grid options need at least one axis size");
  std::vector<UnivariateGrid> axes;
  for (std::size_t j = 0; j < fits.size(); ++j) {
    const int H = options.points.size() == 1 ? options.points[0] : options.points.at(j);
    axes.push_back(options.kind == GridKind::equal_mass
                       ? equal_mass_grid(fits[j], H, options.coverage)
                       : equidistant_grid(fits[j], H, options.coverage));
  }
  return TensorGrid(std::move(axes));
}

TensorGrid build_grid(const SeparableControlSystem& sys, const GaussianEnsemble& ensemble,
                      const ReducedBasis& basis, const Vector& mu,
                      const SnapshotOptions& snapshots, const GridOptions& options) {
  const SnapshotSet set = collect_snapshots(sys, ensemble, mu, snapshots);
  if (set.states.cols() < 2) throw SolverError("too few non-diverging snapshot trajectories");
  return make_grid(fit_reduced(set.states, basis), options);
}

}  // namespace hjbrom
