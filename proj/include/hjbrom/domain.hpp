#pragma once

#include "hjbrom/basis.hpp"
#include "hjbrom/model.hpp"
#include "hjbrom/types.hpp"

#include <cstdint>
#include <vector>

namespace hjbrom {

struct SnapshotOptions {
  std::vector<double> times{0.0};  // sample instants, rounded to multiples of dt
  int count = 100;
  std::uint64_t seed = 1;
  Vector control;  // constant control u*; empty means zero
  StepperConfig stepper;
};

struct SnapshotSet {
  Matrix states;  // n × (accepted·|times|)
  int accepted = 0;
  int skipped = 0;
};

/// States of uncontrolled (or constant-control) runs from ensemble draws,
/// one column per (draw, time). Diverging draws are skipped.
SnapshotSet collect_snapshots(const SeparableControlSystem& sys, const GaussianEnsemble& ensemble,
                              const Vector& mu, const SnapshotOptions& options);

inline constexpr double kStdFloor = 1e-8;

/// Zero-mean Gaussian with std equal to the sample RMS.
struct ComponentDistribution {
  double std = 1.0;
  std::size_t sample_count = 0;
  bool floored = false;
};

ComponentDistribution fit_component(const std::vector<double>& samples);
ComponentDistribution fit_component(const Eigen::Ref<const Vector>& samples);

/// Sorted 1D node set.
struct UnivariateGrid {
  std::vector<double> nodes;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }
  [[nodiscard]] double lower() const { return nodes.front(); }
  [[nodiscard]] double upper() const { return nodes.back(); }
};

/// Nodes at the Gaussian quantiles α + (k-1)(1-2α)/(H-1); H odd, middle node 0.
UnivariateGrid equal_mass_grid(const ComponentDistribution& dist, int H, double coverage = 0.005);

/// H equidistant nodes spanning the same interval as equal_mass_grid.
UnivariateGrid equidistant_grid(const ComponentDistribution& dist, int H, double coverage = 0.005);

/// Cartesian product of axes, row-major (last axis fastest).
class TensorGrid {
 public:
  TensorGrid() = default;
  explicit TensorGrid(std::vector<UnivariateGrid> axes);

  [[nodiscard]] Index dim() const { return static_cast<Index>(axes_.size()); }
  [[nodiscard]] Index size() const { return size_; }
  [[nodiscard]] const std::vector<UnivariateGrid>& axes() const { return axes_; }
  [[nodiscard]] const UnivariateGrid& axis(Index j) const { return axes_[j]; }
  [[nodiscard]] const std::vector<Index>& strides() const { return strides_; }

  [[nodiscard]] std::vector<Index> multi_index(Index k) const;
  [[nodiscard]] Index flat_index(const std::vector<Index>& multi) const;
  [[nodiscard]] Vector node(Index k) const;
  /// ℓ × H matrix of all nodes.
  [[nodiscard]] Matrix nodes() const;
  [[nodiscard]] Vector lower() const;
  [[nodiscard]] Vector upper() const;
  /// Whether node k has a neighbour on both sides in every axis.
  [[nodiscard]] bool interior(Index k) const;

 private:
  std::vector<UnivariateGrid> axes_;
  std::vector<Index> strides_;
  Index size_ = 0;
};

enum class GridKind { equal_mass, equidistant };

struct GridOptions {
  std::vector<int> points;  // per reduced axis; a single entry applies to all
  double coverage = 0.005;
  GridKind kind = GridKind::equal_mass;
};

/// Per-axis fits of the projected snapshots Ψᵀ Y.
std::vector<ComponentDistribution> fit_reduced(const Matrix& snapshots, const ReducedBasis& basis);

TensorGrid make_grid(const std::vector<ComponentDistribution>& fits, const GridOptions& options);

/// Snapshots at μ, projection, fit and tensor product in one call.
TensorGrid build_grid(const SeparableControlSystem& sys, const GaussianEnsemble& ensemble,
                      const ReducedBasis& basis, const Vector& mu,
                      const SnapshotOptions& snapshots, const GridOptions& options);

}  // namespace hjbrom
