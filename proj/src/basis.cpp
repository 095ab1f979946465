#include "hjbrom/basis.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace hjbrom {

ReducedBasis::ReducedBasis(Matrix columns) : columns_(std::move(columns)) {}

Index ReducedBasis::append(const Matrix& candidates, Index max_new, double drop_tol) {
  require(candidates.rows() == columns_.rows() || columns_.size() == 0,
          "basis candidates have wrong length");
  if (columns_.rows() == 0) columns_.resize(candidates.rows(), 0);
  Index kept = 0;
  for (Index j = 0; j < candidates.cols() && kept < max_new; ++j) {
    Vector v = candidates.col(j);
    const double original = v.norm();
    if (original == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (columns_.cols() > 0) v -= columns_ * (columns_.transpose() * v);
    }
    const double norm = v.norm();
    if (norm <= drop_tol * original) continue;
    columns_.conservativeResize(Eigen::NoChange, columns_.cols() + 1);
    columns_.col(columns_.cols() - 1) = v / norm;
    ++kept;
  }
  return kept;
}

double ReducedBasis::orthonormality_error() const {
  if (size() == 0) return 0.0;
  const Matrix gram = columns_.transpose() * columns_;
  return (gram - Matrix::Identity(size(), size())).cwiseAbs().maxCoeff();
}

ReducedBasis pod(const Matrix& snapshots, double energy_tol, Index max_modes) {
  require(energy_tol >= 0.0 && energy_tol <= 1.0, "POD energy tolerance must lie in [0,1]");
  const double total_norm = snapshots.norm();
  if (!(total_norm > 0.0)) throw InvalidInput("POD of an all-zero snapshot matrix");
  Eigen::BDCSVD<Matrix> svd(snapshots, Eigen::ComputeThinU);
  const Vector& sigma = svd.singularValues();
  const double total = sigma.squaredNorm();
  const double cutoff = 1e-14 * sigma(0);
  Index keep = 0;
  double captured = 0.0;
  while (keep < sigma.size() && sigma(keep) > cutoff) {
    captured += sigma(keep) * sigma(keep);
    ++keep;
    if (captured >= (1.0 - energy_tol) * total) break;
  }
  keep = std::max<Index>(keep, 1);
  if (max_modes > 0) keep = std::min(keep, max_modes);
  return ReducedBasis(svd.matrixU().leftCols(keep));
}

Matrix projected_are_solution(const AreProblem& problem, const ReducedBasis& basis) {
  const Index n = problem.state_dim();
  if (basis.size() == 0) return Matrix::Zero(n, n);
  const Matrix& psi = basis.matrix();
  AreProblem reduced;
  reduced.A = psi.transpose() * problem.A * psi;
  reduced.B = psi.transpose() * problem.B;
  reduced.Q = psi.transpose() * problem.Q * psi;
  reduced.Q = 0.5 * (reduced.Q + reduced.Q.transpose());
  reduced.R = problem.R;
  reduced.discount = problem.discount;
  const AreSolution z = solve_are(reduced);
  return psi * z.P * psi.transpose();
}

double error_indicator(const AreProblem& problem, const ReducedBasis& basis) {
  const double qnorm = problem.Q.norm();
  require(qnorm > 0.0, "error indicator needs a nonzero state weight");
  try {
    const Matrix P = projected_are_solution(problem, basis);
    const double value = are_residual(problem, P).norm() / qnorm;
    return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
  } catch (const SolverError&) {
    return std::numeric_limits<double>::infinity();
  }
}

const Matrix& AreCache::solve(const ProblemFamily& family, const Vector& mu) {
  std::vector<double> key(mu.data(), mu.data() + mu.size());
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  ++solves_;
  AreSolution sol = solve_are(family(mu));
  return cache_.emplace(std::move(key), std::move(sol.P)).first->second;
}

GreedyResult lrfg(const GreedyConfig& cfg, const ReducedBasis& initial, const ProblemFamily& family,
                  AreCache* cache) {
  require(!cfg.train_set.empty(), "greedy training set must not be empty");
  require(cfg.tol > 0.0, "greedy tolerance must be positive");
  require(cfg.max_size >= 1, "maximum basis size must be positive");

  std::vector<AreProblem> problems;
  problems.reserve(cfg.train_set.size());
  for (const auto& mu : cfg.train_set) problems.push_back(family(mu));

  AreCache local;
  AreCache& store = cache ? *cache : local;

  GreedyResult result;
  result.basis = initial.size() > 0 ? initial : ReducedBasis::empty(problems.front().state_dim());

  // Ties (e.g. Δ = 1 for every μ with the empty basis) go to the larger
  // unnormalized residual ‖Q(μ)‖, then to the lower index.
  auto worst = [&](std::size_t& arg) {
    double best = -1.0, best_scale = 0.0;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const double d = error_indicator(problems[i], result.basis);
      const double scale = problems[i].Q.norm();
      const bool tie = std::isfinite(d) && std::abs(d - best) <= 1e-12 * std::abs(best);
      if ((d > best && !tie) || (tie && scale > best_scale)) {
        best = std::max(best, d);
        best_scale = scale;
        arg = i;
      }
    }
    return best;
  };

  std::size_t arg = 0;
  double max_delta = worst(arg);
  result.history.push_back(max_delta);
  while (max_delta > cfg.tol && result.basis.size() < cfg.max_size) {
    const Vector& mu_star = cfg.train_set[arg];
    Matrix residual_part = store.solve(family, mu_star);
    const Matrix& psi = result.basis.matrix();
    if (psi.cols() > 0) residual_part -= psi * (psi.transpose() * residual_part);
    if (residual_part.norm() == 0.0) break;
    const Index room = cfg.max_size - result.basis.size();
    const ReducedBasis modes = pod(residual_part, cfg.pod_tol, room);
    if (result.basis.append(modes.matrix(), room) == 0) break;
    result.selected.push_back(mu_star);
    ++result.iterations;
    max_delta = worst(arg);
    result.history.push_back(max_delta);
  }
  result.max_indicator = max_delta;
  return result;
}

bool ParameterBox::contains(const Vector& mu) const {
  return mu.size() == lower.size() && (mu.array() >= lower.array()).all() &&
         (mu.array() <= upper.array()).all();
}

std::vector<ParameterBox> ParameterBox::bisect() const {
  const Index q = lower.size();
  const Vector mid = barycenter();
  std::vector<ParameterBox> children;
  const unsigned count = 1u << q;
  children.reserve(count);
  for (unsigned c = 0; c < count; ++c) {
    ParameterBox child{lower, upper, level + 1};
    for (Index k = 0; k < q; ++k) {
      if (c & (1u << k)) {
        child.lower(k) = mid(k);
      } else {
        child.upper(k) = mid(k);
      }
    }
    children.push_back(std::move(child));
  }
  return children;
}

std::vector<Vector> ParameterBox::training_points(int per_axis) const {
  require(per_axis >= 1, "training grid needs at least one point per axis");
  const Index q = lower.size();
  std::vector<Vector> points{Vector(0)};
  for (Index k = 0; k < q; ++k) {
    std::vector<Vector> next;
    for (const auto& head : points) {
      for (int i = 0; i < per_axis; ++i) {
        const double t = per_axis == 1 ? 0.5 : static_cast<double>(i) / (per_axis - 1);
        Vector p(k + 1);
        p << head, lower(k) + t * (upper(k) - lower(k));
        next.push_back(std::move(p));
      }
    }
    points = std::move(next);
  }
  return points;
}

int ParameterPartition::max_level() const {
  int level = 0;
  for (const auto& b : boxes) level = std::max(level, b.level);
  return level;
}

namespace {

void refine(const ParameterBox& box, double tol, int max_refine,
            const std::function<BoxFit(const ParameterBox&)>& fit, ParameterPartition& out) {
  BoxFit result = fit(box);
  if (result.indicator <= tol || box.level >= max_refine) {
    out.boxes.push_back(box);
    out.bases.push_back(std::move(result.basis));
    out.indicators.push_back(result.indicator);
    return;
  }
  for (const auto& child : box.bisect()) refine(child, tol, max_refine, fit, out);
}

}  // namespace

ParameterPartition adaptive_partition(const ParameterDomain& domain, double tol, int max_refine,
                                      const std::function<BoxFit(const ParameterBox&)>& fit) {
  require(max_refine >= 0, "maximum refinement level must be non-negative");
  ParameterPartition partition;
  refine(ParameterBox{domain.lower(), domain.upper(), 0}, tol, max_refine, fit, partition);
  return partition;
}

ParameterPartition adaptive_partition(const ParameterDomain& domain, const PartitionConfig& cfg,
                                      const ProblemFamily& family, AreCache* cache) {
  AreCache local;
  AreCache& store = cache ? *cache : local;
  auto fit = [&](const ParameterBox& box) {
    GreedyConfig greedy{box.training_points(cfg.train_per_axis), cfg.tol, cfg.pod_tol,
                        cfg.max_size};
    const Index n = family(box.barycenter()).state_dim();
    GreedyResult g = lrfg(greedy, ReducedBasis::empty(n), family, &store);
    return BoxFit{std::move(g.basis), g.max_indicator};
  };
  return adaptive_partition(domain, cfg.tol, cfg.max_refine, fit);
}

std::size_t locate(const ParameterPartition& partition, const Vector& mu) {
  for (std::size_t i = 0; i < partition.boxes.size(); ++i) {
    if (partition.boxes[i].contains(mu)) return i;
  }
  throw InvalidInput("parameter lies outside the partitioned domain");
}

}  // namespace hjbrom
