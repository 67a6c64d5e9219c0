#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "explang/error.hpp"
#include "explang/metrics.hpp"

namespace explang {

namespace {

constexpr int kMaxLloydIterations = 100;

// Farthest-first seeding from row 0: each further seed is the row with the
// largest distance to its nearest chosen seed, lowest index on ties.
Eigen::MatrixXd farthest_first_seeds(const Eigen::MatrixXd& points, std::size_t k) {
  const auto n = points.rows();
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), points.cols());
  centers.row(0) = points.row(0);
  Eigen::VectorXd nearest = (points.rowwise() - points.row(0)).rowwise().squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    Eigen::Index pick = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (nearest(i) > nearest(pick)) pick = i;
    }
    centers.row(static_cast<Eigen::Index>(c)) = points.row(pick);
    nearest = nearest.cwiseMin((points.rowwise() - points.row(pick)).rowwise().squaredNorm());
  }
  return centers;
}

std::vector<std::size_t> kmeans(const Eigen::MatrixXd& points, std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  Eigen::MatrixXd centers = farthest_first_seeds(points, k);
  std::vector<std::size_t> labels(n, 0);
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (points.row(static_cast<Eigen::Index>(i)) -
                          centers.row(static_cast<Eigen::Index>(c)))
                             .squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (std::size_t c = 0; c < k; ++c) {
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(points.cols());
      std::size_t members = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == c) {
          sum += points.row(static_cast<Eigen::Index>(i));
          ++members;
        }
      }
      // An empty cluster keeps its previous center.
      if (members > 0) centers.row(static_cast<Eigen::Index>(c)) = sum / static_cast<double>(members);
    }
  }
  return labels;
}

}  // namespace

Clustering spectral_cluster(const EmbeddingMatrix& emb, std::size_t max_k) {
  emb.validate();
  const std::size_t n = emb.rows;
  if (n > kMaxSpectralRows) {
    throw ValidationError(fmt::format("spectral clustering supports at most {} rows", kMaxSpectralRows));
  }
  if (max_k == 0) max_k = std::min<std::size_t>(n, 8);
  if (max_k > n) throw ValidationError("max_k exceeds the number of rows");
  if (max_k < 2) throw ValidationError("max_k must be at least 2");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(emb.dims));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < emb.dims; ++c) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = emb.at(r, c);
    }
  }
  const Eigen::VectorXd norms = x.rowwise().norm();
  if (norms.minCoeff() == 0.0) throw ValidationError("embedding row with zero norm");
  const Eigen::MatrixXd unit = norms.cwiseInverse().asDiagonal() * x;
  const Eigen::MatrixXd cosine = unit * unit.transpose();

  bool degenerate = true;
  for (Eigen::Index i = 0; i < cosine.rows() && degenerate; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (cosine(i, j) < 1.0 - 1e-12) {
        degenerate = false;
        break;
      }
    }
  }
  if (degenerate) throw ValidationError("all embedding rows point in the same direction");

  Eigen::MatrixXd w = (Eigen::MatrixXd::Ones(cosine.rows(), cosine.cols()) + cosine) / 2.0;
  w.diagonal().setZero();
  const Eigen::VectorXd degree = w.rowwise().sum();
  if (degree.minCoeff() <= 0.0) throw ValidationError("embedding row disconnected from all others");
  const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(w.rows(), w.cols()) -
                              inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const Eigen::VectorXd& evals = solver.eigenvalues();

  Clustering out;
  out.eigenvalues.assign(evals.data(), evals.data() + evals.size());
  // A single cluster is never reported: the shifted affinity keeps every pair
  // connected, so the first gap is large even for well separated groups.
  std::size_t best_k = 2;
  double best_gap = -1.0;
  for (std::size_t k = 2; k + 1 <= max_k; ++k) {
    const double gap = evals(static_cast<Eigen::Index>(k)) - evals(static_cast<Eigen::Index>(k - 1));
    if (gap > best_gap) {
      best_gap = gap;
      best_k = k;
    }
  }
  out.k = best_k;

  Eigen::MatrixXd embed = solver.eigenvectors().leftCols(static_cast<Eigen::Index>(best_k));
  for (Eigen::Index i = 0; i < embed.rows(); ++i) {
    const double nrm = embed.row(i).norm();
    if (nrm > 0.0) embed.row(i) /= nrm;
  }
  out.labels = kmeans(embed, best_k);
  return out;
}

std::size_t cluster_count(const EmbeddingMatrix& emb, std::size_t max_k) {
  return spectral_cluster(emb, max_k).k;
}

}  // namespace explang
