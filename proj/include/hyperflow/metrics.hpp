#pragma once

#include <cstddef>
#include <vector>

#include "hyperflow/point_cloud.hpp"

namespace hyperflow::metrics {

using CloudSet = std::vector<PointCloud>;

/// Mean squared nearest-neighbour distance from A to B plus from B to A.
double chamfer(const PointCloud& a, const PointCloud& b);

enum class EmdMode { exact_assignment, sinkhorn };

inline constexpr std::size_t kExactEmdMaxPoints = 512;
inline constexpr double kSinkhornEpsilon = 0.01;
inline constexpr int kSinkhornIterations = 500;

/// Mean Euclidean distance of the optimal one-to-one matching between clouds
/// of equal size. Sinkhorn mode rounds its entropic plan to an exactly
/// feasible coupling, so its value never falls below the exact one.
double emd(const PointCloud& a, const PointCloud& b, EmdMode mode);
/// Exact up to kExactEmdMaxPoints points, Sinkhorn beyond.
EmdMode default_emd_mode(std::size_t n);

enum class Distance { cd, emd };

/// dist(a, b) under the chosen cloud distance (EMD via default_emd_mode).
double cloud_distance(const PointCloud& a, const PointCloud& b, Distance d);

/// Jensen-Shannon divergence (natural log) between the pooled occupancy
/// histograms of two sets on a grid^3 partition of [-1, 1]^3. Points outside
/// the cube are ignored; a cloud with no point inside is an error.
double jsd(const CloudSet& s, const CloudSet& r, int grid = 28);

/// Mean over r in R of min over s in S of dist(s, r).
double mmd(const CloudSet& s, const CloudSet& r, Distance d);
/// Fraction of R that is the nearest reference of some s in S.
double coverage(const CloudSet& s, const CloudSet& r, Distance d);

struct NnResult {
  double accuracy = 0.0;
  /// Elements whose nearest distance is attained by both a same-set and a
  /// cross-set neighbour (resolved toward the cross-set one).
  std::size_t ties = 0;
  /// Elements with a neighbour at distance exactly zero.
  std::size_t zero_distance = 0;
};

/// Leave-one-out 1-NN two-sample accuracy over S and R (|S| == |R|).
NnResult nn_accuracy(const CloudSet& s, const CloudSet& r, Distance d);

/// Same metrics from precomputed distances: ss [|S| x |S|], rr, sr [|S| x |R|].
double mmd_from(const std::vector<std::vector<double>>& sr);
double coverage_from(const std::vector<std::vector<double>>& sr);
NnResult nn_accuracy_from(const std::vector<std::vector<double>>& ss,
                          const std::vector<std::vector<double>>& rr,
                          const std::vector<std::vector<double>>& sr);

std::vector<std::vector<double>> distance_matrix(const CloudSet& a, const CloudSet& b, Distance d);

struct MetricReport {
  double jsd = 0.0;
  double mmd_cd = 0.0;
  double mmd_emd = 0.0;
  double cov_cd = 0.0;
  double cov_emd = 0.0;
  double nn_1 = 0.0;  // 1-NN accuracy under Chamfer
  double nn_1_emd = 0.0;
  std::size_t nn_1_ties = 0;
  std::size_t nn_1_zero_distance = 0;
};

/// All metrics; EMD-based entries need every cloud in both sets to have the
/// same number of points (the first offender is named in the error).
MetricReport evaluate(const CloudSet& generated, const CloudSet& reference, int grid = 28);

}  // namespace hyperflow::metrics
