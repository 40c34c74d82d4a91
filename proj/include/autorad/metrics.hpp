#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace autorad {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct ClassMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  int support = 0;          // true members
  int predicted = 0;        // instances predicted as this class
  bool recall_defined = true;     // false when support == 0 (reported as 0)
  bool precision_defined = true;  // false when predicted == 0 (reported as 0)
  std::optional<double> auc;      // empty when the class or its complement is absent
  std::vector<RocPoint> roc;
};

struct MetricsBundle {
  int n_classes = 0;
  int total = 0;
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  std::vector<ClassMetrics> classes;
};

/// Index of the largest entry; ties go to the lowest index.
int argmax(const Eigen::VectorXd& row);

/// probabilities: n x N_c, each row finite, in [0, 1] and summing to 1 within
/// 1e-6. labels in [0, N_c).
MetricsBundle compute_metrics(std::span<const int> labels, const Eigen::MatrixXd& probabilities);

/// One-vs-rest ROC for `positive` over `scores`. Thresholds are max + 1 (the
/// empty-prediction sentinel) followed by every distinct score in descending
/// order; an instance is called positive iff score >= threshold.
std::vector<RocPoint> roc_curve(std::span<const int> labels, std::span<const double> scores, int positive);

/// Mann-Whitney rank statistic with average ranks for ties.
std::optional<double> rank_auc(std::span<const int> labels, std::span<const double> scores, int positive);

/// Trapezoidal area under the ROC points.
double trapezoid_auc(std::span<const RocPoint> roc);

/// Keys: n_classes, total, accuracy, confusion, classes[{class, recall,
/// precision, f1, support, predicted, recall_defined, precision_defined,
/// auc (null when undefined)}]. ROC points go to the CSV.
std::string metrics_json(const MetricsBundle& m, const std::vector<std::string>& class_names);
void write_metrics_json(const MetricsBundle& m, const std::vector<std::string>& class_names,
                        const std::filesystem::path& path);
/// Columns: class,fpr,tpr,threshold.
void write_roc_csv(const MetricsBundle& m, const std::vector<std::string>& class_names,
                   const std::filesystem::path& path);

}  // namespace autorad
