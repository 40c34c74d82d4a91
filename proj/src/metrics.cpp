#include "autorad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "io_util.hpp"

namespace autorad {

int argmax(const Eigen::VectorXd& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i)
    if (row(i) > row(best)) best = i;
  return static_cast<int>(best);
}

std::vector<RocPoint> roc_curve(std::span<const int> labels, std::span<const double> scores, int positive) {
  if (labels.size() != scores.size()) throw ValidationError("roc: labels and scores differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  int n_pos = 0;
  for (int y : labels) n_pos += (y == positive);
  const int n_neg = static_cast<int>(labels.size()) - n_pos;
  auto rate = [](int num, int den) { return den > 0 ? static_cast<double>(num) / den : 0.0; };

  std::vector<RocPoint> roc;
  const double top = scores.empty() ? 1.0 : scores[order.front()] + 1.0;
  roc.push_back({0.0, 0.0, top});
  int tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double thr = scores[order[i]];
    while (i < order.size() && scores[order[i]] == thr) {
      if (labels[order[i]] == positive) ++tp; else ++fp;
      ++i;
    }
    roc.push_back({rate(fp, n_neg), rate(tp, n_pos), thr});
  }
  return roc;
}

std::optional<double> rank_auc(std::span<const int> labels, std::span<const double> scores, int positive) {
  if (labels.size() != scores.size()) throw ValidationError("auc: labels and scores differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
    i = j;
  }
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == positive) {
      n_pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double trapezoid_auc(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  }
  return area;
}

MetricsBundle compute_metrics(std::span<const int> labels, const Eigen::MatrixXd& probabilities) {
  if (static_cast<Eigen::Index>(labels.size()) != probabilities.rows()) {
    throw ValidationError("metrics: " + std::to_string(labels.size()) + " labels but " +
                          std::to_string(probabilities.rows()) + " probability rows");
  }
  if (labels.empty()) throw ValidationError("metrics: no instances");
  const int nc = static_cast<int>(probabilities.cols());
  if (nc < 2) throw ValidationError("metrics: need at least two classes");
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    const auto row = probabilities.row(i);
    if (!row.allFinite() || row.minCoeff() < 0.0 || row.maxCoeff() > 1.0 || std::abs(row.sum() - 1.0) > 1e-6) {
      throw ValidationError("metrics: probability row " + std::to_string(i) + " is not a distribution");
    }
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= nc) {
      throw ValidationError("metrics: label out of range at row " + std::to_string(i));
    }
  }

  MetricsBundle m;
  m.n_classes = nc;
  m.total = static_cast<int>(labels.size());
  m.confusion.assign(static_cast<std::size_t>(nc), std::vector<int>(static_cast<std::size_t>(nc), 0));
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int pred = argmax(probabilities.row(static_cast<Eigen::Index>(i)).transpose());
    ++m.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(pred)];
    correct += (pred == labels[i]);
  }
  m.accuracy = static_cast<double>(correct) / m.total;

  m.classes.resize(static_cast<std::size_t>(nc));
  for (int k = 0; k < nc; ++k) {
    auto& c = m.classes[static_cast<std::size_t>(k)];
    const int tp = m.confusion[k][k];
    for (int j = 0; j < nc; ++j) {
      c.support += m.confusion[k][j];
      c.predicted += m.confusion[j][k];
    }
    c.recall_defined = c.support > 0;
    c.precision_defined = c.predicted > 0;
    c.recall = c.recall_defined ? static_cast<double>(tp) / c.support : 0.0;
    c.precision = c.precision_defined ? static_cast<double>(tp) / c.predicted : 0.0;
    c.f1 = (c.recall + c.precision > 0.0) ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    std::vector<double> col(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) col[i] = probabilities(static_cast<Eigen::Index>(i), k);
    c.auc = rank_auc(labels, col, k);
    c.roc = roc_curve(labels, col, k);
  }
  return m;
}

std::string metrics_json(const MetricsBundle& m, const std::vector<std::string>& class_names) {
  nlohmann::json j;
  j["n_classes"] = m.n_classes;
  j["total"] = m.total;
  j["accuracy"] = m.accuracy;
  j["confusion"] = m.confusion;
  j["classes"] = nlohmann::json::array();
  for (int k = 0; k < m.n_classes; ++k) {
    const auto& c = m.classes[static_cast<std::size_t>(k)];
    nlohmann::json e;
    e["class"] = k < static_cast<int>(class_names.size()) ? class_names[static_cast<std::size_t>(k)] : std::to_string(k);
    e["recall"] = c.recall;
    e["precision"] = c.precision;
    e["f1"] = c.f1;
    e["support"] = c.support;
    e["predicted"] = c.predicted;
    e["recall_defined"] = c.recall_defined;
    e["precision_defined"] = c.precision_defined;
    e["auc"] = c.auc ? nlohmann::json(*c.auc) : nlohmann::json(nullptr);
    j["classes"].push_back(e);
  }
  return j.dump(2) + "\n";
}

void write_metrics_json(const MetricsBundle& m, const std::vector<std::string>& class_names,
                        const std::filesystem::path& path) {
  io::write_text(path, metrics_json(m, class_names));
}

void write_roc_csv(const MetricsBundle& m, const std::vector<std::string>& class_names,
                   const std::filesystem::path& path) {
  std::string out = "class,fpr,tpr,threshold\n";
  for (int k = 0; k < m.n_classes; ++k) {
    const std::string name =
        k < static_cast<int>(class_names.size()) ? class_names[static_cast<std::size_t>(k)] : std::to_string(k);
    for (const auto& p : m.classes[static_cast<std::size_t>(k)].roc) {
      out += name + "," + io::format_double(p.fpr) + "," + io::format_double(p.tpr) + "," +
             io::format_double(p.threshold) + "\n";
    }
  }
  io::write_text(path, out);
}

}  // namespace autorad
