#pragma once

// K-min decision function: the mean of the K smallest composite distances to
// the negative class minus the same quantity for the positive class. Negative
// values predict -1.

#include "irml/dataset.hpp"
#include "irml/distance.hpp"

#include <algorithm>
#include <utility>
#include <vector>

namespace irml {

namespace detail {

// Mean of the k smallest distances from x to the given members. Selection
// breaks ties by ascending training index and sums in that order. A class
// smaller than k contributes all members, averaged over its own size.
inline double kmin_mean(const VecRef& x, const LabeledDataset& train,
                        const std::vector<std::ptrdiff_t>& members, const ModelParams& model,
                        int k) {
  std::vector<std::pair<double, std::ptrdiff_t>> dist;
  dist.reserve(members.size());
  for (auto idx : members) dist.emplace_back(composite_distance(x, train.row(idx), model), idx);
  const auto used = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(used), dist.end());
  double sum = 0.0;
  for (std::size_t t = 0; t < used; ++t) sum += dist[t].first;
  return sum / static_cast<double>(used);
}

}  // namespace detail

class KMinClassifier {
 public:
  KMinClassifier(const LabeledDataset& train, const ModelParams& model, int k)
      : train_(&train), model_(&model), k_(k),
        negatives_(train.indices_of(-1)), positives_(train.indices_of(+1)) {
    if (k_ < 1) throw UsageError("KMinClassifier: K must be at least 1");
    if (negatives_.empty() || positives_.empty()) {
      throw UsageError("KMinClassifier: training set must contain both classes");
    }
    require_same_dim(train.dim(), model.dim(), "KMinClassifier");
  }

  [[nodiscard]] double decision_value(const VecRef& x) const {
    require_same_dim(x.size(), train_->dim(), "decision_value");
    return detail::kmin_mean(x, *train_, negatives_, *model_, k_) -
           detail::kmin_mean(x, *train_, positives_, *model_, k_);
  }

  // Exact ties go to the positive class.
  [[nodiscard]] int predict(const VecRef& x) const { return label_from_decision(decision_value(x)); }

  static int label_from_decision(double f) { return f < 0.0 ? -1 : +1; }

 private:
  const LabeledDataset* train_;
  const ModelParams* model_;
  int k_;
  std::vector<std::ptrdiff_t> negatives_;
  std::vector<std::ptrdiff_t> positives_;
};

inline double decision_value(const VecRef& x, const LabeledDataset& train,
                             const ModelParams& model, int k) {
  return KMinClassifier(train, model, k).decision_value(x);
}

inline int predict(const VecRef& x, const LabeledDataset& train, const ModelParams& model, int k) {
  return KMinClassifier(train, model, k).predict(x);
}

inline double evaluate(const LabeledDataset& test, const LabeledDataset& train,
                       const ModelParams& model, int k) {
  if (test.size() == 0) throw UsageError("evaluate: empty test set");
  const KMinClassifier clf(train, model, k);
  std::ptrdiff_t correct = 0;
  for (std::ptrdiff_t i = 0; i < test.size(); ++i) {
    if (clf.predict(test.row(i)) == test.y[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

struct LipschitzBounds {
  // 2 (sum_s |M(A_s)|_F + |M(B)|_F)
  double frobenius_bound = 0.0;
  // 2 (sum_s sqrt(lambda_max(M(A_s))) + sqrt(lambda_max(M(B))))
  double spectral_bound = 0.0;
};

// The Frobenius bound only dominates the true constant when every metric has
// lambda_max >= 1; the spectral bound is the sound one in general.
inline LipschitzBounds lipschitz_diagnostics(const ModelParams& model) {
  LipschitzBounds b;
  double fro = frobenius_norm(model.background);
  double spectral = spectral_sqrt_norm(model.background);
  for (const auto& reg : model.regions) {
    fro += frobenius_norm(reg.metric);
    spectral += spectral_sqrt_norm(reg.metric);
  }
  b.frobenius_bound = 2.0 * fro;
  b.spectral_bound = 2.0 * spectral;
  return b;
}

}  // namespace irml
