#include "dml/resampling.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dml/errors.hpp"
#include "dml/rng.hpp"

namespace dml {

FoldScheme FoldScheme::generate(std::size_t n, std::size_t k, std::size_t n_rep, std::uint64_t seed,
                                std::optional<std::span<const double>> strata) {
  if (k < 2) throw ValidationError("number of folds must be at least 2, got " + std::to_string(k));
  if (k > n)
    throw ValidationError("number of folds (" + std::to_string(k) +
                          ") exceeds number of observations (" + std::to_string(n) + ")");
  if (n_rep < 1) throw ValidationError("number of repetitions must be at least 1");
  if (strata && strata->size() != n) throw ValidationError("strata length differs from n");

  FoldScheme s;
  s.n_ = n;
  s.k_ = k;
  s.seed_ = seed;
  s.folds_.resize(n_rep);
  for (std::size_t r = 0; r < n_rep; ++r) {
    Rng rng(derive_seed(seed, {r}));
    IndexList order;
    if (strata) {
      IndexList zeros, ones;
      for (std::size_t i = 0; i < n; ++i) ((*strata)[i] == 1.0 ? ones : zeros).push_back(i);
      rng.shuffle(zeros);
      rng.shuffle(ones);
      order = std::move(zeros);
      order.insert(order.end(), ones.begin(), ones.end());
    } else {
      order.resize(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.shuffle(order);
    }
    // Dealing positions round-robin keeps each stratum spread evenly and
    // overall fold sizes within one of each other.
    auto& folds = s.folds_[r];
    folds.assign(k, {});
    for (std::size_t pos = 0; pos < n; ++pos) folds[pos % k].push_back(order[pos]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
  }
  return s;
}

FoldScheme FoldScheme::from_assignments(std::size_t n,
                                        std::vector<std::vector<IndexList>> assignments) {
  if (assignments.empty()) throw ValidationError("fold assignments: at least one repetition required");
  const std::size_t k = assignments.front().size();
  if (k < 2) throw ValidationError("fold assignments: at least 2 folds required");
  if (k > n) throw ValidationError("fold assignments: more folds than observations");
  for (std::size_t r = 0; r < assignments.size(); ++r) {
    auto& folds = assignments[r];
    const std::string where = "repetition " + std::to_string(r);
    if (folds.size() != k)
      throw ValidationError("fold assignments: " + where + " has " + std::to_string(folds.size()) +
                            " folds, expected " + std::to_string(k));
    std::vector<int> owner(n, -1);
    for (std::size_t f = 0; f < k; ++f) {
      if (folds[f].empty())
        throw ValidationError("fold assignments: " + where + ", fold " + std::to_string(f) + " is empty");
      for (std::size_t i : folds[f]) {
        if (i >= n)
          throw ValidationError("fold assignments: " + where + ", index " + std::to_string(i) +
                                " out of range for n=" + std::to_string(n));
        if (owner[i] >= 0)
          throw ValidationError("fold assignments: " + where + ", index " + std::to_string(i) +
                                " appears in folds " + std::to_string(owner[i]) + " and " +
                                std::to_string(f) + " (overlap)");
        owner[i] = static_cast<int>(f);
      }
      std::sort(folds[f].begin(), folds[f].end());
    }
    std::string missing;
    for (std::size_t i = 0; i < n; ++i)
      if (owner[i] < 0) missing += (missing.empty() ? "" : ",") + std::to_string(i);
    if (!missing.empty())
      throw ValidationError("fold assignments: " + where + ", indices not covered (gap): " + missing);
  }
  FoldScheme s;
  s.n_ = n;
  s.k_ = k;
  s.folds_ = std::move(assignments);
  return s;
}

FoldScheme FoldScheme::no_split(std::size_t n) {
  if (n < 1) throw ValidationError("no-split scheme needs at least one observation");
  FoldScheme s;
  s.n_ = n;
  s.k_ = 1;
  s.no_split_ = true;
  IndexList all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  s.folds_ = {{std::move(all)}};
  return s;
}

void FoldScheme::check_range(std::size_t rep, std::size_t fold) const {
  if (rep >= n_rep() || fold >= k_)
    throw ValidationError("fold index out of range: rep " + std::to_string(rep) + ", fold " +
                          std::to_string(fold) + " (n_rep=" + std::to_string(n_rep()) +
                          ", k=" + std::to_string(k_) + ")");
}

const IndexList& FoldScheme::test_indices(std::size_t rep, std::size_t fold) const {
  check_range(rep, fold);
  return folds_[rep][fold];
}

IndexList FoldScheme::train_indices(std::size_t rep, std::size_t fold) const {
  check_range(rep, fold);
  if (no_split_) return folds_[rep][fold];
  std::vector<bool> in_test(n_, false);
  for (std::size_t i : folds_[rep][fold]) in_test[i] = true;
  IndexList train;
  train.reserve(n_ - folds_[rep][fold].size());
  for (std::size_t i = 0; i < n_; ++i)
    if (!in_test[i]) train.push_back(i);
  return train;
}

std::vector<std::size_t> FoldScheme::fold_ids(std::size_t rep) const {
  check_range(rep, 0);
  std::vector<std::size_t> ids(n_, 0);
  for (std::size_t f = 0; f < k_; ++f)
    for (std::size_t i : folds_[rep][f]) ids[i] = f;
  return ids;
}

}  // namespace dml
