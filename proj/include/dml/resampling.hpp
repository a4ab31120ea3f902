#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dml {

using IndexList = std::vector<std::size_t>;

// Repeated K-fold partition of {0, ..., n-1}. Each repetition splits the
// observations into K disjoint, exhaustive test folds. The special no-split
// scheme (K = 1) uses every observation for both training and testing.
class FoldScheme {
 public:
  // Independent uniform shuffle split per repetition; fold sizes differ by at
  // most one. With `strata` given (binary values, length n), each stratum is
  // dealt across folds separately.
  static FoldScheme generate(std::size_t n, std::size_t k, std::size_t n_rep, std::uint64_t seed,
                             std::optional<std::span<const double>> strata = std::nullopt);

  // Validates user-supplied partitions: outer index is the repetition, then
  // fold, then observation indices. Overlaps, gaps, out-of-range indices and
  // empty folds are rejected with the offending indices in the message.
  static FoldScheme from_assignments(std::size_t n,
                                     std::vector<std::vector<IndexList>> assignments);

  static FoldScheme no_split(std::size_t n);

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t n_rep() const { return folds_.size(); }
  std::uint64_t seed() const { return seed_; }
  bool is_no_split() const { return no_split_; }

  // Ascending.
  const IndexList& test_indices(std::size_t rep, std::size_t fold) const;
  IndexList train_indices(std::size_t rep, std::size_t fold) const;
  // Per-observation fold id for one repetition.
  std::vector<std::size_t> fold_ids(std::size_t rep) const;

  const std::vector<std::vector<IndexList>>& assignments() const { return folds_; }

  friend bool operator==(const FoldScheme&, const FoldScheme&) = default;

 private:
  FoldScheme() = default;
  void check_range(std::size_t rep, std::size_t fold) const;

  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::uint64_t seed_ = 0;
  bool no_split_ = false;
  std::vector<std::vector<IndexList>> folds_;
};

// Free-function spelling used throughout the library.
inline FoldScheme make_folds(std::size_t n, std::size_t k, std::size_t n_rep, std::uint64_t seed) {
  return FoldScheme::generate(n, k, n_rep, seed);
}

}  // namespace dml
