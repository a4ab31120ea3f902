#include <algorithm>
#include <cmath>
#include <numeric>

#include "dml/errors.hpp"
#include "dml/learners.hpp"
#include "dml/rng.hpp"
#include "param_reader.hpp"

namespace dml {

namespace {

struct ForestSettings {
  long n_trees;
  long max_depth;  // -1: unlimited
  long min_leaf;
  long max_features;  // 0: all features (regressor) / ceil(sqrt(p)) (classifier)
  long seed;
  bool bootstrap;
};

ForestSettings read_forest(const Params& p, const std::string& name) {
  detail::ParamReader r(name, p, {"n_trees", "max_depth", "min_leaf", "max_features", "seed", "bootstrap"});
  return {r.integer("n_trees", 100, 1), r.integer("max_depth", -1, -1), r.integer("min_leaf", 1, 1),
          r.integer("max_features", 0, 0), r.integer("seed", 0, 0), r.flag("bootstrap", true)};
}

// Grows one tree. Every feature keeps an index array sorted by that feature;
// a node owns the same contiguous range [begin, end) in each array, and
// splitting stably partitions that range. Split search is then a linear scan.
class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
              const std::vector<std::vector<int>>& presorted, const ForestSettings& cfg,
              std::size_t mtry, Rng& rng)
      : x_(x), y_(y), cfg_(cfg), mtry_(mtry), rng_(rng) {
    const auto n = static_cast<std::size_t>(x.rows());
    weight_.assign(n, 0.0);
    if (cfg.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) weight_[static_cast<std::size_t>(rng.index(n))] += 1.0;
    } else {
      std::fill(weight_.begin(), weight_.end(), 1.0);
    }
    sorted_.resize(presorted.size());
    for (std::size_t f = 0; f < presorted.size(); ++f) {
      sorted_[f].reserve(n);
      for (int i : presorted[f])
        if (weight_[static_cast<std::size_t>(i)] > 0.0) sorted_[f].push_back(i);
    }
    goes_left_.assign(n, 0);
    scratch_.resize(n);
    features_.resize(static_cast<std::size_t>(x.cols()));
  }

  RandomForest::Tree build() {
    RandomForest::Tree tree;
    struct Pending {
      int node;
      std::size_t begin, end;
      long depth;
    };
    tree.push_back({});
    std::vector<Pending> stack{{0, 0, sorted_.front().size(), 0}};
    while (!stack.empty()) {
      const Pending cur = stack.back();
      stack.pop_back();
      double w = 0.0, s = 0.0, ss = 0.0;
      for (std::size_t pos = cur.begin; pos < cur.end; ++pos) {
        const auto i = static_cast<std::size_t>(sorted_[0][pos]);
        w += weight_[i];
        s += weight_[i] * y_[static_cast<Eigen::Index>(i)];
        ss += weight_[i] * y_[static_cast<Eigen::Index>(i)] * y_[static_cast<Eigen::Index>(i)];
      }
      const double mean = s / w;
      tree[static_cast<std::size_t>(cur.node)].value = mean;
      const bool depth_ok = cfg_.max_depth < 0 || cur.depth < cfg_.max_depth;
      const double sse = ss - s * mean;
      if (!depth_ok || w < 2.0 * static_cast<double>(cfg_.min_leaf) || sse <= 1e-12 * std::max(1.0, ss))
        continue;

      Split best;
      find_split(cur.begin, cur.end, w, s, best);
      if (best.feature < 0) continue;

      std::size_t n_left = 0;
      for (std::size_t pos = cur.begin; pos < cur.end; ++pos) {
        const int i = sorted_[0][pos];
        const bool left = x_(i, best.feature) <= best.threshold;
        goes_left_[static_cast<std::size_t>(i)] = left;
        n_left += left;
      }
      for (auto& arr : sorted_) partition(arr, cur.begin, cur.end);

      const int left = static_cast<int>(tree.size());
      tree.push_back({});
      tree.push_back({});
      auto& node = tree[static_cast<std::size_t>(cur.node)];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.left = left;
      node.right = left + 1;
      // Right pushed first so the left subtree is grown first.
      stack.push_back({left + 1, cur.begin + n_left, cur.end, cur.depth + 1});
      stack.push_back({left, cur.begin, cur.begin + n_left, cur.depth + 1});
    }
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  void find_split(std::size_t begin, std::size_t end, double w_total, double s_total, Split& best) {
    const auto p = static_cast<std::size_t>(x_.cols());
    std::iota(features_.begin(), features_.end(), 0);
    std::size_t count = p;
    if (mtry_ < p) {
      // Partial Fisher-Yates, then ascending order for deterministic ties.
      for (std::size_t j = 0; j < mtry_; ++j) {
        const std::size_t k = j + static_cast<std::size_t>(rng_.index(p - j));
        std::swap(features_[j], features_[k]);
      }
      count = mtry_;
      std::sort(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(count));
    }
    const double min_leaf = static_cast<double>(cfg_.min_leaf);
    const double parent = s_total * s_total / w_total;
    for (std::size_t c = 0; c < count; ++c) {
      const int f = features_[c];
      const auto& arr = sorted_[static_cast<std::size_t>(f)];
      double wl = 0.0, sl = 0.0;
      for (std::size_t pos = begin; pos + 1 < end; ++pos) {
        const int i = arr[pos];
        wl += weight_[static_cast<std::size_t>(i)];
        sl += weight_[static_cast<std::size_t>(i)] * y_[i];
        const double xv = x_(i, f);
        const double xn = x_(arr[pos + 1], f);
        if (xn <= xv) continue;  // not a boundary between distinct values
        const double wr = w_total - wl;
        if (wl < min_leaf || wr < min_leaf) continue;
        const double sr = s_total - sl;
        const double gain = sl * sl / wl + sr * sr / wr - parent;
        if (gain > best.gain + 1e-12 * std::abs(parent) + 1e-300) {
          double thr = 0.5 * (xv + xn);
          if (!(thr < xn)) thr = xv;
          best = {f, thr, gain};
        }
      }
    }
  }

  void partition(std::vector<int>& arr, std::size_t begin, std::size_t end) {
    std::size_t l = begin, r = 0;
    for (std::size_t pos = begin; pos < end; ++pos) {
      const int i = arr[pos];
      if (goes_left_[static_cast<std::size_t>(i)])
        arr[l++] = i;
      else
        scratch_[r++] = i;
    }
    std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r),
              arr.begin() + static_cast<std::ptrdiff_t>(l));
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const ForestSettings& cfg_;
  std::size_t mtry_;
  Rng& rng_;
  std::vector<double> weight_;
  std::vector<std::vector<int>> sorted_;
  std::vector<char> goes_left_;
  std::vector<int> scratch_;
  std::vector<int> features_;
};

}  // namespace

RandomForest::RandomForest(Params params, LearnerKind kind) : Learner(std::move(params)), kind_(kind) {
  read_forest(this->params(), name());
}

std::string RandomForest::name() const {
  return kind_ == LearnerKind::classifier ? "random_forest_clf" : "random_forest_reg";
}

std::unique_ptr<Learner> RandomForest::clone() const {
  auto out = std::make_unique<RandomForest>(params(), kind_);
  out->set_stream(stream());
  return out;
}

void RandomForest::fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const ForestSettings cfg = read_forest(params(), name());
  const auto p = static_cast<std::size_t>(x.cols());
  std::size_t mtry = static_cast<std::size_t>(cfg.max_features);
  if (mtry == 0)
    mtry = kind_ == LearnerKind::classifier
               ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))))
               : p;
  mtry = std::min(mtry, p);

  // Shared across trees: each feature's row order, ties by row index.
  std::vector<std::vector<int>> presorted(p);
  for (std::size_t f = 0; f < p; ++f) {
    auto& order = presorted[f];
    order.resize(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), 0);
    const auto col = x.col(static_cast<Eigen::Index>(f));
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return col[a] < col[b]; });
  }

  trees_.clear();
  trees_.reserve(static_cast<std::size_t>(cfg.n_trees));
  for (long t = 0; t < cfg.n_trees; ++t) {
    Rng rng(derive_seed(static_cast<std::uint64_t>(cfg.seed), {stream(), static_cast<std::uint64_t>(t)}));
    TreeBuilder builder(x, y, presorted, cfg, mtry, rng);
    trees_.push_back(builder.build());
  }
}

Eigen::VectorXd RandomForest::predict_impl(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (const Tree& tree : trees_) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      int node = 0;
      while (tree[static_cast<std::size_t>(node)].feature >= 0) {
        const Node& nd = tree[static_cast<std::size_t>(node)];
        node = x(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
      }
      out[i] += tree[static_cast<std::size_t>(node)].value;
    }
  }
  out /= static_cast<double>(trees_.size());
  if (kind_ == LearnerKind::classifier) out = out.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

}  // namespace dml
