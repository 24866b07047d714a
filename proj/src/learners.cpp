#include "pairlot/learners.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pairlot/glm.hpp"
#include "pairlot/stats.hpp"

namespace pairlot {

void LearnerSpec::check() const {
  if (!(mean_only || linear || !ridge_grid.empty() || trees || piecewise_linear))
    throw std::invalid_argument("learner spec: at least one learner required");
  for (double l : ridge_grid)
    if (!(l > 0.0)) throw std::invalid_argument("learner spec: ridge penalties must be positive");
  if (trees && (tree.n_trees < 1 || tree.max_depth < 1 || tree.min_leaf < 1))
    throw std::invalid_argument("learner spec: tree hyperparameters must be positive");
  if (piecewise_linear && pwl_knots < 1)
    throw std::invalid_argument("learner spec: pwl_knots must be positive");
  if (inner_folds < 2) throw std::invalid_argument("learner spec: inner_folds must be >= 2");
}

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

class MeanLearner final : public Learner {
 public:
  void fit(const Eigen::MatrixXd&, const Eigen::VectorXd& y, Xoshiro256pp&) override {
    value_ = y.size() > 0 ? y.mean() : 0.0;
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    return Eigen::VectorXd::Constant(x.rows(), value_);
  }
  std::unique_ptr<Learner> fresh() const override { return std::make_unique<MeanLearner>(); }
  std::string name() const override { return "mean"; }

 private:
  double value_ = 0.0;
};

class LinearLearner final : public Learner {
 public:
  explicit LinearLearner(bool binary) : binary_(binary) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Xoshiro256pp&) override {
    Eigen::MatrixXd design = with_intercept(x);
    keep_ = drop_degenerate_columns(design);
    if (binary_) {
      beta_ = logistic(design, y, Eigen::VectorXd::Ones(design.rows())).beta;
    } else {
      beta_ = design.colPivHouseholderQr().solve(y);
    }
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::MatrixXd full = with_intercept(x);
    Eigen::MatrixXd design(full.rows(), static_cast<int>(keep_.size()));
    for (std::size_t k = 0; k < keep_.size(); ++k)
      design.col(static_cast<int>(k)) = full.col(keep_[k]);
    Eigen::VectorXd eta = design * beta_;
    if (binary_)
      for (int i = 0; i < eta.size(); ++i) eta(i) = expit(eta(i));
    return eta;
  }
  std::unique_ptr<Learner> fresh() const override { return std::make_unique<LinearLearner>(binary_); }
  std::string name() const override { return binary_ ? "logistic" : "linear"; }

 private:
  bool binary_;
  std::vector<int> keep_;
  Eigen::VectorXd beta_;
};

// Ridge on standardized columns, intercept unpenalized.
class RidgeLearner final : public Learner {
 public:
  RidgeLearner(double lambda, bool binary) : lambda_(lambda), binary_(binary) {}

  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Xoshiro256pp&) override {
    const int p = static_cast<int>(x.cols());
    center_.resize(p);
    scale_.resize(p);
    for (int j = 0; j < p; ++j) {
      center_(j) = x.col(j).mean();
      const double sd = std::sqrt((x.col(j).array() - center_(j)).square().mean());
      scale_(j) = sd > 1e-12 ? sd : 0.0;
    }
    Eigen::MatrixXd xs(x.rows(), p);
    for (int j = 0; j < p; ++j)
      xs.col(j) = scale_(j) > 0 ? ((x.col(j).array() - center_(j)) / scale_(j)).matrix()
                                : Eigen::VectorXd::Zero(x.rows());
    const double n = static_cast<double>(x.rows());
    if (!binary_) {
      intercept_ = y.mean();
      Eigen::MatrixXd gram = xs.transpose() * xs;
      gram.diagonal().array() += lambda_ * n;
      beta_ = gram.ldlt().solve(xs.transpose() * (y.array() - intercept_).matrix());
    } else {
      // Newton with ridge on the slopes only.
      Eigen::MatrixXd design = with_intercept(xs);
      Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
      for (int iter = 0; iter < 50; ++iter) {
        const Eigen::VectorXd eta = design * beta;
        Eigen::VectorXd mu(eta.size()), wt(eta.size());
        for (int i = 0; i < eta.size(); ++i) {
          mu(i) = expit(eta(i));
          wt(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
        }
        Eigen::VectorXd grad = design.transpose() * (y - mu);
        grad.tail(p) -= lambda_ * n * beta.tail(p);
        Eigen::MatrixXd hess =
            design.transpose() * (design.array().colwise() * wt.array()).matrix();
        hess.diagonal().tail(p).array() += lambda_ * n;
        hess.diagonal().array() += 1e-10;
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        beta += step;
        if (step.cwiseAbs().maxCoeff() < 1e-9) break;
      }
      intercept_ = beta(0);
      beta_ = beta.tail(p);
    }
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(x.rows(), intercept_);
    for (int j = 0; j < x.cols(); ++j)
      if (scale_(j) > 0) eta += beta_(j) / scale_(j) * (x.col(j).array() - center_(j)).matrix();
    if (binary_)
      for (int i = 0; i < eta.size(); ++i) eta(i) = expit(eta(i));
    return eta;
  }
  std::unique_ptr<Learner> fresh() const override {
    return std::make_unique<RidgeLearner>(lambda_, binary_);
  }
  std::string name() const override {
    return (binary_ ? "ridge_logistic_" : "ridge_") + std::to_string(lambda_);
  }

 private:
  double lambda_;
  bool binary_;
  Eigen::VectorXd center_, scale_, beta_;
  double intercept_ = 0.0;
};

// Bagged depth-limited regression trees. Exact split search over pre-sorted
// feature orders, level-wise, so each tree costs O(levels * n * p).
class BaggedTreesLearner final : public Learner {
 public:
  BaggedTreesLearner(TreeParams params, bool clip01) : params_(params), clip01_(clip01) {}

  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Xoshiro256pp& rng) override {
    const int n = static_cast<int>(x.rows());
    const int p = static_cast<int>(x.cols());
    x_cols_ = p;
    trees_.clear();
    if (n == 0) {
      fallback_ = 0.0;
      return;
    }
    fallback_ = y.mean();
    if (p == 0) return;  // predict the mean

    // one sort per feature, shared by all trees
    std::vector<std::vector<int>> order(static_cast<std::size_t>(p), std::vector<int>(n));
    for (int j = 0; j < p; ++j) {
      auto& ord = order[static_cast<std::size_t>(j)];
      std::iota(ord.begin(), ord.end(), 0);
      std::stable_sort(ord.begin(), ord.end(),
                       [&x, j](int a, int b) { return x(a, j) < x(b, j); });
    }

    std::vector<double> w(static_cast<std::size_t>(n));
    std::vector<int> node_of(static_cast<std::size_t>(n));
    for (int b = 0; b < params_.n_trees; ++b) {
      std::fill(w.begin(), w.end(), 0.0);
      for (int k = 0; k < n; ++k) w[static_cast<std::size_t>(rng.uniform_int(n))] += 1.0;
      trees_.push_back(grow_tree(x, y, order, w, node_of));
    }
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    if (trees_.empty()) {
      out.setConstant(fallback_);
    } else {
      for (const auto& tree : trees_) {
        for (int i = 0; i < x.rows(); ++i) {
          int nd = 0;
          while (tree[static_cast<std::size_t>(nd)].feature >= 0) {
            const auto& node = tree[static_cast<std::size_t>(nd)];
            nd = x(i, node.feature) <= node.threshold ? node.left : node.right;
          }
          out(i) += tree[static_cast<std::size_t>(nd)].value;
        }
      }
      out /= static_cast<double>(trees_.size());
    }
    if (clip01_)
      for (int i = 0; i < out.size(); ++i) out(i) = std::clamp(out(i), 0.0, 1.0);
    return out;
  }

  std::unique_ptr<Learner> fresh() const override {
    return std::make_unique<BaggedTreesLearner>(params_, clip01_);
  }
  std::string name() const override { return "bagged_trees"; }

 private:
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  Tree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const std::vector<std::vector<int>>& order, const std::vector<double>& w,
                 std::vector<int>& node_of) const {
    const int n = static_cast<int>(x.rows());
    const int p = static_cast<int>(x.cols());
    Tree tree;
    tree.push_back(Node{});
    double root_w = 0.0, root_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      node_of[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] > 0 ? 0 : -1;
      root_w += w[static_cast<std::size_t>(i)];
      root_sum += w[static_cast<std::size_t>(i)] * y(i);
    }
    tree[0].value = root_w > 0 ? root_sum / root_w : 0.0;

    struct Stats {
      double weight = 0.0, sum = 0.0;
    };
    std::vector<int> level_nodes = {0};
    std::vector<Stats> totals = {Stats{root_w, root_sum}};

    for (int depth = 0; depth < params_.max_depth && !level_nodes.empty(); ++depth) {
      const int n_nodes = static_cast<int>(level_nodes.size());
      std::vector<double> best_gain(static_cast<std::size_t>(n_nodes), 0.0);
      std::vector<int> best_feat(static_cast<std::size_t>(n_nodes), -1);
      std::vector<double> best_thresh(static_cast<std::size_t>(n_nodes), 0.0);
      std::vector<int> slot_of_node(tree.size(), -1);
      for (int k = 0; k < n_nodes; ++k)
        slot_of_node[static_cast<std::size_t>(level_nodes[static_cast<std::size_t>(k)])] = k;

      std::vector<Stats> left(static_cast<std::size_t>(n_nodes));
      std::vector<double> prev_val(static_cast<std::size_t>(n_nodes), 0.0);
      std::vector<bool> has_prev(static_cast<std::size_t>(n_nodes), false);

      for (int f = 0; f < p; ++f) {
        std::fill(left.begin(), left.end(), Stats{});
        std::fill(has_prev.begin(), has_prev.end(), false);
        for (int r : order[static_cast<std::size_t>(f)]) {
          const int nd = node_of[static_cast<std::size_t>(r)];
          if (nd < 0) continue;
          const int slot = slot_of_node[static_cast<std::size_t>(nd)];
          if (slot < 0) continue;
          const double xv = x(r, f);
          auto& lf = left[static_cast<std::size_t>(slot)];
          const auto& tot = totals[static_cast<std::size_t>(slot)];
          if (has_prev[static_cast<std::size_t>(slot)] &&
              xv > prev_val[static_cast<std::size_t>(slot)] + 1e-15) {
            const double wl = lf.weight, wr = tot.weight - lf.weight;
            if (wl >= params_.min_leaf && wr >= params_.min_leaf) {
              const double gain = lf.sum * lf.sum / wl +
                                  (tot.sum - lf.sum) * (tot.sum - lf.sum) / wr -
                                  tot.sum * tot.sum / tot.weight;
              if (gain > best_gain[static_cast<std::size_t>(slot)] + 1e-12) {
                best_gain[static_cast<std::size_t>(slot)] = gain;
                best_feat[static_cast<std::size_t>(slot)] = f;
                best_thresh[static_cast<std::size_t>(slot)] =
                    0.5 * (prev_val[static_cast<std::size_t>(slot)] + xv);
              }
            }
          }
          lf.weight += w[static_cast<std::size_t>(r)];
          lf.sum += w[static_cast<std::size_t>(r)] * y(r);
          prev_val[static_cast<std::size_t>(slot)] = xv;
          has_prev[static_cast<std::size_t>(slot)] = true;
        }
      }

      std::vector<int> next_nodes;
      std::vector<Stats> next_totals;
      bool any_split = false;
      for (int k = 0; k < n_nodes; ++k) {
        if (best_feat[static_cast<std::size_t>(k)] < 0) continue;
        any_split = true;
        const int nd = level_nodes[static_cast<std::size_t>(k)];
        tree[static_cast<std::size_t>(nd)].feature = best_feat[static_cast<std::size_t>(k)];
        tree[static_cast<std::size_t>(nd)].threshold = best_thresh[static_cast<std::size_t>(k)];
        tree[static_cast<std::size_t>(nd)].left = static_cast<int>(tree.size());
        tree[static_cast<std::size_t>(nd)].right = static_cast<int>(tree.size() + 1);
        tree.push_back(Node{});
        tree.push_back(Node{});
        next_nodes.push_back(tree[static_cast<std::size_t>(nd)].left);
        next_nodes.push_back(tree[static_cast<std::size_t>(nd)].right);
        next_totals.push_back(Stats{});
        next_totals.push_back(Stats{});
      }
      if (!any_split) break;

      for (int i = 0; i < n; ++i) {
        int& nd = node_of[static_cast<std::size_t>(i)];
        if (nd < 0) continue;
        const auto& node = tree[static_cast<std::size_t>(nd)];
        if (node.feature < 0) {
          nd = -1;  // settled in a leaf
          continue;
        }
        nd = x(i, node.feature) <= node.threshold ? node.left : node.right;
        for (std::size_t k = 0; k < next_nodes.size(); ++k)
          if (next_nodes[k] == nd) {
            next_totals[k].weight += w[static_cast<std::size_t>(i)];
            next_totals[k].sum += w[static_cast<std::size_t>(i)] * y(i);
            break;
          }
      }
      for (std::size_t k = 0; k < next_nodes.size(); ++k) {
        auto& node = tree[static_cast<std::size_t>(next_nodes[k])];
        node.value = next_totals[k].weight > 0 ? next_totals[k].sum / next_totals[k].weight : 0.0;
      }
      level_nodes = std::move(next_nodes);
      totals = std::move(next_totals);
    }
    return tree;
  }

  TreeParams params_;
  bool clip01_;
  int x_cols_ = 0;
  double fallback_ = 0.0;
  std::vector<Tree> trees_;
};

// Hinge-basis expansion per feature with knots at training quantiles, then a
// linear (or logistic) fit on the expanded design.
class PiecewiseLinearLearner final : public Learner {
 public:
  PiecewiseLinearLearner(int n_knots, bool binary) : n_knots_(n_knots), binary_(binary) {}

  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Xoshiro256pp&) override {
    const int p = static_cast<int>(x.cols());
    knots_.assign(static_cast<std::size_t>(p), {});
    for (int j = 0; j < p; ++j) {
      std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
      std::sort(col.begin(), col.end());
      auto& ks = knots_[static_cast<std::size_t>(j)];
      for (int k = 1; k <= n_knots_; ++k) {
        const double q = static_cast<double>(k) / (n_knots_ + 1);
        double knot = col[static_cast<std::size_t>(q * (col.size() - 1))];
        if (ks.empty() || knot > ks.back() + 1e-12) ks.push_back(knot);
      }
    }
    Eigen::MatrixXd design = expand(x);
    keep_ = drop_degenerate_columns(design);
    if (binary_) {
      beta_ = logistic(design, y, Eigen::VectorXd::Ones(design.rows()), 1e-6).beta;
    } else {
      Eigen::MatrixXd gram = design.transpose() * design;
      gram.diagonal().array() += 1e-8;
      beta_ = gram.ldlt().solve(design.transpose() * y);
    }
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::MatrixXd full = expand(x);
    Eigen::MatrixXd design(full.rows(), static_cast<int>(keep_.size()));
    for (std::size_t k = 0; k < keep_.size(); ++k)
      design.col(static_cast<int>(k)) = full.col(keep_[k]);
    Eigen::VectorXd eta = design * beta_;
    if (binary_)
      for (int i = 0; i < eta.size(); ++i) eta(i) = expit(eta(i));
    return eta;
  }

  std::unique_ptr<Learner> fresh() const override {
    return std::make_unique<PiecewiseLinearLearner>(n_knots_, binary_);
  }
  std::string name() const override { return "piecewise_linear"; }

 private:
  Eigen::MatrixXd expand(const Eigen::MatrixXd& x) const {
    int cols = 1;
    for (const auto& ks : knots_) cols += 1 + static_cast<int>(ks.size());
    Eigen::MatrixXd out(x.rows(), cols);
    out.col(0).setOnes();
    int c = 1;
    for (int j = 0; j < x.cols(); ++j) {
      out.col(c++) = x.col(j);
      for (double knot : knots_[static_cast<std::size_t>(j)])
        out.col(c++) = (x.col(j).array() - knot).max(0.0);
    }
    return out;
  }

  int n_knots_;
  bool binary_;
  std::vector<std::vector<double>> knots_;
  std::vector<int> keep_;
  Eigen::VectorXd beta_;
};

Eigen::VectorXd project_to_simplex(Eigen::VectorXd v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  int rho = 0;
  for (int i = 0; i < n; ++i) {
    css += u[static_cast<std::size_t>(i)];
    const double t = (css - 1.0) / (i + 1);
    if (u[static_cast<std::size_t>(i)] - t > 0) {
      rho = i + 1;
      theta = t;
    }
  }
  (void)rho;
  for (int i = 0; i < n; ++i) v(i) = std::max(v(i) - theta, 0.0);
  return v;
}

}  // namespace

double cv_loss(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets, bool binary) {
  const int n = static_cast<int>(targets.size());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    if (binary) {
      const double p = std::clamp(predictions(i), 1e-12, 1.0 - 1e-12);
      loss -= targets(i) * std::log(p) + (1.0 - targets(i)) * std::log1p(-p);
    } else {
      const double e = predictions(i) - targets(i);
      loss += e * e;
    }
  }
  return loss / n;
}

Eigen::VectorXd stack_weights(const Eigen::MatrixXd& cv_predictions,
                              const Eigen::VectorXd& targets, bool binary, double tol,
                              int max_iter) {
  const int j = static_cast<int>(cv_predictions.cols());
  const int n = static_cast<int>(cv_predictions.rows());
  if (j < 1) throw std::invalid_argument("stack_weights: no learners");
  if (n != targets.size()) throw std::invalid_argument("stack_weights: size mismatch");
  if (j == 1) return Eigen::VectorXd::Ones(1);

  int best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int k = 0; k < j; ++k) {
    const double l = cv_loss(cv_predictions.col(k), targets, binary);
    if (l < best_loss) {
      best_loss = l;
      best = k;
    }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(j);
  w(best) = 1.0;

  auto objective = [&](const Eigen::VectorXd& wt) {
    return cv_loss(cv_predictions * wt, targets, binary);
  };
  auto gradient = [&](const Eigen::VectorXd& wt) {
    const Eigen::VectorXd pred = cv_predictions * wt;
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) {
      if (binary) {
        const double p = std::clamp(pred(i), 1e-12, 1.0 - 1e-12);
        g(i) = (p - targets(i)) / (p * (1.0 - p)) / n;
      } else {
        g(i) = 2.0 * (pred(i) - targets(i)) / n;
      }
    }
    return Eigen::VectorXd(cv_predictions.transpose() * g);
  };

  double step = 1.0;
  if (!binary) {
    // fixed step 1/L for the quadratic objective
    const Eigen::MatrixXd gram = cv_predictions.transpose() * cv_predictions / n;
    const double lmax = gram.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
    if (lmax > 0) step = 1.0 / (2.0 * lmax);
  }

  double f = objective(w);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd g = gradient(w);
    Eigen::VectorXd w_new;
    double f_new = f;
    double s = step;
    for (int h = 0; h < 40; ++h) {
      w_new = project_to_simplex(w - s * g);
      f_new = objective(w_new);
      if (f_new <= f + 1e-15) break;
      s *= 0.5;
    }
    if (f_new > f) break;  // no descent direction left
    const double delta = (w_new - w).cwiseAbs().maxCoeff();
    w = w_new;
    f = f_new;
    if (delta < tol) break;
  }
  return w;
}

std::vector<std::unique_ptr<Learner>> build_library(const LearnerSpec& spec, bool binary) {
  spec.check();
  std::vector<std::unique_ptr<Learner>> lib;
  if (spec.mean_only) lib.push_back(std::make_unique<MeanLearner>());
  if (spec.linear) lib.push_back(std::make_unique<LinearLearner>(binary));
  for (double lambda : spec.ridge_grid) lib.push_back(std::make_unique<RidgeLearner>(lambda, binary));
  if (spec.trees) lib.push_back(std::make_unique<BaggedTreesLearner>(spec.tree, binary));
  if (spec.piecewise_linear)
    lib.push_back(std::make_unique<PiecewiseLinearLearner>(spec.pwl_knots, binary));
  if (lib.empty()) lib.push_back(std::make_unique<MeanLearner>());
  return lib;
}

void EnsembleModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  if (n == 0) throw std::invalid_argument("ensemble fit on empty data");

  const double y_var = n > 1 ? (y.array() - y.mean()).square().sum() / (n - 1) : 0.0;
  const bool degenerate = y_var <= 1e-24 || n < 2 * spec_.inner_folds || x.cols() == 0;

  auto library = build_library(spec_, binary_);
  names_.clear();
  for (const auto& l : library) names_.push_back(l->name());

  if (degenerate) {
    fitted_.clear();
    fitted_.push_back(std::make_unique<MeanLearner>());
    Xoshiro256pp rng(seed);
    fitted_[0]->fit(x, y, rng);
    names_ = {"mean"};
    weights_ = Eigen::VectorXd::Ones(1);
    stacked_cv_loss_ = best_single_cv_loss_ = 0.0;
    return;
  }

  const int j = static_cast<int>(library.size());
  const int v = std::min(spec_.inner_folds, n);

  // deterministic CV split
  std::vector<int> fold(static_cast<std::size_t>(n));
  {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Xoshiro256pp shuffle_rng(derive_seed(seed, 0xF01D));
    for (int i = n - 1; i > 0; --i)
      std::swap(idx[static_cast<std::size_t>(i)],
                idx[static_cast<std::size_t>(shuffle_rng.uniform_int(i + 1))]);
    for (int pos = 0; pos < n; ++pos) fold[static_cast<std::size_t>(idx[static_cast<std::size_t>(pos)])] = pos % v;
  }

  Eigen::MatrixXd cv_pred(n, j);
  for (int k = 0; k < v; ++k) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
    if (train.empty() || test.empty()) continue;
    Eigen::MatrixXd xtr(static_cast<int>(train.size()), x.cols());
    Eigen::VectorXd ytr(static_cast<int>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) {
      xtr.row(static_cast<int>(r)) = x.row(train[r]);
      ytr(static_cast<int>(r)) = y(train[r]);
    }
    Eigen::MatrixXd xte(static_cast<int>(test.size()), x.cols());
    for (std::size_t r = 0; r < test.size(); ++r) xte.row(static_cast<int>(r)) = x.row(test[r]);
    for (int b = 0; b < j; ++b) {
      auto learner = library[static_cast<std::size_t>(b)]->fresh();
      Xoshiro256pp rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(k) * 64 +
                                             static_cast<std::uint64_t>(b)));
      learner->fit(xtr, ytr, rng);
      const Eigen::VectorXd pred = learner->predict(xte);
      for (std::size_t r = 0; r < test.size(); ++r) cv_pred(test[r], b) = pred(static_cast<int>(r));
    }
  }

  best_single_cv_loss_ = std::numeric_limits<double>::infinity();
  for (int b = 0; b < j; ++b)
    best_single_cv_loss_ = std::min(best_single_cv_loss_, cv_loss(cv_pred.col(b), y, binary_));

  if (spec_.stacking) {
    weights_ = stack_weights(cv_pred, y, binary_);
  } else {
    weights_ = Eigen::VectorXd::Zero(j);
    int best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int b = 0; b < j; ++b) {
      const double l = cv_loss(cv_pred.col(b), y, binary_);
      if (l < best_loss) {
        best_loss = l;
        best = b;
      }
    }
    weights_(best) = 1.0;
  }
  stacked_cv_loss_ = cv_loss(cv_pred * weights_, y, binary_);

  fitted_.clear();
  for (int b = 0; b < j; ++b) {
    if (weights_(b) <= 1e-12) {
      fitted_.push_back(nullptr);
      continue;
    }
    auto learner = library[static_cast<std::size_t>(b)]->fresh();
    Xoshiro256pp rng(derive_seed(seed, 2000 + static_cast<std::uint64_t>(b)));
    learner->fit(x, y, rng);
    fitted_.push_back(std::move(learner));
  }
}

Eigen::VectorXd EnsembleModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (std::size_t b = 0; b < fitted_.size(); ++b) {
    if (!fitted_[b]) continue;
    out += weights_(static_cast<int>(b)) * fitted_[b]->predict(x);
  }
  if (binary_)
    for (int i = 0; i < out.size(); ++i) out(i) = std::clamp(out(i), 0.0, 1.0);
  return out;
}

}  // namespace pairlot
