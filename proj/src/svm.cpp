#include "bci/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

namespace bci::svm {

namespace {

double kernel_eval(const KernelSpec& spec, double gamma,
                   const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  switch (spec.kind) {
    case KernelKind::Linear:
      return a.dot(b);
    case KernelKind::Rbf:
      return std::exp(-gamma * (a - b).squaredNorm());
    case KernelKind::Sigmoid:
      return std::tanh(gamma * a.dot(b) + spec.coef0);
  }
  return 0;
}

// Row-wise kernel cache. For the problem sizes here the full Gram usually
// fits; larger problems fall back to LRU rows within the byte budget.
class KernelCache {
 public:
  KernelCache(const Eigen::MatrixXd& x, const KernelSpec& spec, double gamma,
              std::size_t budget_bytes)
      : x_(x), spec_(spec), gamma_(gamma) {
    const auto n = static_cast<std::size_t>(x.rows());
    max_rows_ = std::max<std::size_t>(2, budget_bytes / (n * sizeof(double)));
    full_ = max_rows_ >= n;
  }

  const Eigen::VectorXd& row(Eigen::Index i) {
    auto it = rows_.find(i);
    if (it != rows_.end()) {
      if (!full_) touch(i);
      return it->second;
    }
    if (!full_ && rows_.size() >= max_rows_) {
      rows_.erase(lru_.back());
      lru_.pop_back();
    }
    Eigen::VectorXd r(x_.rows());
    for (Eigen::Index j = 0; j < x_.rows(); ++j)
      r(j) = kernel_eval(spec_, gamma_, x_.row(i).transpose(),
                         x_.row(j).transpose());
    auto [ins, _] = rows_.emplace(i, std::move(r));
    if (!full_) lru_.push_front(i);
    return ins->second;
  }

 private:
  void touch(Eigen::Index i) {
    lru_.remove(i);
    lru_.push_front(i);
  }

  const Eigen::MatrixXd& x_;
  KernelSpec spec_;
  double gamma_;
  std::size_t max_rows_;
  bool full_;
  std::unordered_map<Eigen::Index, Eigen::VectorXd> rows_;
  std::list<Eigen::Index> lru_;
};

}  // namespace

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Sigmoid: return "sigmoid";
  }
  return "?";
}

KernelKind parse_kernel(const std::string& s) {
  if (s == "linear") return KernelKind::Linear;
  if (s == "rbf") return KernelKind::Rbf;
  if (s == "sigmoid") return KernelKind::Sigmoid;
  raise(ErrorKind::Validation, "unknown kernel '" + s + "'");
}

Model train(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, double c,
            const KernelSpec& kernel, const TrainOptions& opts) {
  const Eigen::Index n = x.rows();
  require(n >= 2, ErrorKind::Size, "svm: need at least two samples");
  require(y.size() == n, ErrorKind::Shape, "svm: label count mismatch");
  require(c > 0, ErrorKind::Validation, "svm: C must be positive");
  require(x.allFinite(), ErrorKind::Validation, "svm: non-finite features");

  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    require(y(i) == 1 || y(i) == -1, ErrorKind::Label,
            "svm: labels must be +-1");
    (y(i) == 1 ? has_pos : has_neg) = true;
  }
  require(has_pos && has_neg, ErrorKind::Label,
          "svm: both classes must be present");

  const double gamma = kernel.resolved_gamma(x.cols());
  require(gamma > 0, ErrorKind::Validation, "svm: gamma must be positive");
  KernelCache cache(x, kernel, gamma, opts.cache_bytes);

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  // gradient of 1/2 a'Qa - e'a, so G_i = sum_j Q_ij a_j - 1
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);

  const long max_iter = static_cast<long>(opts.max_iter_per_sample) * n;
  long iter = 0;
  double violation = std::numeric_limits<double>::infinity();
  Model model;

  const auto dual_objective = [&]() {
    // e'a - 1/2 a'Qa, using a'Qa = a'(G + e)
    return alpha.sum() - 0.5 * alpha.dot(grad + Eigen::VectorXd::Ones(n));
  };
  if (opts.track_objective) model.objective_trace.push_back(dual_objective());

  while (true) {
    // maximal violating pair over I_up / I_low
    Eigen::Index i_up = -1, j_low = -1;
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double score = -double(y(t)) * grad(t);
      const bool in_up = (y(t) == 1 && alpha(t) < c) || (y(t) == -1 && alpha(t) > 0);
      const bool in_low = (y(t) == -1 && alpha(t) < c) || (y(t) == 1 && alpha(t) > 0);
      if (in_up && score > m_up) { m_up = score; i_up = t; }
      if (in_low && score < m_low) { m_low = score; j_low = t; }
    }
    violation = m_up - m_low;
    if (violation < opts.tol) break;
    if (iter >= max_iter) {
      require(violation <= 10.0 * opts.tol, ErrorKind::Convergence,
              "svm: no convergence after " + std::to_string(iter) +
                  " iterations (violation " + std::to_string(violation) + ")");
      model.converged = false;
      break;
    }
    ++iter;

    const Eigen::Index i = i_up, j = j_low;
    const Eigen::VectorXd& ki = cache.row(i);
    const Eigen::VectorXd& kj = cache.row(j);

    // minimize f(d) = g d + 1/2 eta d^2 along alpha_i += y_i d,
    // alpha_j -= y_j d, subject to the box
    const double g = double(y(i)) * grad(i) - double(y(j)) * grad(j);  // < 0
    const double eta = ki(i) + kj(j) - 2.0 * ki(j);

    double d_hi = std::numeric_limits<double>::infinity();
    double d_lo = -std::numeric_limits<double>::infinity();
    const auto box = [c](double a0, int yy, double& lo, double& hi) {
      // a0 + yy*d in [0, C]
      if (yy == 1) { lo = std::max(lo, -a0); hi = std::min(hi, c - a0); }
      else { lo = std::max(lo, a0 - c); hi = std::min(hi, a0); }
    };
    box(alpha(i), y(i), d_lo, d_hi);
    // alpha_j moves by -y_j d: alpha_j - y_j d in [0, C]
    if (y(j) == 1) { d_lo = std::max(d_lo, alpha(j) - c); d_hi = std::min(d_hi, alpha(j)); }
    else { d_lo = std::max(d_lo, -alpha(j)); d_hi = std::min(d_hi, c - alpha(j)); }

    double d;
    if (eta > 1e-12) {
      d = std::clamp(-g / eta, d_lo, d_hi);
    } else {
      // non-positive curvature (possible for the indefinite sigmoid kernel):
      // the quadratic is maximized at a box corner, pick the better endpoint
      const auto f = [&](double t) { return g * t + 0.5 * eta * t * t; };
      d = f(d_lo) < f(d_hi) ? d_lo : d_hi;
    }
    if (d == 0.0) {
      // numerically stuck pair; nothing can improve along it
      model.converged = false;
      break;
    }

    const double delta_i = double(y(i)) * d;
    const double delta_j = -double(y(j)) * d;
    alpha(i) += delta_i;
    alpha(j) += delta_j;
    for (Eigen::Index t = 0; t < n; ++t)
      grad(t) += double(y(t)) * (ki(t) * double(y(i)) * delta_i +
                                 kj(t) * double(y(j)) * delta_j);
    if (opts.track_objective) model.objective_trace.push_back(dual_objective());
  }

  // bias from the free support vectors, else the midpoint of the gap
  double b_acc = 0;
  int b_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha(t) > 1e-12 && alpha(t) < c - 1e-12) {
      b_acc += -double(y(t)) * grad(t);
      ++b_count;
    }
  }
  if (b_count > 0) {
    model.bias = b_acc / double(b_count);
  } else {
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double score = -double(y(t)) * grad(t);
      const bool in_up = (y(t) == 1 && alpha(t) < c) || (y(t) == -1 && alpha(t) > 0);
      const bool in_low = (y(t) == -1 && alpha(t) < c) || (y(t) == 1 && alpha(t) > 0);
      if (in_up) m_up = std::max(m_up, score);
      if (in_low) m_low = std::min(m_low, score);
    }
    model.bias = 0.5 * (m_up + m_low);
  }

  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t)
    if (alpha(t) > 1e-12) sv.push_back(t);
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(sv[s]);
    model.dual_coef(static_cast<Eigen::Index>(s)) =
        alpha(sv[s]) * double(y(sv[s]));
  }
  model.kernel = kernel;
  model.gamma = gamma;
  model.c = c;
  model.iterations = static_cast<int>(iter);
  model.final_violation = violation;
  return model;
}

Prediction predict(const Model& model, const Eigen::MatrixXd& x) {
  require(x.cols() == model.support_vectors.cols() || x.rows() == 0,
          ErrorKind::Shape, "svm predict: feature dimension mismatch");
  Prediction out;
  out.labels.resize(x.rows());
  out.decision_values.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double f = model.bias;
    for (Eigen::Index s = 0; s < model.support_vectors.rows(); ++s)
      f += model.dual_coef(s) *
           kernel_eval(model.kernel, model.gamma,
                       model.support_vectors.row(s).transpose(),
                       x.row(i).transpose());
    out.decision_values(i) = f;
    out.labels(i) = f > 0 ? 1 : -1;  // ties go to the negative class
  }
  return out;
}

std::vector<int> stratified_kfold(const Eigen::VectorXi& y, int k,
                                  std::uint64_t seed) {
  require(k >= 2, ErrorKind::Validation, "kfold: k must be >= 2");
  const Eigen::Index n = y.size();
  std::unordered_map<int, std::vector<int>> by_class;
  for (Eigen::Index i = 0; i < n; ++i)
    by_class[y(i)].push_back(static_cast<int>(i));

  std::vector<int> fold(static_cast<std::size_t>(n), -1);
  std::mt19937_64 rng(seed);
  // iterate classes in sorted order so the assignment is reproducible
  std::vector<int> classes;
  for (const auto& [label, members] : by_class) classes.push_back(label);
  std::sort(classes.begin(), classes.end());

  for (int label : classes) {
    auto& members = by_class[label];
    require(static_cast<int>(members.size()) >= k, ErrorKind::Stratification,
            "kfold: class " + std::to_string(label) + " has only " +
                std::to_string(members.size()) + " members for k = " +
                std::to_string(k));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t pos = 0; pos < members.size(); ++pos)
      fold[static_cast<std::size_t>(members[pos])] =
          static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  return fold;
}

void Standardizer::fit(const Eigen::MatrixXd& x) {
  require(x.rows() >= 2, ErrorKind::Size, "standardizer: need >= 2 rows");
  mean = x.colwise().mean();
  scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var =
        (x.col(j).array() - mean(j)).square().sum() / double(x.rows() - 1);
    scale(j) = var > 0 ? std::sqrt(var) : 1.0;
  }
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& x) const {
  return (x - mean).cwiseQuotient(scale);
}

GridResult grid_search(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                       const GridSpec& grid) {
  require(!grid.kernels.empty() && !grid.c_values.empty() && !grid.gammas.empty(),
          ErrorKind::Validation, "grid: empty candidate lists");
  const auto fold_of = stratified_kfold(y, grid.folds, grid.seed);

  std::vector<double> c_sorted = grid.c_values;
  std::sort(c_sorted.begin(), c_sorted.end());

  std::vector<Candidate> candidates;
  for (KernelKind kind : grid.kernels) {
    for (double c : c_sorted) {
      if (kind == KernelKind::Linear) {
        candidates.push_back({KernelSpec{kind, std::nullopt, 0.0}, c});
      } else {
        for (const auto& gamma : grid.gammas)
          candidates.push_back({KernelSpec{kind, gamma, 0.0}, c});
      }
    }
  }

  GridResult result;
  result.best_accuracy = -1.0;
  for (const auto& cand : candidates) {
    GridRow row;
    row.candidate = cand;
    double acc_sum = 0;
    int acc_folds = 0;
    bool failed = false;
    for (int f = 0; f < grid.folds && !failed; ++f) {
      std::vector<int> tr, va;
      for (std::size_t i = 0; i < fold_of.size(); ++i)
        (fold_of[i] == f ? va : tr).push_back(static_cast<int>(i));
      if (va.empty()) continue;

      Eigen::MatrixXd xtr(static_cast<Eigen::Index>(tr.size()), x.cols());
      Eigen::VectorXi ytr(static_cast<Eigen::Index>(tr.size()));
      for (std::size_t i = 0; i < tr.size(); ++i) {
        xtr.row(static_cast<Eigen::Index>(i)) = x.row(tr[i]);
        ytr(static_cast<Eigen::Index>(i)) = y(tr[i]);
      }
      Eigen::MatrixXd xva(static_cast<Eigen::Index>(va.size()), x.cols());
      for (std::size_t i = 0; i < va.size(); ++i)
        xva.row(static_cast<Eigen::Index>(i)) = x.row(va[i]);

      try {
        Standardizer scaler;
        if (grid.standardize) {
          scaler.fit(xtr);
          xtr = scaler.apply(xtr);
          xva = scaler.apply(xva);
        }
        const Model model = train(xtr, ytr, cand.c, cand.kernel, grid.train);
        if (!model.converged) row.converged = false;
        const Prediction pred = predict(model, xva);
        int correct = 0;
        for (std::size_t i = 0; i < va.size(); ++i)
          if (pred.labels(static_cast<Eigen::Index>(i)) == y(va[i])) ++correct;
        acc_sum += double(correct) / double(va.size());
        ++acc_folds;
      } catch (const Error&) {
        failed = true;
      }
    }
    if (failed || acc_folds == 0) {
      row.mean_accuracy = 0.0;
      row.converged = false;
    } else {
      row.mean_accuracy = acc_sum / double(acc_folds);
    }
    if (row.mean_accuracy > result.best_accuracy) {
      result.best_accuracy = row.mean_accuracy;
      result.best = cand;
    }
    result.table.push_back(row);
  }
  return result;
}

}  // namespace bci::svm
