#include "bci/csp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace bci::csp {

namespace {

Eigen::MatrixXd shrink(const Eigen::MatrixXd& sigma, double gamma) {
  const Eigen::Index c = sigma.rows();
  const double ridge = sigma.trace() / double(c);
  return (1.0 - gamma) * sigma +
         gamma * ridge * Eigen::MatrixXd::Identity(c, c);
}

struct Whitener {
  Eigen::MatrixXd p;  // c x c, P (Sa+Sb) P^T = I
  bool ok = false;
};

Whitener whiten_composite(const Eigen::MatrixXd& composite) {
  Whitener w;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(composite);
  if (es.info() != Eigen::Success) return w;
  const Eigen::Index c = composite.rows();
  const double max_eig = es.eigenvalues()(c - 1);
  if (max_eig <= 0) return w;
  if (es.eigenvalues()(0) <= 1e-10 * max_eig) return w;
  w.p.resize(c, c);
  for (Eigen::Index k = 0; k < c; ++k)
    w.p.row(k) =
        es.eigenvectors().col(k).transpose() / std::sqrt(es.eigenvalues()(k));
  w.ok = true;
  return w;
}

}  // namespace

Eigen::MatrixXd mean_normalized_covariance(
    const std::vector<Eigen::MatrixXd>& trials) {
  require(!trials.empty(), ErrorKind::Size, "csp: no trials");
  const Eigen::Index c = trials.front().rows();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(c, c);
  for (const auto& t : trials) {
    require(t.rows() == c, ErrorKind::Shape, "csp: inconsistent channel count");
    require(t.cols() >= 2, ErrorKind::Size, "csp: trial too short");
    const Eigen::MatrixXd centered = t.colwise() - t.rowwise().mean().eval();
    Eigen::MatrixXd cov = centered * centered.transpose() / double(t.cols() - 1);
    const double tr = cov.trace();
    require(tr > 0, ErrorKind::Rank, "csp: zero-power trial");
    acc += cov / tr;
  }
  return acc / double(trials.size());
}

Filters fit_cov(const Eigen::MatrixXd& sigma_a, const Eigen::MatrixXd& sigma_b,
                int m, const FitOptions& opts) {
  const Eigen::Index c = sigma_a.rows();
  require(sigma_b.rows() == c && sigma_a.cols() == c && sigma_b.cols() == c,
          ErrorKind::Shape, "csp: covariance shapes differ");
  require(m >= 1 && 2 * m <= c, ErrorKind::Validation,
          "csp: need 1 <= m and 2m <= channels (m = " + std::to_string(m) +
              ", channels = " + std::to_string(c) + ")");

  Whitener w;
  double used_gamma = opts.shrinkage;
  for (double gamma : {opts.shrinkage, opts.shrinkage_fallback}) {
    const Eigen::MatrixXd sa = shrink(sigma_a, gamma);
    const Eigen::MatrixXd sb = shrink(sigma_b, gamma);
    w = whiten_composite(sa + sb);
    used_gamma = gamma;
    if (w.ok) break;
  }
  require(w.ok, ErrorKind::Rank,
          "csp: composite covariance singular even after shrinkage");

  const Eigen::MatrixXd sa = shrink(sigma_a, used_gamma);
  Eigen::MatrixXd s = w.p * sa * w.p.transpose();
  s = 0.5 * (s + s.transpose());  // clean up asymmetry before the eigensolve
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  require(es.info() == Eigen::Success, ErrorKind::Rank,
          "csp: eigendecomposition failed");

  // indices by descending eigenvalue
  std::vector<Eigen::Index> desc(static_cast<std::size_t>(c));
  std::iota(desc.begin(), desc.end(), Eigen::Index{0});
  std::reverse(desc.begin(), desc.end());

  Filters out;
  out.m = m;
  out.projection.resize(2 * m, c);
  out.eigenvalues.resize(2 * m);
  for (int r = 0; r < 2 * m; ++r) {
    // first m from the top of the spectrum, last m from the bottom,
    // kept in overall descending eigenvalue order
    const Eigen::Index src =
        r < m ? desc[static_cast<std::size_t>(r)]
              : desc[static_cast<std::size_t>(c - 2 * m + r)];
    out.eigenvalues(r) = es.eigenvalues()(src);
    Eigen::RowVectorXd row = es.eigenvectors().col(src).transpose() * w.p;
    int arg = 0;
    row.cwiseAbs().maxCoeff(&arg);
    if (row(arg) < 0) row = -row;
    out.projection.row(r) = row;
  }
  return out;
}

Filters fit(const std::vector<Eigen::MatrixXd>& class_a,
            const std::vector<Eigen::MatrixXd>& class_b, int m,
            const FitOptions& opts) {
  require(class_a.size() >= 2 && class_b.size() >= 2, ErrorKind::Size,
          "csp: need at least two trials per class");
  return fit_cov(mean_normalized_covariance(class_a),
                 mean_normalized_covariance(class_b), m, opts);
}

Eigen::VectorXd features(const Filters& filters, const Eigen::MatrixXd& window,
                         bool* degenerate) {
  require(window.cols() >= 2, ErrorKind::Size, "csp features: window too short");
  require(window.rows() == filters.projection.cols(), ErrorKind::Shape,
          "csp features: channel count does not match the filters");
  const Eigen::MatrixXd projected = filters.projection * window;
  const Eigen::Index k = projected.rows();

  Eigen::VectorXd var(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::RowVectorXd row =
        projected.row(i).array() - projected.row(i).mean();
    var(i) = row.squaredNorm() / double(projected.cols() - 1);
  }
  double total = var.sum();
  bool flagged = false;
  if (total <= 0) {
    total = 1.0;
    flagged = true;
  }
  Eigen::VectorXd f(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    double ratio = var(i) / total;
    if (ratio <= 0) {
      ratio = std::numeric_limits<double>::epsilon();
      flagged = true;
    }
    f(i) = std::log(ratio);
  }
  if (degenerate) *degenerate = flagged;
  return f;
}

}  // namespace bci::csp

namespace bci::fbcsp {

std::vector<BandSpec> mi_bands() {
  std::vector<BandSpec> bands;
  for (double lo = 4.0; lo < 40.0 - 1e-9; lo += 4.0)
    bands.push_back({lo, lo + 4.0});
  return bands;
}

std::vector<BandSpec> me_bands() {
  std::vector<BandSpec> bands = {{0.1, 0.5}};
  for (double lo = 0.5; lo < 3.0 - 1e-9; lo += 0.5)
    bands.push_back({lo, lo + 0.5});
  return bands;
}

double mutual_information(const Eigen::VectorXd& feature,
                          const std::vector<int>& labels, int bins) {
  const auto n = static_cast<std::size_t>(feature.size());
  require(labels.size() == n, ErrorKind::Shape, "mi: label count mismatch");
  require(bins >= 2, ErrorKind::Validation, "mi: need at least two bins");

  const double lo = feature.minCoeff();
  const double hi = feature.maxCoeff();
  if (hi <= lo) return 0.0;  // constant feature carries no information
  const double width = (hi - lo) / double(bins);

  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> p_bin, p_label;
  for (std::size_t i = 0; i < n; ++i) {
    int b = static_cast<int>((feature(static_cast<Eigen::Index>(i)) - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    const double w = 1.0 / double(n);
    joint[{b, labels[i]}] += w;
    p_bin[b] += w;
    p_label[labels[i]] += w;
  }
  double mi = 0;
  for (const auto& [key, p] : joint)
    mi += p * std::log(p / (p_bin[key.first] * p_label[key.second]));
  return mi;
}

namespace {

std::vector<int> select_top_k(const std::vector<Eigen::VectorXd>& features,
                              const std::vector<int>& labels, int k_best,
                              int bins, int m, std::size_t n_bands) {
  const int dim = static_cast<int>(features.front().size());
  Eigen::MatrixXd all(static_cast<Eigen::Index>(features.size()), dim);
  for (std::size_t i = 0; i < features.size(); ++i)
    all.row(static_cast<Eigen::Index>(i)) = features[i].transpose();

  std::vector<std::pair<double, int>> scored;
  for (int j = 0; j < dim; ++j)
    scored.emplace_back(mutual_information(all.col(j), labels, bins), j);
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  // take the best k and complete each CSP pair (row i pairs with 2m-1-i)
  std::set<int> chosen;
  for (const auto& [score, j] : scored) {
    if (static_cast<int>(chosen.size()) >= k_best) break;
    const int band = j / (2 * m);
    const int row = j % (2 * m);
    chosen.insert(j);
    chosen.insert(band * 2 * m + (2 * m - 1 - row));
  }
  (void)n_bands;
  return {chosen.begin(), chosen.end()};
}

}  // namespace

Model fit(const std::vector<Eigen::MatrixXd>& class_a,
          const std::vector<Eigen::MatrixXd>& class_b, double fs,
          const std::vector<BandSpec>& bands, const Options& opts) {
  require(!bands.empty(), ErrorKind::Validation, "fbcsp: empty filter bank");
  require(!class_a.empty() && !class_b.empty(), ErrorKind::Size,
          "fbcsp: both classes need windows");

  Model model;
  model.bands = bands;
  model.fs = fs;
  model.options = opts;

  for (const auto& band : bands) {
    dsp::IIRSpec spec{2, dsp::FilterKind::Bandpass, band.lo_hz, band.hi_hz, fs};
    dsp::IIRCoefficients coeffs;
    try {
      coeffs = dsp::design(spec);
    } catch (const Error& e) {
      raise(ErrorKind::Design,
            "fbcsp: band " + std::to_string(band.lo_hz) + "-" +
                std::to_string(band.hi_hz) + " Hz at fs " + std::to_string(fs) +
                ": " + e.what());
    }

    std::vector<Eigen::MatrixXd> fa, fb;
    fa.reserve(class_a.size());
    fb.reserve(class_b.size());
    for (const auto& w : class_a) fa.push_back(dsp::filtfilt(w, coeffs));
    for (const auto& w : class_b) fb.push_back(dsp::filtfilt(w, coeffs));

    model.filters.push_back(csp::fit(fa, fb, opts.m, opts.csp));
    model.band_filters.push_back(std::move(coeffs));
  }

  if (opts.select_features) {
    std::vector<Eigen::VectorXd> feats;
    std::vector<int> labels;
    Model plain = model;  // selection must run on the unselected layout
    plain.selected.clear();
    for (const auto& w : class_a) {
      feats.push_back(transform(plain, w));
      labels.push_back(0);
    }
    for (const auto& w : class_b) {
      feats.push_back(transform(plain, w));
      labels.push_back(1);
    }
    model.selected = select_top_k(feats, labels, opts.k_best, opts.mi_bins,
                                  opts.m, bands.size());
  }
  return model;
}

Model fit(const EpochSet& windows, const std::vector<BandSpec>& bands,
          const Options& opts) {
  windows.validate();
  std::set<ClassLabel> present(windows.labels.begin(), windows.labels.end());
  require(present.size() == 2, ErrorKind::Label,
          "fbcsp: need exactly two distinct labels, got " +
              std::to_string(present.size()));
  const ClassLabel a = *present.begin();

  std::vector<Eigen::MatrixXd> wa, wb;
  for (std::size_t t = 0; t < windows.n_trials(); ++t) {
    auto& dst = windows.labels[t] == a ? wa : wb;
    for (const auto& w : windows.trials[t]) dst.push_back(w);
  }
  return fit(wa, wb, windows.fs, bands, opts);
}

Eigen::VectorXd transform(const Model& model, const Eigen::MatrixXd& window) {
  require(!model.filters.empty(), ErrorKind::Validation, "fbcsp: unfitted model");
  Eigen::VectorXd full(model.options.m * 2 *
                       static_cast<Eigen::Index>(model.bands.size()));
  Eigen::Index at = 0;
  for (std::size_t b = 0; b < model.bands.size(); ++b) {
    const Eigen::MatrixXd filtered =
        dsp::filtfilt(window, model.band_filters[b]);
    const Eigen::VectorXd f = csp::features(model.filters[b], filtered);
    full.segment(at, f.size()) = f;
    at += f.size();
  }
  if (model.selected.empty()) return full;
  Eigen::VectorXd picked(static_cast<Eigen::Index>(model.selected.size()));
  for (std::size_t i = 0; i < model.selected.size(); ++i)
    picked(static_cast<Eigen::Index>(i)) = full(model.selected[i]);
  return picked;
}

}  // namespace bci::fbcsp
