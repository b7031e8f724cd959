#include "bci/ica.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bci::ica {

namespace {

constexpr double kRankTolerance = 1e-12;  // relative to the largest eigenvalue

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> whiten(
    const Eigen::MatrixXd& centered, int n_components) {
  const Eigen::Index c = centered.rows();
  const Eigen::Index n = centered.cols();
  require(n_components >= 1 && n_components <= c, ErrorKind::Validation,
          "whiten: n_components out of range");

  const Eigen::MatrixXd cov =
      centered * centered.transpose() / double(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  require(es.info() == Eigen::Success, ErrorKind::Rank,
          "whiten: eigendecomposition failed");

  // Eigen sorts ascending; take the top n_components.
  const double max_eig = es.eigenvalues()(c - 1);
  Eigen::MatrixXd v(n_components, c);
  for (int k = 0; k < n_components; ++k) {
    const Eigen::Index src = c - 1 - k;
    const double lambda = es.eigenvalues()(src);
    require(lambda > kRankTolerance * max_eig && lambda > 0,
            ErrorKind::Rank,
            "whiten: data rank below the requested " +
                std::to_string(n_components) + " components");
    v.row(k) = es.eigenvectors().col(src).transpose() / std::sqrt(lambda);
  }
  return {v, v * centered};
}

Decomposition fit(const Eigen::MatrixXd& data, int n_components,
                  std::uint64_t seed, const FitOptions& opts) {
  const Eigen::Index c = data.rows();
  const Eigen::Index n = data.cols();
  require(c >= 2 && n_components >= 2, ErrorKind::Validation,
          "fastica: need at least two channels/components");
  require(n_components <= c, ErrorKind::Validation,
          "fastica: more components than channels");
  require(double(n) >= opts.min_samples_per_channel * double(c),
          ErrorKind::Size,
          "fastica: need at least " +
              std::to_string(int(opts.min_samples_per_channel)) +
              " samples per channel");

  Decomposition dec;
  dec.channel_mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - dec.channel_mean;
  auto [v, z] = whiten(centered, n_components);

  const int k = n_components;
  Eigen::MatrixXd rotation(k, k);  // rows are the extracted directions
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double a = opts.contrast_a;
  int total_iter = 0;

  for (int comp = 0; comp < k; ++comp) {
    Eigen::VectorXd w(k);
    for (int i = 0; i < k; ++i) w(i) = gauss(rng);
    // deflation: stay orthogonal to everything already extracted
    for (int j = 0; j < comp; ++j)
      w -= rotation.row(j).dot(w) * rotation.row(j).transpose();
    w.normalize();

    bool converged = false;
    for (int iter = 0; iter < opts.max_iter; ++iter) {
      ++total_iter;
      const Eigen::VectorXd proj = z.transpose() * w;        // n
      const Eigen::VectorXd g = (a * proj.array()).tanh();   // tanh(a u)
      const double g_prime_mean =
          (a * (1.0 - g.array().square())).mean();           // a(1-tanh^2)
      Eigen::VectorXd w_new = z * g / double(n) - g_prime_mean * w;

      for (int j = 0; j < comp; ++j)
        w_new -= rotation.row(j).dot(w_new) * rotation.row(j).transpose();
      const double norm = w_new.norm();
      require(norm > 1e-12, ErrorKind::Convergence,
              "fastica: direction collapsed for component " +
                  std::to_string(comp));
      w_new /= norm;

      const double delta =
          std::min((w_new - w).norm(), (w_new + w).norm());
      w = w_new;
      if (delta < opts.tol) { converged = true; break; }
    }
    require(converged, ErrorKind::Convergence,
            "fastica: component " + std::to_string(comp) +
                " did not converge within " + std::to_string(opts.max_iter) +
                " iterations (total " + std::to_string(total_iter) + ")");
    rotation.row(comp) = w.transpose();
  }
  dec.iterations = total_iter;

  // unmixing = rotation * whitening; mixing = its pseudo-inverse through the
  // whitened space (E D^1/2 R^T expressed via v's construction).
  Eigen::MatrixXd unmix = rotation * v;
  // pinv(v) = cov-weighted back projection; solve instead of forming pinv
  const Eigen::MatrixXd v_pinv =
      (v * v.transpose()).ldlt().solve(v).transpose();  // c x k
  Eigen::MatrixXd mix = v_pinv * rotation.transpose();

  // order by explained variance (unit-variance sources -> column norms)
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> power(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) power[static_cast<std::size_t>(j)] = mix.col(j).squaredNorm();
  std::stable_sort(order.begin(), order.end(), [&power](int i, int j) {
    return power[static_cast<std::size_t>(i)] > power[static_cast<std::size_t>(j)];
  });

  dec.unmixing.resize(k, c);
  dec.mixing.resize(c, k);
  for (int j = 0; j < k; ++j) {
    const int src = order[static_cast<std::size_t>(j)];
    const double row_norm = unmix.row(src).norm();
    dec.unmixing.row(j) = unmix.row(src) / row_norm;
    dec.mixing.col(j) = mix.col(src) * row_norm;
  }
  return dec;
}

Eigen::MatrixXd sources(const Decomposition& dec, const Eigen::MatrixXd& data) {
  require(data.rows() == dec.unmixing.cols(), ErrorKind::Shape,
          "sources: channel count does not match the decomposition");
  return dec.unmixing * (data.colwise() - dec.channel_mean);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
  ma /= double(n);
  mb /= double(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  // Numerically flat inputs count as constant; their correlation is 0.
  const auto flat = [n](double ss, double mean) {
    const double tol = 1e-12 * (1.0 + std::abs(mean));
    return ss <= double(n) * tol * tol;
  };
  if (flat(saa, ma) || flat(sbb, mb)) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double pearson_rows(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return pearson(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                 std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

std::vector<int> flag_ocular(Decomposition& dec, const Eigen::MatrixXd& srcs,
                             const Eigen::MatrixXd& eog, double threshold) {
  require(srcs.cols() == eog.cols(), ErrorKind::Shape,
          "flag_ocular: source and EOG sample counts differ");
  const Eigen::Index k = srcs.rows();
  const Eigen::Index e = eog.rows();
  dec.component_scores.resize(k, e);
  dec.rejected.clear();
  for (Eigen::Index j = 0; j < k; ++j) {
    double worst = 0;
    for (Eigen::Index q = 0; q < e; ++q) {
      const double r = std::abs(pearson_rows(srcs.row(j).transpose(),
                                             eog.row(q).transpose()));
      dec.component_scores(j, q) = r;
      worst = std::max(worst, r);
    }
    if (worst >= threshold) dec.rejected.push_back(static_cast<int>(j));
  }
  return dec.rejected;
}

Eigen::MatrixXd reconstruct(const Decomposition& dec,
                            const Eigen::MatrixXd& data) {
  require(data.rows() == dec.unmixing.cols(), ErrorKind::Shape,
          "reconstruct: channel count does not match the decomposition");
  Eigen::MatrixXd s = sources(dec, data);
  for (int j : dec.rejected) s.row(j).setZero();
  return (dec.mixing * s).colwise() + dec.channel_mean;
}

}  // namespace bci::ica
