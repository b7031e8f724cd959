#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "bci/csp.hpp"

using namespace bci;

namespace {

constexpr double kPi = std::numbers::pi;

// Brute-force oracle: solve Sigma_a v = lambda (Sigma_a + Sigma_b) v densely
// and keep the top/bottom m eigenpairs. Independent of the whitening route
// the implementation uses.
struct OracleCsp {
  Eigen::MatrixXd rows;    // 2m x c, descending eigenvalue
  Eigen::VectorXd values;  // 2m
};

OracleCsp oracle_csp(const Eigen::MatrixXd& sa, const Eigen::MatrixXd& sb,
                     int m) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sa, sa + sb);
  const Eigen::Index c = sa.rows();
  OracleCsp out;
  out.rows.resize(2 * m, c);
  out.values.resize(2 * m);
  // Eigen returns ascending; filters are eigenvectors as row projections.
  for (int r = 0; r < 2 * m; ++r) {
    const Eigen::Index src = r < m ? c - 1 - r : 2 * m - 1 - r + 0;
    out.values(r) = ges.eigenvalues()(src);
    Eigen::RowVectorXd row = ges.eigenvectors().col(src).transpose();
    int arg = 0;
    row.cwiseAbs().maxCoeff(&arg);
    if (row(arg) < 0) row = -row;
    out.rows.row(r) = row;
  }
  return out;
}

int dominant_index(const Eigen::RowVectorXd& row) {
  int arg = 0;
  row.cwiseAbs().maxCoeff(&arg);
  return arg;
}

std::vector<Eigen::MatrixXd> noise_trials(int n_trials, int channels,
                                          int samples,
                                          const Eigen::VectorXd& sd,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Eigen::MatrixXd> trials;
  for (int t = 0; t < n_trials; ++t) {
    Eigen::MatrixXd x(channels, samples);
    for (int c = 0; c < channels; ++c)
      for (int s = 0; s < samples; ++s) x(c, s) = sd(c) * g(rng);
    trials.push_back(std::move(x));
  }
  return trials;
}

}  // namespace

TEST_CASE("csp matches the dense generalized eigensolve oracle") {
  csp::FitOptions exact;
  exact.shrinkage = 0.0;
  exact.shrinkage_fallback = 0.0;

  SUBCASE("variance-10 channels dominate the extremal filters") {
    Eigen::MatrixXd sa = Eigen::Vector4d(10.0, 1.0, 1.0, 1.0).asDiagonal();
    Eigen::MatrixXd sb = Eigen::Vector4d(1.0, 10.0, 1.0, 1.0).asDiagonal();
    auto filters = csp::fit_cov(sa, sb, 2, exact);
    auto oracle = oracle_csp(sa, sb, 2);
    for (int r = 0; r < 4; ++r)
      CHECK(filters.eigenvalues(r) ==
            doctest::Approx(oracle.values(r)).epsilon(1e-6));
    CHECK(dominant_index(filters.projection.row(0)) == 0);
    CHECK(dominant_index(filters.projection.row(3)) == 1);
  }

  SUBCASE("all rows agree on a non-degenerate spectrum") {
    Eigen::MatrixXd sa = Eigen::Vector4d(10.0, 1.0, 2.0, 1.0).asDiagonal();
    Eigen::MatrixXd sb = Eigen::Vector4d(1.0, 10.0, 1.0, 2.0).asDiagonal();
    sa(0, 2) = sa(2, 0) = 0.4;  // mild coupling, still non-degenerate
    sb(1, 3) = sb(3, 1) = 0.3;
    auto filters = csp::fit_cov(sa, sb, 2, exact);
    auto oracle = oracle_csp(sa, sb, 2);
    for (int r = 0; r < 4; ++r) {
      CHECK(filters.eigenvalues(r) ==
            doctest::Approx(oracle.values(r)).epsilon(1e-6));
      CHECK(dominant_index(filters.projection.row(r)) ==
            dominant_index(oracle.rows.row(r)));
    }
  }
}

TEST_CASE("csp from sampled trials finds the discriminative channels") {
  Eigen::VectorXd sd_a(4), sd_b(4);
  sd_a << std::sqrt(10.0), 1.0, 1.0, 1.0;
  sd_b << 1.0, std::sqrt(10.0), 1.0, 1.0;
  auto a = noise_trials(20, 4, 500, sd_a, 1);
  auto b = noise_trials(20, 4, 500, sd_b, 2);
  auto filters = csp::fit(a, b, 2);
  CHECK(dominant_index(filters.projection.row(0)) == 0);
  CHECK(dominant_index(filters.projection.row(3)) == 1);
  CHECK(filters.eigenvalues(0) > 0.75);
  CHECK(filters.eigenvalues(3) < 0.25);
}

TEST_CASE("identical class distributions give eigenvalues near one half") {
  Eigen::MatrixXd s(3, 3);
  s << 2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1.0;
  auto filters = csp::fit_cov(s, s, 1);
  for (int r = 0; r < 2; ++r)
    CHECK(filters.eigenvalues(r) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("csp preconditions") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(4, 4);
  CHECK_THROWS_AS(csp::fit_cov(s, s, 3), Error);  // 2m > channels
  CHECK_THROWS_AS(csp::fit_cov(s, Eigen::MatrixXd::Identity(3, 3), 1), Error);
  // fewer than two trials per class
  std::vector<Eigen::MatrixXd> one = {Eigen::MatrixXd::Random(4, 100)};
  std::vector<Eigen::MatrixXd> two = {Eigen::MatrixXd::Random(4, 100),
                                      Eigen::MatrixXd::Random(4, 100)};
  CHECK_THROWS_AS(csp::fit(one, two, 1), Error);
}

TEST_CASE("eigenvalue duality between the two class orderings") {
  Eigen::MatrixXd sa(4, 4), sb(4, 4);
  sa << 5.0, 0.5, 0.2, 0.0, 0.5, 2.0, 0.1, 0.0, 0.2, 0.1, 1.0, 0.3, 0.0, 0.0,
      0.3, 0.8;
  sb << 1.0, 0.2, 0.0, 0.1, 0.2, 4.0, 0.3, 0.0, 0.0, 0.3, 2.0, 0.2, 0.1, 0.0,
      0.2, 1.5;
  auto fwd = csp::fit_cov(sa, sb, 2);
  auto rev = csp::fit_cov(sb, sa, 2);
  for (int r = 0; r < 4; ++r)
    CHECK(fwd.eigenvalues(r) ==
          doctest::Approx(1.0 - rev.eigenvalues(3 - r)).epsilon(1e-8));
}

TEST_CASE("projection whitens the composite covariance on selected rows") {
  Eigen::MatrixXd sa(3, 3), sb(3, 3);
  sa << 3.0, 0.4, 0.1, 0.4, 1.0, 0.2, 0.1, 0.2, 0.5;
  sb << 0.8, 0.1, 0.0, 0.1, 2.5, 0.3, 0.0, 0.3, 1.2;
  auto filters = csp::fit_cov(sa, sb, 1);
  const Eigen::MatrixXd gram =
      filters.projection * (sa + sb) * filters.projection.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("filters are invariant to a common channel scaling up to sign") {
  Eigen::MatrixXd sa(3, 3), sb(3, 3);
  sa << 3.0, 0.4, 0.1, 0.4, 1.0, 0.2, 0.1, 0.2, 0.5;
  sb << 0.8, 0.1, 0.0, 0.1, 2.5, 0.3, 0.0, 0.3, 1.2;
  Eigen::VectorXd scale(3);
  scale << 0.2, 5.0, 1.7;
  const Eigen::MatrixXd d = scale.asDiagonal();
  csp::FitOptions exact;
  exact.shrinkage = 0.0;
  exact.shrinkage_fallback = 0.0;

  auto base = csp::fit_cov(sa, sb, 1, exact);
  auto scaled = csp::fit_cov(d * sa * d, d * sb * d, 1, exact);
  // filters of the scaled problem times D should match the originals
  const Eigen::MatrixXd back = scaled.projection * d;
  for (int r = 0; r < 2; ++r) {
    const double plus = (back.row(r) - base.projection.row(r)).cwiseAbs().maxCoeff();
    const double minus = (back.row(r) + base.projection.row(r)).cwiseAbs().maxCoeff();
    CHECK(std::min(plus, minus) < 1e-6);
  }
}

TEST_CASE("csp features") {
  Eigen::MatrixXd sa = Eigen::Vector4d(10.0, 1.0, 1.0, 1.0).asDiagonal();
  Eigen::MatrixXd sb = Eigen::Vector4d(1.0, 10.0, 1.0, 1.0).asDiagonal();
  auto filters = csp::fit_cov(sa, sb, 2);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd window(4, 300);
  for (int c = 0; c < 4; ++c)
    for (int s = 0; s < 300; ++s) window(c, s) = g(rng);

  SUBCASE("features sum-exponentiate to one") {
    const Eigen::VectorXd f = csp::features(filters, window);
    CHECK(f.array().exp().sum() == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("scaling the window leaves features unchanged") {
    const Eigen::VectorXd f1 = csp::features(filters, window);
    const Eigen::VectorXd f2 = csp::features(filters, 5.0 * window);
    CHECK((f1 - f2).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("a pure source channel maximizes its own filter's feature") {
    const Eigen::MatrixXd w = filters.projection;
    const Eigen::MatrixXd pinv =
        w.transpose() * (w * w.transpose()).inverse();  // right inverse
    Eigen::VectorXd s(300);
    for (int i = 0; i < 300; ++i) s(i) = std::sin(0.21 * i);
    for (int src = 0; src < 4; ++src) {
      const Eigen::MatrixXd win = pinv.col(src) * s.transpose();
      bool degenerate = false;
      const Eigen::VectorXd f = csp::features(filters, win, &degenerate);
      int arg = 0;
      f.maxCoeff(&arg);
      CHECK(arg == src);
      CHECK(degenerate);  // the other projections carry no variance
    }
  }
}

TEST_CASE("fbcsp banks match the protocol") {
  auto mi = fbcsp::mi_bands();
  REQUIRE(mi.size() == 9);
  CHECK(mi.front().lo_hz == doctest::Approx(4.0));
  CHECK(mi.front().hi_hz == doctest::Approx(8.0));
  CHECK(mi.back().lo_hz == doctest::Approx(36.0));
  CHECK(mi.back().hi_hz == doctest::Approx(40.0));

  auto me = fbcsp::me_bands();
  REQUIRE(me.size() == 6);
  CHECK(me.front().lo_hz == doctest::Approx(0.1));
  CHECK(me.front().hi_hz == doctest::Approx(0.5));
  CHECK(me.back().lo_hz == doctest::Approx(2.5));
  CHECK(me.back().hi_hz == doctest::Approx(3.0));
}

namespace {

// Two classes of 11-channel noise whose 10 Hz amplitude on central channels
// differs; crude stand-in for ERD/ERS contrast.
std::pair<std::vector<Eigen::MatrixXd>, std::vector<Eigen::MatrixXd>>
alpha_modulated_classes(int per_class, double fs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  Eigen::VectorXd profile(11);
  profile << 0.5, 0.8, 1.0, 0.8, 0.7, 0.9, 0.7, 0.4, 0.5, 0.4, 0.3;

  auto make = [&](double amp) {
    Eigen::MatrixXd x(11, 500);
    const double ph = phase(rng);
    for (int c = 0; c < 11; ++c)
      for (int s = 0; s < 500; ++s)
        x(c, s) = g(rng) + amp * profile(c) *
                               std::sin(2.0 * kPi * 10.0 * s / fs + ph);
    return x;
  };

  std::pair<std::vector<Eigen::MatrixXd>, std::vector<Eigen::MatrixXd>> out;
  for (int i = 0; i < per_class; ++i) {
    out.first.push_back(make(0.8));   // suppressed alpha
    out.second.push_back(make(2.4));  // boosted alpha
  }
  return out;
}

}  // namespace

TEST_CASE("fbcsp fit and transform") {
  const double fs = 250.0;
  auto [class_a, class_b] = alpha_modulated_classes(12, fs, 77);

  SUBCASE("MI bank with m = 2 yields 36 features") {
    auto model = fbcsp::fit(class_a, class_b, fs, fbcsp::mi_bands());
    CHECK(model.feature_dim() == 36);
    const Eigen::VectorXd f = fbcsp::transform(model, class_a.front());
    CHECK(f.size() == 36);
  }

  SUBCASE("ME bank designs all six stiff low bands") {
    fbcsp::Options opts;
    opts.m = 1;
    auto model = fbcsp::fit(class_a, class_b, fs, fbcsp::me_bands(), opts);
    CHECK(model.feature_dim() == 12);
  }

  SUBCASE("band above Nyquist names the band") {
    try {
      fbcsp::fit(class_a, class_b, fs, {{100.0, 130.0}});
      FAIL("expected design error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Design);
      CHECK(std::string(e.what()).find("130") != std::string::npos);
    }
  }

  SUBCASE("single band reduces to plain csp features") {
    fbcsp::Options opts;
    opts.m = 2;
    auto model = fbcsp::fit(class_a, class_b, fs, {{8.0, 12.0}}, opts);
    REQUIRE(model.filters.size() == 1);
    const auto& window = class_b.front();
    const Eigen::VectorXd via_model = fbcsp::transform(model, window);
    const Eigen::VectorXd direct = csp::features(
        model.filters[0], dsp::filtfilt(window, model.band_filters[0]));
    CHECK((via_model - direct).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("transform is deterministic") {
    auto model = fbcsp::fit(class_a, class_b, fs, {{8.0, 12.0}, {12.0, 16.0}});
    const Eigen::VectorXd f1 = fbcsp::transform(model, class_a[3]);
    const Eigen::VectorXd f2 = fbcsp::transform(model, class_a[3]);
    CHECK((f1 - f2).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("global amplitude scaling leaves features unchanged") {
    auto model = fbcsp::fit(class_a, class_b, fs, {{8.0, 12.0}});
    const Eigen::VectorXd f1 = fbcsp::transform(model, class_b[1]);
    const Eigen::VectorXd f2 = fbcsp::transform(model, 12.5 * class_b[1]);
    CHECK((f1 - f2).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("training features separate by perceptron") {
    fbcsp::Options opts;
    opts.m = 1;
    auto model = fbcsp::fit(class_a, class_b, fs, {{8.0, 12.0}}, opts);
    std::vector<Eigen::VectorXd> feats;
    std::vector<int> y;
    for (const auto& w : class_a) { feats.push_back(fbcsp::transform(model, w)); y.push_back(-1); }
    for (const auto& w : class_b) { feats.push_back(fbcsp::transform(model, w)); y.push_back(+1); }

    // perceptron with bias; convergence proves a separating margin exists
    Eigen::VectorXd wgt = Eigen::VectorXd::Zero(feats[0].size() + 1);
    bool separated = false;
    for (int pass = 0; pass < 2000 && !separated; ++pass) {
      separated = true;
      for (std::size_t i = 0; i < feats.size(); ++i) {
        Eigen::VectorXd xb(wgt.size());
        xb << feats[i], 1.0;
        if (double(y[i]) * wgt.dot(xb) <= 0) {
          wgt += double(y[i]) * xb;
          separated = false;
        }
      }
    }
    CHECK(separated);
  }
}

TEST_CASE("mutual-information feature selection") {
  SUBCASE("mi scores informative features above noise") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    const int n = 400;
    Eigen::VectorXd informative(n), noise(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = i % 2;
      informative(i) = double(i % 2) * 2.0 + 0.3 * g(rng);
      noise(i) = g(rng);
    }
    CHECK(fbcsp::mutual_information(informative, labels, 10) >
          fbcsp::mutual_information(noise, labels, 10) + 0.2);
  }

  SUBCASE("selection keeps csp pairs and shrinks the feature dim") {
    const double fs = 250.0;
    auto [class_a, class_b] = alpha_modulated_classes(12, fs, 101);
    fbcsp::Options opts;
    opts.select_features = true;
    opts.k_best = 8;
    auto model = fbcsp::fit(class_a, class_b, fs, fbcsp::mi_bands(), opts);
    REQUIRE_FALSE(model.selected.empty());
    CHECK(model.feature_dim() == static_cast<int>(model.selected.size()));
    CHECK(model.feature_dim() <= 36);
    const Eigen::VectorXd f = fbcsp::transform(model, class_a[0]);
    CHECK(f.size() == model.feature_dim());
    // every selected feature's csp partner is selected too
    for (int j : model.selected) {
      const int band = j / (2 * opts.m);
      const int row = j % (2 * opts.m);
      const int partner = band * 2 * opts.m + (2 * opts.m - 1 - row);
      CHECK(std::find(model.selected.begin(), model.selected.end(), partner) !=
            model.selected.end());
    }
  }
}
