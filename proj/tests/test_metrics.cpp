#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "stylevar/errors.hpp"
#include "stylevar/metrics.hpp"
#include "stylevar/rng.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace stylevar;
using testsupport::to_oracle;

namespace {

std::vector<double> random_buffer(rng::PortableRng& gen, std::size_t n, double scale = 1.0) {
    std::vector<double> out(n);
    for (double& v : out) {
        v = gen.symmetric() * scale;
    }
    return out;
}

metrics::FeatureMap random_map(rng::PortableRng& gen, int c, int h, int w) {
    const auto data = random_buffer(gen, static_cast<std::size_t>(c) * h * w);
    return metrics::FeatureMap::from_values(c, h, w, data);
}

Eigen::VectorXd random_vector(rng::PortableRng& gen, int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
        v(i) = gen.symmetric();
    }
    return v;
}

Eigen::MatrixXd random_psd(rng::PortableRng& gen, int n) {
    Eigen::MatrixXd a(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            a(r, c) = gen.symmetric();
        }
    }
    Eigen::MatrixXd s = a * a.transpose();
    return ((s + s.transpose()) / 2.0).eval();
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("feature map layout matches the row-major input buffer") {
    std::vector<double> data(2 * 2 * 3);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = static_cast<double>(i);
    }
    const auto fm = metrics::FeatureMap::from_values(2, 2, 3, data);
    CHECK(fm.at(0, 0, 0) == 0.0);
    CHECK(fm.at(0, 0, 2) == 2.0);
    CHECK(fm.at(0, 1, 0) == 3.0);
    CHECK(fm.at(1, 0, 0) == 6.0);
    CHECK(fm.at(1, 1, 2) == 11.0);
    CHECK(fm.spatial_size() == 6);
}

TEST_CASE("feature map rejects size mismatch and non-finite data") {
    std::vector<double> data(8, 1.0);
    CHECK_THROWS_AS(metrics::FeatureMap::from_values(2, 2, 3, data), ValidationError);
    data.resize(12, 1.0);
    data[5] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(metrics::FeatureMap::from_values(2, 2, 3, data), ValidationError);
}

TEST_CASE("gram matches the brute-force loop on random maps") {
    rng::PortableRng gen(101);
    for (int round = 0; round < 50; ++round) {
        const int c = 1 + static_cast<int>(gen.next_u64() % 6);
        const int h = 1 + static_cast<int>(gen.next_u64() % 8);
        const int w = 1 + static_cast<int>(gen.next_u64() % 8);
        const auto data = random_buffer(gen, static_cast<std::size_t>(c) * h * w);
        const auto fm = metrics::FeatureMap::from_values(c, h, w, data);
        const auto g = metrics::gram(fm);
        CHECK(testsupport::max_abs_diff(g.values(), oracles::gram(data, c, h, w)) < 1e-12);
    }
}

TEST_CASE("gram output is exactly symmetric and positive semidefinite") {
    rng::PortableRng gen(102);
    for (int round = 0; round < 20; ++round) {
        const auto g = metrics::gram(random_map(gen, 5, 4, 4));
        CHECK(g.values() == g.values().transpose().eval());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.values(),
                                                              Eigen::EigenvaluesOnly);
        CHECK(solver.eigenvalues().minCoeff() >= -1e-9);
    }
}

TEST_CASE("gram scales quadratically with the feature values") {
    rng::PortableRng gen(103);
    const int c = 3, h = 4, w = 4;
    auto data = random_buffer(gen, static_cast<std::size_t>(c) * h * w);
    const auto g1 = metrics::gram(metrics::FeatureMap::from_values(c, h, w, data));
    for (double& v : data) {
        v *= 2.0;
    }
    const auto g2 = metrics::gram(metrics::FeatureMap::from_values(c, h, w, data));
    CHECK((g2.values() - 4.0 * g1.values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gram matrix construction rejects bad inputs") {
    CHECK_THROWS_AS(metrics::GramMatrix(Eigen::MatrixXd::Zero(2, 3)), ValidationError);

    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.5 + 1e-6, 1.0;
    CHECK_THROWS_AS(metrics::GramMatrix{asym}, ValidationError);

    Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(2, 2);
    indefinite(1, 1) = -1.0;
    CHECK_THROWS_AS(metrics::GramMatrix{indefinite}, ValidationError);

    Eigen::MatrixXd nan = Eigen::MatrixXd::Zero(2, 2);
    nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(metrics::GramMatrix{nan}, ValidationError);

    CHECK_NOTHROW(metrics::GramMatrix(Eigen::MatrixXd::Identity(3, 3)));
}

TEST_CASE("sml matches the brute-force loop on random corpora") {
    rng::PortableRng gen(104);
    for (int round = 0; round < 50; ++round) {
        const int c = 2 + static_cast<int>(gen.next_u64() % 5);
        const int n = 1 + static_cast<int>(gen.next_u64() % 8);
        const auto result = metrics::gram(random_map(gen, c, 4, 4));
        std::vector<metrics::GramMatrix> targets;
        std::vector<oracles::Mat> oracle_targets;
        for (int i = 0; i < n; ++i) {
            targets.push_back(metrics::gram(random_map(gen, c, 4, 4)));
            oracle_targets.push_back(to_oracle(targets.back().values()));
        }
        const double got = metrics::sml(result, targets);
        const double want = oracles::sml(to_oracle(result.values()), oracle_targets);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
        CHECK(got >= 0.0);
    }
}

TEST_CASE("sml of a gram against itself is zero") {
    rng::PortableRng gen(105);
    const auto g = metrics::gram(random_map(gen, 4, 4, 4));
    CHECK(metrics::sml(g, {g}) == 0.0);
}

TEST_CASE("sml is invariant under corpus permutation") {
    rng::PortableRng gen(106);
    const auto result = metrics::gram(random_map(gen, 4, 4, 4));
    std::vector<metrics::GramMatrix> targets;
    for (int i = 0; i < 5; ++i) {
        targets.push_back(metrics::gram(random_map(gen, 4, 4, 4)));
    }
    auto shuffled = targets;
    std::rotate(shuffled.begin(), shuffled.begin() + 2, shuffled.end());
    CHECK(metrics::sml(result, targets) ==
          doctest::Approx(metrics::sml(result, shuffled)).epsilon(1e-15));
}

TEST_CASE("sml rejects empty corpora and dimension mismatches") {
    rng::PortableRng gen(107);
    const auto g3 = metrics::gram(random_map(gen, 3, 4, 4));
    const auto g4 = metrics::gram(random_map(gen, 4, 4, 4));
    CHECK_THROWS_AS(metrics::sml(g3, {}), ValidationError);
    CHECK_THROWS_AS(metrics::sml(g3, {g4}), ValidationError);
}

TEST_CASE("cms of fixed vectors and basic geometry") {
    metrics::EmbeddingVec a{Eigen::Vector3d(1.0, 2.0, 2.0)};
    metrics::EmbeddingVec b{Eigen::Vector3d(2.0, 1.0, 2.0)};
    CHECK(metrics::cms(a, b) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));

    CHECK(metrics::cms(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    metrics::EmbeddingVec neg{-a.values};
    CHECK(metrics::cms(a, neg) == doctest::Approx(-1.0).epsilon(1e-15));

    metrics::EmbeddingVec ex{Eigen::Vector2d(1.0, 0.0)};
    metrics::EmbeddingVec ey{Eigen::Vector2d(0.0, 1.0)};
    CHECK(metrics::cms(ex, ey) == 0.0);
}

TEST_CASE("cms matches the oracle, stays bounded and ignores scale") {
    rng::PortableRng gen(108);
    for (int round = 0; round < 100; ++round) {
        const int n = 2 + static_cast<int>(gen.next_u64() % 16);
        metrics::EmbeddingVec a{random_vector(gen, n)};
        metrics::EmbeddingVec b{random_vector(gen, n)};
        const double got = metrics::cms(a, b);
        CHECK(got == doctest::Approx(oracles::cosine(to_oracle(a.values), to_oracle(b.values)))
                         .epsilon(1e-12));
        CHECK(got >= -1.0 - 1e-12);
        CHECK(got <= 1.0 + 1e-12);
        metrics::EmbeddingVec a2{3.5 * a.values};
        metrics::EmbeddingVec b2{0.25 * b.values};
        CHECK(metrics::cms(a2, b2) == doctest::Approx(got).epsilon(1e-12));
    }
}

TEST_CASE("cms rejects zero vectors and mismatched dimensions") {
    metrics::EmbeddingVec zero{Eigen::Vector3d::Zero()};
    metrics::EmbeddingVec unit{Eigen::Vector3d(1.0, 0.0, 0.0)};
    metrics::EmbeddingVec shorter{Eigen::Vector2d(1.0, 0.0)};
    CHECK_THROWS_AS(metrics::cms(zero, unit), ValidationError);
    CHECK_THROWS_AS(metrics::cms(unit, zero), ValidationError);
    CHECK_THROWS_AS(metrics::cms(unit, shorter), ValidationError);
}

TEST_CASE("gaussian_stats matches the brute-force mean and covariance") {
    rng::PortableRng gen(109);
    for (int round = 0; round < 20; ++round) {
        const int m = 2 + static_cast<int>(gen.next_u64() % 10);
        const int d = 1 + static_cast<int>(gen.next_u64() % 6);
        Eigen::MatrixXd samples(m, d);
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < d; ++c) {
                samples(r, c) = gen.symmetric() * 2.0;
            }
        }
        const auto stats = metrics::gaussian_stats({samples});
        const auto rows = to_oracle(samples);
        const auto mu = oracles::mean(rows);
        const auto cov = oracles::covariance(rows);
        for (int i = 0; i < d; ++i) {
            CHECK(stats.mean(i) == doctest::Approx(mu[static_cast<std::size_t>(i)])
                                       .epsilon(1e-12));
        }
        CHECK(testsupport::max_abs_diff(stats.covariance, cov) < 1e-12);
        CHECK(stats.covariance == stats.covariance.transpose().eval());
    }
}

TEST_CASE("gaussian_stats needs at least two samples") {
    CHECK_THROWS_AS(metrics::gaussian_stats({Eigen::MatrixXd::Ones(1, 3)}), ValidationError);
    CHECK_NOTHROW(metrics::gaussian_stats({Eigen::MatrixXd::Ones(2, 3)}));
}

TEST_CASE("matrix_sqrt_psd reconstructs the input") {
    rng::PortableRng gen(110);
    for (int round = 0; round < 25; ++round) {
        const int n = 1 + static_cast<int>(gen.next_u64() % 16);
        const Eigen::MatrixXd s = random_psd(gen, n);
        const Eigen::MatrixXd r = metrics::matrix_sqrt_psd(s);
        CHECK((r * r - s).norm() / s.norm() < 1e-10);
        CHECK((r - r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("matrix_sqrt_psd handles exact special cases") {
    Eigen::MatrixXd diag = Eigen::Vector3d(4.0, 9.0, 16.0).asDiagonal();
    const Eigen::MatrixXd r = metrics::matrix_sqrt_psd(diag);
    CHECK((r - Eigen::MatrixXd(Eigen::Vector3d(2.0, 3.0, 4.0).asDiagonal()))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK(metrics::matrix_sqrt_psd(Eigen::MatrixXd::Identity(4, 4))
              .isApprox(Eigen::MatrixXd::Identity(4, 4), 1e-14));
    CHECK(metrics::matrix_sqrt_psd(Eigen::MatrixXd::Zero(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix_sqrt_psd clamps rounding-level negatives and rejects real ones") {
    Eigen::MatrixXd nearly = Eigen::MatrixXd::Identity(2, 2);
    nearly(1, 1) = -1e-9;  // inside tolerance: clamped to zero
    const Eigen::MatrixXd r = metrics::matrix_sqrt_psd(nearly);
    CHECK(r(1, 1) == 0.0);

    Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(2, 2);
    indefinite(1, 1) = -1e-3;
    CHECK_THROWS_AS(metrics::matrix_sqrt_psd(indefinite), ValidationError);

    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.1, 0.2, 1.0;
    CHECK_THROWS_AS(metrics::matrix_sqrt_psd(asym), ValidationError);
    CHECK_THROWS_AS(metrics::matrix_sqrt_psd(Eigen::MatrixXd::Zero(2, 3)), ValidationError);
}

TEST_CASE("fid of identical Gaussians is zero") {
    rng::PortableRng gen(111);
    const metrics::GaussianStats stats{random_vector(gen, 6), random_psd(gen, 6)};
    CHECK(metrics::fid(stats, stats) <= 1e-8);
}

TEST_CASE("fid with equal covariance reduces to the squared mean shift") {
    rng::PortableRng gen(112);
    const Eigen::MatrixXd cov = random_psd(gen, 5);
    const Eigen::VectorXd mu_a = random_vector(gen, 5);
    const Eigen::VectorXd mu_b = random_vector(gen, 5);
    const double got = metrics::fid({mu_a, cov}, {mu_b, cov});
    CHECK(got == doctest::Approx((mu_a - mu_b).squaredNorm()).epsilon(1e-9));
}

TEST_CASE("fid matches the diagonal closed form") {
    rng::PortableRng gen(113);
    for (int round = 0; round < 20; ++round) {
        const int d = 1 + static_cast<int>(gen.next_u64() % 8);
        oracles::Vec mu_a(d), mu_b(d), var_a(d), var_b(d);
        Eigen::VectorXd ma(d), mb(d);
        Eigen::MatrixXd ca = Eigen::MatrixXd::Zero(d, d), cb = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i) {
            mu_a[i] = gen.symmetric();
            mu_b[i] = gen.symmetric();
            var_a[i] = 0.1 + gen.unit();
            var_b[i] = 0.1 + gen.unit();
            ma(i) = mu_a[i];
            mb(i) = mu_b[i];
            ca(i, i) = var_a[i];
            cb(i, i) = var_b[i];
        }
        const double want = oracles::fid_diagonal(mu_a, var_a, mu_b, var_b);
        CHECK(metrics::fid({ma, ca}, {mb, cb}) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("fid is symmetric and non-negative on random stats") {
    rng::PortableRng gen(114);
    for (int round = 0; round < 10; ++round) {
        const int d = 2 + static_cast<int>(gen.next_u64() % 7);
        const metrics::GaussianStats a{random_vector(gen, d), random_psd(gen, d)};
        const metrics::GaussianStats b{random_vector(gen, d), random_psd(gen, d)};
        const double ab = metrics::fid(a, b);
        const double ba = metrics::fid(b, a);
        CHECK(ab >= 0.0);
        CHECK(std::abs(ab - ba) < 1e-6 * std::max(1.0, std::abs(ab)));
    }
}

TEST_CASE("fid rejects mismatched dimensions") {
    const metrics::GaussianStats a{Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(2, 2)};
    const metrics::GaussianStats b{Eigen::Vector3d::Zero(), Eigen::MatrixXd::Identity(3, 3)};
    CHECK_THROWS_AS(metrics::fid(a, b), ValidationError);
}

TEST_CASE("clips scales and clamps the cosine") {
    metrics::EmbeddingVec img{Eigen::Vector2d(1.0, 0.0)};
    metrics::EmbeddingVec aligned{Eigen::Vector2d(2.0, 0.0)};
    metrics::EmbeddingVec opposed{Eigen::Vector2d(-1.0, 0.0)};
    CHECK(metrics::clips(img, aligned) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(metrics::clips(img, opposed) == 0.0);

    rng::PortableRng gen(115);
    for (int round = 0; round < 50; ++round) {
        const int n = 2 + static_cast<int>(gen.next_u64() % 12);
        metrics::EmbeddingVec a{random_vector(gen, n)};
        metrics::EmbeddingVec b{random_vector(gen, n)};
        const double got = metrics::clips(a, b);
        CHECK(got == doctest::Approx(oracles::clips(to_oracle(a.values), to_oracle(b.values)))
                         .epsilon(1e-10));
        CHECK(got >= 0.0);
        CHECK(got <= 100.0 + 1e-9);
    }
}

}  // TEST_SUITE
