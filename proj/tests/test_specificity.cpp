#include "doctest.h"
#include "test_helpers.hpp"

#include "nrreval/parallel.hpp"
#include "nrreval/specificity.hpp"

#include <algorithm>
#include <random>

using namespace nrreval;
using testing::to_eigen;

namespace
{

ParameterCloud<double> row(std::initializer_list<double> xs)
{
    ParameterCloud<double> c(1, static_cast<Eigen::Index>(xs.size()));
    Eigen::Index j = 0;
    for (double x : xs)
        c(0, j++) = x;
    return c;
}

} // namespace

TEST_CASE("nearest neighbour")
{
    SUBCASE("ties go to the lowest index")
    {
        const auto nb = nn_distance(Eigen::VectorXd::Constant(1, 0.5), row({0.0, 1.0}), Metric::l2);
        CHECK(nb.distance == 0.5);
        CHECK(nb.index == 0);
    }
    SUBCASE("L1 distance")
    {
        ParameterCloud<double> t(2, 2);
        t << 0, 3, 0, 3;
        const auto nb = nn_distance(Eigen::Vector2d(1, 1), t, Metric::l1);
        CHECK(nb.distance == 2.0);
        CHECK(nb.index == 0);
    }
    SUBCASE("matches an exhaustive scan in 9-D")
    {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            const auto training = oracle::random_cloud(rng, 10, 9);
            const auto point = oracle::random_cloud(rng, 1, 9).front();
            for (bool l1 : {true, false}) {
                double best = 1e300;
                Eigen::Index arg = 0;
                for (std::size_t i = 0; i < training.size(); ++i) {
                    const double d = oracle::distance(training[i], point, l1);
                    if (d < best) {
                        best = d;
                        arg = static_cast<Eigen::Index>(i);
                    }
                }
                const auto nb = nn_distance(to_eigen({point}, 9).col(0), to_eigen(training, 9),
                                            l1 ? Metric::l1 : Metric::l2);
                CHECK(nb.index == arg);
                CHECK(nb.distance == doctest::Approx(best).epsilon(1e-14));
            }
        }
    }
    SUBCASE("empty training cloud")
    {
        CHECK_THROWS_AS(nn_distance(Eigen::VectorXd::Zero(1), ParameterCloud<double>(1, 0), Metric::l2),
                        std::invalid_argument);
    }
}

TEST_CASE("specificity worked examples")
{
    SUBCASE("both samples a quarter away")
    {
        const auto r = specificity(row({0, 1}), row({0.25, 0.75}), 1.0, Metric::l2);
        CHECK(r.value == 0.25);
        CHECK(r.std_error == 0.0);
        CHECK(r.count == 2);
    }
    SUBCASE("samples on training points")
    {
        const auto r = specificity(row({0, 1, 5}), row({5, 0, 1, 1}), 1.0, Metric::l1);
        CHECK(r.value == 0.0);
    }
    SUBCASE("lambda 2")
    {
        const auto r = specificity(row({0, 1}), row({0.1, 0.4}), 2.0, Metric::l2);
        CHECK(r.value == doctest::Approx(0.085).epsilon(1e-14));
        // STD{0.01, 0.16} with divisor 1, over sqrt(1): sqrt(2 * 0.075^2).
        CHECK(r.std_error == doctest::Approx(std::sqrt(2.0) * 0.075).epsilon(1e-13));
        CHECK(r.std_error == doctest::Approx(0.10607).epsilon(1e-4));
    }
    SUBCASE("value equals the mean of retained distances to the lambda")
    {
        std::mt19937_64 rng(5);
        const auto t = to_eigen(oracle::random_cloud(rng, 7, 4), 4);
        const auto s = to_eigen(oracle::random_cloud(rng, 300, 4), 4);
        const auto r = specificity(t, s, 1.5, Metric::l2);
        REQUIRE(r.per_sample_min.size() == 300);
        double mean = 0.0;
        for (double d : r.per_sample_min)
            mean += std::pow(d, 1.5);
        CHECK(std::abs(mean / 300.0 - r.value) <= 1e-12);
    }
    SUBCASE("a single sample has an undefined standard error")
    {
        const auto r = specificity(row({0, 1}), row({0.3}), 1.0, Metric::l2);
        CHECK_FALSE(r.std_error_defined);
        CHECK(r.std_error == 0.0);
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(specificity(row({0}), ParameterCloud<double>::Zero(2, 3), 1.0, Metric::l2),
                        std::invalid_argument);
        CHECK_THROWS_AS(specificity(row({0}), row({1}), 0.0, Metric::l2), std::invalid_argument);
    }
}

TEST_CASE("specificity, generalization and histogram match the double-loop oracle")
{
    std::mt19937_64 rng(17);
    SUBCASE("10 training points, 1000 samples, 9-D")
    {
        const auto t = oracle::random_cloud(rng, 10, 9);
        const auto s = oracle::random_cloud(rng, 1000, 9, 1.5);
        for (bool l1 : {true, false}) {
            const Metric m = l1 ? Metric::l1 : Metric::l2;
            const auto expected = oracle::nn_measure(t, s, 1.0, l1);
            const auto r = specificity(to_eigen(t, 9), to_eigen(s, 9), 1.0, m);
            CHECK(std::abs(r.value - expected.value) <= 1e-12);
            CHECK(std::abs(r.std_error - expected.std_error) <= 1e-12);
            const auto h = voronoi_histogram(to_eigen(t, 9), to_eigen(s, 9), m);
            CHECK(std::vector<long>(h.counts.begin(), h.counts.end()) == expected.histogram);
        }
    }
    SUBCASE("generalization on small random clouds")
    {
        for (int trial = 0; trial < 10; ++trial) {
            const auto t = oracle::random_cloud(rng, 5 + trial, 3);
            const auto s = oracle::random_cloud(rng, 40, 3);
            const auto expected = oracle::nn_measure(s, t, 2.0, false);
            const auto r = generalization(to_eigen(t, 3), to_eigen(s, 3), 2.0, Metric::l2);
            CHECK(std::abs(r.value - expected.value) <= 1e-12);
            CHECK(std::abs(r.std_error - expected.std_error) <= 1e-12);
            CHECK(r.count == static_cast<Eigen::Index>(t.size()));
        }
    }
}

TEST_CASE("generalization is role-swapped specificity")
{
    std::mt19937_64 rng(8);
    const auto a = to_eigen(oracle::random_cloud(rng, 6, 2), 2);
    const auto b = to_eigen(oracle::random_cloud(rng, 11, 2), 2);
    const auto g = generalization(a, b, 1.0, Metric::l1);
    const auto s = specificity(b, a, 1.0, Metric::l1);
    CHECK(g.value == s.value);
    CHECK(g.std_error == s.std_error);

    ParameterCloud<double> superset(2, 8);
    superset << a.leftCols(6), to_eigen(oracle::random_cloud(rng, 2, 2), 2);
    CHECK(generalization(a, superset, 1.0, Metric::l2).value == 0.0);
}

TEST_CASE("Voronoi histogram")
{
    const auto h = voronoi_histogram(row({0, 1}), row({0.1, 0.2, 0.9}), Metric::l2);
    CHECK(h.counts == std::vector<std::int64_t>{2, 1});

    std::mt19937_64 rng(4);
    const auto t = to_eigen(oracle::random_cloud(rng, 9, 5), 5);
    const auto self = voronoi_histogram(t, t, Metric::l1);
    CHECK(self.counts == std::vector<std::int64_t>(9, 1));
    CHECK(self.total() == 9);
}

TEST_CASE("specificity properties on random clouds")
{
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> dim_dist(1, 8);
    for (int trial = 0; trial < 20; ++trial) {
        const int dim = dim_dist(rng);
        const auto t = to_eigen(oracle::random_cloud(rng, 8, static_cast<std::size_t>(dim)), dim);
        const auto s = to_eigen(oracle::random_cloud(rng, 60, static_cast<std::size_t>(dim)), dim);
        const double lambda = trial % 2 ? 1.0 : 2.0;
        for (Metric m : {Metric::l1, Metric::l2}) {
            const auto base = specificity(t, s, lambda, m);
            CHECK(base.value > 0.0);

            const double scale = 3.5;
            const ParameterCloud<double> ts = scale * t, ss = scale * s;
            CHECK(specificity(ts, ss, lambda, m).value ==
                  doctest::Approx(std::pow(scale, lambda) * base.value).epsilon(1e-12));

            // Reversing both clouds leaves the value unchanged and reverses the histogram.
            const ParameterCloud<double> tr = t.rowwise().reverse(), sr = s.rowwise().reverse();
            CHECK(specificity(tr, sr, lambda, m).value == doctest::Approx(base.value).epsilon(1e-13));
            auto h = voronoi_histogram(t, s, m).counts;
            std::reverse(h.begin(), h.end());
            CHECK(voronoi_histogram(tr, sr, m).counts == h);

            ParameterCloud<double> more(dim, 9);
            more << t, to_eigen(oracle::random_cloud(rng, 1, static_cast<std::size_t>(dim)), dim);
            CHECK(specificity(more, s, lambda, m).value <= base.value);
        }
    }
}

TEST_CASE("results do not depend on the thread count")
{
    std::mt19937_64 rng(12);
    const auto t = to_eigen(oracle::random_cloud(rng, 12, 6), 6);
    const auto s = to_eigen(oracle::random_cloud(rng, 5000, 6), 6);
    set_thread_count(1);
    const auto a = specificity(t, s, 1.0, Metric::l1);
    const auto ha = voronoi_histogram(t, s, Metric::l1);
    set_thread_count(4);
    const auto b = specificity(t, s, 1.0, Metric::l1);
    const auto hb = voronoi_histogram(t, s, Metric::l1);
    set_thread_count(1);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    CHECK(ha.counts == hb.counts);
}

TEST_CASE("parameter-space specificity equals image-space specificity")
{
    const RegisteredSetD set = testing::random_set(31, 6, 12, 10);
    const TextureModelD model = build_model(set);
    const auto training = project_set(model, set);
    const auto samples = sample_model(model, 200, 5);

    // Image-space route: reconstruct each sample and scan the raw training images.
    oracle::Cloud images, recon;
    for (const auto& img : set.images)
        images.emplace_back(img.values().data(), img.values().data() + img.size());
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
        const RasterImage r = reconstruct(model, samples.col(j));
        recon.emplace_back(r.values().data(), r.values().data() + r.size());
    }
    const auto expected = oracle::nn_measure(images, recon, 1.0, false);
    const auto r = specificity(training, samples, 1.0, Metric::l2);
    CHECK(std::abs(r.value - expected.value) / expected.value <= 1e-8);
}
