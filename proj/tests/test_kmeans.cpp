#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cliloop/kmeans.hpp"
#include "cliloop/rng.hpp"
#include "test_util.hpp"

using namespace cliloop;

namespace {

// Minimum within-cluster sum of squares over every nonempty 2-partition.
double best_two_partition_wcss(const Matrix& rows) {
    const std::size_t m = rows.rows();
    const std::size_t dim = rows.cols();
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 1; mask + 1 < (1ULL << m); ++mask) {
        Vector c0(dim, 0.0), c1(dim, 0.0);
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = rows.row_ptr(i);
            if (mask & (1ULL << i)) {
                for (std::size_t k = 0; k < dim; ++k) c1[k] += row[k];
                ++n1;
            } else {
                for (std::size_t k = 0; k < dim; ++k) c0[k] += row[k];
                ++n0;
            }
        }
        for (double& v : c0) v /= static_cast<double>(n0);
        for (double& v : c1) v /= static_cast<double>(n1);
        double ss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const Vector& c = (mask & (1ULL << i)) ? c1 : c0;
            ss += squared_distance(rows.row_ptr(i), c.data(), dim);
        }
        best = std::min(best, ss);
    }
    return best;
}

Matrix two_blobs(Rng& rng, std::size_t per_blob, std::size_t dim, double sep) {
    Matrix rows(2 * per_blob, dim);
    for (std::size_t i = 0; i < 2 * per_blob; ++i) {
        const double offset = i < per_blob ? 0.0 : sep;
        for (std::size_t k = 0; k < dim; ++k) rows(i, k) = offset + 0.05 * rng.normal();
    }
    return rows;
}

}  // namespace

TEST_CASE("kmeans: single cluster is the row mean") {
    Rng rng(1);
    Matrix rows = testutil::random_matrix(rng, 6, 3);
    ClusterSet set = kmeans_rows(rows, 1, 42);
    REQUIRE(set.clusters.size() == 1);
    CHECK(set.clusters[0].member_rows.size() == 6);
    for (std::size_t k = 0; k < 3; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 6; ++i) mean += rows(i, k);
        mean /= 6.0;
        CHECK(set.clusters[0].center[k] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("kmeans: q == m with distinct rows gives singletons centered on themselves") {
    Rng rng(2);
    Matrix rows = testutil::random_matrix(rng, 5, 4);
    ClusterSet set = kmeans_rows(rows, 5, 7);
    REQUIRE(set.clusters.size() == 5);
    for (std::size_t c = 0; c < 5; ++c) {
        REQUIRE(set.clusters[c].member_rows.size() == 1);
        CHECK(set.clusters[c].member_rows[0] == c);  // ordered by first member
        CHECK(set.clusters[c].center == rows.row(c));
    }
}

TEST_CASE("kmeans: q >= m groups duplicate rows together") {
    Matrix rows(4, 2);
    rows.set_row(0, {1.0, 0.0});
    rows.set_row(1, {0.0, 1.0});
    rows.set_row(2, {1.0, 0.0});
    rows.set_row(3, {0.0, 1.0});
    ClusterSet set = kmeans_rows(rows, 10, 0);
    REQUIRE(set.clusters.size() == 2);
    CHECK(set.clusters[0].member_rows == std::vector<std::size_t>{0, 2});
    CHECK(set.clusters[1].member_rows == std::vector<std::size_t>{1, 3});
}

TEST_CASE("kmeans: two well-separated blobs recover the optimal 2-partition") {
    Rng rng(3);
    Matrix rows = two_blobs(rng, 4, 3, 5.0);
    ClusterSet set = kmeans_rows(rows, 2, 11);
    REQUIRE(set.clusters.size() == 2);
    const double wcss = within_cluster_ss(rows, set);
    const double best = best_two_partition_wcss(rows);
    CHECK(wcss == doctest::Approx(best).epsilon(1e-9));
    // blob membership exactly
    for (std::size_t i : set.clusters[0].member_rows) CHECK(i < 4);
    for (std::size_t i : set.clusters[1].member_rows) CHECK(i >= 4);
}

TEST_CASE("kmeans: assignment is a nearest-center fixpoint at convergence") {
    Rng rng(4);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::size_t m = 4 + rng.uniform_int(6);
        Matrix rows = testutil::random_matrix(rng, m, 3);
        ClusterSet set = kmeans_rows(rows, 2, seed);
        for (std::size_t c = 0; c < set.clusters.size(); ++c) {
            for (std::size_t i : set.clusters[c].member_rows) {
                const double own =
                    squared_distance(rows.row_ptr(i), set.clusters[c].center.data(), 3);
                for (const Cluster& other : set.clusters) {
                    const double alt =
                        squared_distance(rows.row_ptr(i), other.center.data(), 3);
                    CHECK(own <= alt + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("kmeans: centers are the componentwise means of their members") {
    Rng rng(5);
    Matrix rows = testutil::random_matrix(rng, 9, 4);
    ClusterSet set = kmeans_rows(rows, 3, 21);
    std::size_t total = 0;
    for (const Cluster& cl : set.clusters) {
        total += cl.member_rows.size();
        for (std::size_t k = 0; k < 4; ++k) {
            double mean = 0.0;
            for (std::size_t i : cl.member_rows) mean += rows(i, k);
            mean /= static_cast<double>(cl.member_rows.size());
            CHECK(cl.center[k] == doctest::Approx(mean).epsilon(1e-12));
        }
    }
    CHECK(total == 9);  // partition
}

TEST_CASE("kmeans: probability rows keep unit-sum centers") {
    Rng rng(6);
    Matrix rows(8, 5);
    for (std::size_t i = 0; i < 8; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            rows(i, k) = rng.uniform() + 0.01;
            sum += rows(i, k);
        }
        for (std::size_t k = 0; k < 5; ++k) rows(i, k) /= sum;
    }
    ClusterSet set = kmeans_rows(rows, 3, 9);
    for (const Cluster& cl : set.clusters) {
        double sum = 0.0;
        for (double v : cl.center) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("kmeans: identical seeds give identical clusterings") {
    Rng rng(7);
    Matrix rows = testutil::random_matrix(rng, 12, 3);
    ClusterSet a = kmeans_rows(rows, 4, 555);
    ClusterSet b = kmeans_rows(rows, 4, 555);
    REQUIRE(a.clusters.size() == b.clusters.size());
    for (std::size_t c = 0; c < a.clusters.size(); ++c) {
        CHECK(a.clusters[c].member_rows == b.clusters[c].member_rows);
        CHECK(a.clusters[c].center == b.clusters[c].center);
    }
}

TEST_CASE("kmeans: all-identical rows stay in valid clusters") {
    Matrix rows(6, 3, 0.25);
    ClusterSet set = kmeans_rows(rows, 2, 3);
    std::size_t total = 0;
    for (const Cluster& cl : set.clusters) total += cl.member_rows.size();
    CHECK(total == 6);
}

TEST_CASE("top_k_classes: descending value with index tie-break") {
    Vector center = {0.1, 0.4, 0.1, 0.4};
    CHECK(top_k_classes(center, 2) == std::vector<int>{1, 3});
    CHECK(top_k_classes(center, 3) == std::vector<int>{1, 3, 0});
    CHECK(top_k_classes(center, 10) == std::vector<int>{1, 3, 0, 2});  // clamped
}
