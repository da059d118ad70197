#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "chaosae/datapipe.hpp"

using namespace chaosae;

namespace {

std::vector<double> row(const Matrix& m, Eigen::Index r) {
    std::vector<double> out(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
    return out;
}

std::vector<double> random_series(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> nd(0.0, 10.0);
    std::vector<double> s(n);
    for (auto& v : s) v = nd(rng);
    return s;
}

} // namespace

TEST(Normalize, MapsOntoUnitInterval) {
    const std::vector<double> s{2, 4, 6};
    auto [n, norm] = normalize(s);
    EXPECT_EQ(n, (std::vector<double>{0, 0.5, 1}));
    EXPECT_EQ(norm, (NormParams{2, 6}));
}

TEST(Normalize, DegenerateSeriesAreRejected) {
    EXPECT_THROW(normalize(std::vector<double>{3, 3, 3}), DegenerateInput);
    EXPECT_THROW(normalize(std::vector<double>{}), DegenerateInput);
}

TEST(Normalize, EndpointsAreAttained) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
        const auto s = random_series(rng, 2 + t * 7);
        auto [n, norm] = normalize(s);
        EXPECT_EQ(*std::min_element(n.begin(), n.end()), 0.0);
        EXPECT_EQ(*std::max_element(n.begin(), n.end()), 1.0);
    }
}

TEST(Denormalize, InvertsTheAffineMap) {
    EXPECT_EQ(denormalize(std::vector<double>{0, 0.5, 1}, {2, 6}), (std::vector<double>{2, 4, 6}));
    EXPECT_EQ(denormalize(std::vector<double>{0}, {-1, 1}), (std::vector<double>{-1}));
    EXPECT_THROW(denormalize(std::vector<double>{0}, {1, 1}), InvalidInput);
}

TEST(Denormalize, RoundTripProperty) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        const auto s = random_series(rng, 3 + t);
        auto [n, norm] = normalize(s);
        const auto back = denormalize(n, norm);
        for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(back[i], s[i], 1e-12 * std::max(1.0, std::fabs(s[i])));
    }
}

TEST(Split, EightyTwentyProportions) {
    const std::vector<double> s(250000, 1.0);
    auto [train, test] = split(s, 0.8);
    EXPECT_EQ(train.size(), 200000u);
    EXPECT_EQ(test.size(), 50000u);
}

TEST(Split, PartitionsInOrder) {
    std::vector<double> s(10);
    for (std::size_t i = 0; i < 10; ++i) s[i] = static_cast<double>(i);
    auto [train, test] = split(s, 0.8);
    EXPECT_EQ(train.size(), 8u);
    EXPECT_EQ(test.size(), 2u);
    train.insert(train.end(), test.begin(), test.end());
    EXPECT_EQ(train, s);
}

TEST(Split, EmptySegmentsAreRejected) {
    EXPECT_THROW(split(std::vector<double>{1, 2}, 0.1), InvalidInput);
    EXPECT_THROW(split(std::vector<double>{1, 2}, 1.0), InvalidInput);
    EXPECT_THROW(split(std::vector<double>{1, 2}, 0.0), InvalidInput);
}

TEST(MakeWindows, StrideOne) {
    const auto ds = make_windows(std::vector<double>{1, 2, 3, 4, 5}, 3, 1);
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(row(ds.windows, 0), (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(row(ds.windows, 1), (std::vector<double>{2, 3, 4}));
    EXPECT_EQ(row(ds.windows, 2), (std::vector<double>{3, 4, 5}));
}

TEST(MakeWindows, StrideTwoDropsTail) {
    const auto ds = make_windows(std::vector<double>{1, 2, 3, 4, 5}, 2, 2);
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(row(ds.windows, 0), (std::vector<double>{1, 2}));
    EXPECT_EQ(row(ds.windows, 1), (std::vector<double>{3, 4}));
}

TEST(MakeWindows, FullScaleTrainingCount) {
    EXPECT_EQ(window_count(200000, 30, 1), 199971u);
    EXPECT_EQ(make_windows(std::vector<double>(200000, 0.5), 30, 1).size(), 199971u);
}

TEST(MakeWindows, InvalidArguments) {
    EXPECT_THROW(make_windows(std::vector<double>{1, 2}, 3, 1), InvalidInput);
    EXPECT_THROW(make_windows(std::vector<double>{1, 2}, 1, 0), InvalidInput);
    EXPECT_THROW(make_windows(std::vector<double>{1, 2}, 0, 1), InvalidInput);
}

TEST(DelayEmbed, Examples) {
    const auto a = delay_embed(std::vector<double>{1, 2, 3, 4, 5}, {3, 1});
    ASSERT_EQ(a.rows(), 3);
    EXPECT_EQ(row(a, 0), (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(row(a, 2), (std::vector<double>{3, 4, 5}));
    const auto b = delay_embed(std::vector<double>{1, 2, 3, 4, 5, 6}, {2, 2});
    ASSERT_EQ(b.rows(), 4);
    EXPECT_EQ(row(b, 0), (std::vector<double>{1, 3}));
    EXPECT_EQ(row(b, 3), (std::vector<double>{4, 6}));
    const std::vector<double> s{4, 8, 15};
    const auto c = delay_embed(s, {1, 1});
    ASSERT_EQ(c.cols(), 1);
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(c(i, 0), s[static_cast<std::size_t>(i)]);
}

TEST(DelayEmbed, RowCountLaw) {
    std::mt19937_64 rng(3);
    for (std::size_t m = 1; m <= 9; ++m)
        for (std::size_t tau = 1; tau <= 5; ++tau) {
            const auto s = random_series(rng, 60);
            const auto e = delay_embed(s, {m, tau});
            EXPECT_EQ(static_cast<std::size_t>(e.rows()), 60 - (m - 1) * tau);
            const auto last = static_cast<std::size_t>(e.rows()) - 1;
            EXPECT_EQ(e(e.rows() - 1, e.cols() - 1), s[last + (m - 1) * tau]);
        }
}

TEST(DelayEmbed, TooShort) {
    EXPECT_THROW(delay_embed(std::vector<double>{1, 2}, {3, 1}), InvalidInput);
    EXPECT_THROW(delay_embed(std::vector<double>{1, 2, 3}, {0, 1}), InvalidInput);
}

TEST(Stitch, NonOverlappingIsConcatenation) {
    Matrix w(2, 3);
    w << 1, 2, 3, 4, 5, 6;
    EXPECT_EQ(stitch(w, 3), (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(Stitch, OverlapIsAveraged) {
    Matrix w(2, 2);
    w << 1, 2, 2, 3;
    EXPECT_EQ(stitch(w, 1), (std::vector<double>{1, 2, 3}));
    w << 1, 2, 4, 3;
    EXPECT_EQ(stitch(w, 1), (std::vector<double>{1, 3, 3}));
}

TEST(Stitch, ZeroWindowsRejected) { EXPECT_THROW(stitch(Matrix(0, 3), 1), InvalidInput); }

TEST(Stitch, GapsAreRejected) {
    Matrix w(2, 2);
    w << 1, 2, 3, 4;
    EXPECT_THROW(stitch(w, 3), InvalidInput);
}

TEST(Stitch, InvertsMakeWindowsForAllStridesUpToW) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
        std::uniform_int_distribution<std::size_t> nd(1, 300);
        const auto s = random_series(rng, nd(rng));
        std::uniform_int_distribution<std::size_t> wd(1, s.size());
        const auto w = wd(rng);
        std::uniform_int_distribution<std::size_t> sd(1, w);
        const auto stride = sd(rng);
        const auto ds = make_windows(s, w, stride);
        const auto back = stitch(ds.windows, stride);
        ASSERT_EQ(back.size(), (ds.size() - 1) * stride + w);
        for (std::size_t i = 0; i < back.size(); ++i) ASSERT_NEAR(back[i], s[i], 1e-12 * std::max(1.0, std::fabs(s[i])));
    }
}

TEST(PrepareTrainingData, NormalizesBeforeSplitting) {
    std::vector<double> s(100);
    for (std::size_t i = 0; i < 100; ++i) s[i] = static_cast<double>(i);
    const auto d = prepare_training_data(s, 5, 1, 0.8, 2);
    EXPECT_EQ(d.train.norm, (NormParams{0, 99}));
    EXPECT_EQ(d.test.norm, d.train.norm);
    EXPECT_EQ(d.train.size(), 76u);
    EXPECT_EQ(d.test.size(), 16u);
    EXPECT_EQ(d.test.source_coordinate, 2u);
    EXPECT_DOUBLE_EQ(d.test.windows(0, 0), 80.0 / 99.0);
}

TEST(DatasetFiles, RoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "chaosae_test_datapipe";
    std::filesystem::create_directories(dir);
    std::vector<double> s(40);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(0.3 * static_cast<double>(i)) / 3.0;
    const auto ds = make_windows(s, 7, 3, {-2.5, 1.0 / 3.0}, 1);
    write_dataset(ds, (dir / "d.csv").string(), (dir / "d.json").string());
    const auto back = read_dataset((dir / "d.csv").string(), (dir / "d.json").string());
    EXPECT_TRUE(back.windows == ds.windows);
    EXPECT_EQ(back.norm, ds.norm);
    EXPECT_EQ(back.stride, 3u);
    EXPECT_EQ(back.source_coordinate, 1u);
    std::filesystem::remove_all(dir);
}
