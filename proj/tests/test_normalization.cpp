#include <doctest.h>

#include "gti/errors.hpp"
#include "gti/normalization.hpp"

using namespace gti;

TEST_SUITE_BEGIN("normalization");

TEST_CASE("binary mean gap: worked example") {
    Matrix scores(4, 1);
    scores(0, 0) = 1.0;
    scores(1, 0) = 1.0;
    scores(2, 0) = -1.0;
    scores(3, 0) = -1.0;
    auto term = compute_normalization(scores, {1, 1, 0, 0}, NormalizationMode::binary_mean_gap);
    CHECK(term.value == doctest::Approx(2.0));
}

TEST_CASE("constant model degenerates") {
    Matrix scores(4, 1, 0.7);
    CHECK_THROWS_AS(
        compute_normalization(scores, {1, 1, 0, 0}, NormalizationMode::binary_mean_gap),
        DegenerateNormalizationError);
}

TEST_CASE("multiclass margin agrees with direct enumeration") {
    // 3-class scores on a fixed dataset; oracle loops over the dataset itself
    Matrix scores(5, 3);
    std::vector<int> labels = {0, 1, 2, 1, 0};
    double vals[5][3] = {{2.0, -1.0, 0.5},
                         {0.0, 3.0, 1.0},
                         {-0.5, 0.5, 2.5},
                         {1.0, 2.0, 0.0},
                         {4.0, 1.0, 1.0}};
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c) scores(r, c) = vals[r][c];

    double acc = 0.0;
    for (int r = 0; r < 5; ++r) {
        double others = 0.0;
        for (int c = 0; c < 3; ++c)
            if (c != labels[r]) others += vals[r][c];
        acc += vals[r][labels[r]] - others / 2.0;
    }
    double oracle = std::abs(acc / 5.0);

    auto term = compute_normalization(scores, labels, NormalizationMode::multiclass_margin);
    CHECK(term.value == doctest::Approx(oracle).epsilon(1e-12));

    auto global = compute_normalization(scores, labels, NormalizationMode::global);
    CHECK(global.value == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(global.mode == NormalizationMode::global);
}

TEST_CASE("per-image mode records one strictly positive term per sample") {
    Matrix scores(2, 2);
    scores(0, 0) = 2.0;
    scores(0, 1) = 0.0;
    scores(1, 0) = -1.0;
    scores(1, 1) = 3.0;
    auto term = compute_normalization(scores, {0, 1}, NormalizationMode::per_image);
    REQUIRE(term.per_image.size() == 2);
    CHECK(term.per_image[0] == doctest::Approx(2.0));
    CHECK(term.per_image[1] == doctest::Approx(4.0));
    CHECK(term.for_image(1) == doctest::Approx(4.0));

    Matrix tied(1, 2, 1.0);
    CHECK_THROWS_AS(compute_normalization(tied, {0}, NormalizationMode::per_image),
                    DegenerateNormalizationError);
}

TEST_SUITE_END();
