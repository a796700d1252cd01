#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "incpref/geometry.hpp"
#include "test_support.hpp"

using namespace incpref;

TEST_CASE("minkowski sum") {
    CHECK(minkowski_sum(Box::interval(0, 1), Box::interval(2, 3)) == Box::interval(2, 4));
    const Box a({-1.5, 2.0}, {0.5, 7.0});
    CHECK(minkowski_sum(a, Box::point({0.0, 0.0})) == a);
    CHECK(minkowski_sum(Box({0, 1}, {1, 2}), Box({1, 0}, {1, 3})) == Box({1, 1}, {2, 5}));
    CHECK_THROWS_AS(minkowski_sum(Box::interval(0, 1), a), std::invalid_argument);
    CHECK_THROWS_AS(minkowski_sum(MaybeBox{}, MaybeBox{a}), std::invalid_argument);
}

TEST_CASE("intersection") {
    CHECK(*intersect(Box::interval(0, 2), Box::interval(1, 3)) == Box::interval(1, 2));
    CHECK_FALSE(intersect(Box::interval(0, 1), Box::interval(2, 3)).has_value());
    const Box a({0, 1}, {3, 4});
    CHECK(*intersect(a, a) == a);
    CHECK_FALSE(intersect(MaybeBox{}, MaybeBox{a}).has_value());
    // touching boxes meet in a degenerate box
    CHECK(intersect(Box::interval(0, 1), Box::interval(1, 2))->is_singleton());
}

TEST_CASE("bounding hull") {
    const std::vector<Box> nested{Box::interval(0, 1), Box::interval(0, 2)};
    CHECK(bounding_hull(nested) == Box::interval(0, 2));
    const Box a({0, 1}, {1, 2});
    CHECK(bounding_hull(std::vector<Box>{a}) == a);
    CHECK(bounding_hull(std::vector<Box>{a, Box({0, 1}, {1.5, 2})}) == Box({0, 1}, {1.5, 2}));
    CHECK_THROWS(bounding_hull(std::vector<Box>{}));
    const std::vector<Box> disjoint{Box::interval(0, 1), Box::interval(2, 3)};
    CHECK(bounding_hull(disjoint) == Box::interval(0, 3));
    CHECK_THROWS_AS(bounding_hull(disjoint, true), std::logic_error);
    CHECK_NOTHROW(bounding_hull(nested, true));
}

TEST_CASE("projection") {
    const Box unit({0, 0}, {1, 1});
    CHECK(project(std::vector<double>{3, 0}, unit) == std::vector<double>{1, 0});
    CHECK(project(std::vector<double>{0.3, 0.7}, unit) == std::vector<double>{0.3, 0.7});
    CHECK(project(std::vector<double>{-1, 5}, Box({0, 0}, {2, 2})) == std::vector<double>{0, 2});
}

TEST_CASE("hausdorff distance") {
    CHECK(hausdorff(Box::interval(0, 1), Box::interval(0, 2)) == doctest::Approx(1.0));
    const Box a({0.5, -2}, {1, 3});
    CHECK(hausdorff(a, a) == 0.0);
    CHECK(hausdorff(Box({0, 0}, {1, 1}), Box({0, 0}, {2, 1})) == doctest::Approx(1.0));
    // two corners apart in both coordinates
    CHECK(hausdorff(Box({0, 0}, {1, 1}), Box({0, 0}, {4, 5})) == doctest::Approx(5.0));
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(hausdorff(Box::interval(0, inf), Box::interval(1, inf)) == doctest::Approx(1.0));
    CHECK(std::isinf(hausdorff(Box::interval(0, inf), Box::interval(0, 1))));
}

TEST_CASE("box invariants on random triples") {
    std::mt19937_64 g(7);
    for (std::size_t d : {1u, 2u}) {
        for (int rep = 0; rep < 500; ++rep) {
            const Box a = testsupport::random_box(g, d), b = testsupport::random_box(g, d),
                      c = testsupport::random_box(g, d);
            CHECK(minkowski_sum(a, b) == minkowski_sum(b, a));
            const Box l = minkowski_sum(minkowski_sum(a, b), c), r = minkowski_sum(a, minkowski_sum(b, c));
            for (std::size_t k = 0; k < d; ++k) {
                CHECK(l.lo(k) == doctest::Approx(r.lo(k)).epsilon(1e-12));
                CHECK(l.hi(k) == doctest::Approx(r.hi(k)).epsilon(1e-12));
            }
            const double ab = hausdorff(a, b), ba = hausdorff(b, a);
            CHECK(std::abs(ab - ba) < 1e-12);
            CHECK(hausdorff(a, a) == 0.0);
            if (!(a == b)) CHECK(ab > 0.0);
            CHECK(hausdorff(a, c) <= ab + hausdorff(b, c) + 1e-12);
            const double shifted = hausdorff(minkowski_sum(a, c), minkowski_sum(b, c));
            CHECK(shifted <= ab + 1e-12);
            CHECK(std::abs(shifted - ab) < 1e-9);
        }
    }
}

TEST_CASE("hull of a nested chain is its largest element") {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Box> chain{Box({0, 0}, {0.1, 0.1})};
    for (int k = 0; k < 20; ++k) {
        const Box& last = chain.back();
        chain.push_back(Box({last.lo(0) - u(g), last.lo(1) - u(g)}, {last.hi(0) + u(g), last.hi(1)}));
    }
    CHECK(bounding_hull(chain, true) == chain.back());
}

TEST_CASE("invalid boxes are rejected") {
    CHECK_THROWS_AS(Box({1.0}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(Box({0.0, 0.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(Box(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(hausdorff(Box::interval(0, 1), Box({0, 0}, {1, 1})), std::invalid_argument);
}
