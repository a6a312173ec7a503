#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "polypconnect/edge.hpp"

using namespace polyp;
using testutil::throws_category;

namespace {

RasterImage constant_image(int size, double value) {
    return RasterImage(size, size, value);
}

// white square on black
RasterImage square_image(int size, int x0, int y0, int x1, int y1) {
    RasterImage img(size, size, 0.0);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 1.0;
    return img;
}

int count_edges(const EdgeMap& e) {
    int n = 0;
    for (auto v : e.data) n += v;
    return n;
}

// Chebyshev distance from (y,x) to the boundary of [x0,x1) x [y0,y1)
double boundary_distance(int y, int x, int x0, int y0, int x1, int y1) {
    double best = 1e9;
    auto cheb = [](int dy, int dx) {
        return double(std::max(std::abs(dy), std::abs(dx)));
    };
    for (int bx = x0; bx < x1; ++bx) {
        best = std::min(best, cheb(y - y0, x - bx));
        best = std::min(best, cheb(y - (y1 - 1), x - bx));
    }
    for (int by = y0; by < y1; ++by) {
        best = std::min(best, cheb(y - by, x - x0));
        best = std::min(best, cheb(y - by, x - (x1 - 1)));
    }
    return best;
}

} // namespace

TEST_CASE("constant image has no edges") {
    for (double v : {0.0, 0.3, 1.0}) {
        const EdgeMap e = extract_edges(constant_image(24, v));
        CHECK(count_edges(e) == 0);
        CHECK(e.width == 24);
        CHECK(e.height == 24);
    }
}

TEST_CASE("square contour is detected within 2 px and closed") {
    const int x0 = 8, y0 = 10, x1 = 24, y1 = 22;
    const RasterImage img = square_image(32, x0, y0, x1, y1);
    const EdgeMap e = extract_edges(img, CannyParams{1.0, 0.2, 0.5});

    int on = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (e.at(y, x)) {
                ++on;
                CHECK(boundary_distance(y, x, x0, y0, x1, y1) <= 2.0);
            }
    CHECK(on > 0);

    // interior away from the boundary stays edge-free
    for (int y = y0 + 3; y < y1 - 3; ++y)
        for (int x = x0 + 3; x < x1 - 3; ++x) CHECK(e.at(y, x) == 0);

    // every boundary pixel has a nearby detected edge: the contour is closed
    for (int x = x0; x < x1; ++x) {
        bool near_top = false, near_bottom = false;
        for (int y = 0; y < 32; ++y)
            for (int xx = std::max(0, x - 2); xx <= std::min(31, x + 2); ++xx) {
                if (e.at(y, xx) && std::abs(y - y0) <= 2) near_top = true;
                if (e.at(y, xx) && std::abs(y - (y1 - 1)) <= 2) near_bottom = true;
            }
        CHECK(near_top);
        CHECK(near_bottom);
    }
}

TEST_CASE("larger sigma finds no more edges on a noisy image") {
    RasterImage img(32, 32);
    Rng rng(4242);
    for (auto& v : img.data) v = rng.uniform();
    const int fine = count_edges(extract_edges(img, CannyParams{1.0, 0.2, 0.5}));
    const int coarse = count_edges(extract_edges(img, CannyParams{4.0, 0.2, 0.5}));
    CHECK(coarse <= fine);
    CHECK(fine > 0);
}

TEST_CASE("edge parameter validation") {
    const RasterImage img = constant_image(8, 0.5);
    CHECK(throws_category(ErrorCategory::invalid_argument,
                          [&] { extract_edges(img, CannyParams{0.0, 0.2, 0.5}); }));
    CHECK(throws_category(ErrorCategory::invalid_argument,
                          [&] { extract_edges(img, CannyParams{1.0, 0.0, 0.5}); }));
    CHECK(throws_category(ErrorCategory::invalid_argument,
                          [&] { extract_edges(img, CannyParams{1.0, 0.2, 1.5}); }));
}

TEST_CASE("polyp edges are the full edges restricted to the mask") {
    const RasterImage img = square_image(32, 6, 6, 26, 26);
    const EdgeMap full = extract_edges(img);

    BinaryMask none(32, 32), all(32, 32, 1);
    CHECK(count_edges(extract_polyp_edges(img, none)) == 0);
    CHECK(extract_polyp_edges(img, all).data == full.data);

    // left half only
    const BinaryMask left = testutil::rect_mask(32, 0, 0, 16, 32);
    const EdgeMap half = extract_polyp_edges(img, left);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            CHECK(half.at(y, x) == (left.at(y, x) ? full.at(y, x) : 0));

    const BinaryMask wrong(8, 8);
    CHECK(throws_category(ErrorCategory::shape, [&] { extract_polyp_edges(img, wrong); }));
}

TEST_CASE("merge_edges selects polyp edges inside the mask") {
    EdgeMap clean(8, 8), polyp(8, 8);
    for (int i = 0; i < 8; ++i) {
        clean.at(i, 0) = 1;
        polyp.at(i, 7) = 1;
    }
    BinaryMask none(8, 8), all(8, 8, 1);
    CHECK(merge_edges(clean, polyp, none).data == clean.data);
    CHECK(merge_edges(clean, polyp, all).data == polyp.data);

    // checkerboard mask over constant maps reproduces the mask
    EdgeMap ones(8, 8, 1), zeros(8, 8, 0);
    BinaryMask checker(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) checker.at(y, x) = static_cast<uint8_t>((x + y) % 2);
    const EdgeMap merged = merge_edges(zeros, ones, checker);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) CHECK(merged.at(y, x) == checker.at(y, x));

    const BinaryMask wrong(4, 4);
    CHECK(throws_category(ErrorCategory::shape, [&] { merge_edges(clean, polyp, wrong); }));
}

TEST_CASE("edge algebra identities hold on exhaustive 4x4 binary inputs") {
    // merge: for every (clean, polyp, mask) cell combination, elementwise select
    for (int bits = 0; bits < 8; ++bits) {
        const uint8_t c = bits & 1, p = (bits >> 1) & 1, m = (bits >> 2) & 1;
        EdgeMap clean(4, 4, c), polyp(4, 4, p);
        BinaryMask mask(4, 4, m);
        const EdgeMap merged = merge_edges(clean, polyp, mask);
        for (auto v : merged.data) CHECK(v == (m ? p : c));
    }
}
