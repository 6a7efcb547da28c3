#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "polyseq/poly.hpp"
#include "polyseq/rng.hpp"
#include "polyseq/sets.hpp"

#include <cmath>

using namespace polyseq;

namespace {
constexpr double kDiscArea = M_PI / 9.0;
}

TEST_CASE("grid seeding: 4 cells inside the unit disc at resolution 2") {
    PointCloud c = seed_disc_grid({}, 1.0, 2);
    CHECK(c.points.size() == 4);
    CHECK(c.cell_area == doctest::Approx(1.0));
    for (const auto& p : c.points) CHECK(std::abs(p.z0) < 1.0);
}

TEST_CASE("grid seeding converges to the disc area") {
    PointCloud hi = seed_disc_grid({}, 1.0 / 3.0, 512);
    double est = double(hi.points.size()) * hi.cell_area;
    CHECK(std::abs(est - kDiscArea) < 0.005 * kDiscArea);

    PointCloud lo = seed_disc_grid({}, 1.0 / 3.0, 256);
    double est_lo = double(lo.points.size()) * lo.cell_area;
    CHECK(std::abs(est - est_lo) < 0.01 * kDiscArea);
}

TEST_CASE("Monte Carlo seeding is exactly calibrated in total") {
    PointCloud c = seed_disc_mc({}, 1.0 / 3.0, 40000, 99);
    auto all = measure(c, [](const CloudPoint&) { return true; });
    CHECK(all.value == doctest::Approx(kDiscArea).epsilon(1e-12));
    CHECK(all.n_points == 40000);
    for (const auto& p : c.points) CHECK(std::abs(p.z0) < 1.0 / 3.0);
}

TEST_CASE("measure: empty and half-plane predicates") {
    PointCloud c = seed_disc_grid({}, 1.0 / 3.0, 512);
    auto none = measure(c, [](const CloudPoint&) { return false; });
    CHECK(none.value == 0.0);
    auto half = measure(c, [](const CloudPoint& p) { return p.z0.real() > 0; });
    CHECK(std::abs(half.value - kDiscArea / 2) < 0.01 * kDiscArea);
    auto js = none.to_json();
    CHECK(js.find("\"value\"") != std::string::npos);
    CHECK(js.find("GRID") != std::string::npos);
}

TEST_CASE("survival set of z^2 at radius 2 is the disc of radius sqrt(2)") {
    BoundedSequence seq({2, 2.0, 0.0});
    seq.append(PolyOp::general({{0, 0}, {0, 0}, {1, 0}}));
    PointCloud c = seed_disc_grid({}, 2.0, 512);
    c = survival_set(seq, 0, 1, std::move(c), 2.0);
    auto alive = measure(c, [](const CloudPoint& p) { return !(p.flags & kFlagEscaped); });
    CHECK(std::abs(alive.value - 2 * M_PI) < 0.02 * 2 * M_PI);
}

TEST_CASE("survival set: n = m keeps everything alive") {
    BoundedSequence seq(four_map_bounds());
    seq.append(PolyOp::p1(), 4);
    PointCloud c = seed_disc_mc({}, 3.0, 5000, 3);
    c = survival_set(seq, 0, 0, std::move(c), 13.0);
    auto alive = measure(c, [](const CloudPoint& p) { return !(p.flags & kFlagEscaped); });
    CHECK(alive.n_points == 5000);
    CHECK(alive.value == doctest::Approx(M_PI * 9.0));
}

TEST_CASE("survival flags are monotone in the horizon") {
    Rng rng(13, 0);
    BoundedSequence seq(four_map_bounds());
    for (int i = 0; i < 12; ++i) {
        switch (rng.index(4)) {
        case 0: seq.append(PolyOp::p1()); break;
        case 1: seq.append(PolyOp::p2()); break;
        case 2: seq.append(PolyOp::p1_shifted(rng.in_disc({}, 0.33))); break;
        default: seq.append(PolyOp::p2_scaled()); break;
        }
    }
    PointCloud at6 = seed_disc_mc({}, 3.4, 20000, 5);
    PointCloud at12 = at6;
    at6 = survival_set(seq, 0, 6, std::move(at6), 13.0);
    at12 = survival_set(seq, 0, 12, std::move(at12), 13.0);
    for (std::size_t i = 0; i < at6.points.size(); ++i)
        if (at6.points[i].flags & kFlagEscaped)
            CHECK((at12.points[i].flags & kFlagEscaped) != 0);
}

TEST_CASE("grand orbit flags: critical hits and clean orbits") {
    BoundedSequence seq(four_map_bounds());
    seq.append(PolyOp::p1(), 30);

    PointCloud c;
    c.cell_area = 1.0;
    CloudPoint crit;
    crit.id = 0;
    crit.z0 = crit.state.z = {-0.5, 0};
    CloudPoint origin;
    origin.id = 1;
    origin.z0 = origin.state.z = {0, 0};
    c.points = {crit, origin};
    c = survival_set(seq, 0, 30, std::move(c), 13.0);
    c = grand_orbit_flags(seq, std::move(c), 1e-300);
    CHECK((c.points[0].flags & kFlagCrit) != 0); // dz factor exactly 0 at -1/2
    CHECK((c.points[1].flags & kFlagCrit) == 0); // dz = (1/2)^k stays positive

    // random disc points stay clear of the critical point over a P1 block
    PointCloud r = seed_disc_mc({}, 1.0 / 3.0, 4000, 11);
    r = survival_set(seq, 0, 30, std::move(r), 13.0);
    r = grand_orbit_flags(seq, std::move(r), 1e-300);
    for (const auto& p : r.points) {
        CHECK((p.flags & kFlagCrit) == 0);
        // oracle: the orbit never meets the critical point
        cplx z = p.z0;
        double closest = 1e9;
        for (int k = 0; k < 30; ++k) {
            closest = std::min(closest, std::abs(z - cplx{-0.5, 0}));
            z = eval(PolyOp::p1(), z);
        }
        CHECK(closest > 1e-6);
    }
}

TEST_CASE("petal membership formula") {
    PetalModel petal{5.0};
    CHECK(petal_contains(petal, {-0.1, 0})); // Re(-1/z) = 10
    CHECK_FALSE(petal_contains(petal, {0.1, 0}));
    CHECK_FALSE(petal_contains(petal, {0, 0}));
    CHECK_FALSE(petal_contains(petal, {-0.5, 0.0})); // Re(-1/z) = 2 < 5
}

TEST_CASE("verify_petal calibrates the threshold") {
    auto ok = verify_petal(PetalModel{5.0}, 10000, 100, 21);
    CHECK(ok.ok);
    auto bad = verify_petal(PetalModel{0.01}, 2000, 60, 21);
    CHECK_FALSE(bad.ok);
    CHECK_THROWS_AS(verified_petal(0.01, 21), std::invalid_argument);
    PetalModel good = verified_petal(5.0, 21);
    CHECK(good.threshold == 5.0);

    // every petal point lands inside D(0,1/3) under P2/12
    Rng rng(22, 0);
    for (int i = 0; i < 10000; ++i) {
        cplx z = rng.in_disc({-0.1, 0}, 0.1);
        if (!petal_contains(good, z)) continue;
        CHECK(std::abs(eval(PolyOp::p2_scaled(), z)) < 1.0 / 3.0);
    }
}

TEST_CASE("lemma 2.1: survival leakage decays geometrically") {
    auto res = lemma21_decay(16, four_map_bounds(), 8, 256, 77);
    CHECK(res.lambda_hat > 1.0);
    CHECK(res.slope < 0.0); // the non-increasing shape, as a fitted trend
    CHECK(res.leaked.front() > res.leaked.back());
    CHECK(res.c_hat > 0.0);
    CHECK(res.horizons.front() == 4);
}

TEST_CASE("lemma 2.1: the deep survival core stays inside every horizon") {
    double R = escape_radius(four_map_bounds());
    PointCloud c = seed_disc_grid({}, 2.6, 128);
    for (const auto& p : c.points) {
        cplx z = p.z0;
        bool khat = true;
        for (int k = 0; k < 200 && khat; ++k) {
            z = eval(PolyOp::p1(), z);
            if (std::abs(z) > kFamilyEscapeRadius) khat = false;
        }
        if (!khat) continue;
        z = p.z0;
        for (int k = 0; k < 32; ++k) {
            z = eval(PolyOp::p1(), z);
            CHECK(std::abs(z) <= R);
        }
    }
}

TEST_CASE("lemma 2.1: fit failure once the decay is below the grid quantum") {
    CHECK_THROWS_AS(lemma21_decay(32, four_map_bounds(), 8, 64, 77, 8, 28), FitError);
    CHECK_THROWS_AS(lemma21_decay(3, four_map_bounds(), 8, 64, 77), std::invalid_argument);
}

TEST_CASE("lemma 2.2: cusp leakage shrinks along P1 iterates") {
    PetalModel petal{5.0};
    PointCloud V = seed_disc_grid({}, 1.0 / 3.0, 256);
    auto leaks = lemma22_shrink(V, petal, {10, 20, 40, 80});
    for (std::size_t i = 0; i + 1 < leaks.size(); ++i) CHECK(leaks[i + 1] <= leaks[i]);
    CHECK(leaks.back() < 0.01 * kDiscArea);

    auto deep = lemma22_shrink(V, petal, {200});
    CHECK(deep[0] <= 4.0 * V.cell_area); // statistically zero

    // an already-petal-shaped V with an external designated point leaks nothing
    PointCloud small = seed_disc_mc({-0.15, 0}, 0.03, 3000, 9);
    auto zero = lemma22_shrink(small, petal, {0}, cplx{-0.05, 0});
    CHECK(zero[0] == 0.0);
}
