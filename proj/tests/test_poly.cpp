#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "polyseq/poly.hpp"
#include "polyseq/rng.hpp"

#include <cmath>

using namespace polyseq;

namespace {

PolyOp random_family_op(Rng& rng) {
    switch (rng.index(4)) {
    case 0: return PolyOp::p1();
    case 1: return PolyOp::p2();
    case 2: return PolyOp::p1_shifted(rng.in_disc({}, 1.0 / 3.0 - 1e-9));
    default: return PolyOp::p2_scaled();
    }
}

BoundedSequence random_family_sequence(Rng& rng, std::int64_t len) {
    BoundedSequence seq(four_map_bounds());
    for (std::int64_t i = 0; i < len; ++i) seq.append(random_family_op(rng));
    return seq;
}

} // namespace

TEST_CASE("eval matches the closed forms") {
    CHECK(eval(PolyOp::p1(), {0, 0}) == cplx{0, 0});
    CHECK(std::abs(eval(PolyOp::p1(), {-0.5, 0}) - cplx{-0.125, 0}) < 1e-15);
    CHECK(std::abs(eval(PolyOp::p2_scaled(), {1, 0}) - cplx{1.0 / 6.0, 0}) < 1e-15);
    CHECK(std::abs(eval(PolyOp::p2(), {0.25, 0}) - cplx{0.3125, 0}) < 1e-15);
    cplx c{0.1, -0.2};
    CHECK(std::abs(eval(PolyOp::p1_shifted(c), {0.3, 0.1}) -
                   (0.5 * cplx{0.3, 0.1} * cplx{1.3, 0.1} + c)) < 1e-15);
    auto sq = PolyOp::general({{0, 0}, {0, 0}, {1, 0}});
    CHECK(std::abs(eval(sq, {3, 4}) - cplx{3, 4} * cplx{3, 4}) < 1e-12);
}

TEST_CASE("eval_deriv matches the closed forms") {
    CHECK(eval_deriv(PolyOp::p1(), {-0.5, 0}) == cplx{0, 0}); // critical point of P1
    CHECK(eval_deriv(PolyOp::p2(), {0, 0}) == cplx{1, 0});    // parabolic multiplier
    CHECK(std::abs(eval_deriv(PolyOp::p1(), {0, 0}) - cplx{0.5, 0}) < 1e-15);
    auto cubic = PolyOp::general({{1, 0}, {2, 0}, {3, 0}, {4, 0}});
    // d/dz (1 + 2z + 3z^2 + 4z^3) = 2 + 6z + 12z^2
    cplx z{0.5, -0.25};
    CHECK(std::abs(eval_deriv(cubic, z) - (2.0 + 6.0 * z + 12.0 * z * z)) < 1e-12);
}

TEST_CASE("finite difference cross-check of eval_deriv") {
    Rng rng(11, 0);
    for (int i = 0; i < 200; ++i) {
        PolyOp op = random_family_op(rng);
        cplx z = rng.in_disc({}, 2.0);
        double h = 1e-6;
        cplx fd = (eval(op, z + cplx{h, 0}) - eval(op, z - cplx{h, 0})) / (2.0 * h);
        CHECK(std::abs(fd - eval_deriv(op, z)) < 1e-6);
    }
}

TEST_CASE("escape_radius closed form") {
    CHECK(escape_radius({2, 1.0, 0.0}) == 2.0);
    CHECK(escape_radius({2, 2.0, 0.5}) == 6.0);
    CHECK(escape_radius(four_map_bounds()) == 48.0);
}

TEST_CASE("escape_radius oracle: |P(z)| >= 2|z| beyond R") {
    // dense sampling of admissible polynomials and moduli at and beyond R
    for (SequenceBounds b : {SequenceBounds{2, 2.0, 0.5}, SequenceBounds{2, 1.0, 0.0},
                             four_map_bounds(), SequenceBounds{3, 4.0, 2.0}}) {
        double R = escape_radius(b);
        Rng rng(17, std::uint64_t(b.max_degree) + std::uint64_t(b.lead_bound * 8));
        for (int i = 0; i < 12000; ++i) {
            int d = 2 + int(rng.index(b.max_degree - 1));
            std::vector<cplx> coeffs(std::size_t(d) + 1);
            for (int k = 0; k < d; ++k)
                coeffs[std::size_t(k)] = b.coeff_bound > 0 ? rng.in_disc({}, b.coeff_bound) : cplx{};
            if (b.lead_bound > 1.0) {
                double lead = std::exp(rng.uniform(std::log(1.0 / b.lead_bound),
                                                   std::log(b.lead_bound)));
                double th = rng.uniform(0, 2 * M_PI);
                coeffs[std::size_t(d)] = {lead * std::cos(th), lead * std::sin(th)};
            } else {
                coeffs[std::size_t(d)] = {1.0, 0.0}; // K = 1: monic only
            }
            PolyOp op = PolyOp::general(coeffs);
            REQUIRE(admits(b, op));
            double r = R * std::exp(rng.uniform(0.0, 1.0));
            double phi = rng.uniform(0, 2 * M_PI);
            cplx z{r * std::cos(phi), r * std::sin(phi)};
            CHECK(std::abs(eval(op, z)) >= 2.0 * std::abs(z));
        }
    }
}

TEST_CASE("four-map bounds admit exactly the family") {
    SequenceBounds b = four_map_bounds();
    CHECK(admits(b, PolyOp::p1()));
    CHECK(admits(b, PolyOp::p2()));
    CHECK(admits(b, PolyOp::p1_shifted({0.33, 0})));
    CHECK(admits(b, PolyOp::p2_scaled()));
    // the paper's lemma hypothesis M = 1/2 would reject P2 = z + z^2
    CHECK_FALSE(admits({2, 12.0, 0.5}, PolyOp::p2()));
    CHECK_FALSE(admits(b, PolyOp::general({{0, 0}, {0, 0}, {13.0, 0}})));
    CHECK_FALSE(admits(b, PolyOp::general({{1.5, 0}, {0, 0}, {1.0, 0}})));
}

TEST_CASE("bounded sequence validates at append time") {
    BoundedSequence seq(four_map_bounds());
    seq.append(PolyOp::p1());
    CHECK_THROWS_AS(seq.append(PolyOp::general({{0, 0}, {0, 0}, {12.5, 0}})),
                    std::invalid_argument);
    CHECK(seq.size() == 1);
    CHECK_THROWS_AS(seq.op(2), std::out_of_range);
    CHECK_THROWS_AS(PolyOp::p1_shifted({0.4, 0}), std::invalid_argument);
}

TEST_CASE("compose_orbit identity and chain rule") {
    Rng rng(5, 1);
    BoundedSequence seq = random_family_sequence(rng, 12);

    OrbitState s;
    s.z = {0.05, 0.02};
    s.m = 4;
    OrbitState same = compose_orbit(seq, 4, 4, s, 13.0);
    CHECK(same.z == s.z);
    CHECK(same.dz == s.dz);

    BoundedSequence two(four_map_bounds());
    two.append(PolyOp::p1());
    two.append(PolyOp::p1());
    OrbitState st;
    st.z = {0.1, 0};
    OrbitState out = compose_orbit(two, 0, 2, st, 13.0);
    cplx z1 = eval(PolyOp::p1(), {0.1, 0});
    CHECK(std::abs(out.z - eval(PolyOp::p1(), z1)) < 1e-15);
    CHECK(std::abs(out.dz - eval_deriv(PolyOp::p1(), {0.1, 0}) * eval_deriv(PolyOp::p1(), z1)) <
          1e-15);

    CHECK_THROWS_AS(compose_orbit(two, 0, 3, st, 13.0), std::out_of_range);
}

TEST_CASE("chain-rule split consistency") {
    Rng rng(7, 2);
    for (int trial = 0; trial < 300; ++trial) {
        BoundedSequence seq = random_family_sequence(rng, 20);
        std::int64_t n = 20;
        std::int64_t m = rng.index(n);
        std::int64_t k = m + rng.index(n - m + 1);
        OrbitState s;
        s.z = rng.in_disc({}, 0.3);
        s.m = m;
        OrbitState direct = compose_orbit(seq, m, n, s, 13.0);
        OrbitState split = compose_orbit(seq, k, n, compose_orbit(seq, m, k, s, 13.0), 13.0);
        if (direct.escaped_at || split.escaped_at) {
            CHECK(direct.escaped_at == split.escaped_at);
            continue;
        }
        CHECK(std::abs(direct.z - split.z) <= 1e-12 * std::max(1.0, std::abs(direct.z)));
        CHECK(std::abs(direct.dz - split.dz) <= 1e-12 * std::max(1.0, std::abs(direct.dz)));
    }
}

TEST_CASE("family escape: |z| > 13 escapes past 1e6 within 40 steps") {
    Rng rng(23, 3);
    int n_trials = 10000;
    for (int i = 0; i < n_trials; ++i) {
        cplx z = rng.in_annulus(13.0 + 1e-9, 20.0);
        bool escaped = false;
        for (int k = 0; k < 40 && !escaped; ++k) {
            z = eval(random_family_op(rng), z);
            if (std::abs(z) > 1e6) escaped = true;
        }
        CHECK(escaped);
    }
}

TEST_CASE("orbit past |z| = 14 under the family flags escaped") {
    Rng rng(29, 4);
    BoundedSequence seq = random_family_sequence(rng, 40);
    OrbitState s;
    s.z = {14.0, 0.0};
    OrbitState out = compose_orbit(seq, 0, 40, s, 13.0);
    CHECK(out.escaped_at.has_value());
}

TEST_CASE("P1 contracts the unit disc") {
    Rng rng(31, 5);
    for (int i = 0; i < 20000; ++i) {
        cplx z = rng.in_disc({}, 1.0);
        if (std::abs(z) < 1e-12) continue;
        CHECK(std::abs(eval(PolyOp::p1(), z)) < std::abs(z));
    }
}

TEST_CASE("P1 iterates stay injective on D(0,1/3)") {
    Rng rng(37, 6);
    for (int i = 0; i < 10000; ++i) {
        cplx z = rng.in_disc({}, 1.0 / 3.0);
        cplx w = rng.in_disc({}, 1.0 / 3.0);
        if (std::abs(z - w) < 1e-9) continue;
        int iters = 1 + int(rng.index(50));
        for (int k = 0; k < iters; ++k) {
            z = eval(PolyOp::p1(), z);
            w = eval(PolyOp::p1(), w);
        }
        CHECK(std::abs(z - w) > 0.0);
    }
}

TEST_CASE("derivative overflow saturates instead of aborting") {
    BoundedSequence seq(four_map_bounds());
    for (int i = 0; i < 600; ++i) seq.append(PolyOp::p2());
    OrbitState s;
    s.z = {2.5, 0.0};
    OrbitState out = compose_orbit(seq, 0, 600, s, 1e308);
    CHECK(out.deriv_overflow);
}

// ------------------------------------------------------------------
// parabolic kernel
// ------------------------------------------------------------------

TEST_CASE("parabolic block advance tracks exact iteration") {
    Rng rng(41, 7);
    for (int trial = 0; trial < 40; ++trial) {
        // petal-side and generic small points
        cplx z = rng.in_disc({-2e-4, 0}, 1.5e-4);
        std::int64_t steps = 2000 + rng.index(6000);
        auto fast = advance_p2_block(z, {1, 0}, steps, 13.0);

        cplx ze = z, dze{1, 0};
        bool escaped = false;
        for (std::int64_t k = 0; k < steps && !escaped; ++k) {
            dze *= 1.0 + 2.0 * ze;
            ze = ze * (1.0 + ze);
            if (std::abs(ze) > 13.0) escaped = true;
        }
        CHECK(fast.escaped_at_offset.has_value() == escaped);
        if (!escaped) {
            CHECK(std::abs(fast.z - ze) <= 1e-6 * std::max(std::abs(ze), 1e-12));
            CHECK(std::abs(fast.dz - dze) <= 2e-3 * std::abs(dze));
        }
    }
}

TEST_CASE("parabolic block split consistency") {
    Rng rng(43, 8);
    for (int trial = 0; trial < 30; ++trial) {
        cplx z = rng.in_disc({-1e-5, 0}, 8e-6);
        std::int64_t total = 40000 + rng.index(100000);
        std::int64_t cut = rng.index(total);
        auto direct = advance_p2_block(z, {1, 0}, total, 13.0);
        auto first = advance_p2_block(z, {1, 0}, cut, 13.0);
        REQUIRE_FALSE(first.escaped_at_offset.has_value());
        auto second = advance_p2_block(first.z, first.dz, total - cut, 13.0);
        REQUIRE_FALSE(direct.escaped_at_offset.has_value());
        REQUIRE_FALSE(second.escaped_at_offset.has_value());
        CHECK(std::abs(direct.z - second.z) <= 1e-9 * std::max(std::abs(direct.z), 1e-30));
        CHECK(std::abs(direct.dz - second.dz) <= 1e-9 * std::abs(direct.dz));
    }
}

TEST_CASE("p2 escape step counts near the repelling axis") {
    auto t = p2_escape_steps({0.01, 0}, 2.0, 100000);
    REQUIRE(t.has_value());
    CHECK(*t > 60);
    CHECK(*t < 140);
    CHECK_FALSE(p2_escape_steps({-0.01, 0}, 2.0, 100000).has_value());
    CHECK_FALSE(p2_escape_steps({0, 0}, 2.0, 100000).has_value());
    auto t156 = p2_escape_steps({0.01, 0}, 156.0, 100000);
    REQUIRE(t156.has_value());
    CHECK(*t156 >= *t);
    CHECK(*t156 < *t + 20);
}

TEST_CASE("filled Julia membership for P2") {
    CHECK(p2_filled_julia_contains({0, 0}));
    CHECK(p2_filled_julia_contains({-0.1, 0}));
    CHECK(p2_filled_julia_contains({-1.0, 0}));   // maps straight to 0
    CHECK(p2_filled_julia_contains({0, 0.1}));    // upward drift enters the basin
    CHECK_FALSE(p2_filled_julia_contains({0.1, 0}));
    CHECK_FALSE(p2_filled_julia_contains({2.1, 0}));
    CHECK_FALSE(p2_filled_julia_contains({-2.5, 0}));

    // the repelling tongue has width ~ |z|^2: inside escapes, outside stays
    double x = 1e-3;
    CHECK_FALSE(p2_filled_julia_contains({x, 0.1 * x * x}));
    CHECK(p2_filled_julia_contains({x, 3.0 * x * x}));
}

TEST_CASE("attracting zone certificate is forward invariant") {
    Rng rng(47, 9);
    for (int i = 0; i < 5000; ++i) {
        cplx w{rng.uniform(2.0, 50.0), rng.uniform(-40.0, 40.0)};
        cplx z = -1.0 / w;
        cplx z2 = eval(PolyOp::p2(), z);
        CHECK((-1.0 / z2).real() > 2.0);
    }
}
