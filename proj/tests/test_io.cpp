#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "polyseq/io.hpp"
#include "polyseq/poly.hpp"
#include "polyseq/rng.hpp"

#include <cmath>

using namespace polyseq;

TEST_CASE("sequence round-trips bit-exactly") {
    BoundedSequence seq(four_map_bounds());
    seq.append(PolyOp::p1());
    seq.append(PolyOp::p1_shifted({0.2543209876543210987, -0.12345678901234567}));
    seq.append(PolyOp::p2(), 3);
    seq.append(PolyOp::p2_scaled());
    seq.append(PolyOp::general({{0.1, -0.7}, {M_PI / 7, 0}, {1.0, 1e-17}}));

    std::string text = serialize_sequence(seq);
    BoundedSequence back = parse_sequence(text);
    REQUIRE(back.size() == seq.size());
    for (std::int64_t m = 1; m <= seq.size(); ++m) CHECK(back.op(m) == seq.op(m));
    CHECK(serialize_sequence(back) == text);
    CHECK(plan_hash(back) == plan_hash(seq));
}

TEST_CASE("sequence parse errors carry line numbers") {
    CHECK_THROWS_WITH_AS(parse_sequence("NOPE 2 12 1\nP1\n"),
                         doctest::Contains("line 1"), ParseError);
    CHECK_THROWS_WITH_AS(parse_sequence("BOUNDS 2 12 1\nP1\nWHAT\n"),
                         doctest::Contains("line 3"), ParseError);
    CHECK_THROWS_WITH_AS(parse_sequence("BOUNDS 2 12 1\nP1+ 0.5\n"),
                         doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_sequence("BOUNDS 2 12 1\nGEN\n"),
                         doctest::Contains("line 2"), ParseError);
    // bound violation at append time surfaces as a parse error with context
    CHECK_THROWS_AS(parse_sequence("BOUNDS 2 12 0.5\nP2\n"), ParseError);
}

TEST_CASE("cloud csv round-trips positions and flags") {
    PointCloud c = seed_disc_mc({0.1, -0.2}, 0.5, 500, 123);
    c.points[7].flags |= kFlagEscaped;
    c.points[9].flags |= kFlagCrit;
    std::string text = cloud_csv(c);
    PointCloud back = parse_cloud_csv(text);
    REQUIRE(back.points.size() == c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        CHECK(back.points[i].id == c.points[i].id);
        CHECK(back.points[i].state.z == c.points[i].state.z);
        CHECK(back.points[i].flags == c.points[i].flags);
    }
    CHECK(cloud_csv(back) == text);
}

TEST_CASE("config round-trips and validates") {
    RunConfig cfg;
    cfg.resolution = 256;
    cfg.mc_points = 54321;
    cfg.seed = 7;
    cfg.max_stages = 3;
    cfg.escape_radius_override = 13.0;
    cfg.petal_threshold = 4.5;
    cfg.u_max = 1 << 19;
    cfg.output_dir = "runs/a";
    RunConfig back = parse_config(serialize_config(cfg));
    CHECK(back.resolution == cfg.resolution);
    CHECK(back.mc_points == cfg.mc_points);
    CHECK(back.seed == cfg.seed);
    CHECK(back.max_stages == cfg.max_stages);
    CHECK(back.escape_radius_override == cfg.escape_radius_override);
    CHECK(back.petal_threshold == cfg.petal_threshold);
    CHECK(back.u_max == cfg.u_max);
    CHECK(back.output_dir == cfg.output_dir);

    CHECK_THROWS_AS(parse_config("resolution=4\n"), ParseError);
    CHECK_THROWS_AS(parse_config("max_stages=0\n"), ParseError);
    CHECK_THROWS_AS(parse_config("nonsense=1\n"), ParseError);
    CHECK_THROWS_AS(parse_config("resolution 512\n"), ParseError);

    RunConfig with_comment = parse_config("# a comment\nseed=9\n");
    CHECK(with_comment.seed == 9);
}

TEST_CASE("render: the z^2 sequence draws the unit disc") {
    BoundedSequence seq({2, 2.0, 0.0});
    auto z2 = PolyOp::general({{0, 0}, {0, 0}, {1, 0}});
    for (int i = 0; i < 50; ++i) seq.append(z2);

    RenderSpec spec;
    spec.center = {0, 0};
    spec.half_width = 2.0;
    spec.px_w = spec.px_h = 128;
    spec.max_horizon = 50;
    auto rgb = render_escape_map(seq, spec, 13.0);
    std::int64_t alive = 0;
    for (std::size_t i = 0; i < rgb.size(); i += 3)
        if (rgb[i] == 0 && rgb[i + 1] == 0 && rgb[i + 2] == 0) ++alive;
    double pixel_area = (4.0 / 128) * (4.0 / 128);
    CHECK(std::abs(double(alive) * pixel_area - M_PI) < 0.05 * M_PI);
}

TEST_CASE("render: minimal 16x16 image is deterministic") {
    BoundedSequence seq(four_map_bounds());
    seq.append(PolyOp::p1(), 8);
    RenderSpec spec;
    spec.px_w = spec.px_h = 16;
    spec.max_horizon = 8;
    auto a = render_escape_map(seq, spec, 13.0);
    auto b = render_escape_map(seq, spec, 13.0);
    CHECK(a == b);
    CHECK(a.size() == 16 * 16 * 3);
    RenderSpec bad = spec;
    bad.px_w = 8;
    CHECK_THROWS_AS(render_escape_map(seq, bad, 13.0), std::invalid_argument);
}

TEST_CASE("ppm files carry the P6 header") {
    std::vector<unsigned char> rgb(16 * 16 * 3, 100);
    auto path = std::filesystem::temp_directory_path() / "polyseq_test.ppm";
    write_ppm(path, 16, 16, rgb);
    std::string data = read_file(path);
    CHECK(data.rfind("P6\n16 16\n255\n", 0) == 0);
    CHECK(data.size() == 13 + rgb.size());
    std::filesystem::remove(path);
}
