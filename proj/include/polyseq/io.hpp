#pragma once

#include "polyseq/construction.hpp"
#include "polyseq/poly.hpp"
#include "polyseq/sets.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace polyseq {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Line-oriented sequence format: a `BOUNDS d K M` header, then one op
// per line (`P1`, `P2`, `P1+ <re> <im>`, `P2/12`, `GEN <re> <im> ...`).
// Decimal literals use 17 significant digits, so round-trips are exact.
std::string serialize_sequence(const BoundedSequence& seq);
BoundedSequence parse_sequence(const std::string& text);

std::uint64_t fnv1a(const std::string& s);
std::uint64_t plan_hash(const BoundedSequence& seq);

std::string cloud_csv(const PointCloud& cloud);
PointCloud parse_cloud_csv(const std::string& text);

struct RunConfig {
    int resolution{512};
    std::int64_t mc_points{100000};
    std::uint64_t seed{1};
    int max_stages{2};
    std::optional<double> escape_radius_override{};
    double petal_threshold{5.0};
    std::int64_t s_max{4096};
    std::int64_t t_max{4096};
    std::int64_t u_max{std::int64_t(1) << 20};
    std::string output_dir{"out"};
};

/// Flat key=value config, one pair per line, '#' comments.
RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& cfg);

struct RenderSpec {
    std::int64_t time_index{0};
    cplx center{};
    double half_width{2.0};
    int px_w{256};
    int px_h{256};
    std::int64_t max_horizon{256};
    enum class Palette { EscapeTime, Binary } palette{Palette::EscapeTime};
};

/// Per-pixel escape-time classification; returns 8-bit RGB, row-major
/// from the top scanline.
std::vector<unsigned char> render_escape_map(const BoundedSequence& seq,
                                             const RenderSpec& spec, double radius);

void write_ppm(const std::filesystem::path& path, int w, int h,
               const std::vector<unsigned char>& rgb);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

std::string format_double(double v); // 17 significant digits

}  // namespace polyseq
