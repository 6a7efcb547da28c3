#include "polyseq/io.hpp"

#include "json.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace polyseq {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string serialize_sequence(const BoundedSequence& seq) {
    std::string out = "BOUNDS " + std::to_string(seq.bounds().max_degree) + " " +
                      format_double(seq.bounds().lead_bound) + " " +
                      format_double(seq.bounds().coeff_bound) + "\n";
    for (const auto& op : seq.ops()) {
        switch (op.kind) {
        case OpKind::P1: out += "P1\n"; break;
        case OpKind::P2: out += "P2\n"; break;
        case OpKind::P2Scaled: out += "P2/12\n"; break;
        case OpKind::P1Shifted:
            out += "P1+ " + format_double(op.shift.real()) + " " +
                   format_double(op.shift.imag()) + "\n";
            break;
        case OpKind::General: {
            out += "GEN";
            for (const auto& c : op.coeffs)
                out += " " + format_double(c.real()) + " " + format_double(c.imag());
            out += "\n";
            break;
        }
        }
    }
    return out;
}

BoundedSequence parse_sequence(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw ParseError("line " + std::to_string(lineno) + ": " + what);
    };

    if (!std::getline(in, line)) throw ParseError("empty sequence file");
    lineno = 1;
    std::istringstream hdr(line);
    std::string tag;
    SequenceBounds b;
    if (!(hdr >> tag >> b.max_degree >> b.lead_bound >> b.coeff_bound) || tag != "BOUNDS")
        fail("expected 'BOUNDS d K M' header");

    BoundedSequence seq(b);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        try {
            if (kind == "P1") {
                seq.append(PolyOp::p1());
            } else if (kind == "P2") {
                seq.append(PolyOp::p2());
            } else if (kind == "P2/12") {
                seq.append(PolyOp::p2_scaled());
            } else if (kind == "P1+") {
                double re, im;
                if (!(ls >> re >> im)) fail("P1+ needs two reals");
                seq.append(PolyOp::p1_shifted({re, im}));
            } else if (kind == "GEN") {
                std::vector<cplx> coeffs;
                double re, im;
                while (ls >> re >> im) coeffs.emplace_back(re, im);
                if (coeffs.empty()) fail("GEN needs coefficients");
                seq.append(PolyOp::general(std::move(coeffs)));
            } else {
                fail("unknown op '" + kind + "'");
            }
        } catch (const std::invalid_argument& e) {
            fail(e.what());
        }
    }
    return seq;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t plan_hash(const BoundedSequence& seq) {
    return fnv1a(serialize_sequence(seq));
}

std::string cloud_csv(const PointCloud& cloud) {
    std::string out = "id,re,im,flags\n";
    char buf[128];
    for (const auto& p : cloud.points) {
        std::snprintf(buf, sizeof buf, "%" PRId64 ",%.17g,%.17g,%" PRIx64 "\n", p.id,
                      p.state.z.real(), p.state.z.imag(), p.flags);
        out += buf;
    }
    return out;
}

PointCloud parse_cloud_csv(const std::string& text) {
    PointCloud cloud;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue;
        CloudPoint p;
        double re, im;
        if (std::sscanf(line.c_str(), "%" SCNd64 ",%lg,%lg,%" SCNx64, &p.id, &re, &im,
                        &p.flags) != 4)
            throw ParseError("cloud csv line " + std::to_string(lineno));
        p.z0 = p.state.z = {re, im};
        if (p.flags & kFlagEscaped) p.state.escaped_at = 0;
        cloud.points.push_back(p);
    }
    return cloud;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
        };
        trim(key);
        trim(val);
        try {
            if (key == "resolution") cfg.resolution = std::stoi(val);
            else if (key == "mc_points") cfg.mc_points = std::stoll(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "max_stages") cfg.max_stages = std::stoi(val);
            else if (key == "escape_radius_override") cfg.escape_radius_override = std::stod(val);
            else if (key == "petal_threshold") cfg.petal_threshold = std::stod(val);
            else if (key == "s_max") cfg.s_max = std::stoll(val);
            else if (key == "t_max") cfg.t_max = std::stoll(val);
            else if (key == "u_max") cfg.u_max = std::stoll(val);
            else if (key == "output_dir") cfg.output_dir = val;
            else throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw ParseError("config line " + std::to_string(lineno) + ": bad value");
        }
    }
    if (cfg.resolution < 8 || cfg.max_stages < 1 || cfg.s_max < 1 || cfg.t_max < 1 ||
        cfg.u_max < 1 || cfg.mc_points < 16)
        throw ParseError("config violates invariants");
    return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    out += "resolution=" + std::to_string(cfg.resolution) + "\n";
    out += "mc_points=" + std::to_string(cfg.mc_points) + "\n";
    out += "seed=" + std::to_string(cfg.seed) + "\n";
    out += "max_stages=" + std::to_string(cfg.max_stages) + "\n";
    if (cfg.escape_radius_override)
        out += "escape_radius_override=" + format_double(*cfg.escape_radius_override) + "\n";
    out += "petal_threshold=" + format_double(cfg.petal_threshold) + "\n";
    out += "s_max=" + std::to_string(cfg.s_max) + "\n";
    out += "t_max=" + std::to_string(cfg.t_max) + "\n";
    out += "u_max=" + std::to_string(cfg.u_max) + "\n";
    out += "output_dir=" + cfg.output_dir + "\n";
    return out;
}

std::vector<unsigned char> render_escape_map(const BoundedSequence& seq,
                                             const RenderSpec& spec, double radius) {
    if (spec.px_w < 16 || spec.px_h < 16 || spec.half_width <= 0)
        throw std::invalid_argument("render spec violates invariants");
    std::int64_t horizon = std::min<std::int64_t>(spec.time_index + spec.max_horizon,
                                                  seq.size());
    if (spec.time_index < 0 || spec.time_index > seq.size())
        throw std::invalid_argument("render time index out of range");

    double half_h = spec.half_width * double(spec.px_h) / double(spec.px_w);
    std::vector<unsigned char> rgb(std::size_t(spec.px_w) * std::size_t(spec.px_h) * 3);
    for (int y = 0; y < spec.px_h; ++y) {
        for (int x = 0; x < spec.px_w; ++x) {
            cplx z = spec.center +
                     cplx{(2.0 * (x + 0.5) / spec.px_w - 1.0) * spec.half_width,
                          (1.0 - 2.0 * (y + 0.5) / spec.px_h) * half_h};
            std::int64_t escaped_after = -1;
            for (std::int64_t m = spec.time_index; m < horizon; ++m) {
                if (std::abs(z) > radius) {
                    escaped_after = m - spec.time_index;
                    break;
                }
                z = eval(seq.op(m + 1), z);
            }
            if (escaped_after < 0 && std::abs(z) > radius)
                escaped_after = horizon - spec.time_index;
            unsigned char r = 0, g = 0, b = 0;
            if (escaped_after >= 0) {
                if (spec.palette == RenderSpec::Palette::Binary) {
                    r = g = b = 255;
                } else {
                    double frac = double(escaped_after) /
                                  double(std::max<std::int64_t>(1, horizon - spec.time_index));
                    auto v = (unsigned char)(55.0 + 200.0 * (1.0 - frac));
                    r = v;
                    g = (unsigned char)(v / 2);
                    b = (unsigned char)(255 - v / 2);
                }
            }
            std::size_t idx = (std::size_t(y) * std::size_t(spec.px_w) + std::size_t(x)) * 3;
            rgb[idx] = r;
            rgb[idx + 1] = g;
            rgb[idx + 2] = b;
        }
    }
    return rgb;
}

void write_ppm(const std::filesystem::path& path, int w, int h,
               const std::vector<unsigned char>& rgb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P6\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string stage_log_json(const StageState& state) {
    nlohmann::json j;
    j["plan_hash"] = plan_hash(state.plan.seq);
    j["seed"] = state.cfg.seed;
    j["sequence_length"] = state.plan.seq.size();
    auto sets = index_sets(state);
    nlohmann::json stages = nlohmann::json::array();
    for (std::size_t i = 0; i < state.records.size(); ++i) {
        const auto& r = state.records[i];
        nlohmann::json js;
        js["n"] = r.params.n;
        js["s"] = r.params.s;
        js["t"] = r.params.t;
        js["u"] = r.params.u;
        js["c"] = {r.params.c.real(), r.params.c.imag()};
        js["eps"] = r.params.eps;
        js["leak_s"] = r.leak_s;
        js["b_top_measure"] = r.b_top;
        js["margins"] = r.margins;
        js["index_set"] = sets[i];
        stages.push_back(js);
    }
    j["stages"] = stages;
    nlohmann::json ws = nlohmann::json::array();
    for (const auto& w : state.witnesses) {
        ws.push_back({{"k", w.k},
                      {"stage", w.stage},
                      {"w", {w.w.real(), w.w.imag()}},
                      {"anchor_time", w.anchor_time},
                      {"dist", w.dist},
                      {"escape_time", w.escape_time}});
    }
    j["witnesses"] = ws;
    return j.dump(2);
}

}  // namespace polyseq
