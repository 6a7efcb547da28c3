#include "polyseq/construction.hpp"
#include "polyseq/io.hpp"
#include "polyseq/line_fields.hpp"
#include "polyseq/poly.hpp"
#include "polyseq/sets.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace polyseq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCapExhausted = 3;

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed,
                      std::optional<std::string> out_dir) {
    RunConfig cfg;
    if (!path.empty()) cfg = parse_config(read_file(path));
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;
    return cfg;
}

ConstructConfig to_construct_config(const RunConfig& cfg) {
    ConstructConfig cc;
    cc.seed = cfg.seed;
    cc.cloud_points = cfg.mc_points;
    cc.base_points = cfg.mc_points;
    cc.max_stages = cfg.max_stages;
    cc.radius = cfg.escape_radius_override.value_or(kFamilyEscapeRadius);
    cc.petal_threshold = cfg.petal_threshold;
    cc.s_max = cfg.s_max;
    cc.t_max = cfg.t_max;
    cc.u_max = cfg.u_max;
    return cc;
}

int map_stage_error(const StageError& e) {
    switch (e.code) {
    case StageErrorCode::HypothesisViolation:
    case StageErrorCode::CertFail:
        return kExitCheckFailed;
    default:
        return kExitCapExhausted;
    }
}

int cmd_construct(const RunConfig& cfg, double mu_theta, int mu_winding) {
    StageState state = [&] {
        try {
            return construct_plan(to_construct_config(cfg));
        } catch (const StageError& e) {
            std::cerr << "construct failed: " << e.what() << " (detail " << e.detail
                      << ")\n";
            std::exit(map_stage_error(e));
        }
    }();

    fs::path out(cfg.output_dir);
    write_file(out / "sequence.txt", serialize_sequence(state.plan.seq));
    write_file(out / "stages.json", stage_log_json(state));
    write_file(out / "cloud_base.csv", cloud_csv(state.base.cloud));
    for (std::size_t i = 0; i < state.discs.size(); ++i)
        write_file(out / ("cloud_stage" + std::to_string(i + 1) + ".csv"),
                   cloud_csv(state.discs[i].cloud));

    std::int64_t total = 0;
    for (const auto& d : state.discs) total += d.cloud.size();
    std::int64_t stride = std::max<std::int64_t>(1, total / 40000);
    auto fam = assemble_family(state, mu_theta, mu_winding, stride);
    write_file(out / "family.csv", family_csv(fam));

    try {
        auto cert = certify_positive_area(state);
        nlohmann::json j;
        for (const auto& e : cert.entries)
            j["stages"].push_back({{"n", e.n},
                                   {"value", e.value},
                                   {"bound", e.bound},
                                   {"sigma3", e.sigma3},
                                   {"khat_leak", e.khat_leak},
                                   {"khat_bound", e.khat_bound}});
        j["ok"] = cert.ok;
        write_file(out / "certificate.json", j.dump(2));
    } catch (const StageError& e) {
        std::cerr << "certification failed: " << e.what() << "\n";
        return kExitCheckFailed;
    }

    std::cout << "construct: " << state.records.size() << " stages, sequence length "
              << state.plan.seq.size() << ", outputs in " << out.string() << "\n";
    return kExitOk;
}

int cmd_render(const std::string& seq_path, const RenderSpec& spec, double radius,
               const std::string& out_path) {
    BoundedSequence seq = parse_sequence(read_file(seq_path));
    auto rgb = render_escape_map(seq, spec, radius);
    write_ppm(out_path, spec.px_w, spec.px_h, rgb);
    std::cout << "render: wrote " << out_path << "\n";
    return kExitOk;
}

int cmd_verify(const std::string& seq_path, const std::string& family_path,
               const RunConfig& cfg) {
    BoundedSequence seq = parse_sequence(read_file(seq_path));
    LineFieldFamily fam = parse_family_csv(read_file(family_path));
    if (fam.plan_hash != plan_hash(seq)) {
        std::cerr << "verify: family and sequence refer to different plans\n";
        return kExitUsage;
    }

    StageState state = [&] {
        try {
            return construct_plan(to_construct_config(cfg));
        } catch (const StageError& e) {
            std::cerr << "verify: reconstruction failed: " << e.what() << "\n";
            std::exit(map_stage_error(e));
        }
    }();
    if (plan_hash(state.plan.seq) != plan_hash(seq)) {
        std::cerr << "verify: config does not reproduce the sequence file\n";
        return kExitUsage;
    }

    nlohmann::json verdict;
    bool ok = true;

    auto inv = verify_invariance(fam, state, 10000, cfg.seed);
    verdict["invariance"] = nlohmann::json::parse(inv.to_json());
    if (inv.max_residual >= 1e-9 || inv.max_modulus_dev >= 1e-9) ok = false;

    // Theorem 1.1 classification stability across the structural slices
    std::int64_t flips = 0;
    {
        const auto& times = state.struct_times;
        for (const auto& p : state.base.cloud.points) {
            bool was_alive = true;
            for (std::int64_t t : times) {
                bool alive = state.base.slices.at(t)[std::size_t(p.id)].alive;
                if (alive && !was_alive) ++flips;
                was_alive = alive;
            }
        }
        verdict["classification_flips"] = flips;
        if (flips != 0) ok = false;
    }

    try {
        auto cert = certify_positive_area(state);
        for (const auto& e : cert.entries)
            verdict["area"].push_back({{"n", e.n},
                                       {"value", e.value},
                                       {"bound", e.bound},
                                       {"sigma3", e.sigma3}});
    } catch (const StageError& e) {
        verdict["area_error"] = e.what();
        ok = false;
    }

    verdict["pass"] = ok;
    fs::path out(cfg.output_dir);
    write_file(out / "verdict.json", verdict.dump(2));
    std::cout << verdict.dump(2) << "\n";
    return ok ? kExitOk : kExitCheckFailed;
}

int cmd_lemmas(const RunConfig& cfg) {
    nlohmann::json j;
    bool ok = true;
    try {
        auto l21 = lemma21_decay(32, four_map_bounds(), 8, cfg.resolution, cfg.seed);
        j["lemma21"] = {{"lambda_hat", l21.lambda_hat},
                        {"c_hat", l21.c_hat},
                        {"slope", l21.slope},
                        {"horizons", l21.horizons},
                        {"leaked", l21.leaked}};
        if (!(l21.lambda_hat > 1.0)) ok = false;
    } catch (const FitError& e) {
        std::cerr << "lemmas: " << e.what()
                  << " (raise resolution to resolve the decay)\n";
        return kExitCapExhausted;
    }

    PetalModel petal = verified_petal(cfg.petal_threshold, cfg.seed);
    PointCloud V = seed_disc_grid({}, 1.0 / 3.0, cfg.resolution);
    std::vector<std::int64_t> ms{10, 20, 40, 80};
    auto shrink = lemma22_shrink(V, petal, ms);
    j["lemma22"] = {{"m", ms}, {"leak", shrink}};
    for (std::size_t i = 0; i + 1 < shrink.size(); ++i)
        if (shrink[i + 1] > shrink[i]) ok = false;

    j["pass"] = ok;
    fs::path out(cfg.output_dir);
    write_file(out / "lemmas.json", j.dump(2));
    std::cout << j.dump(2) << "\n";
    return ok ? kExitOk : kExitCheckFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"non-autonomous polynomial sequence toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--seed", seed, "RNG seed, overrides the config file");
    app.add_option("--out", out_dir, "output directory");

    auto* construct = app.add_subcommand("construct", "run the stage construction");
    std::optional<int> max_stages;
    std::optional<std::int64_t> mc_points;
    double mu_theta = 0.0;
    int mu_winding = 0;
    construct->add_option("--max-stages", max_stages, "number of stages");
    construct->add_option("--mc-points", mc_points, "Monte Carlo samples per cloud");
    construct->add_option("--mu-theta", mu_theta, "initial line-field angle");
    construct->add_option("--mu-winding", mu_winding, "initial line-field winding");

    auto* render = app.add_subcommand("render", "escape-time image of a sequence file");
    std::string seq_path, out_path = "render.ppm", palette = "ESCAPE_TIME";
    RenderSpec spec;
    double center_re = 0, center_im = 0, radius = kFamilyEscapeRadius;
    render->add_option("seq", seq_path, "sequence file")->required();
    render->add_option("--time", spec.time_index, "start time index");
    render->add_option("--center-re", center_re, "window center, real part");
    render->add_option("--center-im", center_im, "window center, imaginary part");
    render->add_option("--half-width", spec.half_width, "window half width");
    render->add_option("--width", spec.px_w, "pixels across");
    render->add_option("--height", spec.px_h, "pixels down");
    render->add_option("--horizon", spec.max_horizon, "max iteration horizon");
    render->add_option("--radius", radius, "escape radius");
    render->add_option("--palette", palette, "ESCAPE_TIME or BINARY");
    render->add_option("--image", out_path, "output .ppm path");

    auto* verify = app.add_subcommand("verify", "check a sequence/family pair");
    std::string v_seq, v_family;
    verify->add_option("seq", v_seq, "sequence file")->required();
    verify->add_option("family", v_family, "line-field family file")->required();

    auto* lemmas = app.add_subcommand("lemmas", "measure-decay experiments");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        RunConfig cfg = load_config(config_path, seed, out_dir);
        if (construct->parsed()) {
            if (max_stages) {
                if (*max_stages < 1) {
                    std::cerr << "usage error: max_stages must be >= 1\n";
                    return kExitUsage;
                }
                cfg.max_stages = *max_stages;
            }
            if (mc_points) {
                if (*mc_points < 16) {
                    std::cerr << "usage error: mc_points must be >= 16\n";
                    return kExitUsage;
                }
                cfg.mc_points = *mc_points;
            }
            return cmd_construct(cfg, mu_theta, mu_winding);
        }
        if (render->parsed()) {
            spec.center = {center_re, center_im};
            if (palette == "BINARY") spec.palette = RenderSpec::Palette::Binary;
            else if (palette != "ESCAPE_TIME") return kExitUsage;
            return cmd_render(seq_path, spec, radius, out_path);
        }
        if (verify->parsed()) return cmd_verify(v_seq, v_family, cfg);
        if (lemmas->parsed()) return cmd_lemmas(cfg);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return map_stage_error(e);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
    return kExitUsage;
}
