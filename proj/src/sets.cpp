#include "polyseq/sets.hpp"
#include "polyseq/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace polyseq {

PointCloud seed_disc_grid(cplx center, double radius, int resolution,
                          std::int64_t id_offset) {
    if (radius <= 0 || resolution < 2)
        throw std::invalid_argument("seed_disc_grid: bad radius or resolution");
    PointCloud cloud;
    double h = 2.0 * radius / resolution;
    cloud.cell_area = h * h;
    cloud.method = SampleMethod::Grid;
    cloud.region = "disc";
    std::int64_t id = id_offset;
    for (int iy = 0; iy < resolution; ++iy) {
        for (int ix = 0; ix < resolution; ++ix) {
            cplx p{-radius + (ix + 0.5) * h, -radius + (iy + 0.5) * h};
            if (std::abs(p) <= radius) {
                CloudPoint cp;
                cp.id = id++;
                cp.z0 = center + p;
                cp.state.z = cp.z0;
                cloud.points.push_back(cp);
            }
        }
    }
    return cloud;
}

PointCloud seed_disc_mc(cplx center, double radius, std::int64_t n_points,
                        std::uint64_t seed, std::int64_t id_offset) {
    if (radius <= 0 || n_points < 1)
        throw std::invalid_argument("seed_disc_mc: bad radius or point count");
    PointCloud cloud;
    cloud.cell_area = M_PI * radius * radius / double(n_points);
    cloud.method = SampleMethod::MonteCarlo;
    cloud.seed = seed;
    cloud.region = "disc";
    Rng rng(seed, 0x5eed);
    cloud.points.reserve(std::size_t(n_points));
    for (std::int64_t i = 0; i < n_points; ++i) {
        CloudPoint cp;
        cp.id = id_offset + i;
        cp.z0 = rng.in_disc(center, radius);
        cp.state.z = cp.z0;
        cloud.points.push_back(cp);
    }
    return cloud;
}

PointCloud seed_disc(cplx center, double radius, int resolution,
                     SampleMethod method, std::uint64_t seed) {
    if (method == SampleMethod::Grid)
        return seed_disc_grid(center, radius, resolution);
    auto n = std::int64_t(std::llround(M_PI / 4.0 * double(resolution) * double(resolution)));
    return seed_disc_mc(center, radius, std::max<std::int64_t>(n, 1), seed);
}

MeasureReport measure(const PointCloud& cloud,
                      const std::function<bool(const CloudPoint&)>& pred,
                      std::string flag_name, std::int64_t time_index) {
    std::int64_t count = 0;
    for (const auto& p : cloud.points)
        if (pred(p)) ++count;
    MeasureReport r;
    r.value = double(count) * cloud.cell_area;
    r.cell_area = cloud.cell_area;
    r.n_points = cloud.size();
    r.seed = cloud.seed;
    r.method = cloud.method;
    r.flag = std::move(flag_name);
    r.time_index = time_index;
    if (cloud.method == SampleMethod::MonteCarlo && cloud.size() > 0) {
        double p = double(count) / double(cloud.size());
        r.sigma = cloud.cell_area * std::sqrt(double(count) * (1.0 - p));
    } else {
        r.sigma = cloud.cell_area * std::sqrt(double(count)); // quantization proxy
    }
    return r;
}

std::string MeasureReport::to_json() const {
    nlohmann::json j;
    j["value"] = value;
    j["cell_area"] = cell_area;
    j["n_points"] = n_points;
    j["seed"] = seed;
    j["method"] = method == SampleMethod::Grid ? "GRID" : "MONTE_CARLO";
    j["flag"] = flag;
    j["time_index"] = time_index;
    j["sigma"] = sigma;
    return j.dump();
}

PointCloud survival_set(const BoundedSequence& seq, std::int64_t m, std::int64_t n,
                        PointCloud cloud, double radius) {
    for (auto& p : cloud.points) {
        if (p.flags & kFlagEscaped) continue;
        p.state = compose_orbit(seq, p.state.m, n, p.state, radius);
        if (p.state.escaped_at) p.flags |= kFlagEscaped;
        if (p.state.deriv_overflow) p.flags |= kFlagDerivOverflow;
    }
    (void)m;
    return cloud;
}

PointCloud grand_orbit_flags(const BoundedSequence& seq, PointCloud cloud,
                             double crit_tol) {
    (void)seq;
    for (auto& p : cloud.points)
        if (p.state.min_abs_dz < crit_tol) p.flags |= kFlagCrit;
    return cloud;
}

bool petal_contains(const PetalModel& petal, cplx z) {
    if (z == cplx{0}) return false;
    return (-1.0 / z).real() > petal.threshold;
}

PetalCheck verify_petal(const PetalModel& petal, std::int64_t n_samples,
                        std::int64_t n_steps, std::uint64_t seed) {
    if (n_samples < 1 || n_steps < 1)
        throw std::invalid_argument("verify_petal: need n_samples, n_steps >= 1");
    Rng rng(seed, 0xbe7a1);
    double rho = 1.0 / (2.0 * petal.threshold);
    PolyOp p2 = PolyOp::p2();
    PolyOp p2s = PolyOp::p2_scaled();
    for (std::int64_t i = 0; i < n_samples; ++i) {
        cplx start = rng.in_disc(cplx{-rho, 0.0}, rho);
        if (!petal_contains(petal, start)) continue; // boundary rounding
        if (std::abs(eval(p2s, start)) >= 1.0 / 3.0) return {false, start};
        cplx z = start;
        for (std::int64_t k = 0; k < n_steps; ++k) {
            z = eval(p2, z);
            if (!petal_contains(petal, z)) return {false, start};
        }
    }
    return {true, {}};
}

PetalModel verified_petal(double threshold, std::uint64_t seed) {
    if (threshold <= 0) throw std::invalid_argument("petal threshold must be positive");
    PetalModel petal{threshold};
    auto check = verify_petal(petal, 2000, 100, seed);
    if (!check.ok)
        throw std::invalid_argument("petal threshold fails forward invariance");
    return petal;
}

// --------------------------------------------------------------------
// Lemma 2.1: decay of m(S^N \ K^1) for P1-prefixed sequences
// --------------------------------------------------------------------

namespace {

PolyOp random_admissible_quadratic(const SequenceBounds& b, Rng& rng) {
    double lo = std::log(1.0 / b.lead_bound), hi = std::log(b.lead_bound);
    double mod = std::exp(rng.uniform(lo, hi));
    double th = rng.uniform(0.0, 2.0 * M_PI);
    cplx a2{mod * std::cos(th), mod * std::sin(th)};
    cplx a1 = b.coeff_bound > 0 ? rng.in_disc({}, b.coeff_bound) : cplx{};
    cplx a0 = b.coeff_bound > 0 ? rng.in_disc({}, b.coeff_bound) : cplx{};
    return PolyOp::general({a0, a1, a2});
}

} // namespace

Lemma21Result lemma21_decay(int prefix_count, const SequenceBounds& bounds,
                            int trials, int resolution, std::uint64_t seed,
                            int cont_len, int n_min) {
    if (prefix_count < 4 || trials < 8)
        throw std::invalid_argument("lemma21_decay: need prefix_count >= 4, trials >= 8");
    if (n_min < 1 || n_min > prefix_count)
        throw std::invalid_argument("lemma21_decay: bad n_min");

    double R = escape_radius(bounds);
    double r_seed = R;
    for (int k = 0; k < n_min; ++k)
        r_seed = (1.0 + std::sqrt(1.0 + 8.0 * r_seed)) / 2.0;
    r_seed = std::clamp(r_seed, 2.6, R);

    PointCloud cloud = seed_disc_grid({}, r_seed, resolution);
    const std::size_t n = cloud.points.size();

    // filled Julia set of P1 approximated by a deep survival set
    PolyOp p1 = PolyOp::p1();
    std::vector<char> in_khat(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        cplx z = cloud.points[i].z0;
        bool alive = true;
        for (int k = 0; k < 200 && alive; ++k) {
            z = eval(p1, z);
            if (std::abs(z) > kFamilyEscapeRadius) alive = false;
        }
        in_khat[i] = alive ? 1 : 0;
    }

    std::vector<std::vector<PolyOp>> continuations;
    continuations.resize(std::size_t(trials));
    Rng crng(seed, 0x1e2a);
    for (auto& cont : continuations)
        for (int k = 0; k < cont_len; ++k)
            cont.push_back(random_admissible_quadratic(bounds, crng));

    std::vector<cplx> cur(n);
    std::vector<char> alive(n, 1);
    for (std::size_t i = 0; i < n; ++i) cur[i] = cloud.points[i].z0;

    Lemma21Result res;
    for (int N = 1; N <= prefix_count; ++N) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            cur[i] = eval(p1, cur[i]);
            if (std::abs(cur[i]) > R) alive[i] = 0;
        }
        if (N < n_min) continue;
        double worst = 0;
        for (const auto& cont : continuations) {
            std::int64_t leaked = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!alive[i] || in_khat[i]) continue;
                cplx z = cur[i];
                bool ok = true;
                for (const auto& op : cont) {
                    z = eval(op, z);
                    if (std::abs(z) > R) { ok = false; break; }
                }
                if (ok) ++leaked;
            }
            worst = std::max(worst, double(leaked) * cloud.cell_area);
        }
        res.horizons.push_back(N);
        res.leaked.push_back(worst);
    }

    // least squares on log(measure) over the positive entries
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int good = 0;
    for (std::size_t k = 0; k < res.leaked.size(); ++k) {
        if (res.leaked[k] <= 0) continue;
        double x = res.horizons[k], y = std::log(res.leaked[k]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++good;
    }
    if (good < 2)
        throw FitError("lemma21_decay: not enough nonzero leaked measures to fit "
                       "(resolution too coarse)");
    double denom = good * sxx - sx * sx;
    res.slope = (good * sxy - sx * sy) / denom;
    double intercept = (sy - res.slope * sx) / good;
    res.lambda_hat = std::exp(-res.slope);
    res.c_hat = std::exp(intercept);
    return res;
}

std::vector<double> lemma22_shrink(const PointCloud& V, const PetalModel& petal,
                                   const std::vector<std::int64_t>& m_list,
                                   std::optional<cplx> designated) {
    PolyOp p1 = PolyOp::p1();
    std::vector<double> out;
    std::vector<cplx> img(V.points.size());
    for (std::int64_t m : m_list) {
        if (m < 0) throw std::invalid_argument("lemma22_shrink: negative iterate");
        for (std::size_t i = 0; i < V.points.size(); ++i) {
            cplx z = V.points[i].z0;
            for (std::int64_t k = 0; k < m; ++k) z = eval(p1, z);
            img[i] = z;
        }
        cplx z0;
        if (designated) {
            z0 = *designated;
            for (std::int64_t k = 0; k < m; ++k) z0 = eval(p1, z0);
        } else {
            z0 = img[0];
            for (const auto& w : img)
                if (w.real() > z0.real()) z0 = w;
        }
        std::int64_t outside = 0;
        for (const auto& w : img)
            if (!petal_contains(petal, w - z0)) ++outside;
        out.push_back(double(outside) * V.cell_area);
    }
    return out;
}

}  // namespace polyseq
