#include "polyseq/construction.hpp"
#include "polyseq/rng.hpp"

#include <algorithm>
#include <cmath>

namespace polyseq {

namespace {

constexpr double kThird = 1.0 / 3.0;
constexpr double kDiscArea = M_PI / 9.0;
// covers S^4 of the family radius and the filled Julia set of P1
constexpr double kBaseRadius = 3.5;
constexpr double kWitnessEscapeRadius = 156.0; // |z| > 156 before the final /12 step

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 0x7331);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double pow2(int e) { return std::ldexp(1.0, e); }

} // namespace

// --------------------------------------------------------------------
// SequencePlan
// --------------------------------------------------------------------

std::int64_t SequencePlan::M(int i) const {
    std::int64_t acc = 0;
    for (int k = 0; k < i; ++k)
        acc += stages[std::size_t(k)].s + stages[std::size_t(k)].t + stages[std::size_t(k)].u;
    return acc;
}

std::int64_t SequencePlan::anchor(int i) const { return M(i - 1) + stages[std::size_t(i - 1)].s; }

std::int64_t SequencePlan::checkpoint(int i) const { return anchor(i) + stages[std::size_t(i - 1)].t; }

std::int64_t SequencePlan::p2_run_end(std::int64_t m1) const {
    auto n = std::size_t(seq.size());
    if (run_end_cache_.size() != n) {
        run_end_cache_.assign(n, 0);
        for (std::size_t i = n; i-- > 0;) {
            if (seq.ops()[i].kind == OpKind::P2)
                run_end_cache_[i] = (i + 1 < n && seq.ops()[i + 1].kind == OpKind::P2)
                                        ? run_end_cache_[i + 1]
                                        : std::int64_t(i + 1);
            else
                run_end_cache_[i] = std::int64_t(i + 1);
        }
    }
    return run_end_cache_[std::size_t(m1 - 1)];
}

void advance_orbit(const SequencePlan& plan, OrbitState& s, std::int64_t to,
                   double radius) {
    if (to > plan.seq.size()) throw std::out_of_range("advance_orbit horizon");
    while (s.m < to) {
        if (s.escaped_at) break;
        const PolyOp& op = plan.seq.op(s.m + 1);
        if (op.kind == OpKind::P2) {
            std::int64_t steps = std::min(plan.p2_run_end(s.m + 1), to) - s.m;
            if (steps >= 64) {
                auto r = advance_p2_block(s.z, s.dz, steps, radius);
                if (r.escaped_at_offset) s.escaped_at = s.m + *r.escaped_at_offset;
                s.z = r.z;
                s.dz = r.dz;
                s.m += steps;
                double a = std::abs(s.dz);
                if (!std::isfinite(a) || a > 1e300) s.deriv_overflow = true;
                if (a < s.min_abs_dz) s.min_abs_dz = a;
                if (a < kCritTol) s.crit_hit = true;
                continue;
            }
        }
        step_orbit(op, s, radius);
    }
    s.m = to;
}

// --------------------------------------------------------------------
// Dense enumeration: Calkin-Wilf rationals with signs and zero, paired
// by Cantor diagonal, filtered to |z| < 1/3.
// --------------------------------------------------------------------

namespace {

// r_0 = 0, r_{2k-1} = +q_k, r_{2k} = -q_k with q_k the Calkin-Wilf walk.
double signed_rational(std::int64_t i, std::vector<double>& cache) {
    while (std::int64_t(cache.size()) <= i) {
        std::int64_t k = (std::int64_t(cache.size()) + 1) / 2; // q index needed next
        static thread_local std::vector<std::pair<std::int64_t, std::int64_t>> q{{1, 1}};
        while (std::int64_t(q.size()) < k) {
            auto [a, b] = q.back();
            std::int64_t fl = a / b;
            q.emplace_back(b, 2 * fl * b - a + b);
        }
        if (cache.empty()) cache.push_back(0.0);
        else {
            auto [a, b] = q[std::size_t((std::int64_t(cache.size()) + 1) / 2 - 1)];
            double v = double(a) / double(b);
            cache.push_back(cache.size() % 2 == 1 ? v : -v);
        }
    }
    return cache[std::size_t(i)];
}

} // namespace

cplx dense_point_value(std::int64_t k) {
    if (k < 1) throw std::invalid_argument("dense index is 1-based");
    thread_local std::vector<double> cache;
    std::int64_t accepted = 0;
    for (std::int64_t raw = 0; raw < 4'000'000; ++raw) {
        // diagonal d, offset within it
        std::int64_t d = std::int64_t((std::sqrt(8.0 * double(raw) + 1.0) - 1.0) / 2.0);
        while ((d + 1) * (d + 2) / 2 <= raw) ++d;
        while (d * (d + 1) / 2 > raw) --d;
        std::int64_t off = raw - d * (d + 1) / 2;
        cplx z{signed_rational(off, cache), signed_rational(d - off, cache)};
        if (std::abs(z) < kThird && ++accepted == k) return z;
    }
    throw StageError(StageErrorCode::DenseExhausted,
                     "dense enumeration cap reached", int(k));
}

// --------------------------------------------------------------------
// StageState
// --------------------------------------------------------------------

StageState::StageState(ConstructConfig c) : cfg(c) {
    if (c.max_stages < 1 || c.cloud_points < 16 || c.base_points < 16)
        throw std::invalid_argument("bad construct config");
    base.cloud = seed_disc_mc({}, kBaseRadius, cfg.base_points,
                              mix_seed(cfg.seed, 9), 0);
    base.cloud.seeded_at = 0;
    std::vector<Snapshot> snap(base.cloud.points.size());
    for (std::size_t i = 0; i < snap.size(); ++i)
        snap[i] = {base.cloud.points[i].state.z, {1.0, 0.0}, true, false};
    base.slices[0] = std::move(snap);
    struct_times.push_back(0);
}

double StageState::eps_of(int i) const {
    if (i >= 1 && i <= int(records.size())) return records[std::size_t(i - 1)].params.eps;
    if (i == pending.n) return pending.eps;
    throw std::out_of_range("eps_of");
}

int StageState::top_flag(int i) const {
    int n = int(records.size());
    return i <= n ? n - i + 2 : 1;
}

std::vector<std::vector<std::int64_t>> index_sets(const StageState& state) {
    std::vector<std::vector<std::int64_t>> sets(state.records.size());
    for (std::size_t k = 0; k < state.dense.size(); ++k) {
        int s = state.dense[k].leaked_stage;
        if (s >= 1 && s <= int(sets.size()))
            sets[std::size_t(s - 1)].push_back(std::int64_t(k) + 1);
    }
    return sets;
}

namespace {

Snapshot snap_of(const OrbitState& s) {
    return {s.z, s.dz, !s.escaped_at.has_value(), s.crit_hit};
}

void advance_all(StageState& state, std::int64_t to) {
    for (auto& p : state.base.cloud.points) {
        advance_orbit(state.plan, p.state, to, state.cfg.radius);
        if (p.state.escaped_at) p.flags |= kFlagEscaped;
        if (p.state.crit_hit) p.flags |= kFlagCrit;
        if (p.state.deriv_overflow) p.flags |= kFlagDerivOverflow;
    }
    std::vector<Snapshot> snap(state.base.cloud.points.size());
    for (std::size_t i = 0; i < snap.size(); ++i)
        snap[i] = snap_of(state.base.cloud.points[i].state);
    state.base.slices[to] = std::move(snap);

    for (auto& disc : state.discs) {
        for (auto& p : disc.cloud.points) {
            advance_orbit(state.plan, p.state, to, state.cfg.radius);
            if (p.state.escaped_at) p.flags |= kFlagEscaped;
            if (p.state.crit_hit) p.flags |= kFlagCrit;
            if (p.state.deriv_overflow) p.flags |= kFlagDerivOverflow;
        }
        std::vector<Snapshot> dsnap(disc.cloud.points.size());
        for (std::size_t i = 0; i < dsnap.size(); ++i)
            dsnap[i] = snap_of(disc.cloud.points[i].state);
        disc.slices[to] = std::move(dsnap);
    }

    for (auto& dp : state.dense) {
        advance_orbit(state.plan, dp.state, to, state.cfg.radius);
        dp.slices[to] = snap_of(dp.state);
    }

    state.struct_times.push_back(to);
}

// Seeds dense point k (1-based) at time s_1 and replays it through the
// realized plan, filling the structural snapshots it missed.
DensePoint make_dense_point(const StageState& state, std::int64_t k) {
    DensePoint dp;
    dp.z = dense_point_value(k);
    std::int64_t s1 = state.struct_times.size() > 1 ? state.struct_times[1] : state.frontier();
    dp.state.z = dp.z;
    dp.state.m = s1;
    for (std::int64_t t : state.struct_times) {
        if (t < s1) continue;
        advance_orbit(state.plan, dp.state, t, state.cfg.radius);
        dp.slices[t] = snap_of(dp.state);
    }
    advance_orbit(state.plan, dp.state, state.frontier(), state.cfg.radius);
    return dp;
}

void materialize_dense(StageState& state, std::int64_t count) {
    while (std::int64_t(state.dense.size()) < count)
        state.dense.push_back(make_dense_point(state, std::int64_t(state.dense.size()) + 1));
}

double measure_s_leak(const StageState& state, std::int64_t s) {
    PolyOp p1 = PolyOp::p1();
    std::int64_t leaked = 0;
    for (const auto& p : state.base.cloud.points) {
        if (p.flags & kFlagEscaped) continue;
        cplx z = p.state.z;
        bool alive = true;
        for (std::int64_t k = 0; k < s && alive; ++k) {
            z = eval(p1, z);
            if (std::abs(z) > state.cfg.radius) alive = false;
        }
        if (alive && std::abs(z) > kThird) ++leaked;
    }
    return double(leaked) * state.base.cloud.cell_area;
}

} // namespace

std::int64_t choose_s(StageState& state, int n) {
    double target = pow2(-(n + 2)) * 0.5;
    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t s = 1; s <= state.cfg.s_max; s *= 2) {
        double leak = measure_s_leak(state, s);
        best = std::min(best, leak);
        if (leak < target) return s;
    }
    if (best <= 4.0 * state.base.cloud.cell_area)
        throw StageError(StageErrorCode::ResolutionExhausted,
                         "survival leakage below grid quantum but above target", n + 1);
    throw StageError(StageErrorCode::SCapExceeded, "choose_s cap exceeded", n + 1);
}

double choose_eps(StageState& state, int n) {
    double jmax = 0;
    for (const auto& p : state.base.cloud.points) {
        if (p.flags & (kFlagEscaped | kFlagCrit)) continue;
        double a = std::abs(p.state.dz);
        if (a > 0) jmax = std::max(jmax, 1.0 / (a * a));
    }
    if (jmax <= 0) jmax = 1.0;
    double eps = pow2(-(n + 2)) / (4.0 * jmax);
    return std::min(eps, kDiscArea * (1.0 - 1e-9));
}

TCResult choose_t_and_c(StageState& state, int n) {
    int nn = n + 1;
    // smallest unassigned dense index
    std::int64_t j_next = 0;
    for (;;) {
        for (std::size_t i = 0; i < state.dense.size(); ++i)
            if (state.dense[i].leaked_stage == 0) { j_next = std::int64_t(i) + 1; break; }
        if (j_next != 0) break;
        materialize_dense(state, std::int64_t(state.dense.size()) + 8);
    }

    PolyOp p1 = PolyOp::p1();
    const cplx tip0 = state.dense[std::size_t(j_next - 1)].state.z;

    for (std::int64_t t = 1; t <= state.cfg.t_max; t *= 2) {
        cplx tip = tip0;
        for (std::int64_t k = 0; k + 1 < t; ++k) tip = eval(p1, tip);
        const cplx c = -eval(p1, tip);
        if (!(std::abs(c) < kThird))
            throw StageError(StageErrorCode::HypothesisViolation,
                             "|c| >= 1/3 at selection time", 0);
        PolyOp shifted = PolyOp::p1_shifted(c);

        bool ok = true;
        for (int i = 1; i <= nn && ok; ++i) {
            const auto& disc = state.discs[std::size_t(i - 1)];
            std::uint64_t bit = b_flag_bit(i, state.top_flag(i));
            double thr = state.eps_of(i) / pow2(nn - i + 3) * 0.5;
            std::int64_t leaked = 0;
            for (const auto& p : disc.cloud.points) {
                if ((p.flags & kFlagEscaped) || !(p.flags & bit)) continue;
                cplx z = p.state.z;
                bool alive = true;
                for (std::int64_t k = 0; k + 1 < t && alive; ++k) {
                    z = eval(p1, z);
                    if (std::abs(z) > state.cfg.radius) alive = false;
                }
                if (alive) {
                    z = eval(shifted, z);
                    if (std::abs(z) > state.cfg.radius) alive = false;
                }
                if (!alive || !p2_filled_julia_contains(z)) ++leaked;
                if (double(leaked) * disc.cloud.cell_area >= thr) break;
            }
            if (double(leaked) * disc.cloud.cell_area >= thr) ok = false;
        }
        if (ok) return {t, c, j_next};
    }
    throw StageError(StageErrorCode::TCapExceeded, "choose_t cap exceeded", nn);
}

namespace {

// Image of a time-anchor point under the committed t-block, with derivative.
cplx t_block_image(const StageState& state, int nn, cplx w, cplx* deriv) {
    std::int64_t a = state.plan.anchor(nn);
    std::int64_t cp = state.plan.checkpoint(nn);
    OrbitState s;
    s.z = w;
    s.m = a;
    for (std::int64_t k = a + 1; k <= cp; ++k)
        step_orbit(state.plan.seq.op(k), s, 1e9);
    if (deriv) *deriv = s.dz;
    return s.z;
}

} // namespace

UResult choose_u(StageState& state, int n) {
    int nn = n + 1;
    std::int64_t a = state.plan.anchor(nn);
    std::int64_t cp = state.plan.checkpoint(nn);
    std::int64_t j_next = state.pending_j;

    const auto& tip = state.dense[std::size_t(j_next - 1)];
    cplx zt = tip.slices.at(a).z;
    cplx dtip = tip.slices.at(cp).dz / tip.slices.at(a).dz;
    double scale = std::abs(dtip);
    double bound = 1.0 / double(nn);

    Witness best{};
    std::optional<std::int64_t> t_escape;
    // larger targets escape sooner; the explicit distance check below
    // keeps the witness inside the 1/(n+1) ball either way
    for (double frac : {8.0, 4.0, 2.0, 1.0, 0.6, 0.3, 0.1}) {
        double x = scale * bound * frac;
        cplx target{x, 0.0};
        cplx lin = target / dtip;
        cplx w = zt + lin / std::abs(lin) * std::min(std::abs(lin), 0.9 * bound);
        bool converged = false;
        for (int it = 0; it < 60; ++it) {
            cplx d;
            cplx f = t_block_image(state, nn, w, &d) - target;
            if (!std::isfinite(std::abs(f)) || std::abs(w - zt) > 2.0) break;
            if (std::abs(f) <= 1e-13 * x) { converged = true; break; }
            if (d == cplx{0}) break;
            w -= f / d;
        }
        if (!converged) continue;
        double dist = std::abs(w - zt);
        if (!(dist < 0.98 * bound)) continue;
        cplx zeta = t_block_image(state, nn, w, nullptr);
        auto T = p2_escape_steps(zeta, kWitnessEscapeRadius, state.cfg.u_max);
        if (!T) continue;
        best = Witness{j_next, nn, w, a, dist, cp + *T};
        t_escape = *T;
        break;
    }
    if (!t_escape)
        throw StageError(StageErrorCode::UCapExceeded,
                         "no cusp witness within the distance bound", nn);

    std::int64_t u_req = *t_escape + 1;
    for (const auto& dp : state.dense) {
        if (dp.leaked_stage != 0) continue;
        cplx zcp = dp.slices.at(cp).z;
        if (!dp.slices.at(cp).alive) continue;
        if (p2_filled_julia_contains(zcp)) continue;
        auto T = p2_escape_steps(zcp, kWitnessEscapeRadius, state.cfg.u_max);
        if (T && *T + 1 <= state.cfg.u_max) u_req = std::max(u_req, *T + 1);
    }

    std::int64_t u = 1;
    while (u < u_req) {
        u *= 2;
        if (u > state.cfg.u_max)
            throw StageError(StageErrorCode::UCapExceeded, "choose_u cap exceeded", nn);
    }
    return {u, best};
}

// --------------------------------------------------------------------
// Hypothesis checks
// --------------------------------------------------------------------

std::array<double, 8> check_hypotheses(const StageState& state) {
    std::array<double, 8> m{};
    m.fill(1.0);
    int N = int(state.records.size());
    const auto& plan = state.plan;

    // 1: stage-selection survival leakage
    for (int i = 1; i <= N; ++i)
        m[0] = std::min(m[0], pow2(-(i + 1)) - state.records[std::size_t(i - 1)].leak_s);

    // 2: eps-contraction oracle on 10 random sub-discs per stage
    for (int i = 1; i <= N; ++i) {
        double eps = state.records[std::size_t(i - 1)].params.eps;
        double rx = std::sqrt(eps / 2.0 / M_PI);
        Rng rng(mix_seed(state.cfg.seed, 0x42), std::uint64_t(i));
        const auto& slice = state.base.slices.at(plan.anchor(i));
        for (int trial = 0; trial < 10; ++trial) {
            cplx center = rng.in_disc({}, state.cfg.radius - rx);
            std::int64_t cnt = 0;
            for (const auto& sn : slice)
                if (sn.alive && std::abs(sn.z - center) < rx) ++cnt;
            m[1] = std::min(m[1], pow2(-(i + 1)) -
                                      double(cnt) * state.base.cloud.cell_area);
        }
    }

    // 3: measure lower bounds for every realized B^{i,j}. The bound is
    // compared against the cloud's own total measure, so that epsilons far
    // below one ulp of pi/9 keep their meaning instead of vanishing in
    // the subtraction.
    for (int i = 1; i <= N; ++i) {
        const auto& disc = state.discs[std::size_t(i - 1)];
        double eps = state.records[std::size_t(i - 1)].params.eps;
        std::int64_t total = disc.cloud.size();
        for (int j = 2; j <= N - i + 2; ++j) {
            std::int64_t cnt = 0;
            std::uint64_t bit = b_flag_bit(i, j);
            for (const auto& p : disc.cloud.points)
                if (p.flags & bit) ++cnt;
            double sum = 0;
            for (int k = 2; k <= j; ++k) sum += pow2(-k);
            m[2] = std::min(m[2], eps * sum - double(total - cnt) * disc.cloud.cell_area);
        }
    }

    // 4: I_i disjoint (by construction single-valued) and {1..N} covered
    for (std::int64_t k = 1; k <= N; ++k) {
        if (std::int64_t(state.dense.size()) < k ||
            state.dense[std::size_t(k - 1)].leaked_stage == 0) {
            m[3] = -1.0;
            break;
        }
    }

    // 5: witness distances against 1/i, plus verified escape
    for (const auto& w : state.witnesses) {
        m[4] = std::min(m[4], 1.0 / double(w.stage) - w.dist);
        OrbitState s;
        s.z = w.w;
        s.m = w.anchor_time;
        advance_orbit(plan, s, plan.M(w.stage), state.cfg.radius);
        if (!s.escaped_at) m[4] = -1.0;
    }

    // 6: nesting of the B flags
    for (int i = 1; i <= N && m[5] > 0; ++i) {
        const auto& disc = state.discs[std::size_t(i - 1)];
        for (const auto& p : disc.cloud.points)
            for (int j = 1; j < state.top_flag(i); ++j)
                if ((p.flags & b_flag_bit(i, j + 1)) && !(p.flags & b_flag_bit(i, j))) {
                    m[5] = -1.0;
                    break;
                }
    }

    // 7: stage-to-stage transport lands inside the next disc
    for (int i = 1; i < N; ++i) {
        const auto& disc = state.discs[std::size_t(i - 1)];
        const auto& slice = disc.slices.at(plan.anchor(i + 1));
        std::uint64_t bit = b_flag_bit(i, 2);
        double worst = 0;
        for (std::size_t p = 0; p < slice.size(); ++p)
            if ((disc.cloud.points[p].flags & bit) && slice[p].alive)
                worst = std::max(worst, std::abs(slice[p].z));
        m[6] = std::min(m[6], kThird - worst);
    }

    // 8: injectivity audit, pairwise distinct transported samples at M_j
    for (int j = 1; j <= N; ++j) {
        for (int i = 1; i <= j; ++i) {
            const auto& disc = state.discs[std::size_t(i - 1)];
            int jj = std::min(j - i + 2, state.top_flag(i));
            std::uint64_t bit = b_flag_bit(i, jj);
            const auto& slice = disc.slices.at(plan.M(j));
            std::vector<cplx> zs;
            for (std::size_t p = 0; p < slice.size(); ++p)
                if ((disc.cloud.points[p].flags & bit) && slice[p].alive)
                    zs.push_back(slice[p].z);
            std::sort(zs.begin(), zs.end(), [](cplx a, cplx b) {
                return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
            });
            for (std::size_t p = 0; p + 1 < zs.size(); ++p)
                m[7] = std::min(m[7], std::abs(zs[p + 1] - zs[p]));
        }
    }
    return m;
}

// --------------------------------------------------------------------
// run_stage
// --------------------------------------------------------------------

void run_stage(StageState& state, int stage) {
    if (stage != int(state.records.size()) + 1)
        throw std::invalid_argument("run_stage: stages must be built in order");
    int n = stage - 1;
    state.pending = StageParams{};
    state.pending.n = stage;

    // P1 block reaching the anchor
    std::int64_t s = choose_s(state, n);
    double leak_s = measure_s_leak(state, s);
    state.pending.s = s;
    state.plan.seq.append(PolyOp::p1(), s);
    std::int64_t anchor = state.frontier();
    advance_all(state, anchor);

    TrackedCloud disc;
    disc.cloud = seed_disc_mc({}, kThird, state.cfg.cloud_points,
                              mix_seed(state.cfg.seed, 100 + std::uint64_t(stage)),
                              std::int64_t(stage) * 1'000'000'000);
    disc.cloud.seeded_at = anchor;
    for (auto& p : disc.cloud.points) {
        p.state.m = anchor;
        p.flags |= b_flag_bit(stage, 1);
    }
    std::vector<Snapshot> snap(disc.cloud.points.size());
    for (std::size_t i = 0; i < snap.size(); ++i)
        snap[i] = {disc.cloud.points[i].state.z, {1.0, 0.0}, true, false};
    disc.slices[anchor] = std::move(snap);
    state.discs.push_back(std::move(disc));

    if (stage == 1) materialize_dense(state, 8);

    state.pending.eps = choose_eps(state, n);

    TCResult tc = choose_t_and_c(state, n);
    state.pending.t = tc.t;
    state.pending.c = tc.c;
    state.pending_j = tc.j_next;
    state.plan.seq.append(PolyOp::p1(), tc.t - 1);
    state.plan.seq.append(PolyOp::p1_shifted(tc.c));
    state.plan.stages.push_back(state.pending); // u filled after choose_u
    std::int64_t cp = state.frontier();
    advance_all(state, cp);

    // checkpoint classification: new B^{i, top+1} flags
    for (int i = 1; i <= stage; ++i) {
        auto& d = state.discs[std::size_t(i - 1)];
        std::uint64_t bit = b_flag_bit(i, state.top_flag(i));
        std::uint64_t nbit = b_flag_bit(i, state.top_flag(i) + 1);
        for (auto& p : d.cloud.points) {
            if ((p.flags & kFlagEscaped) || !(p.flags & bit)) continue;
            if (p2_filled_julia_contains(p.state.z)) p.flags |= nbit;
        }
    }

    UResult ur = choose_u(state, n);
    state.pending.u = ur.u;
    state.plan.stages.back().u = ur.u;
    state.plan.seq.append(PolyOp::p2(), ur.u - 1);
    state.plan.seq.append(PolyOp::p2_scaled());
    std::int64_t mend = state.frontier();
    advance_all(state, mend);

    // dense classification for I_stage: cusp tip plus completed escapers
    state.dense[std::size_t(tc.j_next - 1)].leaked_stage = stage;
    state.witnesses.push_back(ur.witness);
    for (std::size_t k = 0; k < state.dense.size(); ++k) {
        auto& dp = state.dense[k];
        if (dp.leaked_stage != 0) continue;
        const auto& at_cp = dp.slices.at(cp);
        if (!at_cp.alive) continue;
        if (p2_filled_julia_contains(at_cp.z)) continue;
        auto T = p2_escape_steps(at_cp.z, kWitnessEscapeRadius, ur.u);
        if (T && *T <= ur.u - 1) {
            dp.leaked_stage = stage;
            state.witnesses.push_back(Witness{std::int64_t(k) + 1, stage,
                                              dp.slices.at(anchor).z, anchor, 0.0,
                                              cp + *T});
        }
    }

    StageRecord rec;
    rec.params = state.pending;
    rec.leak_s = leak_s;
    {
        const auto& d = state.discs[std::size_t(stage - 1)];
        std::int64_t cnt = 0;
        for (const auto& p : d.cloud.points)
            if (p.flags & b_flag_bit(stage, 2)) ++cnt;
        rec.b_top = double(cnt) * d.cloud.cell_area;
    }
    state.records.push_back(rec);

    auto margins = check_hypotheses(state);
    state.records.back().margins = margins;
    for (int h = 0; h < 8; ++h)
        if (!(margins[std::size_t(h)] > 0))
            throw StageError(StageErrorCode::HypothesisViolation,
                             "induction hypothesis failed", h + 1);
}

CertResult certify_positive_area(const StageState& state) {
    CertResult res;
    for (int i = 1; i <= int(state.records.size()); ++i) {
        const auto& disc = state.discs[std::size_t(i - 1)];
        std::uint64_t bit = b_flag_bit(i, state.top_flag(i));
        auto rep = measure(disc.cloud,
                           [&](const CloudPoint& p) { return (p.flags & bit) != 0; },
                           "B^" + std::to_string(i), state.plan.anchor(i));
        CertEntry e;
        e.n = i;
        e.value = rep.value;
        double eps = state.records[std::size_t(i - 1)].params.eps;
        e.bound = kDiscArea - eps / 2.0;
        e.sigma3 = 3.0 * rep.sigma;
        std::int64_t cnt = 0;
        for (const auto& p : disc.cloud.points)
            if (p.flags & bit) ++cnt;
        // cancellation-free form of value >= pi/9 - eps/2
        double margin = eps / 2.0 - double(disc.cloud.size() - cnt) * rep.cell_area;
        const auto& slice = state.base.slices.at(state.plan.anchor(i));
        std::int64_t leak = 0;
        for (std::size_t p = 0; p < slice.size(); ++p) {
            if (state.base.cloud.points[p].flags & kFlagEscaped) continue; // escaped by frontier
            if (!slice[p].alive || std::abs(slice[p].z) > kThird) ++leak;
        }
        e.khat_leak = double(leak) * state.base.cloud.cell_area;
        e.khat_bound = pow2(-i);
        res.entries.push_back(e);
        if (!(margin > 0) || !(e.value - e.sigma3 > 0) || !(e.khat_leak < e.khat_bound))
            res.ok = false;
    }
    if (!res.ok) {
        int bad = 0;
        for (const auto& e : res.entries)
            if (!(e.value >= e.bound && e.value - e.sigma3 > 0 && e.khat_leak < e.khat_bound))
                bad = e.n;
        throw StageError(StageErrorCode::CertFail, "positive-area certificate failed", bad);
    }
    return res;
}

StageState construct_plan(const ConstructConfig& cfg) {
    StageState state(cfg);
    for (int stage = 1; stage <= cfg.max_stages; ++stage)
        run_stage(state, stage);
    return state;
}

}  // namespace polyseq
