#include "polyseq/line_fields.hpp"
#include "polyseq/io.hpp"
#include "polyseq/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <sstream>

namespace polyseq {

cplx pullback(cplx mu_at_image, cplx q_deriv) {
    if (std::abs(q_deriv) < kCritTol)
        throw TransportError(TransportError::Code::CriticalPoint,
                             "cannot pull back a Beltrami coefficient at a critical point");
    return mu_at_image * std::conj(q_deriv) / q_deriv;
}

const LineFieldFamily::Slice* LineFieldFamily::slice(std::int64_t m) const {
    for (const auto& s : slices)
        if (s.m == m) return &s;
    return nullptr;
}

const LineFieldSample* LineFieldFamily::find(std::int64_t m, std::int64_t id) const {
    const Slice* s = slice(m);
    if (!s) return nullptr;
    auto it = std::lower_bound(s->samples.begin(), s->samples.end(), id,
                               [](const LineFieldSample& a, std::int64_t b) { return a.id < b; });
    if (it == s->samples.end() || it->id != id) return nullptr;
    return &*it;
}

LineFieldSample pushforward_sample(const LineFieldSample& s, const SequencePlan& plan,
                                   std::int64_t n, double radius) {
    if (n < s.m) throw std::out_of_range("pushforward target before sample time");
    OrbitState st;
    st.z = s.z;
    st.m = s.m;
    advance_orbit(plan, st, n, radius);
    if (st.crit_hit || std::abs(st.dz) < kCritTol)
        throw TransportError(TransportError::Code::CriticalPoint,
                             "transport path meets a critical point");
    LineFieldSample out = s;
    out.m = n;
    out.z = st.z;
    out.mu = s.mu * st.dz / std::conj(st.dz);
    return out;
}

namespace {

cplx initial_field(cplx z, double theta0, int winding) {
    double th = theta0;
    if (winding != 0 && z != cplx{0}) th += winding * std::arg(z);
    return std::polar(1.0, 2.0 * th);
}

void audit_slice(const LineFieldFamily::Slice& sl) {
    std::vector<cplx> zs;
    zs.reserve(sl.samples.size());
    double lo_re = 0, hi_re = 0, lo_im = 0, hi_im = 0;
    bool first = true;
    for (const auto& s : sl.samples) {
        zs.push_back(s.z);
        if (first) {
            lo_re = hi_re = s.z.real();
            lo_im = hi_im = s.z.imag();
            first = false;
        } else {
            lo_re = std::min(lo_re, s.z.real());
            hi_re = std::max(hi_re, s.z.real());
            lo_im = std::min(lo_im, s.z.imag());
            hi_im = std::max(hi_im, s.z.imag());
        }
    }
    double diam = std::hypot(hi_re - lo_re, hi_im - lo_im);
    double tol = 1e-12 * std::max(diam, 1e-30);
    std::sort(zs.begin(), zs.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    for (std::size_t i = 0; i + 1 < zs.size(); ++i)
        if (std::abs(zs[i + 1] - zs[i]) < tol)
            throw TransportError(TransportError::Code::InjectivityBreach,
                                 "transported samples collide at time " +
                                     std::to_string(sl.m));
}

} // namespace

LineFieldFamily assemble_family(const StageState& state, double theta0, int winding,
                                std::int64_t stride) {
    if (state.records.empty())
        throw std::invalid_argument("assemble_family needs at least one realized stage");
    if (stride < 1) stride = 1;

    const auto& plan = state.plan;
    LineFieldFamily fam;
    fam.plan_hash = plan_hash(plan.seq);

    std::int64_t a1 = plan.anchor(1);
    int n_stages = int(state.records.size());

    // cohort inclusion: stage >= 2 discs drop samples covered by the
    // transported earlier mass ("the remainder of B tilde")
    std::vector<std::vector<char>> included;
    included.resize(std::size_t(n_stages));
    for (int i = 1; i <= n_stages; ++i) {
        const auto& disc = state.discs[std::size_t(i - 1)];
        auto& inc = included[std::size_t(i - 1)];
        inc.assign(disc.cloud.points.size(), 1);
        if (i == 1) continue;
        std::int64_t ai = plan.anchor(i);
        cplx centroid{};
        double rmax = 0;
        std::int64_t cnt = 0;
        for (int j = 1; j < i; ++j) {
            const auto& prev = state.discs[std::size_t(j - 1)];
            const auto& sl = prev.slices.at(ai);
            std::uint64_t bit = b_flag_bit(j, state.top_flag(j));
            for (std::size_t p = 0; p < sl.size(); ++p)
                if ((prev.cloud.points[p].flags & bit) && sl[p].alive) {
                    centroid += sl[p].z;
                    ++cnt;
                }
        }
        if (cnt == 0) continue;
        centroid /= double(cnt);
        for (int j = 1; j < i; ++j) {
            const auto& prev = state.discs[std::size_t(j - 1)];
            const auto& sl = prev.slices.at(ai);
            std::uint64_t bit = b_flag_bit(j, state.top_flag(j));
            for (std::size_t p = 0; p < sl.size(); ++p)
                if ((prev.cloud.points[p].flags & bit) && sl[p].alive)
                    rmax = std::max(rmax, std::abs(sl[p].z - centroid));
        }
        const auto& own = disc.slices.at(ai);
        for (std::size_t p = 0; p < disc.cloud.points.size(); ++p)
            if (std::abs(own[p].z - centroid) <= 2.0 * rmax) inc[p] = 0;
    }

    for (std::int64_t T : state.struct_times) {
        LineFieldFamily::Slice sl;
        sl.m = T;

        // base cohort: time-0 samples pulled back / pushed forward along
        // their own orbits; defined once their anchor-1 image is inside D^1
        const auto& b_a1 = state.base.slices.at(a1);
        const auto& b_T = state.base.slices.at(T);
        for (std::size_t p = 0; p < state.base.cloud.points.size(); ++p) {
            if (p % std::size_t(stride)) continue;
            const auto& pt = state.base.cloud.points[p];
            if (pt.flags & (kFlagEscaped | kFlagCrit)) continue;
            if (!b_a1[p].alive || std::abs(b_a1[p].z) > 1.0 / 3.0) continue;
            if (!b_T[p].alive) continue;
            cplx q = b_T[p].dz / b_a1[p].dz;
            if (std::abs(q) < kCritTol || !std::isfinite(std::abs(q))) continue;
            LineFieldSample s;
            s.id = pt.id;
            s.m = T;
            s.z = b_T[p].z;
            s.mu = initial_field(b_a1[p].z, theta0, winding) * q / std::conj(q);
            s.origin_stage = 1;
            sl.samples.push_back(s);
        }

        for (int i = 1; i <= n_stages; ++i) {
            std::int64_t ai = plan.anchor(i);
            if (T < ai) continue;
            const auto& disc = state.discs[std::size_t(i - 1)];
            const auto& d_T = disc.slices.at(T);
            std::uint64_t bit = b_flag_bit(i, state.top_flag(i));
            for (std::size_t p = 0; p < disc.cloud.points.size(); ++p) {
                if (p % std::size_t(stride)) continue;
                const auto& pt = disc.cloud.points[p];
                if (!included[std::size_t(i - 1)][p]) continue;
                if ((pt.flags & (kFlagEscaped | kFlagCrit)) || !(pt.flags & bit)) continue;
                if (!d_T[p].alive) continue;
                cplx q = d_T[p].dz; // seeded with dz = 1 at the anchor
                if (std::abs(q) < kCritTol || !std::isfinite(std::abs(q))) continue;
                LineFieldSample s;
                s.id = pt.id;
                s.m = T;
                s.z = d_T[p].z;
                s.mu = initial_field(pt.z0, theta0, winding) * q / std::conj(q);
                s.origin_stage = i;
                sl.samples.push_back(s);
            }
        }

        std::sort(sl.samples.begin(), sl.samples.end(),
                  [](const LineFieldSample& x, const LineFieldSample& y) { return x.id < y.id; });
        audit_slice(sl);
        fam.slices.push_back(std::move(sl));
    }
    return fam;
}

InvarianceReport verify_invariance(const LineFieldFamily& fam, const StageState& state,
                                   std::int64_t pairs, std::uint64_t seed) {
    InvarianceReport rep;
    rep.seed = seed;
    Rng rng(seed, 0x1f1d);
    const auto& plan = state.plan;
    if (fam.slices.size() < 2) return rep;

    double residual_sum = 0;
    std::int64_t done = 0, attempts = 0;
    while (done < pairs && attempts < pairs * 20) {
        ++attempts;
        auto ia = std::size_t(rng.index(std::int64_t(fam.slices.size())));
        auto ib = std::size_t(rng.index(std::int64_t(fam.slices.size())));
        if (ia == ib) continue;
        if (ia > ib) std::swap(ia, ib);
        const auto& sa = fam.slices[ia];
        const auto& sb = fam.slices[ib];
        if (sa.samples.empty()) continue;
        const auto& smp = sa.samples[std::size_t(rng.index(std::int64_t(sa.samples.size())))];
        const LineFieldSample* other = nullptr;
        {
            auto it = std::lower_bound(sb.samples.begin(), sb.samples.end(), smp.id,
                                       [](const LineFieldSample& s, std::int64_t v) {
                                           return s.id < v;
                                       });
            if (it != sb.samples.end() && it->id == smp.id) other = &*it;
        }
        if (!other) continue;

        OrbitState st;
        st.z = smp.z;
        st.m = sa.m;
        advance_orbit(plan, st, sb.m, state.cfg.radius);
        if (st.escaped_at || st.crit_hit || std::abs(st.dz) < kCritTol) continue;
        double r = std::abs(pullback(other->mu, st.dz) - smp.mu);
        rep.max_residual = std::max(rep.max_residual, r);
        residual_sum += r;
        double dev = std::abs(std::abs(smp.mu) - 1.0);
        rep.max_modulus_dev = std::max(rep.max_modulus_dev, dev);
        ++done;
    }
    rep.pairs = done;
    rep.mean_residual = done > 0 ? residual_sum / double(done) : 0.0;
    return rep;
}

std::string InvarianceReport::to_json() const {
    nlohmann::json j;
    j["max_residual"] = max_residual;
    j["mean_residual"] = mean_residual;
    j["pairs"] = pairs;
    j["seed"] = seed;
    j["max_modulus_dev"] = max_modulus_dev;
    return j.dump();
}

LineFieldFamily restrict_to_julia(LineFieldFamily fam, const StageState& state) {
    const auto& plan = state.plan;
    // witness coverage radii around the leaked dense points, measured in
    // the disc geometry at each cohort's anchor time
    struct Cover {
        std::int64_t k;
        double radius;
    };
    std::vector<Cover> covers;
    for (const auto& w : state.witnesses)
        covers.push_back({w.k, w.dist});

    for (auto& sl : fam.slices) {
        for (auto& s : sl.samples) {
            int i = s.origin_stage;
            std::int64_t ai = plan.anchor(i);
            const auto* self = fam.find(ai, s.id);
            cplx z_at_anchor = self ? self->z : s.z;
            double cell = i >= 1 && i <= int(state.discs.size())
                              ? state.discs[std::size_t(i - 1)].cloud.cell_area
                              : state.base.cloud.cell_area;
            double slack = 2.0 * std::sqrt(cell);
            bool prox = false;
            for (const auto& c : covers) {
                if (std::int64_t(state.dense.size()) < c.k) continue;
                const auto& dp = state.dense[std::size_t(c.k - 1)];
                auto it = dp.slices.find(ai);
                if (it == dp.slices.end()) continue;
                if (std::abs(z_at_anchor - it->second.z) <= c.radius + slack) {
                    prox = true;
                    break;
                }
            }
            if (!prox) s.mu = 0;
        }
    }
    return fam;
}

std::string family_csv(const LineFieldFamily& fam) {
    std::string out = "# plan_hash " + std::to_string(fam.plan_hash) + "\n";
    out += "m,id,re_z,im_z,re_mu,im_mu,origin_stage\n";
    char buf[192];
    for (const auto& sl : fam.slices)
        for (const auto& s : sl.samples) {
            std::snprintf(buf, sizeof buf,
                          "%" PRId64 ",%" PRId64 ",%.17g,%.17g,%.17g,%.17g,%d\n", s.m, s.id,
                          s.z.real(), s.z.imag(), s.mu.real(), s.mu.imag(), s.origin_stage);
            out += buf;
        }
    return out;
}

LineFieldFamily parse_family_csv(const std::string& text) {
    LineFieldFamily fam;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line);
            std::string hashmark, tag;
            std::uint64_t h;
            if (hs >> hashmark >> tag >> h && tag == "plan_hash") fam.plan_hash = h;
            continue;
        }
        if (line.rfind("m,id", 0) == 0) continue;
        LineFieldSample s;
        double re_z, im_z, re_mu, im_mu;
        if (std::sscanf(line.c_str(), "%" SCNd64 ",%" SCNd64 ",%lg,%lg,%lg,%lg,%d", &s.m,
                        &s.id, &re_z, &im_z, &re_mu, &im_mu, &s.origin_stage) != 7)
            throw ParseError("family csv line " + std::to_string(lineno));
        s.z = {re_z, im_z};
        s.mu = {re_mu, im_mu};
        if (fam.slices.empty() || fam.slices.back().m != s.m)
            fam.slices.push_back({s.m, {}});
        fam.slices.back().samples.push_back(s);
    }
    return fam;
}

}  // namespace polyseq
