#include "polyseq/poly.hpp"

#include <cmath>
#include <limits>

namespace polyseq {

namespace {

std::vector<cplx> coefficients(const PolyOp& op) {
    switch (op.kind) {
    case OpKind::P1:        return {cplx{0}, cplx{0.5}, cplx{0.5}};
    case OpKind::P2:        return {cplx{0}, cplx{1.0}, cplx{1.0}};
    case OpKind::P1Shifted: return {op.shift, cplx{0.5}, cplx{0.5}};
    case OpKind::P2Scaled:  return {cplx{0}, cplx{1.0 / 12.0}, cplx{1.0 / 12.0}};
    case OpKind::General:   return op.coeffs;
    }
    return {};
}

} // namespace

PolyOp PolyOp::p1_shifted(cplx c) {
    if (!(std::abs(c) < 1.0 / 3.0))
        throw std::invalid_argument("P1 shift must satisfy |c| < 1/3");
    PolyOp op{OpKind::P1Shifted};
    op.shift = c;
    return op;
}

PolyOp PolyOp::general(std::vector<cplx> coeffs) {
    if (coeffs.size() < 3 || coeffs.back() == cplx{0})
        throw std::invalid_argument("general op needs degree >= 2 and nonzero leading coefficient");
    PolyOp op{OpKind::General};
    op.coeffs = std::move(coeffs);
    return op;
}

int PolyOp::degree() const {
    return kind == OpKind::General ? int(coeffs.size()) - 1 : 2;
}

cplx PolyOp::leading() const {
    switch (kind) {
    case OpKind::P1:
    case OpKind::P1Shifted: return {0.5};
    case OpKind::P2:        return {1.0};
    case OpKind::P2Scaled:  return {1.0 / 12.0};
    case OpKind::General:   return coeffs.back();
    }
    return {};
}

cplx eval(const PolyOp& op, cplx z) {
    switch (op.kind) {
    case OpKind::P1:        return 0.5 * z * (1.0 + z);
    case OpKind::P2:        return z * (1.0 + z);
    case OpKind::P1Shifted: return 0.5 * z * (1.0 + z) + op.shift;
    case OpKind::P2Scaled:  return z * (1.0 + z) / 12.0;
    case OpKind::General: {
        cplx acc{0};
        for (std::size_t i = op.coeffs.size(); i-- > 0;)
            acc = acc * z + op.coeffs[i];
        return acc;
    }
    }
    return {};
}

cplx eval_deriv(const PolyOp& op, cplx z) {
    switch (op.kind) {
    case OpKind::P1:
    case OpKind::P1Shifted: return 0.5 + z;
    case OpKind::P2:        return 1.0 + 2.0 * z;
    case OpKind::P2Scaled:  return (1.0 + 2.0 * z) / 12.0;
    case OpKind::General: {
        cplx acc{0};
        for (std::size_t i = op.coeffs.size(); i-- > 1;)
            acc = acc * z + double(i) * op.coeffs[i];
        return acc;
    }
    }
    return {};
}

double escape_radius(const SequenceBounds& b) {
    return std::max(1.0, b.lead_bound * (b.coeff_bound * b.max_degree + 2.0));
}

bool admits(const SequenceBounds& b, const PolyOp& op) {
    int d = op.degree();
    if (d < 2 || d > b.max_degree) return false;
    auto cs = coefficients(op);
    double lead = std::abs(cs.back());
    // K = 1 admits exactly the unimodular leading coefficient
    if (!(lead >= 1.0 / b.lead_bound && (lead < b.lead_bound || lead == 1.0 / b.lead_bound)))
        return false;
    for (std::size_t i = 0; i + 1 < cs.size(); ++i)
        if (std::abs(cs[i]) > b.coeff_bound) return false;
    return true;
}

SequenceBounds four_map_bounds() { return {2, 12.0, 1.0}; }

void BoundedSequence::append(PolyOp op) {
    if (!admits(bounds_, op))
        throw std::invalid_argument("polynomial violates the sequence bounds");
    ops_.push_back(std::move(op));
}

void BoundedSequence::append(PolyOp op, std::int64_t copies) {
    for (std::int64_t i = 0; i < copies; ++i) append(op);
}

const PolyOp& BoundedSequence::op(std::int64_t m) const {
    if (m < 1 || m > size()) throw std::out_of_range("sequence index");
    return ops_[std::size_t(m - 1)];
}

void step_orbit(const PolyOp& op, OrbitState& s, double radius) {
    cplx dfac = eval_deriv(op, s.z);
    s.z = eval(op, s.z);
    s.dz *= dfac;
    s.m += 1;
    double a = std::abs(s.dz);
    if (!std::isfinite(a) || a > 1e300) s.deriv_overflow = true;
    if (a < s.min_abs_dz) s.min_abs_dz = a;
    if (a < kCritTol) s.crit_hit = true;
    if (!s.escaped_at && std::abs(s.z) > radius) s.escaped_at = s.m;
}

OrbitState compose_orbit(const BoundedSequence& seq, std::int64_t m,
                         std::int64_t n, OrbitState state, double radius) {
    if (m < 0 || m > n) throw std::out_of_range("invalid composition range");
    if (n > seq.size()) throw std::out_of_range("composition horizon exceeds sequence length");
    for (std::int64_t k = m + 1; k <= n; ++k) {
        step_orbit(seq.op(k), state, radius);
        if (state.escaped_at) break;
    }
    state.m = n;
    return state;
}

// --------------------------------------------------------------------
// Parabolic kernel
// --------------------------------------------------------------------

namespace {

// The flow of w' = f(w) = w/(w-1) conserves w - Log w - t. The time-k
// jump solves (W - w) - Log(W/w) = k; with k <= |w-1|/4 the ratio stays
// near 1, so the principal Log is branch-safe.
cplx flow_jump(cplx w, double k) {
    cplx W = w + k;
    for (int it = 0; it < 16; ++it) {
        cplx g = (W - w) - std::log(W / w) - k;
        if (std::abs(g) <= 1e-13 * (1.0 + k)) break;
        cplx gp = (W - 1.0) / W; // 1 - 1/W
        W -= g / gp;
    }
    return W;
}

inline cplx flow_velocity(cplx w) { return w / (w - 1.0); }

} // namespace

P2BlockResult advance_p2_block(cplx z, cplx dz, std::int64_t steps, double radius) {
    std::int64_t done = 0;
    while (done < steps) {
        if (z == cplx{0}) break; // parabolic fixed point, P2'(0) = 1
        cplx w = -1.0 / z;
        double far = std::abs(w - 1.0);
        std::int64_t chunk = std::int64_t(far / 4.0);
        if (far > kExactZone && chunk > 0) {
            if (chunk > steps - done) chunk = steps - done;
            cplx W = flow_jump(w, double(chunk));
            // dW/dw = f(W)/f(w) for an autonomous flow; chain through z = -1/w
            dz *= (w * w) / (W * W) * flow_velocity(W) / flow_velocity(w);
            z = -1.0 / W;
            done += chunk;
        } else {
            dz *= 1.0 + 2.0 * z;
            z = z * (1.0 + z);
            ++done;
            if (std::abs(z) > radius)
                return {z, dz, done};
        }
    }
    return {z, dz, std::nullopt};
}

std::optional<std::int64_t> p2_escape_steps(cplx z, double radius, std::int64_t cap) {
    std::int64_t done = 0;
    while (done < cap) {
        if (z == cplx{0}) return std::nullopt;
        cplx w = -1.0 / z;
        double far = std::abs(w - 1.0);
        std::int64_t chunk = std::int64_t(far / 4.0);
        if (far > kExactZone && chunk > 0) {
            if (chunk > cap - done) chunk = cap - done;
            z = -1.0 / flow_jump(w, double(chunk));
            done += chunk;
        } else {
            z = z * (1.0 + z);
            ++done;
            if (std::abs(z) > radius) return done;
        }
    }
    return std::nullopt;
}

bool p2_filled_julia_contains(cplx z, std::int64_t chunk_cap) {
    for (std::int64_t round = 0; round < chunk_cap; ++round) {
        if (z == cplx{0}) return true;
        if (std::abs(z) > 2.0) return false;
        cplx w = -1.0 / z;
        if (w.real() >= 2.0) return true; // invariant attracting zone
        double far = std::abs(w - 1.0);
        std::int64_t chunk = std::int64_t(far / 4.0);
        if (far > kExactZone && chunk > 0)
            z = -1.0 / flow_jump(w, double(chunk));
        else
            z = z * (1.0 + z);
    }
    return true; // undecided boundary case: classified bounded
}

}  // namespace polyseq
