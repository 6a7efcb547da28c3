#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace polyseq {

using cplx = std::complex<double>;

// The four distinguished quadratics plus general polynomials under
// coefficient bounds. P1 = z(1+z)/2 has an attracting fixed point at 0,
// P2 = z(1+z) a parabolic one; P2/12 squeezes the whole parabolic
// filled Julia set back inside D(0,1/3).
enum class OpKind { P1, P2, P1Shifted, P2Scaled, General };

struct PolyOp {
    OpKind kind{OpKind::P1};
    cplx shift{};               // P1Shifted only, |shift| < 1/3
    std::vector<cplx> coeffs{}; // General only, ascending degree

    static PolyOp p1() { return {OpKind::P1}; }
    static PolyOp p2() { return {OpKind::P2}; }
    static PolyOp p1_shifted(cplx c);
    static PolyOp p2_scaled() { return {OpKind::P2Scaled}; }
    static PolyOp general(std::vector<cplx> coeffs);

    int degree() const;
    cplx leading() const;
    bool operator==(const PolyOp&) const = default;
};

cplx eval(const PolyOp& op, cplx z);
cplx eval_deriv(const PolyOp& op, cplx z);

struct SequenceBounds {
    int max_degree{2};    // d
    double lead_bound{1}; // K: 1/K <= |leading| < K
    double coeff_bound{0};// M: lower coefficients <= M in modulus
};

/// Smallest radius of the closed form max(1, K(Md+2)); beyond it every
/// admissible polynomial at least doubles the modulus.
double escape_radius(const SequenceBounds& b);

bool admits(const SequenceBounds& b, const PolyOp& op);

/// Bounds admitting all four family members: d=2, K=12 (the 1/12 leading
/// coefficient of P2/12 forces K >= 12) and M=1 (the linear coefficient
/// of P2 itself is 1). The dedicated radius 13 is still valid for
/// sequences drawn from the family only.
SequenceBounds four_map_bounds();

inline constexpr double kFamilyEscapeRadius = 13.0;

class BoundedSequence {
public:
    explicit BoundedSequence(SequenceBounds b) : bounds_(b) {}

    /// Throws std::invalid_argument if the op violates the bounds.
    void append(PolyOp op);
    void append(PolyOp op, std::int64_t copies);

    const PolyOp& op(std::int64_t m) const; // 1-indexed: P_1 ... P_n
    std::int64_t size() const { return std::int64_t(ops_.size()); }
    const SequenceBounds& bounds() const { return bounds_; }
    const std::vector<PolyOp>& ops() const { return ops_; }

private:
    std::vector<PolyOp> ops_;
    SequenceBounds bounds_;
};

struct OrbitState {
    cplx z{};
    cplx dz{1.0, 0.0};  // derivative of the composition, chain rule
    std::int64_t m{0};
    std::optional<std::int64_t> escaped_at{};
    double min_abs_dz{1.0}; // smallest |dz| seen along the orbit
    bool deriv_overflow{false};
    bool crit_hit{false}; // |dz| fell below the critical tolerance
};

inline constexpr double kCritTol = 1e-300;

/// Applies P_{m+1},...,P_n to the state. Iteration stops at the first
/// time |z| > radius; escaped_at records it. Q_{m,m} is the identity.
/// Throws std::out_of_range when n exceeds the sequence length.
OrbitState compose_orbit(const BoundedSequence& seq, std::int64_t m,
                         std::int64_t n, OrbitState state, double radius);

/// One exact step of op applied in place (derivative, escape bookkeeping).
void step_orbit(const PolyOp& op, OrbitState& s, double radius);

// ---------------------------------------------------------------------
// Parabolic block kernel.
//
// Long pure-P2 blocks are advanced in w = -1/z coordinates, where P2
// becomes w -> w + 1 + 1/(w-1). Far from the singular zone the orbit is
// within O(1/|w|) of the time-1 flow of  w' = 1 + 1/(w-1), whose time-k
// map solves  W + Log(W-1) = w + Log(w-1) + k. Jumps are taken in
// chunks of at most |w-1|/4 steps so the Log stays on one branch;
// inside |w-1| <= kExactZone the map is iterated exactly. The flow
// derivative along a jump is the velocity ratio f(w)/f(W).
// ---------------------------------------------------------------------

inline constexpr double kExactZone = 1024.0;

struct P2BlockResult {
    cplx z;
    cplx dz;
    std::optional<std::int64_t> escaped_at_offset{}; // 1-based step count
};

/// Advances `steps` applications of P2 from z, accumulating the block
/// derivative into dz. Escape past `radius` is detected exactly (jumps
/// never cross the escape zone).
P2BlockResult advance_p2_block(cplx z, cplx dz, std::int64_t steps, double radius);

/// Number of P2 steps until the orbit of z leaves D(0, radius), or
/// nullopt if it does not within `cap` steps.
std::optional<std::int64_t> p2_escape_steps(cplx z, double radius, std::int64_t cap);

/// Membership of z in the filled Julia set of P2 (bounded orbit).
/// Decided by the hybrid kernel: certified bounded once Re(-1/z) >= 2
/// (forward-invariant attracting zone), certified escaped once |z| > 2.
/// Undecided boundary cases after `chunk_cap` kernel rounds count as
/// bounded, matching the alive-on-ties convention.
bool p2_filled_julia_contains(cplx z, std::int64_t chunk_cap = 20000);

}  // namespace polyseq
