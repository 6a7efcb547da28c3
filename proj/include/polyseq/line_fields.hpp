#pragma once

#include "polyseq/construction.hpp"

#include <string>
#include <vector>

namespace polyseq {

struct TransportError : std::runtime_error {
    enum class Code { CriticalPoint, InjectivityBreach };
    Code code;
    TransportError(Code c, const std::string& msg)
        : std::runtime_error(msg), code(c) {}
};

/// Pullback of a Beltrami coefficient under a holomorphic map with
/// derivative q_deriv: mu -> mu * conj(q)/q. Preserves the modulus;
/// throws CriticalPoint when |q_deriv| < kCritTol.
cplx pullback(cplx mu_at_image, cplx q_deriv);

struct LineFieldSample {
    std::int64_t id{};
    std::int64_t m{};  // time index
    cplx z{};
    cplx mu{};
    int origin_stage{};
};

struct LineFieldFamily {
    struct Slice {
        std::int64_t m{};
        std::vector<LineFieldSample> samples; // sorted by id
    };
    std::vector<Slice> slices; // ascending time
    std::uint64_t plan_hash{};

    const Slice* slice(std::int64_t m) const;
    const LineFieldSample* find(std::int64_t m, std::int64_t id) const;
};

/// Transports one sample along the realized plan to time n.
LineFieldSample pushforward_sample(const LineFieldSample& s, const SequencePlan& plan,
                                   std::int64_t n, double radius);

/// Builds the family on the structural time slices. The initial field on
/// the stage-1 set at time s_1 is mu(z) = exp(2i(theta0 + winding arg z));
/// the default is the constant field 1. Later stages contribute mass on
/// the part of their disc not covered by the transported earlier sets.
/// `stride` subsamples each cohort (1 = every point).
LineFieldFamily assemble_family(const StageState& state, double theta0 = 0.0,
                                int winding = 0, std::int64_t stride = 1);

struct InvarianceReport {
    double max_residual{0};
    double mean_residual{0};
    std::int64_t pairs{0};
    std::uint64_t seed{0};
    double max_modulus_dev{0};
    std::string to_json() const;
};

/// Samples random (m, n, id) triples defined at both endpoints, freshly
/// recomposes Q_{m,n} and its derivative along the orbit, and returns the
/// worst |Q_{m,n}^*(mu_n) - mu_m|.
InvarianceReport verify_invariance(const LineFieldFamily& fam, const StageState& state,
                                   std::int64_t pairs, std::uint64_t seed);

/// Zeroes mu outside the Julia-proximate support: samples must be
/// B-flagged survivors with a recorded escape witness near their dense
/// neighbourhood.
LineFieldFamily restrict_to_julia(LineFieldFamily fam, const StageState& state);

std::string family_csv(const LineFieldFamily& fam);
LineFieldFamily parse_family_csv(const std::string& text);

}  // namespace polyseq
