#pragma once

#include "polyseq/poly.hpp"
#include "polyseq/sets.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace polyseq {

struct StageParams {
    int n{};      // stage number, 1-based
    std::int64_t s{}, t{}, u{};
    cplx c{};
    double eps{};
};

struct SequencePlan {
    BoundedSequence seq{four_map_bounds()};
    std::vector<StageParams> stages;

    std::int64_t M(int i) const;          // end time of stage i, M(0) = 0
    std::int64_t anchor(int i) const;     // M(i-1) + s_i, where D^i is introduced
    std::int64_t checkpoint(int i) const; // anchor(i) + t_i, the petal test time
    int realized() const { return int(stages.size()); }

    /// Last op index of the maximal P2 run containing op m1 (1-based).
    std::int64_t p2_run_end(std::int64_t m1) const;

private:
    mutable std::vector<std::int64_t> run_end_cache_;
};

struct ConstructConfig {
    std::uint64_t seed{1};
    std::int64_t cloud_points{100000}; // per-stage disc samples (Monte Carlo)
    std::int64_t base_points{100000};  // time-0 survival cloud samples
    int max_stages{2};
    double radius{kFamilyEscapeRadius};
    double petal_threshold{5.0};       // formal petal model, reports only
    std::int64_t s_max{4096};
    std::int64_t t_max{4096};
    std::int64_t u_max{std::int64_t(1) << 20};
    double crit_tol{kCritTol};
};

enum class StageErrorCode {
    ResolutionExhausted,
    SCapExceeded,
    TCapExceeded,
    UCapExceeded,
    DenseExhausted,
    HypothesisViolation,
    CertFail,
};

struct StageError : std::runtime_error {
    StageErrorCode code;
    int detail; // violated hypothesis number, failing stage, ...
    StageError(StageErrorCode c, const std::string& msg, int d = 0)
        : std::runtime_error(msg), code(c), detail(d) {}
};

struct Snapshot {
    cplx z{};
    cplx dz{1.0, 0.0};
    bool alive{true};
    bool crit{false};
};

struct TrackedCloud {
    PointCloud cloud; // states at the current frontier
    std::map<std::int64_t, std::vector<Snapshot>> slices;
};

// Dense points are the enumeration of (Q x Q) meeting D(0,1/3), pinned to
// time s_1. leaked_stage = i > 0 marks membership of the index in I_i.
struct DensePoint {
    cplx z{};
    OrbitState state{};
    int leaked_stage{0};
    std::map<std::int64_t, Snapshot> slices;
};

struct Witness {
    std::int64_t k{};        // dense index certified (1-based)
    int stage{};             // i with k in I_i
    cplx w{};                // witness position at the anchor time of stage i
    std::int64_t anchor_time{};
    double dist{};           // |w - transported z^k| at that anchor
    std::int64_t escape_time{}; // first time the witness orbit passes the radius
};

struct StageRecord {
    StageParams params;
    double leak_s{};                 // measured m(S^{anchor} \ E^n)
    double b_top{};                  // measured m(B^{n,2}) right after the stage
    std::array<double, 8> margins{}; // hypothesis margins, > 0 passes
};

struct StageState {
    ConstructConfig cfg;
    SequencePlan plan;
    TrackedCloud base;                // seeded at time 0 over D(0, 3.5)
    std::vector<TrackedCloud> discs;  // D^i clouds, index i-1
    std::vector<DensePoint> dense;
    std::vector<Witness> witnesses;
    std::vector<StageRecord> records;
    StageParams pending;              // parameters of the stage being built
    std::int64_t pending_j{0};        // dense index j_{n+1} of the stage being built
    std::vector<std::int64_t> struct_times; // snapshot times, ascending

    explicit StageState(ConstructConfig c);
    std::int64_t frontier() const { return plan.seq.size(); }
    double eps_of(int i) const; // realized or pending stage i
    int top_flag(int i) const;  // largest j with B^{i,j} defined so far
};

/// Index sets I_i as lists of dense indices (1-based), i = 1..realized.
std::vector<std::vector<std::int64_t>> index_sets(const StageState& state);

// Stage selectors. `n` is the number of fully realized stages (0 for
// stage one), matching the induction step that builds stage n+1.
std::int64_t choose_s(StageState& state, int n);
double choose_eps(StageState& state, int n);

struct TCResult {
    std::int64_t t{};
    cplx c{};
    std::int64_t j_next{};
};
TCResult choose_t_and_c(StageState& state, int n);

struct UResult {
    std::int64_t u{};
    Witness witness;
};
UResult choose_u(StageState& state, int n);

/// Builds stage n (1-based; stages 1..n-1 must be realized): runs the
/// selectors in order, extends the sequence, updates flags, index sets
/// and witnesses, then asserts the eight induction hypotheses.
void run_stage(StageState& state, int n);

struct CertEntry {
    int n{};
    double value{}, bound{}, sigma3{};
    double khat_leak{}, khat_bound{};
};
struct CertResult {
    std::vector<CertEntry> entries;
    bool ok{true};
};
/// Positive-area certificate: m(B^n) >= pi/9 - eps_n/2 for each realized
/// stage plus the filled-Julia coverage leak bound. Throws CertFail.
CertResult certify_positive_area(const StageState& state);

/// Runs cfg.max_stages stages from scratch.
StageState construct_plan(const ConstructConfig& cfg);

std::array<double, 8> check_hypotheses(const StageState& state);

/// Deterministic enumeration value z^k (1-based) of the dense subset of
/// D(0,1/3): Calkin-Wilf rationals with signs and zero, paired by
/// diagonal, filtered to |z| < 1/3.
cplx dense_point_value(std::int64_t k);

// internals shared with tests and the line-field assembly
void advance_orbit(const SequencePlan& plan, OrbitState& s, std::int64_t to,
                   double radius);
std::string stage_log_json(const StageState& state);

}  // namespace polyseq
