#pragma once

#include "polyseq/poly.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace polyseq {

enum class SampleMethod { Grid, MonteCarlo };

// Point flag bits. B-set membership flags live at b_flag_bit(i, j).
inline constexpr std::uint64_t kFlagEscaped = 1ull << 0;
inline constexpr std::uint64_t kFlagCrit = 1ull << 1;
inline constexpr std::uint64_t kFlagDerivOverflow = 1ull << 2;

/// Membership bit for B^{i,j}; i in [1,6], j in [1,8].
inline std::uint64_t b_flag_bit(int i, int j) {
    return 1ull << (8 + (i - 1) * 8 + (j - 1));
}

struct CloudPoint {
    std::int64_t id;
    cplx z0;
    OrbitState state;
    std::uint64_t flags{0};
};

struct PointCloud {
    std::vector<CloudPoint> points;
    double cell_area{0};
    std::string region;
    SampleMethod method{SampleMethod::Grid};
    std::uint64_t seed{0};
    std::int64_t seeded_at{0}; // time index at which z0 lives

    std::int64_t size() const { return std::int64_t(points.size()); }
};

/// Centers of grid cells of side 2*radius/resolution that fall in the disc.
PointCloud seed_disc_grid(cplx center, double radius, int resolution,
                          std::int64_t id_offset = 0);

/// Uniform i.i.d. sample; cell_area = pi r^2 / n, so the total estimate
/// is exact by construction.
PointCloud seed_disc_mc(cplx center, double radius, std::int64_t n_points,
                        std::uint64_t seed, std::int64_t id_offset = 0);

PointCloud seed_disc(cplx center, double radius, int resolution,
                     SampleMethod method, std::uint64_t seed = 0);

struct MeasureReport {
    double value{0};
    double cell_area{0};
    std::int64_t n_points{0}; // total points in the backing cloud
    std::uint64_t seed{0};
    SampleMethod method{SampleMethod::Grid};
    std::string flag;
    std::int64_t time_index{0};
    double sigma{0}; // one-sigma sampling error proxy

    std::string to_json() const;
};

MeasureReport measure(const PointCloud& cloud,
                      const std::function<bool(const CloudPoint&)>& pred,
                      std::string flag_name = "", std::int64_t time_index = 0);

/// Marks escaped on every point whose orbit leaves D(0, radius) by time n.
/// Points on the boundary circle stay alive. The cloud must be seeded
/// (state at time m); alive points approximate the survival set S_m^n.
PointCloud survival_set(const BoundedSequence& seq, std::int64_t m, std::int64_t n,
                        PointCloud cloud, double radius);

/// Flags points whose accumulated |dz| fell below crit_tol at any step,
/// the numerical proxy for meeting a critical grand orbit.
PointCloud grand_orbit_flags(const BoundedSequence& seq, PointCloud cloud,
                             double crit_tol);

// Attracting petal model for P2: U^2 = { z != 0 : Re(-1/z) > threshold },
// a disc of radius 1/(2*threshold) tangent to the imaginary axis at 0.
struct PetalModel {
    double threshold{5.0};
};

bool petal_contains(const PetalModel& petal, cplx z);

struct PetalCheck {
    bool ok{false};
    cplx counterexample{};
};

/// True iff P2 keeps n_samples random petal points inside the petal for
/// n_steps consecutive steps and P2/12 maps them into D(0,1/3).
PetalCheck verify_petal(const PetalModel& petal, std::int64_t n_samples,
                        std::int64_t n_steps, std::uint64_t seed);

/// Petal model with the invariant verified at construction; throws
/// std::invalid_argument when the threshold fails verification.
PetalModel verified_petal(double threshold, std::uint64_t seed);

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Lemma21Result {
    double lambda_hat{0};
    double c_hat{0};
    double slope{0};
    std::vector<int> horizons;
    std::vector<double> leaked; // worst leaked measure per horizon
};

/// Estimates m(S^N \ K^1) for N = n_min..prefix_count, where the first N
/// sequence members are P1 and each trial appends a random admissible
/// continuation. K^1 is approximated by a 200-iterate P1 survival set at
/// radius 13. Fits log measure against N; lambda_hat = exp(-slope).
Lemma21Result lemma21_decay(int prefix_count, const SequenceBounds& bounds,
                            int trials, int resolution, std::uint64_t seed,
                            int cont_len = 8, int n_min = 4);

/// For each m, pushes V forward by P1^m, translates the image of the
/// designated point to 0 and measures the V-mass landing outside the
/// petal. Default designation: the point whose image lies deepest toward
/// the repelling direction (max real part), per m.
std::vector<double> lemma22_shrink(const PointCloud& V, const PetalModel& petal,
                                   const std::vector<std::int64_t>& m_list,
                                   std::optional<cplx> designated = {});

}  // namespace polyseq
