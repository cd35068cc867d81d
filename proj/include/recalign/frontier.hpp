#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "recalign/repmap.hpp"

// Brute-force / grid computation of the three budgeted quantities on finite
// domains:
//   worst_mi_gap(eps)   max |I_u(Y;Z) - I_s(Y;Z)| over maps with K(f) <= eps
//   worst_mi_loss(gamma) max I_u(Y;X) - I_u(Y;Z) over (f, theta) with
//                        R(f, theta) <= gamma
//   trade_off_curve     min K(f) subject to R(f, theta) <= gamma, per gamma
// plus numerical verification of the lower-bound slacks and of the curve's
// monotone/convex shape.
//
// Searches run over enumerable map families (all deterministic maps, or all
// maps whose rows live on a stepped probability simplex). Enumeration is
// embarrassingly parallel over map indices; partial results merge in index
// order, so multi-worker runs are bit-identical to serial ones.

namespace recalign::frontier {

using repmap::Decoder;
using repmap::Distortion;
using repmap::FiniteDomainModel;
using repmap::RepresentationMap;
using prob::DivergenceKind;
using prob::FiniteSpace;

struct MapSearch {
    enum class Kind { deterministic, simplex_grid };

    Kind kind = Kind::deterministic;
    int resolution = 1;            // simplex step denominator (grid mode)
    std::size_t cap = 1'000'000;   // SearchSpaceTooLarge above this
    int workers = 1;

    static MapSearch deterministic_maps(std::size_t cap = 1'000'000, int workers = 1);
    static MapSearch simplex(int resolution, std::size_t cap = 1'000'000, int workers = 1);
};

// Random-access family of representation maps: every map is a choice of one
// simplex row per input symbol, so map #i decodes in O(|X|) without
// materializing the family. Ids are stable and lexicographic in the per-row
// choice digits.
class MapFamily {
  public:
    MapFamily(FiniteSpace x_space, FiniteSpace z_space, const MapSearch& search);

    std::size_t count() const { return count_; }
    RepresentationMap map_at(std::size_t index) const;
    const FiniteSpace& x_space() const { return x_space_; }
    const FiniteSpace& z_space() const { return z_space_; }
    int workers() const { return workers_; }

  private:
    FiniteSpace x_space_;
    FiniteSpace z_space_;
    std::vector<std::vector<double>> row_choices_;
    std::size_t count_ = 0;
    int workers_ = 1;
    bool deterministic_ = false;
    int resolution_ = 1;
};

// All z^x deterministic maps, lexicographic order.
std::vector<RepresentationMap> enumerate_deterministic_maps(const FiniteSpace& x_space,
                                                            const FiniteSpace& z_space,
                                                            std::size_t cap = 1'000'000);

// All maps whose rows have entries in {0, 1/res, ..., 1}; resolution 1
// reproduces the deterministic maps.
std::vector<RepresentationMap> stochastic_map_grid(const FiniteSpace& x_space,
                                                   const FiniteSpace& z_space, int resolution,
                                                   std::size_t cap = 1'000'000);

struct FrontierPoint {
    double gamma = 0.0;
    double k_min = 0.0;
    std::string argmin_map_id;
    std::string decoder_id;
    bool feasible = false;
};

// Every symbol of the two-sided lower bound on I_u(Y;Z), plus the slack of
// each side (slack >= 0 up to roundoff when f belongs to the search family).
struct BoundReport {
    double i_u_yz = 0.0;
    double i_s_yz = 0.0;
    double i_u_yx = 0.0;
    double k_f = 0.0;
    double w_of_k = 0.0;
    double q_of_r = 0.0;
    double r_f_theta = 0.0;
    double slack_1 = 0.0; // i_u_yz - (i_s_yz - w_of_k)
    double slack_2 = 0.0; // i_u_yz - (i_u_yx - q_of_r)
    std::string map_id;
    std::string decoder_id;
};

struct ShapeReport {
    double max_monotonicity_violation = 0.0;
    double max_convexity_violation = 0.0;
    double convexity_tolerance = 0.0;
    bool convexity_checked = false;
    std::size_t feasible_points = 0;

    bool pass() const;
};

// Maps whose divergence is undefined under KL (support violations) are
// treated as having infinite discrepancy: they never qualify under a finite
// budget and never win an argmin.

double worst_mi_gap(const FiniteDomainModel& d_unseen, const FiniteDomainModel& d_seen,
                    double eps, const MapFamily& family, DivergenceKind div);

double worst_mi_loss(const FiniteDomainModel& d_unseen, double gamma, const MapFamily& family,
                     const Distortion& loss);

std::vector<FrontierPoint> trade_off_curve(const FiniteDomainModel& d_unseen,
                                           const FiniteDomainModel& d_seen, const Decoder& theta,
                                           const Distortion& loss,
                                           const std::vector<double>& gamma_grid,
                                           const MapFamily& family, DivergenceKind div);

// Per z: the candidate (or point) minimizing the expected distortion given
// z under (d, f); zero-mass z falls back to the lowest-index output.
Decoder best_response_decoder(const FiniteDomainModel& d, const RepresentationMap& f,
                              const Distortion& loss);

// Slack report for one (f, theta). The bound is guaranteed only when f is a
// member of `family`; callers pick f from the same family they search.
BoundReport mi_bound_report(const FiniteDomainModel& d_unseen, const FiniteDomainModel& d_seen,
                            const RepresentationMap& f, const Decoder& theta,
                            const Distortion& loss, DivergenceKind div, const MapFamily& family);

// Same report for every map in the family, sharing one budget-sweep
// precomputation. Ordered by map index.
std::vector<BoundReport> mi_bound_report_all(const FiniteDomainModel& d_unseen,
                                             const FiniteDomainModel& d_seen,
                                             const Distortion& loss, DivergenceKind div,
                                             const MapFamily& family);

// Monotonicity must hold to 1e-9 on any curve (nested feasible sets).
// Midpoint convexity is checked only when `check_convexity` is set (grid
// search with a convex divergence); its tolerance widens with the curve's
// range over the simplex resolution, since a discretized minimum sits above
// the true curve by O(1/resolution).
ShapeReport curve_shape_report(const std::vector<FrontierPoint>& curve, int resolution,
                               bool check_convexity);

// gamma,k_min,map_id,decoder_id,feasible (one row per grid point; infeasible
// rows keep the gamma and decoder but carry nan / empty map).
void write_frontier_csv(std::ostream& out, const std::vector<FrontierPoint>& curve);

std::string bound_report_json(const BoundReport& report, DivergenceKind div);

} // namespace recalign::frontier
