#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stattest/model.hpp"
#include "stattest/numkit.hpp"

// Per-unit subdifferential set representations of the empirical loss, the
// span qualification that makes them exact, and the comparison regularity
// conditions (general position, LIKQ, LIAD).

namespace stattest::chain {

/// Convex/limiting/regular subdifferential data of one hidden unit. The
/// full product set is {u_component} x (w-set) per unit:
///  - clarke: translated zonotope with one segment per tied sample;
///  - frechet: present iff no tied sample has u*rho < 0, segments over the
///    nonnegative ties only;
///  - limiting: one translated zonotope per realizable strict sign pattern
///    of the negative ties (segments again over the nonnegative ties).
struct UnitSubdiff {
  double u_component = 0.0;
  numkit::SegmentSumSet clarke;
  std::optional<numkit::SegmentSumSet> frechet;
  std::vector<numkit::SegmentSumSet> limiting;
  /// Activation bits over tied_neg for each limiting member (1 = the tied
  /// sample is active on that branch).
  std::vector<std::vector<uint8_t>> limiting_signs;
};

struct SqReport {
  struct UnitRanks {
    int rank_nonneg = 0;  // rank of the tied data with u*rho >= 0
    int rank_neg = 0;     // rank of the tied data with u*rho < 0
    int rank_joint = 0;
    bool sq = true;  // rank_joint == rank_nonneg + rank_neg
  };
  std::vector<UnitRanks> units;
  bool overall = true;
};

struct RegularityReport {
  bool general_position = false;
  bool likq = false;
  bool liad = false;
  bool sq = false;
};

/// Span qualification per unit: the spans of the two tied groups intersect
/// only at the origin, decided through rank additivity. Empty groups have
/// rank 0 and always qualify.
SqReport check_sq(const model::Network& net, const model::Dataset& data,
                  const model::LossModel& loss, double rel_tol = 1e-9);

/// Builds the per-unit set representations. Realizability of limiting sign
/// patterns is decided by strict-feasibility LPs with prefix pruning; an
/// indeterminate LP propagates as solver_error. Pass include_limiting =
/// false to skip the pattern enumeration when only the convex sets are
/// needed.
std::vector<UnitSubdiff> build_subdiff_sets(const model::Network& net,
                                            const model::Dataset& data,
                                            const model::LossModel& loss,
                                            const numkit::SolverOptions& opt = {},
                                            bool include_limiting = true);

/// general_position requires every d-subset of the data to have full rank;
/// guarded by C(N, d) <= max_subsets (guard_error beyond). LIAD checks the
/// tied data of each unit for linear independence; LIKQ tests the stacked
/// tie rows in the full parameter space, which is equivalent.
RegularityReport check_regularities(const model::Network& net, const model::Dataset& data,
                                    const model::LossModel& loss,
                                    const numkit::SolverOptions& opt = {},
                                    long long max_subsets = 1'000'000);

}  // namespace stattest::chain
