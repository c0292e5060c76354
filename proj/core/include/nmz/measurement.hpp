#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nmz/core_optics.hpp"

// Blockade absorption, projective nondemolition monitoring with full
// outcome bookkeeping, and conditional-probability queries over outcome
// trees. A monitoring point records photon presence on a mode without
// destroying it: the "found" branch keeps the channel amplitude alive and
// continues evolving. Branch states stay sub-normalized; probabilities are
// exact ratios computed at query time.

namespace nmz {

/// Thrown when conditioning on an event of zero probability.
struct UndefinedConditionalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MonitoringPoint {
  SliceLabel slice;  // projection happens at the boundary after this slice
  ModeId mode;
};

struct MonitoringSchedule {
  std::vector<MonitoringPoint> points;  // must be in slice order
};

/// Schedule induced by the Monitor elements present in a network.
MonitoringSchedule schedule_from_monitors(const Network& net);

/// Projective measurement {pi_m, 1 - pi_m} on one mode. Both branches are
/// left sub-normalized; p_found = |amp(m)|^2.
struct ProjectionResult {
  PhotonState found;
  PhotonState not_found;
  double p_found;
};
ProjectionResult project(const PhotonState& state, const ModeId& m);

// ---------------------------------------------------------------------------
// Outcome trees

struct OutcomeNode;
using OutcomeNodePtr = std::unique_ptr<OutcomeNode>;

/// One node per monitoring outcome; leaves carry a terminal detector label
/// or the "absorbed" marker together with the joint probability of the
/// whole branch.
struct OutcomeNode {
  enum class Kind { Root, Found, NotFound, Terminal };
  Kind kind = Kind::Root;
  std::string outcome;  // "root", "found C@s_mid", "notfound C@s_mid", or leaf label
  double probability = 0.0;  // joint probability of reaching this node
  bool leaf = false;
  MonitoringPoint point;  // set for Found/NotFound nodes
  std::vector<OutcomeNodePtr> children;
};

struct OutcomeTree {
  OutcomeNodePtr root;
};

/// Flattened leaf with its monitoring history.
struct OutcomeLeaf {
  std::vector<std::pair<MonitoringPoint, bool>> findings;  // true = found
  std::string terminal;  // detector label or "absorbed"
  double probability;    // joint
};
std::vector<OutcomeLeaf> collect_leaves(const OutcomeTree& tree);

using LeafPredicate = std::function<bool(const OutcomeLeaf&)>;
LeafPredicate leaf_detector_is(const DetectorLabel& name);
LeafPredicate leaf_found_anywhere();

/// Depth-first exact enumeration of every monitoring outcome. Tree width is
/// 2^(number of points); the cap guards against runaway schedules.
OutcomeTree run_monitored(const Network& net, const MonitoringSchedule& sched,
                          std::size_t max_points = 20);

/// Exact conditional probability P(target | given) over leaf joint
/// probabilities. Conditioning on a zero-probability event throws.
double tree_conditional(const OutcomeTree& tree, const LeafPredicate& target,
                        const LeafPredicate& given);

// ---------------------------------------------------------------------------
// Monitoring vs. blocking

/// Network with each monitoring point turned into an absorber at the same
/// boundary (the Monitor element is replaced when present; otherwise an
/// absorber is appended to the slice or inserted just after it).
Network blocked_variant(const Network& net, const MonitoringSchedule& sched);

struct EquivalencePoint {
  MonitoringPoint point;
  double p_found;       // monitored run
  double p_absorbed;    // blocked run
};
struct BlockingEquivalenceReport {
  // |<never-found | blocked-surviving>| / norms, one entry per boundary of
  // the monitored network; vacuous (both branches empty) boundaries read 1.
  std::vector<double> fidelities;
  std::vector<EquivalencePoint> points;
  double max_fidelity_deviation = 0.0;
  double max_probability_deviation = 0.0;
  bool equivalent = false;
};

/// Runs the never-found branch of the monitored network against the
/// surviving branch of the blocked variant, boundary by boundary.
BlockingEquivalenceReport blocking_equivalence(const Network& net,
                                               const MonitoringSchedule& sched);

// ---------------------------------------------------------------------------
// Joint statistics without tree enumeration

/// Detector statistics split by whether the photon was found at any
/// monitoring point, computed by evolving a (never-found pure branch,
/// found-at-least-once density) pair. Linear in the number of points, so it
/// stays exact where the full tree would be 2^(M*N) wide.
struct MonitoredJoint {
  std::map<DetectorLabel, double> p_never_and;   // never found, detector clicked
  std::map<DetectorLabel, double> p_found_and;   // found somewhere, detector clicked
  double absorbed_never = 0.0;
  double absorbed_found = 0.0;
  double p_found_total() const;
};
MonitoredJoint monitored_joint(const Network& net, const MonitoringSchedule& sched);

}  // namespace nmz
