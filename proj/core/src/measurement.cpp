#include "nmz/measurement.hpp"

#include <algorithm>
#include <cmath>

namespace nmz {

namespace {

void check_schedule(const Network& net, const MonitoringSchedule& sched) {
  std::size_t last = 0;
  for (const auto& p : sched.points) {
    const std::size_t idx = net.slice_index(p.slice);  // throws on unknown label
    if (!net.modes.count(p.mode))
      throw StructuralError("monitoring point on undeclared mode: " + p.mode);
    if (idx < last) throw StructuralError("monitoring points out of slice order");
    last = idx;
  }
}

// points grouped by boundary index (boundary k = after slice k)
std::map<std::size_t, std::vector<MonitoringPoint>> points_by_boundary(
    const Network& net, const MonitoringSchedule& sched) {
  std::map<std::size_t, std::vector<MonitoringPoint>> out;
  for (const auto& p : sched.points) out[net.slice_index(p.slice)].push_back(p);
  return out;
}

std::string point_tag(const MonitoringPoint& p) { return p.mode + "@" + p.slice; }

}  // namespace

MonitoringSchedule schedule_from_monitors(const Network& net) {
  MonitoringSchedule sched;
  for (const auto& s : net.slices)
    for (const auto& e : s.elements)
      if (const auto* mo = std::get_if<Monitor>(&e)) sched.points.push_back({s.label, mo->m});
  return sched;
}

ProjectionResult project(const PhotonState& state, const ModeId& m) {
  const Complex a = state.amp(m);
  PhotonState found;
  found.set_amp(m, a);
  PhotonState not_found = state;
  not_found.set_amp(m, Complex(0.0, 0.0));
  return {std::move(found), std::move(not_found), std::norm(a)};
}

// ---------------------------------------------------------------------------
// Outcome trees

namespace {

struct TreeBuilder {
  const Network& net;
  std::map<std::size_t, std::vector<MonitoringPoint>> boundary_points;

  // Evolves `state` from slice `from` onward, attaching children to `node`.
  void grow(OutcomeNode* node, PhotonState state, std::size_t from) {
    for (std::size_t si = from; si < net.slices.size(); ++si) {
      double absorbed_here = 0.0;
      for (const auto& e : net.slices[si].elements) {
        if (const auto* det = std::get_if<Detector>(&e)) {
          const double p = std::norm(state.amp(det->m));
          auto leaf = std::make_unique<OutcomeNode>();
          leaf->kind = OutcomeNode::Kind::Terminal;
          leaf->outcome = det->name;
          leaf->probability = p;
          leaf->leaf = true;
          node->children.push_back(std::move(leaf));
          state.set_amp(det->m, Complex(0.0, 0.0));
        } else if (const auto* ab = std::get_if<Absorber>(&e)) {
          absorbed_here += std::norm(state.amp(ab->m));
          state.set_amp(ab->m, Complex(0.0, 0.0));
        } else {
          apply_element(state, e, net.modes, si, nullptr, nullptr);
        }
      }
      if (absorbed_here > 0.0) {
        auto leaf = std::make_unique<OutcomeNode>();
        leaf->kind = OutcomeNode::Kind::Terminal;
        leaf->outcome = "absorbed";
        leaf->probability = absorbed_here;
        leaf->leaf = true;
        node->children.push_back(std::move(leaf));
      }

      auto bp = boundary_points.find(si);
      if (bp != boundary_points.end()) {
        // branch on the first point at this boundary; re-queue the rest
        branch(node, std::move(state), si, bp->second, 0);
        return;
      }
    }
    // end of network: any leftover live amplitude is unterminated; charge it
    // to an explicit leaf so leaf probabilities always sum to the input norm
    const double live = state.norm2();
    if (live > 0.0) {
      auto leaf = std::make_unique<OutcomeNode>();
      leaf->kind = OutcomeNode::Kind::Terminal;
      leaf->outcome = "undetected";
      leaf->probability = live;
      leaf->leaf = true;
      node->children.push_back(std::move(leaf));
    }
  }

  void branch(OutcomeNode* node, PhotonState state, std::size_t si,
              const std::vector<MonitoringPoint>& pts, std::size_t pi) {
    if (pi == pts.size()) {
      grow(node, std::move(state), si + 1);
      return;
    }
    const auto& p = pts[pi];
    auto res = project(state, p.mode);

    auto found = std::make_unique<OutcomeNode>();
    found->kind = OutcomeNode::Kind::Found;
    found->outcome = "found " + point_tag(p);
    found->probability = res.p_found;
    found->point = p;
    branch(found.get(), std::move(res.found), si, pts, pi + 1);
    node->children.push_back(std::move(found));

    auto notfound = std::make_unique<OutcomeNode>();
    notfound->kind = OutcomeNode::Kind::NotFound;
    notfound->outcome = "notfound " + point_tag(p);
    notfound->probability = res.not_found.norm2();
    notfound->point = p;
    branch(notfound.get(), std::move(res.not_found), si, pts, pi + 1);
    node->children.push_back(std::move(notfound));
  }
};

}  // namespace

OutcomeTree run_monitored(const Network& net, const MonitoringSchedule& sched,
                          std::size_t max_points) {
  const auto rep = validate(net);
  if (!rep.ok()) throw StructuralError("invalid network: " + rep.violations.front().message);
  check_schedule(net, sched);
  if (sched.points.size() > max_points)
    throw StructuralError("monitoring schedule exceeds the exact-enumeration cap");

  TreeBuilder builder{net, points_by_boundary(net, sched)};
  OutcomeTree tree;
  tree.root = std::make_unique<OutcomeNode>();
  tree.root->kind = OutcomeNode::Kind::Root;
  tree.root->outcome = "root";
  tree.root->probability = 1.0;
  builder.grow(tree.root.get(), PhotonState::unit(net.source), 0);
  return tree;
}

namespace {

void collect(const OutcomeNode* node, std::vector<std::pair<MonitoringPoint, bool>>& path,
             std::vector<OutcomeLeaf>& out) {
  if (node->leaf) {
    out.push_back({path, node->outcome, node->probability});
    return;
  }
  const bool is_branch =
      node->kind == OutcomeNode::Kind::Found || node->kind == OutcomeNode::Kind::NotFound;
  if (is_branch) path.emplace_back(node->point, node->kind == OutcomeNode::Kind::Found);
  for (const auto& c : node->children) collect(c.get(), path, out);
  if (is_branch) path.pop_back();
}

}  // namespace

std::vector<OutcomeLeaf> collect_leaves(const OutcomeTree& tree) {
  std::vector<OutcomeLeaf> out;
  std::vector<std::pair<MonitoringPoint, bool>> path;
  collect(tree.root.get(), path, out);
  return out;
}

LeafPredicate leaf_detector_is(const DetectorLabel& name) {
  return [name](const OutcomeLeaf& l) { return l.terminal == name; };
}

LeafPredicate leaf_found_anywhere() {
  return [](const OutcomeLeaf& l) {
    return std::any_of(l.findings.begin(), l.findings.end(),
                       [](const auto& f) { return f.second; });
  };
}

double tree_conditional(const OutcomeTree& tree, const LeafPredicate& target,
                        const LeafPredicate& given) {
  double p_given = 0.0, p_both = 0.0;
  for (const auto& leaf : collect_leaves(tree)) {
    if (given(leaf)) {
      p_given += leaf.probability;
      if (target(leaf)) p_both += leaf.probability;
    }
  }
  if (p_given <= 0.0)
    throw UndefinedConditionalError("conditioning event has zero probability");
  return p_both / p_given;
}

// ---------------------------------------------------------------------------
// Monitoring vs. blocking

namespace {

struct BlockedBuild {
  Network net;
  // monitored boundary k -> blocked boundary index
  std::vector<std::size_t> boundary_map;
  // per schedule point: slice index of its absorber in the blocked net
  std::vector<std::size_t> absorber_slice;
};

BlockedBuild build_blocked(const Network& net, const MonitoringSchedule& sched) {
  // schedule position of each point, grouped by slice index
  std::map<std::size_t, std::vector<std::size_t>> by_slice;
  for (std::size_t pi = 0; pi < sched.points.size(); ++pi)
    by_slice[net.slice_index(sched.points[pi].slice)].push_back(pi);

  BlockedBuild out;
  out.net = net;
  out.net.name = net.name + "-blocked";
  out.net.slices.clear();
  out.absorber_slice.resize(sched.points.size());
  out.boundary_map.push_back(0);

  for (std::size_t si = 0; si < net.slices.size(); ++si) {
    Slice copy = net.slices[si];
    std::vector<std::size_t> extra;  // points needing their own slice
    if (auto it = by_slice.find(si); it != by_slice.end()) {
      for (std::size_t pi : it->second) {
        const ModeId& mode = sched.points[pi].mode;
        bool placed = false;
        for (auto& e : copy.elements) {
          if (const auto* mo = std::get_if<Monitor>(&e); mo && mo->m == mode) {
            e = Absorber{mode};
            placed = true;
            break;
          }
        }
        if (!placed) {
          bool touches = false;
          for (const auto& e : copy.elements)
            for (const auto& m : element_modes(e))
              if (m == mode) touches = true;
          if (!touches) {
            copy.elements.push_back(Absorber{mode});
            placed = true;
          }
        }
        if (placed)
          out.absorber_slice[pi] = out.net.slices.size();
        else
          extra.push_back(pi);
      }
    }
    out.net.slices.push_back(std::move(copy));
    for (std::size_t pi : extra) {
      const ModeId& mode = sched.points[pi].mode;
      out.absorber_slice[pi] = out.net.slices.size();
      out.net.slices.push_back({net.slices[si].label + "+block-" + mode, {Absorber{mode}}});
    }
    // post-absorption boundary, so it aligns with the post-projection state
    out.boundary_map.push_back(out.net.slices.size());
  }
  return out;
}

double branch_fidelity(const PhotonState& a, const PhotonState& b) {
  const double na = std::sqrt(a.norm2());
  const double nb = std::sqrt(b.norm2());
  if (na == 0.0 && nb == 0.0) return 1.0;  // both branches extinguished
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::abs(a.inner(b)) / (na * nb);
}

}  // namespace

Network blocked_variant(const Network& net, const MonitoringSchedule& sched) {
  check_schedule(net, sched);
  return build_blocked(net, sched).net;
}

BlockingEquivalenceReport blocking_equivalence(const Network& net,
                                               const MonitoringSchedule& sched) {
  check_schedule(net, sched);
  const auto blocked = build_blocked(net, sched);
  const auto blocked_traj = evolve(blocked.net, PhotonState::unit(net.source));

  // Never-found branch of the monitored run, one state per boundary
  // (post-projection at monitored boundaries).
  const auto boundary_pts = points_by_boundary(net, sched);
  std::vector<PhotonState> never;
  std::vector<double> p_found;
  PhotonState st = PhotonState::unit(net.source);
  never.push_back(st);
  for (std::size_t si = 0; si < net.slices.size(); ++si) {
    for (const auto& e : net.slices[si].elements)
      apply_element(st, e, net.modes, si, nullptr, nullptr);
    auto bp = boundary_pts.find(si);
    if (bp != boundary_pts.end()) {
      for (const auto& p : bp->second) {
        auto res = project(st, p.mode);
        p_found.push_back(res.p_found);
        st = std::move(res.not_found);
      }
    }
    never.push_back(st);
  }

  BlockingEquivalenceReport rep;
  for (std::size_t k = 0; k < never.size(); ++k) {
    const double f = branch_fidelity(never[k], blocked_traj.states.at(blocked.boundary_map[k]));
    rep.fidelities.push_back(f);
    rep.max_fidelity_deviation = std::max(rep.max_fidelity_deviation, std::abs(1.0 - f));
  }
  for (std::size_t pi = 0; pi < sched.points.size(); ++pi) {
    double absorbed = 0.0;
    for (const auto& a : blocked_traj.absorptions)
      if (a.slice_index == blocked.absorber_slice[pi] && a.mode == sched.points[pi].mode)
        absorbed += a.probability;
    rep.points.push_back({sched.points[pi], p_found[pi], absorbed});
    rep.max_probability_deviation =
        std::max(rep.max_probability_deviation, std::abs(p_found[pi] - absorbed));
  }
  rep.equivalent = rep.max_fidelity_deviation <= tol::kExact &&
                   rep.max_probability_deviation <= tol::kExact;
  return rep;
}

// ---------------------------------------------------------------------------
// Joint statistics without tree enumeration

namespace {

using Density = std::vector<std::vector<Complex>>;

struct DensityPair {
  Density never;
  Density found;
};

void zero_row_col(Density& rho, std::size_t m) {
  for (std::size_t i = 0; i < rho.size(); ++i) {
    rho[m][i] = Complex(0.0, 0.0);
    rho[i][m] = Complex(0.0, 0.0);
  }
}

// rho <- U rho U^dag for the 2x2 unitary acting on rows/cols (i1, i2)
void conjugate_pair(Density& rho, std::size_t i1, std::size_t i2,
                    const std::array<std::array<Complex, 2>, 2>& u) {
  const std::size_t n = rho.size();
  for (std::size_t col = 0; col < n; ++col) {
    const Complex a = rho[i1][col], b = rho[i2][col];
    rho[i1][col] = u[0][0] * a + u[0][1] * b;
    rho[i2][col] = u[1][0] * a + u[1][1] * b;
  }
  for (std::size_t row = 0; row < n; ++row) {
    const Complex a = rho[row][i1], b = rho[row][i2];
    rho[row][i1] = std::conj(u[0][0]) * a + std::conj(u[0][1]) * b;
    rho[row][i2] = std::conj(u[1][0]) * a + std::conj(u[1][1]) * b;
  }
}

void scale_row_col(Density& rho, std::size_t m, Complex ph) {
  const std::size_t n = rho.size();
  for (std::size_t col = 0; col < n; ++col) rho[m][col] *= ph;
  for (std::size_t row = 0; row < n; ++row) rho[row][m] *= std::conj(ph);
}

}  // namespace

double MonitoredJoint::p_found_total() const {
  double s = absorbed_found;
  for (const auto& [k, v] : p_found_and) s += v;
  return s;
}

MonitoredJoint monitored_joint(const Network& net, const MonitoringSchedule& sched) {
  const auto rep = validate(net);
  if (!rep.ok()) throw StructuralError("invalid network: " + rep.violations.front().message);
  check_schedule(net, sched);

  std::vector<ModeId> order(net.modes.begin(), net.modes.end());
  std::map<ModeId, std::size_t> idx;
  for (std::size_t i = 0; i < order.size(); ++i) idx[order[i]] = i;
  const std::size_t n = order.size();

  MonitoredJoint out;
  for (const auto& label : net.detector_labels()) {
    out.p_never_and[label] = 0.0;
    out.p_found_and[label] = 0.0;
  }

  DensityPair rho;
  rho.never.assign(n, std::vector<Complex>(n, Complex(0.0, 0.0)));
  rho.found.assign(n, std::vector<Complex>(n, Complex(0.0, 0.0)));
  rho.never[idx.at(net.source)][idx.at(net.source)] = Complex(1.0, 0.0);

  const auto boundary_pts = points_by_boundary(net, sched);
  for (std::size_t si = 0; si < net.slices.size(); ++si) {
    for (const auto& e : net.slices[si].elements) {
      if (const auto* bs = std::get_if<BeamSplitter>(&e)) {
        const auto u = bs_unitary(bs->r);
        conjugate_pair(rho.never, idx.at(bs->m1), idx.at(bs->m2), u);
        conjugate_pair(rho.found, idx.at(bs->m1), idx.at(bs->m2), u);
      } else if (const auto* ps = std::get_if<PhaseShift>(&e)) {
        const Complex ph = std::polar(1.0, ps->phi);
        scale_row_col(rho.never, idx.at(ps->m), ph);
        scale_row_col(rho.found, idx.at(ps->m), ph);
      } else if (const auto* ab = std::get_if<Absorber>(&e)) {
        const std::size_t m = idx.at(ab->m);
        out.absorbed_never += rho.never[m][m].real();
        out.absorbed_found += rho.found[m][m].real();
        zero_row_col(rho.never, m);
        zero_row_col(rho.found, m);
      } else if (const auto* det = std::get_if<Detector>(&e)) {
        const std::size_t m = idx.at(det->m);
        out.p_never_and[det->name] += rho.never[m][m].real();
        out.p_found_and[det->name] += rho.found[m][m].real();
        zero_row_col(rho.never, m);
        zero_row_col(rho.found, m);
      }
    }
    auto bp = boundary_pts.find(si);
    if (bp == boundary_pts.end()) continue;
    for (const auto& p : bp->second) {
      const std::size_t m = idx.at(p.mode);
      // found-ever gains the found branches of both inputs; coherence with
      // the complement is destroyed by the projective record
      const Complex gained = rho.never[m][m] + rho.found[m][m];
      zero_row_col(rho.never, m);
      Density found_next = rho.found;
      zero_row_col(found_next, m);
      found_next[m][m] = gained;
      rho.found = std::move(found_next);
    }
  }
  return out;
}

}  // namespace nmz
