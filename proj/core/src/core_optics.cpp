#include "nmz/core_optics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nmz {

std::vector<ModeId> element_modes(const Element& e) {
  return std::visit(
      [](const auto& el) -> std::vector<ModeId> {
        using T = std::decay_t<decltype(el)>;
        if constexpr (std::is_same_v<T, BeamSplitter>)
          return {el.m1, el.m2};
        else
          return {el.m};
      },
      e);
}

std::vector<DetectorLabel> Network::detector_labels() const {
  std::vector<DetectorLabel> out;
  for (const auto& s : slices)
    for (const auto& e : s.elements)
      if (const auto* d = std::get_if<Detector>(&e)) out.push_back(d->name);
  return out;
}

ModeId Network::detector_mode(const DetectorLabel& name) const {
  for (const auto& s : slices)
    for (const auto& e : s.elements)
      if (const auto* d = std::get_if<Detector>(&e))
        if (d->name == name) return d->m;
  throw StructuralError("unknown detector: " + name);
}

std::size_t Network::slice_index(const SliceLabel& label) const {
  for (std::size_t i = 0; i < slices.size(); ++i)
    if (slices[i].label == label) return i;
  throw StructuralError("unknown slice label: " + label);
}

std::array<std::array<Complex, 2>, 2> bs_unitary(double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw RangeError("beam-splitter reflectivity outside [0,1]");
  const double c = std::sqrt(r);
  const double s = std::sqrt(1.0 - r);
  return {{{Complex(c, 0.0), Complex(0.0, s)}, {Complex(0.0, s), Complex(c, 0.0)}}};
}

void apply_element(PhotonState& state, const Element& e, const std::set<ModeId>& declared,
                   std::size_t slice_index, std::vector<AbsorptionRecord>* absorptions,
                   std::vector<DetectionRecord>* detections) {
  for (const auto& m : element_modes(e))
    if (!declared.count(m)) throw StructuralError("element references undeclared mode: " + m);

  if (const auto* bs = std::get_if<BeamSplitter>(&e)) {
    const auto u = bs_unitary(bs->r);
    const Complex a1 = state.amp(bs->m1);
    const Complex a2 = state.amp(bs->m2);
    state.set_amp(bs->m1, u[0][0] * a1 + u[0][1] * a2);
    state.set_amp(bs->m2, u[1][0] * a1 + u[1][1] * a2);
  } else if (const auto* ps = std::get_if<PhaseShift>(&e)) {
    state.set_amp(ps->m, std::polar(1.0, ps->phi) * state.amp(ps->m));
  } else if (const auto* ab = std::get_if<Absorber>(&e)) {
    const Complex a = state.amp(ab->m);
    if (absorptions) absorptions->push_back({slice_index, ab->m, std::norm(a)});
    state.set_amp(ab->m, Complex(0.0, 0.0));
  } else if (std::get_if<Monitor>(&e)) {
    // Nondemolition probe point; branching is handled by the measurement
    // module, plain evolution passes through untouched.
  } else if (const auto* det = std::get_if<Detector>(&e)) {
    const Complex a = state.amp(det->m);
    if (detections) detections->push_back({slice_index, det->name, det->m, a});
    state.set_amp(det->m, Complex(0.0, 0.0));
  }
}

namespace {

// Dense transfer matrix of one slice over (declared modes + one sink per
// absorber/detector element), used for the isometry check.
struct DenseSlice {
  std::size_t n_modes = 0;
  std::size_t n_sinks = 0;
  // column-major action: out[i] = sum_j m[i][j] in[j]
  std::vector<std::vector<Complex>> m;
};

DenseSlice dense_transfer(const Slice& slice, const std::vector<ModeId>& order) {
  std::map<ModeId, std::size_t> idx;
  for (std::size_t i = 0; i < order.size(); ++i) idx[order[i]] = i;

  std::size_t sinks = 0;
  for (const auto& e : slice.elements)
    if (std::holds_alternative<Absorber>(e) || std::holds_alternative<Detector>(e)) ++sinks;

  DenseSlice d;
  d.n_modes = order.size();
  d.n_sinks = sinks;
  const std::size_t n = d.n_modes + d.n_sinks;
  d.m.assign(n, std::vector<Complex>(n, Complex(0.0, 0.0)));
  for (std::size_t i = 0; i < n; ++i) d.m[i][i] = Complex(1.0, 0.0);

  std::size_t next_sink = d.n_modes;
  for (const auto& e : slice.elements) {
    if (const auto* bs = std::get_if<BeamSplitter>(&e)) {
      const auto u = bs_unitary(bs->r);
      const std::size_t i1 = idx.at(bs->m1), i2 = idx.at(bs->m2);
      for (std::size_t col = 0; col < n; ++col) {
        const Complex a1 = d.m[i1][col], a2 = d.m[i2][col];
        d.m[i1][col] = u[0][0] * a1 + u[0][1] * a2;
        d.m[i2][col] = u[1][0] * a1 + u[1][1] * a2;
      }
    } else if (const auto* ps = std::get_if<PhaseShift>(&e)) {
      const std::size_t i1 = idx.at(ps->m);
      const Complex ph = std::polar(1.0, ps->phi);
      for (std::size_t col = 0; col < n; ++col) d.m[i1][col] *= ph;
    } else if (const auto* ab = std::get_if<Absorber>(&e)) {
      const std::size_t i1 = idx.at(ab->m), sk = next_sink++;
      for (std::size_t col = 0; col < n; ++col) {
        d.m[sk][col] = d.m[i1][col];
        d.m[i1][col] = Complex(0.0, 0.0);
      }
    } else if (const auto* det = std::get_if<Detector>(&e)) {
      const std::size_t i1 = idx.at(det->m), sk = next_sink++;
      for (std::size_t col = 0; col < n; ++col) {
        d.m[sk][col] = d.m[i1][col];
        d.m[i1][col] = Complex(0.0, 0.0);
      }
    }
  }
  return d;
}

// max |(U^dag U - I)_{jk}| restricted to live-mode columns
double isometry_defect(const DenseSlice& d) {
  double worst = 0.0;
  const std::size_t n = d.n_modes + d.n_sinks;
  for (std::size_t j = 0; j < d.n_modes; ++j) {
    for (std::size_t k = 0; k < d.n_modes; ++k) {
      Complex s(0.0, 0.0);
      for (std::size_t i = 0; i < n; ++i) s += std::conj(d.m[i][j]) * d.m[i][k];
      if (j == k) s -= Complex(1.0, 0.0);
      worst = std::max(worst, std::abs(s));
    }
  }
  return worst;
}

}  // namespace

ValidationReport validate(const Network& net) {
  ValidationReport rep;
  auto add = [&rep](ValidationReport::Kind k, std::string msg, std::size_t si = SIZE_MAX,
                    std::size_t ei = SIZE_MAX) {
    rep.violations.push_back({k, std::move(msg), si, ei});
  };

  for (const auto& m : net.modes) {
    if (m.empty() || m.find_first_of(" \t\r\n") != std::string::npos)
      add(ValidationReport::Kind::Structure, "invalid mode name: '" + m + "'");
  }
  if (!net.modes.count(net.source))
    add(ValidationReport::Kind::UnknownMode, "source mode not declared: " + net.source);
  if (net.channel && !net.modes.count(*net.channel))
    add(ValidationReport::Kind::UnknownMode, "channel mode not declared: " + *net.channel);
  if (net.channel && *net.channel == net.source)
    add(ValidationReport::Kind::Structure, "source mode cannot also be the channel mode");

  std::set<SliceLabel> labels;
  std::set<DetectorLabel> det_names;
  std::map<ModeId, std::size_t> detected_at;  // mode -> slice index of its detector

  for (std::size_t si = 0; si < net.slices.size(); ++si) {
    const auto& slice = net.slices[si];
    if (!labels.insert(slice.label).second)
      add(ValidationReport::Kind::Structure, "duplicate slice label: " + slice.label, si);

    std::set<ModeId> touched;
    for (std::size_t ei = 0; ei < slice.elements.size(); ++ei) {
      const auto& e = slice.elements[ei];
      const auto ms = element_modes(e);
      for (const auto& m : ms) {
        if (!net.modes.count(m))
          add(ValidationReport::Kind::UnknownMode,
              "slice " + slice.label + " references undeclared mode " + m, si, ei);
        if (!touched.insert(m).second)
          add(ValidationReport::Kind::Disjointness,
              "slice " + slice.label + " touches mode " + m + " twice", si, ei);
        auto det_it = detected_at.find(m);
        if (det_it != detected_at.end() && det_it->second < si)
          add(ValidationReport::Kind::Terminality,
              "mode " + m + " receives elements after its detector", si, ei);
      }
      if (const auto* bs = std::get_if<BeamSplitter>(&e)) {
        if (!(bs->r >= 0.0 && bs->r <= 1.0))
          add(ValidationReport::Kind::Range,
              "beam-splitter reflectivity outside [0,1] in slice " + slice.label, si, ei);
        if (bs->m1 == bs->m2)
          add(ValidationReport::Kind::Disjointness,
              "beam splitter with identical ports in slice " + slice.label, si, ei);
      }
      if (const auto* det = std::get_if<Detector>(&e)) {
        if (!det_names.insert(det->name).second)
          add(ValidationReport::Kind::Structure, "duplicate detector label: " + det->name, si, ei);
        if (det->name == "absorbed")
          add(ValidationReport::Kind::Structure, "'absorbed' is a reserved detector label", si, ei);
        detected_at.emplace(det->m, si);
      }
    }
  }

  // Per-slice isometry with sinks appended; skipped if ranges already failed.
  bool range_ok = std::none_of(rep.violations.begin(), rep.violations.end(), [](const auto& v) {
    return v.kind == ValidationReport::Kind::Range ||
           v.kind == ValidationReport::Kind::UnknownMode;
  });
  if (range_ok) {
    const std::vector<ModeId> order(net.modes.begin(), net.modes.end());
    for (std::size_t si = 0; si < net.slices.size(); ++si) {
      const double defect = isometry_defect(dense_transfer(net.slices[si], order));
      if (defect > tol::kExact) {
        std::ostringstream os;
        os << "slice " << net.slices[si].label << " transfer map is not an isometry (defect "
           << defect << ")";
        add(ValidationReport::Kind::Isometry, os.str(), si);
      }
    }
  }
  return rep;
}

Complex Trajectory::detector_amplitude(const DetectorLabel& name) const {
  for (const auto& d : detections)
    if (d.name == name) return d.amplitude;
  return Complex(0.0, 0.0);
}

double Trajectory::detector_probability(const DetectorLabel& name) const {
  return std::norm(detector_amplitude(name));
}

double Trajectory::absorbed_total() const {
  double s = 0.0;
  for (const auto& a : absorptions) s += a.probability;
  return s;
}

double Trajectory::total_probability(std::size_t boundary) const {
  double s = states.at(boundary).norm2();
  for (const auto& a : absorptions)
    if (a.slice_index < boundary) s += a.probability;
  for (const auto& d : detections)
    if (d.slice_index < boundary) s += std::norm(d.amplitude);
  return s;
}

Trajectory evolve(const Network& net, const PhotonState& input) {
  const auto rep = validate(net);
  if (!rep.ok()) {
    std::string msg = "invalid network:";
    for (const auto& v : rep.violations) msg += " [" + v.message + "]";
    throw StructuralError(msg);
  }
  for (const auto& [m, a] : input.amplitudes())
    if (!net.modes.count(m)) throw StructuralError("input amplitude on undeclared mode: " + m);
  if (input.norm2() > 1.0 + tol::kExact)
    throw StructuralError("input state has norm^2 greater than 1");

  Trajectory traj;
  traj.states.reserve(net.slices.size() + 1);
  traj.states.push_back(input);
  PhotonState st = input;
  for (std::size_t si = 0; si < net.slices.size(); ++si) {
    for (const auto& e : net.slices[si].elements)
      apply_element(st, e, net.modes, si, &traj.absorptions, &traj.detections);
    traj.states.push_back(st);
  }
  return traj;
}

std::map<std::string, double> detector_distribution(const Network& net) {
  const auto traj = evolve(net, PhotonState::unit(net.source));
  std::map<std::string, double> out;
  for (const auto& label : net.detector_labels()) out[label] = 0.0;
  for (const auto& d : traj.detections) out[d.name] += std::norm(d.amplitude);
  out["absorbed"] = traj.absorbed_total();
  return out;
}

Network subnetwork(const Network& net, std::size_t from, std::size_t to) {
  if (from > to || to > net.slices.size())
    throw StructuralError("subnetwork range out of bounds");
  Network sub = net;
  sub.slices.assign(net.slices.begin() + static_cast<std::ptrdiff_t>(from),
                    net.slices.begin() + static_cast<std::ptrdiff_t>(to));
  return sub;
}

Network suffix_after(const Network& net, const SliceLabel& label) {
  return subnetwork(net, net.slice_index(label) + 1, net.slices.size());
}

}  // namespace nmz
