#pragma once

#include <array>
#include <complex>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

// Exact complex-amplitude evolution of a single photon through a
// time-sliced linear-optical network. All values are immutable after
// construction and every operation is a pure function of its inputs,
// so networks can be evaluated concurrently without coordination.

namespace nmz {

using Complex = std::complex<double>;
using ModeId = std::string;
using SliceLabel = std::string;
using DetectorLabel = std::string;

namespace tol {
// Exact-arithmetic claims (unitarity, norm conservation, equivalences).
inline constexpr double kExact = 1e-12;
// Quantities involving division by small post-selection amplitudes.
inline constexpr double kPostSelected = 1e-10;
// Minimum post-selection amplitude magnitude for a conditioned query.
inline constexpr double kMinPostAmp = 1e-10;
}  // namespace tol

/// Thrown when a referenced mode, slice, or detector does not exist,
/// or when a network is structurally malformed.
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a numeric parameter is outside its admissible range.
struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// State

/// Sparse single-photon state: complex amplitude per spatial mode.
/// Sub-normalized states represent un-renormalized measurement branches;
/// renormalization happens only at reporting time.
class PhotonState {
 public:
  PhotonState() = default;
  explicit PhotonState(std::map<ModeId, Complex> amps) : amps_(std::move(amps)) {
    prune();
  }
  static PhotonState unit(const ModeId& m) { return PhotonState({{m, Complex(1.0, 0.0)}}); }

  Complex amp(const ModeId& m) const {
    auto it = amps_.find(m);
    return it == amps_.end() ? Complex(0.0, 0.0) : it->second;
  }
  void set_amp(const ModeId& m, Complex a) {
    if (a == Complex(0.0, 0.0))
      amps_.erase(m);
    else
      amps_[m] = a;
  }

  /// Squared two-norm (total live probability).
  double norm2() const {
    double s = 0.0;
    for (const auto& [m, a] : amps_) s += std::norm(a);
    return s;
  }

  bool empty() const { return amps_.empty(); }

  /// Modes currently carrying amplitude, in lexicographic order.
  const std::map<ModeId, Complex>& amplitudes() const { return amps_; }

  /// ⟨this|other⟩ with this-side conjugation.
  Complex inner(const PhotonState& other) const {
    Complex s(0.0, 0.0);
    for (const auto& [m, a] : amps_) s += std::conj(a) * other.amp(m);
    return s;
  }

 private:
  void prune() {
    for (auto it = amps_.begin(); it != amps_.end();)
      it = (it->second == Complex(0.0, 0.0)) ? amps_.erase(it) : std::next(it);
  }
  std::map<ModeId, Complex> amps_;
};

// ---------------------------------------------------------------------------
// Elements

struct BeamSplitter {
  double r = 0.5;  // reflectivity in [0,1]; transmissivity is 1-r
  ModeId m1, m2;
};
struct PhaseShift {
  ModeId m;
  double phi = 0.0;  // radians
};
struct Absorber {  // blockade: removes the mode's amplitude, records |amp|^2
  ModeId m;
};
struct Monitor {  // marks a nondemolition probe point; inert under evolve()
  ModeId m;
};
struct Detector {  // terminal: moves the mode's amplitude into a named register
  ModeId m;
  DetectorLabel name;
};

using Element = std::variant<BeamSplitter, PhaseShift, Absorber, Monitor, Detector>;

/// Modes an element touches (1 or 2 entries).
std::vector<ModeId> element_modes(const Element& e);

struct Slice {
  SliceLabel label;
  std::vector<Element> elements;  // must touch pairwise-disjoint mode sets
};

// ---------------------------------------------------------------------------
// Network

struct Network {
  std::string name = "net";
  std::set<ModeId> modes;
  ModeId source;
  std::optional<ModeId> channel;  // designated transmission-channel mode
  std::vector<Slice> slices;

  /// Detector labels in declaration order.
  std::vector<DetectorLabel> detector_labels() const;
  /// Mode a detector consumes; throws StructuralError for unknown labels.
  ModeId detector_mode(const DetectorLabel& name) const;
  /// Index of a labeled slice; throws StructuralError if absent.
  std::size_t slice_index(const SliceLabel& label) const;
};

/// Structural and numeric validation report. Empty = valid.
struct ValidationReport {
  enum class Kind { UnknownMode, Range, Disjointness, Terminality, Structure, Isometry };
  struct Violation {
    Kind kind;
    std::string message;
    std::size_t slice_index = SIZE_MAX;  // SIZE_MAX when not slice-specific
    std::size_t element_index = SIZE_MAX;
  };
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks mode declarations, per-slice mode disjointness, detector
/// terminality and uniqueness, parameter ranges, and per-slice isometry
/// (with absorber/detector sinks appended as explicit dimensions).
ValidationReport validate(const Network& net);

// ---------------------------------------------------------------------------
// Evolution

struct AbsorptionRecord {
  std::size_t slice_index;
  ModeId mode;
  double probability;
};
struct DetectionRecord {
  std::size_t slice_index;
  DetectorLabel name;
  ModeId mode;
  Complex amplitude;
};

/// Full record of one forward evolution: the live state at every slice
/// boundary (index 0 = input, index k = after slice k-1), plus where
/// amplitude left the live space.
struct Trajectory {
  std::vector<PhotonState> states;
  std::vector<AbsorptionRecord> absorptions;
  std::vector<DetectionRecord> detections;

  Complex detector_amplitude(const DetectorLabel& name) const;
  double detector_probability(const DetectorLabel& name) const;
  double absorbed_total() const;
  /// Live + detected + absorbed probability at boundary k.
  double total_probability(std::size_t boundary) const;
};

/// 2x2 beam-splitter unitary, symmetric convention with i on transmission:
///   [[sqrt(r), i sqrt(1-r)], [i sqrt(1-r), sqrt(r)]]
/// Throws RangeError outside [0,1]. r=0 and r=1 are the degenerate
/// crossing / mirror cases and are allowed.
std::array<std::array<Complex, 2>, 2> bs_unitary(double r);

/// Applies one element in place. Detection and absorption side records are
/// appended to the trajectory-style sinks passed in.
void apply_element(PhotonState& state, const Element& e, const std::set<ModeId>& declared,
                   std::size_t slice_index, std::vector<AbsorptionRecord>* absorptions,
                   std::vector<DetectionRecord>* detections);

/// Evolves an input state through every slice. The network is validated
/// first; the input must be supported on declared modes with norm^2 at
/// most 1 (sub-normalized branches are legal inputs).
Trajectory evolve(const Network& net, const PhotonState& input);

/// Detector label -> probability for the canonical run (unit amplitude at
/// the source), plus total absorbed probability under "absorbed".
std::map<std::string, double> detector_distribution(const Network& net);

/// Slices [from, to) of `net` as a standalone network (same declarations).
/// evolve(net, in) equals evolve over a prefix followed by evolve of the
/// suffix on the prefix's final live state.
Network subnetwork(const Network& net, std::size_t from, std::size_t to);

/// Suffix network starting at the boundary after the labeled slice.
/// This is how a photon is "injected directly" on an interior rail.
Network suffix_after(const Network& net, const SliceLabel& label);

}  // namespace nmz
