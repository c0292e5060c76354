#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmz/core_optics.hpp"

// Line-oriented textual description format for optical networks
// (".net" files):
//
//   file      := "network" NAME NL decl* slice+
//   decl      := "mode" NAME ("source" | "channel")? NL
//   slice     := "slice" LABEL NL element* "end" NL
//   element   := "bs" "r=" FLOAT NAME NAME NL
//              | "phase" "phi=" FLOAT NAME NL
//              | "absorb" NAME NL
//              | "monitor" NAME NL
//              | "detect" NAME "as" NAME NL
//
// '#' starts a comment running to end of line. FLOAT accepts decimal or
// scientific notation. Exactly one mode carries the "source" flag and at
// most one the "channel" flag. Encoding is ASCII with single line feeds.

namespace nmz {

struct ParseDiagnostic {
  enum class Kind { Syntax, UnknownMode, Range, Disjointness, Terminality };
  Kind kind;
  std::size_t line;    // 1-based
  std::size_t column;  // 1-based, points into the offending line
  std::string message;
};

const char* to_string(ParseDiagnostic::Kind k);

/// Carries the first diagnostic of each kind encountered; no partial
/// network escapes a failed parse.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(std::vector<ParseDiagnostic> diags);
  const std::vector<ParseDiagnostic>& diagnostics() const { return diags_; }

 private:
  std::vector<ParseDiagnostic> diags_;
};

/// Parses a network description; semantic validation (mode existence,
/// ranges, disjointness, terminality) runs after the grammar pass and is
/// reported with source positions.
Network parse(const std::string& text);

/// Canonical formatting: sorted mode declarations, one element per line,
/// floats with 17 significant digits. parse(serialize(n)) reproduces an
/// equivalent network, and serialize is byte-deterministic.
std::string serialize(const Network& net);

/// Shared float formatting used by every machine-readable surface.
std::string format_float(double v);

}  // namespace nmz
