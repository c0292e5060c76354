#include "nmz/netdesc.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>

namespace nmz {

const char* to_string(ParseDiagnostic::Kind k) {
  switch (k) {
    case ParseDiagnostic::Kind::Syntax: return "syntax";
    case ParseDiagnostic::Kind::UnknownMode: return "unknown-mode";
    case ParseDiagnostic::Kind::Range: return "range";
    case ParseDiagnostic::Kind::Disjointness: return "disjointness";
    case ParseDiagnostic::Kind::Terminality: return "terminality";
  }
  return "?";
}

namespace {

std::string describe(const std::vector<ParseDiagnostic>& diags) {
  std::ostringstream os;
  for (std::size_t i = 0; i < diags.size(); ++i) {
    if (i) os << "; ";
    const auto& d = diags[i];
    os << d.line << ":" << d.column << ": " << to_string(d.kind) << ": " << d.message;
  }
  return os.str();
}

struct Token {
  std::string text;
  std::size_t column;  // 1-based
};

std::vector<Token> tokenize_line(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' &&
           line[i] != '#')
      ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

std::optional<double> parse_float(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

// Collects at most one diagnostic per kind, keeping the earliest position.
class DiagnosticSet {
 public:
  void add(ParseDiagnostic::Kind kind, std::size_t line, std::size_t col, std::string msg) {
    for (auto& d : diags_)
      if (d.kind == kind) return;
    diags_.push_back({kind, line, col, std::move(msg)});
  }
  bool empty() const { return diags_.empty(); }
  std::vector<ParseDiagnostic> take() {
    std::sort(diags_.begin(), diags_.end(),
              [](const auto& a, const auto& b) { return a.line < b.line; });
    return std::move(diags_);
  }

 private:
  std::vector<ParseDiagnostic> diags_;
};

struct ElementPos {
  std::size_t line;
  std::size_t column;
};

}  // namespace

ParseError::ParseError(std::vector<ParseDiagnostic> diags)
    : std::runtime_error(describe(diags)), diags_(std::move(diags)) {}

Network parse(const std::string& text) {
  DiagnosticSet diags;
  auto syntax = [&diags](std::size_t line, std::size_t col, std::string msg) {
    diags.add(ParseDiagnostic::Kind::Syntax, line, col, std::move(msg));
  };

  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) lines.push_back(cur);
  }

  Network net;
  bool have_header = false;
  bool have_source = false;
  bool in_slice = false;
  std::size_t slice_count = 0;
  // positions for mapping semantic violations back to source lines
  std::vector<std::vector<ElementPos>> element_pos;
  std::vector<ElementPos> slice_pos;

  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto toks = tokenize_line(lines[ln]);
    if (toks.empty()) continue;
    const std::size_t lno = ln + 1;
    const auto& head = toks[0];

    if (!have_header) {
      if (head.text != "network" || toks.size() != 2) {
        syntax(lno, head.column, "expected 'network NAME' header");
        break;
      }
      net.name = toks[1].text;
      have_header = true;
      continue;
    }

    if (head.text == "mode") {
      if (in_slice) {
        syntax(lno, head.column, "mode declaration inside a slice");
        continue;
      }
      if (slice_count > 0) {
        syntax(lno, head.column, "mode declaration after first slice");
        continue;
      }
      if (toks.size() < 2 || toks.size() > 3) {
        syntax(lno, head.column, "expected 'mode NAME [source|channel]'");
        continue;
      }
      const auto& name = toks[1].text;
      if (!net.modes.insert(name).second) {
        syntax(lno, toks[1].column, "duplicate mode declaration: " + name);
        continue;
      }
      if (toks.size() == 3) {
        if (toks[2].text == "source") {
          if (have_source) {
            syntax(lno, toks[2].column, "more than one source mode");
          } else {
            net.source = name;
            have_source = true;
          }
        } else if (toks[2].text == "channel") {
          if (net.channel) {
            syntax(lno, toks[2].column, "more than one channel mode");
          } else {
            net.channel = name;
          }
        } else {
          syntax(lno, toks[2].column, "unknown mode flag: " + toks[2].text);
        }
      }
      continue;
    }

    if (head.text == "slice") {
      if (in_slice) {
        syntax(lno, head.column, "missing 'end' before next slice");
        continue;
      }
      if (toks.size() != 2) {
        syntax(lno, head.column, "expected 'slice LABEL'");
        continue;
      }
      net.slices.push_back({toks[1].text, {}});
      element_pos.emplace_back();
      slice_pos.push_back({lno, head.column});
      in_slice = true;
      ++slice_count;
      continue;
    }

    if (head.text == "end") {
      if (!in_slice) {
        syntax(lno, head.column, "'end' outside a slice");
        continue;
      }
      if (toks.size() != 1) syntax(lno, toks[1].column, "unexpected token after 'end'");
      in_slice = false;
      continue;
    }

    if (!in_slice) {
      syntax(lno, head.column, "unexpected token: " + head.text);
      continue;
    }

    auto push_element = [&](Element e) {
      net.slices.back().elements.push_back(std::move(e));
      element_pos.back().push_back({lno, head.column});
    };

    if (head.text == "bs") {
      if (toks.size() != 4 || toks[1].text.rfind("r=", 0) != 0) {
        syntax(lno, head.column, "expected 'bs r=FLOAT MODE MODE'");
        continue;
      }
      const auto r = parse_float(toks[1].text.substr(2));
      if (!r) {
        syntax(lno, toks[1].column, "malformed reflectivity: " + toks[1].text);
        continue;
      }
      push_element(BeamSplitter{*r, toks[2].text, toks[3].text});
    } else if (head.text == "phase") {
      if (toks.size() != 3 || toks[1].text.rfind("phi=", 0) != 0) {
        syntax(lno, head.column, "expected 'phase phi=FLOAT MODE'");
        continue;
      }
      const auto phi = parse_float(toks[1].text.substr(4));
      if (!phi) {
        syntax(lno, toks[1].column, "malformed phase: " + toks[1].text);
        continue;
      }
      push_element(PhaseShift{toks[2].text, *phi});
    } else if (head.text == "absorb") {
      if (toks.size() != 2) {
        syntax(lno, head.column, "expected 'absorb MODE'");
        continue;
      }
      push_element(Absorber{toks[1].text});
    } else if (head.text == "monitor") {
      if (toks.size() != 2) {
        syntax(lno, head.column, "expected 'monitor MODE'");
        continue;
      }
      push_element(Monitor{toks[1].text});
    } else if (head.text == "detect") {
      if (toks.size() != 4 || toks[2].text != "as") {
        syntax(lno, head.column, "expected 'detect MODE as NAME'");
        continue;
      }
      push_element(Detector{toks[1].text, toks[3].text});
    } else {
      syntax(lno, head.column, "unknown element: " + head.text);
    }
  }

  if (!have_header && diags.empty()) syntax(1, 1, "empty input: expected 'network NAME' header");
  if (have_header && in_slice) syntax(lines.size(), 1, "missing 'end' at end of input");
  if (have_header && slice_count == 0) syntax(lines.size(), 1, "at least one slice is required");
  if (have_header && !have_source) syntax(1, 1, "exactly one source mode is required");

  // Semantic pass: reuse the structural validator and map violations to
  // source positions.
  if (diags.empty()) {
    const auto rep = validate(net);
    for (const auto& v : rep.violations) {
      ElementPos pos{1, 1};
      if (v.slice_index != SIZE_MAX && v.slice_index < element_pos.size()) {
        pos = (v.element_index != SIZE_MAX && v.element_index < element_pos[v.slice_index].size())
                  ? element_pos[v.slice_index][v.element_index]
                  : slice_pos[v.slice_index];
      }
      ParseDiagnostic::Kind kind;
      switch (v.kind) {
        case ValidationReport::Kind::UnknownMode: kind = ParseDiagnostic::Kind::UnknownMode; break;
        case ValidationReport::Kind::Range: kind = ParseDiagnostic::Kind::Range; break;
        case ValidationReport::Kind::Disjointness:
          kind = ParseDiagnostic::Kind::Disjointness;
          break;
        case ValidationReport::Kind::Terminality: kind = ParseDiagnostic::Kind::Terminality; break;
        default: kind = ParseDiagnostic::Kind::Syntax; break;
      }
      diags.add(kind, pos.line, pos.column, v.message);
    }
  }

  if (!diags.empty()) throw ParseError(diags.take());
  return net;
}

std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string serialize(const Network& net) {
  std::ostringstream os;
  os << "network " << net.name << "\n";
  for (const auto& m : net.modes) {  // std::set: already sorted
    os << "mode " << m;
    if (m == net.source) os << " source";
    if (net.channel && m == *net.channel) os << " channel";
    os << "\n";
  }
  for (const auto& s : net.slices) {
    os << "slice " << s.label << "\n";
    for (const auto& e : s.elements) {
      if (const auto* bs = std::get_if<BeamSplitter>(&e)) {
        os << "bs r=" << format_float(bs->r) << " " << bs->m1 << " " << bs->m2 << "\n";
      } else if (const auto* ps = std::get_if<PhaseShift>(&e)) {
        os << "phase phi=" << format_float(ps->phi) << " " << ps->m << "\n";
      } else if (const auto* ab = std::get_if<Absorber>(&e)) {
        os << "absorb " << ab->m << "\n";
      } else if (const auto* mo = std::get_if<Monitor>(&e)) {
        os << "monitor " << mo->m << "\n";
      } else if (const auto* det = std::get_if<Detector>(&e)) {
        os << "detect " << det->m << " as " << det->name << "\n";
      }
    }
    os << "end\n";
  }
  return os.str();
}

}  // namespace nmz
