#pragma once

// Model files (free MPS, CPLEX LP), solution files and external solvers.

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "ddro/milp.hpp"
#include "ddro/model.hpp"

namespace ddro {

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorCode::io, "cannot format number");
  return std::string(buf, end);
}

/// Parses a real, accepting inf/infinity with optional sign.
inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool neg = false;
  std::string_view body = s;
  if (body.front() == '+' || body.front() == '-') {
    neg = body.front() == '-';
    body.remove_prefix(1);
  }
  std::string low(body);
  for (char& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (low == "inf" || low == "infinity") return neg ? -kInf : kInf;
  double v = 0.0;
  auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
  if (ec != std::errc() || p != body.data() + body.size()) return std::nullopt;
  return neg ? -v : v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path.string() + "'");
}

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t s = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > s) out.emplace_back(line.substr(s, i - s));
  }
  return out;
}

inline double number_or_throw(std::string_view s, const char* where) {
  auto v = parse_number(s);
  if (!v) throw Error(ErrorCode::parse_failure, std::string(where) + ": bad number '" + std::string(s) + "'");
  return *v;
}

// Names usable in a file: the model's own when unique and token-safe,
// otherwise generated ones.
inline std::vector<std::string> file_names(std::size_t n, auto&& name_of, const std::string& prefix,
                                           auto&& acceptable) {
  std::vector<std::string> names(n);
  std::unordered_set<std::string> seen;
  bool ok = true;
  for (std::size_t i = 0; i < n && ok; ++i) {
    names[i] = name_of(i);
    ok = acceptable(names[i]) && seen.insert(names[i]).second;
  }
  if (!ok)
    for (std::size_t i = 0; i < n; ++i) names[i] = prefix + std::to_string(i);
  return names;
}

inline char mps_sense(Sense s) { return s == Sense::le ? 'L' : s == Sense::ge ? 'G' : 'E'; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Free MPS

/// Free-format MPS text. Columns in id order, rows in id order after the
/// objective row `obj`; integer columns are bracketed by INTORG/INTEND markers.
/// The objective constant is written as minus the RHS of `obj`.
inline std::string mps_string(const MilpModel& m) {
  if (m.has_quadratic_content()) throw Error(ErrorCode::quadratic_content, "MPS output needs a linear model");
  auto mps_safe = [](const std::string& s) { return !s.empty() && !detail::has_whitespace(s) && s != "obj" && s[0] != '$'; };
  const auto cols = detail::file_names(m.num_vars(), [&](std::size_t i) { return m.var(i).name; }, "C", mps_safe);
  const auto rows =
      detail::file_names(m.num_linear(), [&](std::size_t i) { return m.linear(i).name; }, "R", mps_safe);

  std::vector<std::vector<std::pair<std::size_t, double>>> by_col(m.num_vars());  // (row + 1, coef), 0 = obj
  for (const Term& t : detail::merge_terms(m.objective().lin)) by_col[t.var].push_back({0, t.coef});
  for (const LinConstraint& c : m.linear_constraints())
    for (const Term& t : detail::merge_terms(c.terms)) by_col[t.var].push_back({c.id + 1, t.coef});

  std::ostringstream out;
  out << "NAME " << (m.name().empty() || detail::has_whitespace(m.name()) ? "model" : m.name()) << "\n";
  if (m.objective().sense == ObjSense::maximize) out << "OBJSENSE\n    MAX\n";
  out << "ROWS\n N  obj\n";
  for (const LinConstraint& c : m.linear_constraints()) out << " " << detail::mps_sense(c.sense) << "  " << rows[c.id] << "\n";
  out << "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (std::size_t j = 0; j < m.num_vars(); ++j) {
    const bool integral = m.var(j).is_integral();
    if (integral != in_int) {
      out << "    MARKER" << marker++ << "  'MARKER'  " << (integral ? "'INTORG'" : "'INTEND'") << "\n";
      in_int = integral;
    }
    if (by_col[j].empty()) out << "    " << cols[j] << "  obj  0\n";
    for (auto [r, v] : by_col[j])
      out << "    " << cols[j] << "  " << (r == 0 ? std::string("obj") : rows[r - 1]) << "  " << format_number(v) << "\n";
  }
  if (in_int) out << "    MARKER" << marker << "  'MARKER'  'INTEND'\n";
  out << "RHS\n";
  if (m.objective().constant != 0.0) out << "    RHS  obj  " << format_number(-m.objective().constant) << "\n";
  for (const LinConstraint& c : m.linear_constraints())
    if (c.rhs != 0.0) out << "    RHS  " << rows[c.id] << "  " << format_number(c.rhs) << "\n";
  out << "BOUNDS\n";
  for (const Variable& v : m.variables()) {
    const std::string& n = cols[v.id];
    if (v.kind == VarKind::binary) {
      out << " BV BND  " << n << "\n";
    } else if (v.lb == v.ub) {
      out << " FX BND  " << n << "  " << format_number(v.lb) << "\n";
    } else if (std::isinf(v.lb) && std::isinf(v.ub)) {
      out << " FR BND  " << n << "\n";
    } else {
      if (std::isinf(v.lb))
        out << " MI BND  " << n << "\n";
      else if (v.lb != 0.0 || v.is_integral())
        out << " LO BND  " << n << "  " << format_number(v.lb) << "\n";
      if (!std::isinf(v.ub))
        out << " UP BND  " << n << "  " << format_number(v.ub) << "\n";
      else if (v.is_integral())
        out << " PL BND  " << n << "\n";
    }
  }
  out << "ENDATA\n";
  return out.str();
}

inline void write_mps(const MilpModel& m, const std::filesystem::path& path) { write_file(path, mps_string(m)); }

/// Parses free MPS. Integer columns with a BV bound become binary; bounds with
/// magnitude >= 1e30 are read as infinite. Tags are not stored in MPS and come
/// back as decision / structural.
inline MilpModel parse_mps(const std::string& text) {
  enum class Sec { none, name, objsense, rows, columns, rhs, ranges, bounds, done };
  Sec sec = Sec::none;
  MilpModel m;
  std::string obj_row;
  std::map<std::string, ConId> row_index;
  std::vector<Sense> row_sense;
  std::vector<std::string> row_names;
  std::vector<std::vector<Term>> row_terms;
  std::vector<double> rhs;
  std::vector<Term> obj_terms;
  double obj_const = 0.0;
  ObjSense sense = ObjSense::minimize;
  std::map<std::string, VarId> cols;
  std::vector<std::string> col_names;
  std::vector<char> col_int;
  std::vector<double> lb, ub;
  std::vector<char> binary;
  bool in_int = false;

  auto col_of = [&](const std::string& n) -> VarId {
    auto it = cols.find(n);
    if (it == cols.end()) throw Error(ErrorCode::parse_failure, "MPS: unknown column '" + n + "'");
    return it->second;
  };
  auto add_entry = [&](VarId j, const std::string& row, double v) {
    if (row == obj_row) {
      obj_terms.push_back({j, v});
      return;
    }
    auto it = row_index.find(row);
    if (it == row_index.end()) throw Error(ErrorCode::parse_failure, "MPS: unknown row '" + row + "'");
    row_terms[it->second].push_back({j, v});
  };
  std::set<std::string> free_rows;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '*') continue;
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (!std::isspace(static_cast<unsigned char>(line[0]))) {
      const std::string& h = tok[0];
      if (h == "NAME") {
        sec = Sec::name;
        if (tok.size() > 1) m.set_name(tok[1]);
      } else if (h == "OBJSENSE") {
        sec = Sec::objsense;
        if (tok.size() > 1) sense = tok[1] == "MAX" || tok[1] == "MAXIMIZE" ? ObjSense::maximize : ObjSense::minimize;
      } else if (h == "ROWS") {
        sec = Sec::rows;
      } else if (h == "COLUMNS") {
        sec = Sec::columns;
      } else if (h == "RHS") {
        sec = Sec::rhs;
      } else if (h == "RANGES") {
        sec = Sec::ranges;
      } else if (h == "BOUNDS") {
        sec = Sec::bounds;
      } else if (h == "ENDATA") {
        sec = Sec::done;
        break;
      } else {
        throw Error(ErrorCode::parse_failure, "MPS: unknown section '" + h + "'");
      }
      continue;
    }
    switch (sec) {
      case Sec::objsense:
        sense = tok[0] == "MAX" || tok[0] == "MAXIMIZE" ? ObjSense::maximize : ObjSense::minimize;
        break;
      case Sec::rows: {
        if (tok.size() != 2) throw Error(ErrorCode::parse_failure, "MPS: bad ROWS line '" + line + "'");
        if (tok[0] == "N") {
          if (obj_row.empty())
            obj_row = tok[1];
          else
            free_rows.insert(tok[1]);
          break;
        }
        Sense s;
        if (tok[0] == "L")
          s = Sense::le;
        else if (tok[0] == "G")
          s = Sense::ge;
        else if (tok[0] == "E")
          s = Sense::eq;
        else
          throw Error(ErrorCode::parse_failure, "MPS: bad row type '" + tok[0] + "'");
        if (!row_index.emplace(tok[1], row_names.size()).second)
          throw Error(ErrorCode::parse_failure, "MPS: duplicate row '" + tok[1] + "'");
        row_names.push_back(tok[1]);
        row_sense.push_back(s);
        row_terms.emplace_back();
        rhs.push_back(0.0);
        break;
      }
      case Sec::columns: {
        if (tok.size() >= 3 && tok[1] == "'MARKER'") {
          if (tok[2] == "'INTORG'")
            in_int = true;
          else if (tok[2] == "'INTEND'")
            in_int = false;
          else
            throw Error(ErrorCode::parse_failure, "MPS: bad marker '" + tok[2] + "'");
          break;
        }
        if (tok.size() != 3 && tok.size() != 5) throw Error(ErrorCode::parse_failure, "MPS: bad COLUMNS line '" + line + "'");
        auto it = cols.find(tok[0]);
        if (it == cols.end()) {
          it = cols.emplace(tok[0], col_names.size()).first;
          col_names.push_back(tok[0]);
          col_int.push_back(in_int);
          lb.push_back(0.0);
          ub.push_back(kInf);
          binary.push_back(0);
        }
        for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
          if (free_rows.contains(tok[k])) continue;
          add_entry(it->second, tok[k], detail::number_or_throw(tok[k + 1], "MPS COLUMNS"));
        }
        break;
      }
      case Sec::rhs: {
        const std::size_t start = tok.size() % 2 == 1 ? 1 : 0;
        for (std::size_t k = start; k + 1 < tok.size(); k += 2) {
          const double v = detail::number_or_throw(tok[k + 1], "MPS RHS");
          if (tok[k] == obj_row) {
            obj_const = -v;
            continue;
          }
          if (free_rows.contains(tok[k])) continue;
          auto r = row_index.find(tok[k]);
          if (r == row_index.end()) throw Error(ErrorCode::parse_failure, "MPS: unknown row '" + tok[k] + "'");
          rhs[r->second] = v;
        }
        break;
      }
      case Sec::ranges:
        throw Error(ErrorCode::parse_failure, "MPS: RANGES are not supported");
      case Sec::bounds: {
        const std::string& type = tok[0];
        const bool valueless = type == "FR" || type == "MI" || type == "PL" || type == "BV";
        std::string col;
        double val = 0.0;
        if (valueless) {
          if (tok.size() == 2)
            col = tok[1];
          else if (tok.size() == 3)
            col = cols.contains(tok[2]) ? tok[2] : tok[1];
          else if (tok.size() == 4)
            col = tok[2];
          else
            throw Error(ErrorCode::parse_failure, "MPS: bad BOUNDS line '" + line + "'");
        } else {
          if (tok.size() == 4) {
            col = tok[2];
            val = detail::number_or_throw(tok[3], "MPS BOUNDS");
          } else if (tok.size() == 3) {
            col = tok[1];
            val = detail::number_or_throw(tok[2], "MPS BOUNDS");
          } else {
            throw Error(ErrorCode::parse_failure, "MPS: bad BOUNDS line '" + line + "'");
          }
          if (val >= 1e30) val = kInf;
          if (val <= -1e30) val = -kInf;
        }
        const VarId j = col_of(col);
        if (type == "LO") {
          lb[j] = val;
        } else if (type == "UP") {
          ub[j] = val;
        } else if (type == "FX") {
          lb[j] = ub[j] = val;
        } else if (type == "FR") {
          lb[j] = -kInf;
          ub[j] = kInf;
        } else if (type == "MI") {
          lb[j] = -kInf;
        } else if (type == "PL") {
          ub[j] = kInf;
        } else if (type == "BV") {
          binary[j] = 1;
          lb[j] = 0;
          ub[j] = 1;
        } else if (type == "LI") {
          col_int[j] = 1;
          lb[j] = val;
        } else if (type == "UI") {
          col_int[j] = 1;
          ub[j] = val;
        } else {
          throw Error(ErrorCode::parse_failure, "MPS: unknown bound type '" + type + "'");
        }
        break;
      }
      default:
        throw Error(ErrorCode::parse_failure, "MPS: data outside a section: '" + line + "'");
    }
  }
  if (sec != Sec::done) throw Error(ErrorCode::parse_failure, "MPS: missing ENDATA");
  if (obj_row.empty()) throw Error(ErrorCode::parse_failure, "MPS: no objective row");

  for (std::size_t j = 0; j < col_names.size(); ++j) {
    const VarKind kind = binary[j] ? VarKind::binary : col_int[j] ? VarKind::integer : VarKind::continuous;
    m.add_variable(col_names[j], lb[j], ub[j], kind, VarTag::decision);
  }
  for (std::size_t r = 0; r < row_names.size(); ++r)
    m.add_linear_constraint(detail::merge_terms(row_terms[r]), row_sense[r], rhs[r], ConTag::structural, row_names[r]);
  m.set_objective(Objective{sense, detail::merge_terms(obj_terms), {}, obj_const});
  return m;
}

inline MilpModel read_mps(const std::filesystem::path& path) { return parse_mps(read_file(path)); }

// ---------------------------------------------------------------------------
// CPLEX LP format

namespace detail {

inline bool lp_name_ok(const std::string& s) {
  if (s.empty() || s.size() > 255) return false;
  const unsigned char c0 = static_cast<unsigned char>(s[0]);
  if (std::isdigit(c0) || s[0] == '.' || s[0] == 'e' || s[0] == 'E') return false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (!std::isalnum(c) && std::string_view("!\"#$%&()/,.;?@_`'{}|~").find(ch) == std::string_view::npos) return false;
  }
  std::string low = s;
  for (char& ch : low) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  static const std::set<std::string> reserved{"inf", "infinity", "free", "st", "end", "bounds", "binaries", "binary",
                                              "bin", "generals", "general", "gen", "max", "min", "maximize",
                                              "minimize", "maximum", "minimum", "subject", "such", "s.t."};
  return !reserved.contains(low);
}

inline void lp_linear(std::ostringstream& out, const std::vector<Term>& terms, const std::vector<std::string>& cols,
                      bool& first) {
  for (const Term& t : terms) {
    out << (first ? (t.coef < 0 ? "- " : "") : (t.coef < 0 ? " - " : " + ")) << format_number(std::abs(t.coef)) << " "
        << cols[t.var];
    first = false;
  }
}

inline void lp_quad(std::ostringstream& out, const std::vector<QuadTerm>& q, const std::vector<std::string>& cols,
                    double scale, bool& first) {
  out << (first ? "[ " : " + [ ");
  bool f = true;
  for (const QuadTerm& t : q) {
    const double c = t.coef * scale;
    out << (f ? (c < 0 ? "- " : "") : (c < 0 ? " - " : " + ")) << format_number(std::abs(c)) << " " << cols[t.i];
    if (t.i == t.j)
      out << " ^ 2";
    else
      out << " * " << cols[t.j];
    f = false;
  }
  out << " ]";
  first = false;
}

inline const char* lp_sense(Sense s) { return s == Sense::le ? "<=" : s == Sense::ge ? ">=" : "="; }

}  // namespace detail

/// CPLEX LP text. Quadratic parts are written in `[ ... ]` blocks (objective
/// block doubled and divided by 2); every variable gets an explicit bound line.
inline std::string lp_string(const MilpModel& m) {
  const auto cols = detail::file_names(m.num_vars(), [&](std::size_t i) { return m.var(i).name; }, "C",
                                       detail::lp_name_ok);
  const auto rows = detail::file_names(m.num_linear() + m.num_quadratic(),
                                       [&](std::size_t i) {
                                         return i < m.num_linear() ? m.linear(i).name
                                                                   : m.quad_constraints()[i - m.num_linear()].name;
                                       },
                                       "R", detail::lp_name_ok);
  std::ostringstream out;
  out << "\\ " << (m.name().empty() ? "model" : m.name()) << "\n";
  out << (m.objective().sense == ObjSense::maximize ? "Maximize" : "Minimize") << "\n obj: ";
  bool first = true;
  detail::lp_linear(out, m.objective().lin, cols, first);
  if (!m.objective().quad.empty()) {
    detail::lp_quad(out, m.objective().quad, cols, 2.0, first);
    out << " / 2";
  }
  if (m.objective().constant != 0.0 || first) {
    const double k = m.objective().constant;
    out << (first ? (k < 0 ? "- " : "") : (k < 0 ? " - " : " + ")) << format_number(std::abs(k));
  }
  out << "\nSubject To\n";
  for (const LinConstraint& c : m.linear_constraints()) {
    out << " " << rows[c.id] << ": ";
    bool f = true;
    detail::lp_linear(out, c.terms, cols, f);
    if (f) out << "0 " << cols.at(0);
    out << " " << detail::lp_sense(c.sense) << " " << format_number(c.rhs) << "\n";
  }
  for (std::size_t q = 0; q < m.num_quadratic(); ++q) {
    const QuadConstraint& c = m.quad_constraints()[q];
    out << " " << rows[m.num_linear() + q] << ": ";
    bool f = true;
    detail::lp_linear(out, c.lin, cols, f);
    if (!c.quad.empty()) detail::lp_quad(out, c.quad, cols, 1.0, f);
    out << " " << detail::lp_sense(c.sense) << " " << format_number(c.rhs) << "\n";
  }
  out << "Bounds\n";
  for (const Variable& v : m.variables()) {
    if (std::isinf(v.lb) && std::isinf(v.ub))
      out << " " << cols[v.id] << " free\n";
    else
      out << " " << (std::isinf(v.lb) ? "-inf" : format_number(v.lb)) << " <= " << cols[v.id]
          << " <= " << (std::isinf(v.ub) ? "+inf" : format_number(v.ub)) << "\n";
  }
  std::string bins, gens;
  for (const Variable& v : m.variables()) {
    if (v.kind == VarKind::binary) bins += " " + cols[v.id] + "\n";
    if (v.kind == VarKind::integer) gens += " " + cols[v.id] + "\n";
  }
  if (!bins.empty()) out << "Binaries\n" << bins;
  if (!gens.empty()) out << "Generals\n" << gens;
  out << "End\n";
  return out.str();
}

inline void write_lp_format(const MilpModel& m, const std::filesystem::path& path) { write_file(path, lp_string(m)); }

namespace detail {

struct LpToken {
  enum Kind { word, number, op } kind;
  std::string text;
  double value = 0.0;
};

inline std::vector<LpToken> lp_tokenize(std::string_view s) {
  std::vector<LpToken> out;
  std::size_t i = 0;
  auto is_name_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) ||
           std::string_view("!\"#$%&()/,.;?@_`'{}|~").find(c) != std::string_view::npos;
  };
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '<' || c == '>' || c == '=') {
      std::string op(1, c);
      if (i + 1 < s.size() && (s[i + 1] == '=' || s[i + 1] == '<' || s[i + 1] == '>')) op += s[++i];
      ++i;
      if (op == "=<" || op == "<") op = "<=";
      if (op == "=>" || op == ">") op = ">=";
      out.push_back({LpToken::op, op});
      continue;
    }
    if (std::string_view("+-*^[]:").find(c) != std::string_view::npos) {
      out.push_back({LpToken::op, std::string(1, c)});
      ++i;
      continue;
    }
    if (c == '/' && (out.empty() || out.back().text == "]")) {
      out.push_back({LpToken::op, "/"});
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          j = k;
          while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        }
      }
      const std::string txt(s.substr(i, j - i));
      out.push_back({LpToken::number, txt, number_or_throw(txt, "LP")});
      i = j;
      continue;
    }
    if (is_name_char(c)) {
      std::size_t j = i;
      while (j < s.size() && is_name_char(s[j])) ++j;
      out.push_back({LpToken::word, std::string(s.substr(i, j - i))});
      i = j;
      continue;
    }
    throw Error(ErrorCode::parse_failure, std::string("LP: unexpected character '") + c + "'");
  }
  return out;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct LpExpr {
  std::vector<std::pair<std::string, double>> lin;
  std::vector<std::tuple<std::string, std::string, double>> quad;
  double constant = 0.0;
};

class LpParser {
 public:
  explicit LpParser(std::vector<LpToken> t) : t_(std::move(t)) {}

  bool done() const { return p_ >= t_.size(); }
  const LpToken& peek(std::size_t k = 0) const {
    if (p_ + k >= t_.size()) throw Error(ErrorCode::parse_failure, "LP: unexpected end of section");
    return t_[p_ + k];
  }
  bool peek_is(const std::string& op, std::size_t k = 0) const {
    return p_ + k < t_.size() && t_[p_ + k].kind == LpToken::op && t_[p_ + k].text == op;
  }
  LpToken next() {
    const LpToken& tk = peek();
    ++p_;
    return tk;
  }
  void expect(const std::string& op) {
    if (!peek_is(op)) throw Error(ErrorCode::parse_failure, "LP: expected '" + op + "'");
    ++p_;
  }

  std::optional<std::string> label() {
    if (p_ + 1 < t_.size() && t_[p_].kind == LpToken::word && peek_is(":", 1)) {
      std::string n = t_[p_].text;
      p_ += 2;
      return n;
    }
    return std::nullopt;
  }

  // Sum of signed terms up to a relational operator or the end.
  LpExpr expr() {
    LpExpr e;
    bool any = false;
    while (!done() && !(peek().kind == LpToken::op && (peek().text == "<=" || peek().text == ">=" || peek().text == "="))) {
      double sign = 1.0;
      bool had_sign = false;
      while (peek_is("+") || peek_is("-")) {
        if (next().text == "-") sign = -sign;
        had_sign = true;
      }
      if (any && !had_sign) throw Error(ErrorCode::parse_failure, "LP: missing operator between terms");
      if (peek_is("[")) {
        next();
        std::vector<std::tuple<std::string, std::string, double>> q;
        bool qfirst = true;
        while (!peek_is("]")) {
          double s = 1.0;
          bool hs = false;
          while (peek_is("+") || peek_is("-")) {
            if (next().text == "-") s = -s;
            hs = true;
          }
          if (!qfirst && !hs) throw Error(ErrorCode::parse_failure, "LP: missing operator in quadratic block");
          double coef = 1.0;
          if (peek().kind == LpToken::number) coef = next().value;
          const LpToken a = next();
          if (a.kind != LpToken::word) throw Error(ErrorCode::parse_failure, "LP: expected variable in quadratic block");
          if (peek_is("^")) {
            next();
            const LpToken two = next();
            if (two.kind != LpToken::number || two.value != 2.0)
              throw Error(ErrorCode::parse_failure, "LP: only squares are supported");
            q.emplace_back(a.text, a.text, s * coef);
          } else {
            expect("*");
            const LpToken b = next();
            if (b.kind != LpToken::word) throw Error(ErrorCode::parse_failure, "LP: expected variable after '*'");
            q.emplace_back(a.text, b.text, s * coef);
          }
          qfirst = false;
        }
        expect("]");
        double div = 1.0;
        if (peek_is("/")) {
          next();
          const LpToken d = next();
          if (d.kind != LpToken::number || d.value == 0.0) throw Error(ErrorCode::parse_failure, "LP: bad divisor");
          div = d.value;
        }
        for (auto& [a, b, c] : q) e.quad.emplace_back(a, b, sign * c / div);
      } else {
        const LpToken tk = next();
        if (tk.kind == LpToken::number) {
          if (!done() && peek().kind == LpToken::word)
            e.lin.emplace_back(next().text, sign * tk.value);
          else
            e.constant += sign * tk.value;
        } else if (tk.kind == LpToken::word) {
          e.lin.emplace_back(tk.text, sign);
        } else {
          throw Error(ErrorCode::parse_failure, "LP: unexpected '" + tk.text + "'");
        }
      }
      any = true;
    }
    return e;
  }

  double signed_number() {
    double sign = 1.0;
    while (peek_is("+") || peek_is("-"))
      if (next().text == "-") sign = -sign;
    const LpToken tk = next();
    if (tk.kind == LpToken::number) return sign * tk.value;
    if (tk.kind == LpToken::word) {
      const std::string w = lower(tk.text);
      if (w == "inf" || w == "infinity") return sign * kInf;
    }
    throw Error(ErrorCode::parse_failure, "LP: expected a number, got '" + tk.text + "'");
  }

 private:
  std::vector<LpToken> t_;
  std::size_t p_ = 0;
};

}  // namespace detail

/// Parses the CPLEX LP subset written by lp_string (objective, linear and
/// quadratic constraints, bounds, binaries, generals).
inline MilpModel parse_lp(const std::string& text) {
  enum class Sec { none, objective, constraints, bounds, binaries, generals, end };
  std::map<Sec, std::string> body;
  ObjSense sense = ObjSense::minimize;
  std::string name;
  std::vector<Sec> seen;
  Sec sec = Sec::none;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto bs = line.find('\\');
    if (bs != std::string::npos) {
      if (bs == 0 && name.empty() && seen.empty()) {
        auto tok = detail::split_ws(line.substr(1));
        if (tok.size() == 1) name = tok[0];
      }
      line.erase(bs);
    }
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    std::string head = detail::lower(tok[0]);
    if (tok.size() == 2) head += " " + detail::lower(tok[1]);
    Sec next = sec;
    bool header = true;
    if (head == "maximize" || head == "maximise" || head == "maximum" || head == "max") {
      next = Sec::objective;
      sense = ObjSense::maximize;
    } else if (head == "minimize" || head == "minimise" || head == "minimum" || head == "min") {
      next = Sec::objective;
      sense = ObjSense::minimize;
    } else if (head == "subject to" || head == "such that" || head == "st" || head == "s.t.") {
      next = Sec::constraints;
    } else if (head == "bounds" || head == "bound") {
      next = Sec::bounds;
    } else if (head == "binaries" || head == "binary" || head == "bin") {
      next = Sec::binaries;
    } else if (head == "generals" || head == "general" || head == "gen") {
      next = Sec::generals;
    } else if (head == "end") {
      next = Sec::end;
    } else {
      header = false;
    }
    if (header) {
      sec = next;
      seen.push_back(sec);
      if (sec == Sec::end) break;
      continue;
    }
    if (sec == Sec::none) throw Error(ErrorCode::parse_failure, "LP: text before the objective section");
    body[sec] += line + "\n";
  }
  if (sec != Sec::end) throw Error(ErrorCode::parse_failure, "LP: missing End");

  MilpModel m(name);
  std::map<std::string, VarId> ids;
  std::vector<std::string> order;
  // first pass: collect variable names in order of appearance
  auto note = [&](const std::string& n) {
    if (!ids.contains(n)) {
      ids.emplace(n, order.size());
      order.push_back(n);
    }
  };
  struct Row {
    std::string name;
    detail::LpExpr e;
    Sense sense;
    double rhs;
  };
  std::vector<Row> rows;
  detail::LpExpr obj;
  {
    detail::LpParser p(detail::lp_tokenize(body[Sec::objective]));
    if (!p.done()) {
      p.label();
      obj = p.expr();
    }
    for (auto& [n, c] : obj.lin) note(n);
    for (auto& [a, b, c] : obj.quad) {
      note(a);
      note(b);
    }
  }
  {
    detail::LpParser p(detail::lp_tokenize(body[Sec::constraints]));
    while (!p.done()) {
      Row r;
      r.name = p.label().value_or("");
      r.e = p.expr();
      const std::string op = p.next().text;
      r.sense = op == "<=" ? Sense::le : op == ">=" ? Sense::ge : Sense::eq;
      r.rhs = p.signed_number() - r.e.constant;
      for (auto& [n, c] : r.e.lin) note(n);
      for (auto& [a, b, c] : r.e.quad) {
        note(a);
        note(b);
      }
      rows.push_back(std::move(r));
    }
  }
  std::map<std::string, std::pair<double, double>> bounds;
  {
    std::istringstream bin(body[Sec::bounds]);
    while (std::getline(bin, line)) {
      detail::LpParser p(detail::lp_tokenize(line));
      if (p.done()) continue;
      auto set = [&](const std::string& n) -> std::pair<double, double>& {
        note(n);
        return bounds.try_emplace(n, 0.0, kInf).first->second;
      };
      const bool starts_with_name = p.peek().kind == detail::LpToken::word &&
                                    detail::lower(p.peek().text) != "inf" && detail::lower(p.peek().text) != "infinity";
      if (starts_with_name) {
        const std::string n = p.next().text;
        if (!p.done() && p.peek().kind == detail::LpToken::word && detail::lower(p.peek().text) == "free") {
          set(n) = {-kInf, kInf};
          continue;
        }
        const std::string op = p.next().text;
        const double v = p.signed_number();
        auto& b = set(n);
        if (op == "<=")
          b.second = v;
        else if (op == ">=")
          b.first = v;
        else
          b = {v, v};
        continue;
      }
      const double a = p.signed_number();
      const std::string op1 = p.next().text;
      const detail::LpToken var = p.next();
      if (var.kind != detail::LpToken::word) throw Error(ErrorCode::parse_failure, "LP: bad bound line '" + line + "'");
      auto& b = set(var.text);
      if (op1 == "<=")
        b.first = a;
      else if (op1 == ">=")
        b.second = a;
      else
        b = {a, a};
      if (!p.done()) {
        const std::string op2 = p.next().text;
        const double c = p.signed_number();
        if (op2 == "<=")
          b.second = c;
        else
          b.first = c;
      }
    }
  }
  std::set<std::string> bins, gens;
  for (auto [s, dest] : {std::pair{Sec::binaries, &bins}, std::pair{Sec::generals, &gens}})
    for (const auto& n : detail::split_ws(body[s])) {
      note(n);
      dest->insert(n);
    }
  for (const std::string& n : order) {
    auto [lb, ub] = bounds.contains(n) ? bounds[n] : std::pair{0.0, kInf};
    VarKind kind = VarKind::continuous;
    if (bins.contains(n)) {
      kind = VarKind::binary;
      if (!bounds.contains(n)) ub = 1.0;
    } else if (gens.contains(n)) {
      kind = VarKind::integer;
    }
    m.add_variable(n, lb, ub, kind, VarTag::decision);
  }
  auto lin_terms = [&](const detail::LpExpr& e) {
    std::vector<Term> t;
    for (auto& [n, c] : e.lin) t.push_back({ids.at(n), c});
    return detail::merge_terms(std::move(t));
  };
  auto quad_terms = [&](const detail::LpExpr& e) {
    std::vector<QuadTerm> q;
    for (auto& [a, b, c] : e.quad) q.push_back({ids.at(a), ids.at(b), c});
    return q;
  };
  for (Row& r : rows) {
    if (r.e.quad.empty())
      m.add_linear_constraint(lin_terms(r.e), r.sense, r.rhs, ConTag::structural, r.name);
    else
      m.add_quad_constraint(quad_terms(r.e), lin_terms(r.e), r.sense, r.rhs, ConTag::structural, r.name);
  }
  m.set_objective(Objective{sense, lin_terms(obj), quad_terms(obj), obj.constant});
  return m;
}

inline MilpModel read_lp_format(const std::filesystem::path& path) { return parse_lp(read_file(path)); }

// ---------------------------------------------------------------------------
// Solution files

/// `name value` per line with `# Objective value = X` and `# Status = s` headers.
inline std::string sol_string(const MilpModel& m, const SolveResult& r) {
  std::ostringstream out;
  out << "# Status = " << to_string(r.status) << "\n";
  if (r.has_solution()) {
    out << "# Objective value = " << format_number(r.objective) << "\n";
    for (const Variable& v : m.variables()) out << v.name << " " << format_number(r.values.at(v.id)) << "\n";
  }
  return out.str();
}

/// Reads a `.sol` file against a model. Variables absent from the file are 0.
/// Without an objective header the objective is recomputed from the values.
inline SolveResult parse_sol(const std::string& text, const MilpModel& m) {
  SolveResult r;
  r.values.assign(m.num_vars(), 0.0);
  std::optional<double> obj;
  std::optional<SolveStatus> status;
  bool any = false;
  std::istringstream in(text);
  std::string line;
  static const std::regex obj_re(R"(^#\s*objective(\s+value)?\s*[=:]\s*(\S+))", std::regex::icase);
  static const std::regex status_re(R"(^#\s*status\s*[=:]\s*(\S+))", std::regex::icase);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch mt;
    if (std::regex_search(line, mt, obj_re)) {
      obj = detail::number_or_throw(mt[2].str(), ".sol objective");
      continue;
    }
    if (std::regex_search(line, mt, status_re)) {
      status = solve_status_from_string(detail::lower(mt[1].str()));
      if (!status) throw Error(ErrorCode::parse_failure, ".sol: unknown status '" + mt[1].str() + "'");
      continue;
    }
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2) throw Error(ErrorCode::parse_failure, ".sol: bad line '" + line + "'");
    auto id = m.find_variable(tok[0]);
    if (!id) throw Error(ErrorCode::parse_failure, ".sol: unknown variable '" + tok[0] + "'");
    r.values[*id] = detail::number_or_throw(tok[1], ".sol value");
    any = true;
  }
  r.status = status.value_or(any ? SolveStatus::optimal : SolveStatus::infeasible);
  if (!any && r.status != SolveStatus::optimal) r.values.clear();
  if (!any && !obj && r.status == SolveStatus::optimal)
    throw Error(ErrorCode::parse_failure, ".sol: no values for an optimal status");
  r.objective = obj ? *obj : (r.has_solution() ? objective_value(m, r.values) : 0.0);
  r.bound = r.objective;
  return r;
}

// ---------------------------------------------------------------------------
// External processes

struct CommandOutcome {
  int exit_code = 0;
  bool timed_out = false;
  std::string log;  // captured stdout and stderr
};

/// Runs `sh -c command` in its own process group with stdout/stderr captured
/// to `log_path`; the group is killed after `timeout_s` seconds.
inline CommandOutcome run_command(const std::string& command, const std::filesystem::path& log_path, double timeout_s) {
  const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::io, "cannot create '" + log_path.string() + "'");
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fd);
    throw Error(ErrorCode::spawn_failure, "fork failed");
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(fd, 1);
    ::dup2(fd, 2);
    ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(fd);
  CommandOutcome out;
  const auto start = std::chrono::steady_clock::now();
  int status = 0;
  for (;;) {
    const pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0) throw Error(ErrorCode::spawn_failure, "waitpid failed");
    if (std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > timeout_s) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      out.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (!out.timed_out) out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  out.log = read_file(log_path);
  if (!out.timed_out && out.exit_code == 127)
    throw Error(ErrorCode::spawn_failure, "command could not be started: " + command);
  return out;
}

inline std::string substitute(std::string s, const std::map<std::string, std::string>& vars) {
  for (const auto& [k, v] : vars) {
    const std::string key = "{" + k + "}";
    for (std::size_t p = s.find(key); p != std::string::npos; p = s.find(key, p + v.size())) s.replace(p, key.size(), v);
  }
  return s;
}

enum class ModelFormat { mps, lp };
enum class SolutionDialect { sol, mibs_log };

struct ExternalSolver {
  std::string command;  // placeholders {input}, {output}
  ModelFormat format = ModelFormat::mps;
  SolutionDialect dialect = SolutionDialect::sol;
  double timeout_s = 60.0;
  std::filesystem::path workdir = std::filesystem::temp_directory_path();
};

/// Lenient scrape of a MibS log: an objective line (`cost`/`objective` followed
/// by `=` or `:`), `name = value` or `x[i] = value` lines, and infeasibility.
/// Values are returned in the order of the model's variables.
inline SolveResult parse_mibs_log(const std::string& log, const MilpModel& m) {
  SolveResult r;
  static const std::regex infeas(R"(infeasible)", std::regex::icase);
  static const std::regex obj_re(R"((cost|objective(\s+value)?)\s*(=|:|is)\s*([-+0-9.eEinf]+))", std::regex::icase);
  static const std::regex idx_re(R"(^\s*x\[(\d+)\]\s*=\s*(\S+))");
  static const std::regex name_re(R"(^\s*([A-Za-z_][A-Za-z0-9_.]*)\s*=\s*(\S+)\s*$)");
  std::optional<double> obj;
  std::vector<double> vals(m.num_vars(), 0.0);
  bool any = false;
  std::istringstream in(log);
  std::string line;
  bool infeasible = false;
  while (std::getline(in, line)) {
    std::smatch mt;
    if (std::regex_search(line, mt, obj_re)) {
      if (auto v = parse_number(mt[4].str())) obj = *v;
    }
    if (std::regex_search(line, mt, idx_re)) {
      const auto j = std::stoul(mt[1].str());
      auto v = parse_number(mt[2].str());
      if (j < vals.size() && v) {
        vals[j] = *v;
        any = true;
      }
    } else if (std::regex_search(line, mt, name_re)) {
      if (auto id = m.find_variable(mt[1].str())) {
        if (auto v = parse_number(mt[2].str())) {
          vals[*id] = *v;
          any = true;
        }
      }
    }
    if (std::regex_search(line, infeas)) infeasible = true;
  }
  if (obj) {
    r.status = SolveStatus::optimal;
    r.objective = r.bound = *obj;
    if (any) r.values = std::move(vals);
  } else if (infeasible) {
    r.status = SolveStatus::infeasible;
  } else {
    throw Error(ErrorCode::parse_failure, "no objective value found in solver log");
  }
  return r;
}

/// Writes the model, runs the command with {input}/{output} substituted, and
/// parses the result. If the template has no {output}, the captured log is
/// parsed instead.
inline SolveResult external_solve(const MilpModel& m, const ExternalSolver& s) {
  if (s.command.find("{input}") == std::string::npos)
    throw Error(ErrorCode::invalid_argument, "command template needs an {input} placeholder");
  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  const std::string stem = "ddro_" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
  const fs::path input = s.workdir / (stem + (s.format == ModelFormat::mps ? ".mps" : ".lp"));
  const fs::path output = s.workdir / (stem + ".sol");
  const fs::path log = s.workdir / (stem + ".log");
  if (s.format == ModelFormat::mps)
    write_mps(m, input);
  else
    write_lp_format(m, input);
  fs::remove(output);
  const auto start = std::chrono::steady_clock::now();
  const CommandOutcome run =
      run_command(substitute(s.command, {{"input", input.string()}, {"output", output.string()}}), log, s.timeout_s);
  const long ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  auto cleanup = [&] {
    std::error_code ec;
    fs::remove(input, ec);
    fs::remove(output, ec);
    fs::remove(log, ec);
  };
  if (run.timed_out) {
    cleanup();
    SolveResult r;
    r.status = SolveStatus::time_limit;
    r.elapsed_ms = ms;
    return r;
  }
  if (run.exit_code != 0) {
    cleanup();
    throw Error(ErrorCode::solver_error, "solver exited with code " + std::to_string(run.exit_code) + ": " + run.log);
  }
  SolveResult r;
  try {
    const bool to_file = s.command.find("{output}") != std::string::npos;
    if (to_file && !fs::exists(output)) throw Error(ErrorCode::parse_failure, "solver wrote no solution file");
    const std::string text = to_file ? read_file(output) : run.log;
    r = s.dialect == SolutionDialect::sol ? parse_sol(text, m) : parse_mibs_log(text, m);
  } catch (...) {
    cleanup();
    throw;
  }
  cleanup();
  r.elapsed_ms = ms;
  return r;
}

}  // namespace ddro
