#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wsnip/atoms.hpp"
#include "wsnip/errors.hpp"

namespace wsnip {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  // from_chars rejects a leading '+'.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw ParseError(line, "malformed number '" + std::string(tok) + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// key=value, key="quoted value", or a bare key (stored as "T").
std::vector<std::pair<std::string, std::string>> parse_comment(std::string_view s, std::size_t line) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    if (i >= s.size()) break;
    const std::size_t key_start = i;
    while (i < s.size() && s[i] != '=' && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    std::string key(s.substr(key_start, i - key_start));
    if (i >= s.size() || s[i] != '=') {
      out.emplace_back(std::move(key), "T");
      continue;
    }
    ++i;  // '='
    std::string value;
    if (i < s.size() && s[i] == '"') {
      const std::size_t close = s.find('"', i + 1);
      if (close == std::string_view::npos) throw ParseError(line, "unterminated quote in comment line");
      value = std::string(s.substr(i + 1, close - i - 1));
      i = close + 1;
    } else {
      const std::size_t start = i;
      while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
      value = std::string(s.substr(start, i - start));
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

bool parse_bool_flag(std::string_view tok, std::size_t line) {
  if (tok == "T" || tok == "True" || tok == "true" || tok == "1") return true;
  if (tok == "F" || tok == "False" || tok == "false" || tok == "0") return false;
  throw ParseError(line, "malformed pbc flag '" + std::string(tok) + "'");
}

}  // namespace

std::vector<Configuration> read_xyz(std::string_view text) {
  std::vector<std::string_view> lines;
  {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) {
        if (pos < text.size()) lines.push_back(text.substr(pos));
        break;
      }
      lines.push_back(text.substr(pos, nl - pos));
      pos = nl + 1;
    }
  }

  std::vector<Configuration> frames;
  std::size_t li = 0;
  while (li < lines.size()) {
    const std::string_view count_line = trim(lines[li]);
    if (count_line.empty()) {
      ++li;
      continue;
    }
    const std::size_t count_lineno = li + 1;
    std::size_t count = 0;
    {
      auto [ptr, ec] = std::from_chars(count_line.data(), count_line.data() + count_line.size(), count);
      if (ec != std::errc() || ptr != count_line.data() + count_line.size())
        throw ParseError(count_lineno, "expected an atom count, got '" + std::string(count_line) + "'");
    }
    if (count == 0) throw ParseError(count_lineno, "frame with zero atoms");
    if (li + 1 >= lines.size()) throw ParseError(count_lineno, "missing comment line");

    Configuration cfg;
    const std::size_t comment_lineno = li + 2;
    bool have_pbc = false;
    for (auto& [key, value] : parse_comment(lines[li + 1], comment_lineno)) {
      if (key == "Lattice") {
        const auto toks = split_ws(value);
        if (toks.size() != 9) throw ParseError(comment_lineno, "Lattice needs 9 numbers");
        Mat3 cell{};
        for (int k = 0; k < 9; ++k) cell[k / 3][k % 3] = parse_double(toks[k], comment_lineno);
        cfg.cell = cell;
      } else if (key == "pbc") {
        const auto toks = split_ws(value);
        if (toks.size() != 3) throw ParseError(comment_lineno, "pbc needs 3 flags");
        for (int k = 0; k < 3; ++k) cfg.pbc[k] = parse_bool_flag(toks[k], comment_lineno);
        have_pbc = true;
      } else {
        cfg.properties[key] = value;
      }
    }
    // Extended-XYZ convention: a lattice without an explicit pbc is periodic.
    if (cfg.cell && !have_pbc) cfg.pbc = {true, true, true};

    if (li + 2 + count > lines.size())
      throw ParseError(count_lineno, "frame declares " + std::to_string(count) + " atoms but only " +
                                         std::to_string(lines.size() - li - 2) + " lines follow");
    cfg.species.reserve(count);
    cfg.positions.reserve(count);
    for (std::size_t a = 0; a < count; ++a) {
      const std::size_t lineno = li + 3 + a;
      const auto toks = split_ws(lines[li + 2 + a]);
      if (toks.size() < 4) throw ParseError(lineno, "expected 'symbol x y z'");
      const int z = atomic_number(toks[0]);
      if (z == 0) throw ParseError(lineno, "unknown element symbol '" + std::string(toks[0]) + "'");
      cfg.species.push_back(z);
      cfg.positions.push_back(
          {parse_double(toks[1], lineno), parse_double(toks[2], lineno), parse_double(toks[3], lineno)});
    }
    try {
      cfg.validate();
    } catch (const Error& e) {
      throw ParseError(count_lineno, e.what());
    }
    frames.push_back(std::move(cfg));
    li += 2 + count;
  }
  return frames;
}

std::string write_xyz(const std::vector<Configuration>& configs) {
  std::string out;
  for (const Configuration& cfg : configs) {
    out += std::to_string(cfg.size());
    out += '\n';
    std::string comment;
    if (cfg.cell) {
      comment += "Lattice=\"";
      for (int k = 0; k < 9; ++k) {
        if (k) comment += ' ';
        comment += format_double((*cfg.cell)[k / 3][k % 3]);
      }
      comment += "\" ";
    }
    comment += "pbc=\"";
    for (int k = 0; k < 3; ++k) {
      if (k) comment += ' ';
      comment += cfg.pbc[k] ? 'T' : 'F';
    }
    comment += '"';
    for (const auto& [key, value] : cfg.properties) {
      comment += ' ';
      comment += key;
      comment += '=';
      if (value.empty() || value.find_first_of(" \t") != std::string::npos) {
        comment += '"';
        comment += value;
        comment += '"';
      } else {
        comment += value;
      }
    }
    out += comment;
    out += '\n';
    for (std::size_t a = 0; a < cfg.size(); ++a) {
      out += element_symbol(cfg.species[a]);
      for (double x : cfg.positions[a]) {
        out += ' ';
        out += format_double(x);
      }
      out += '\n';
    }
  }
  return out;
}

std::vector<Configuration> read_xyz_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_xyz(ss.str());
}

void write_xyz_file(const std::string& path, const std::vector<Configuration>& configs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << write_xyz(configs);
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace wsnip
