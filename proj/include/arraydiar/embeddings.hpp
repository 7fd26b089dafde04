#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "arraydiar/common.hpp"

namespace arraydiar {

struct EmbeddingSegment {
  double start = 0.0;
  double end = 0.0;
  std::vector<double> vector;

  bool operator==(const EmbeddingSegment&) const = default;
};

/// Fixed-dimension speaker vectors with their time bounds.
struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<EmbeddingSegment> segments;

  std::size_t size() const { return segments.size(); }

  void validate() const {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      if (s.vector.size() != dim)
        throw Error("embeddings: segment " + std::to_string(i) + " has dimension " +
                    std::to_string(s.vector.size()) + ", expected " + std::to_string(dim));
      if (!(s.end > s.start)) throw Error("embeddings: segment " + std::to_string(i) + " has end <= start");
      for (double v : s.vector)
        if (!std::isfinite(v)) throw Error("embeddings: segment " + std::to_string(i) + " has a NaN/Inf value");
    }
  }

  bool operator==(const EmbeddingSet&) const = default;
};

/// Text format: `dim=<D>` then `<start> <end> <v1> ... <vD>` per row.
inline EmbeddingSet parse_embeddings(std::istream& in, const std::string& origin = "<embeddings>") {
  EmbeddingSet set;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (!have_header) {
      auto b = line.find_first_not_of(" \t");
      if (line.compare(b, 4, "dim=") != 0) throw Error(where + "expected `dim=<D>` header");
      try {
        set.dim = std::stoul(line.substr(b + 4));
      } catch (const std::logic_error&) {
        throw Error(where + "bad dimension");
      }
      if (set.dim == 0) throw Error(where + "dimension must be > 0");
      have_header = true;
      continue;
    }
    std::istringstream ls(line);
    std::vector<double> values;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::logic_error&) {
        throw Error(where + "non-numeric value `" + tok + "`");
      }
      if (used != tok.size()) throw Error(where + "non-numeric value `" + tok + "`");
      if (!std::isfinite(v)) throw Error(where + "NaN/Inf value");
      values.push_back(v);
    }
    if (values.size() != set.dim + 2)
      throw Error(where + "row has " + std::to_string(values.size() - 2) + " components, expected " +
                  std::to_string(set.dim));
    EmbeddingSegment seg{values[0], values[1], {values.begin() + 2, values.end()}};
    if (!(seg.end > seg.start)) throw Error(where + "row " + std::to_string(set.segments.size()) + " has end <= start");
    set.segments.push_back(std::move(seg));
  }
  if (!have_header) throw Error(origin + ": empty embedding file");
  return set;
}

inline EmbeddingSet read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("embeddings: cannot open " + path);
  return parse_embeddings(in, path);
}

inline std::string format_embeddings(const EmbeddingSet& set) {
  std::string out = "dim=" + std::to_string(set.dim) + "\n";
  char buf[40];
  for (const auto& s : set.segments) {
    std::snprintf(buf, sizeof buf, "%.3f %.3f", s.start, s.end);
    out += buf;
    for (double v : s.vector) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

inline void write_embeddings(const EmbeddingSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("embeddings: cannot write " + path);
  out << format_embeddings(set);
}

}  // namespace arraydiar
