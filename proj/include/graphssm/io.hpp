#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "graphssm/common.hpp"
#include "graphssm/tgraph.hpp"

// Line-oriented ASCII formats:
//
//   snapshot sequence   GSSM v1 <N_V> <d> <L>
//                       per snapshot: "T <time>", "E <m>" + m lines "u v", "X" + N_V rows of d values
//   labels sidecar      GSSML v1 <N_V> <C>, then N_V lines "<label> <train|val|test>"
//   parameters          GSSMP v1 <count>, then per tensor "P <name> <rows> <cols>" + rows lines,
//                       optionally preceded by "M <key> <value>" metadata lines

namespace graphssm::io {

namespace detail {

inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

class LineReader {
public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next non-empty line split on whitespace; throws at end of input.
  std::vector<std::string> next(const char* what) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      std::string tok;
      while (ss >> tok) {
        tokens.push_back(tok);
      }
      if (!tokens.empty()) {
        return tokens;
      }
    }
    fail(std::string("unexpected end of file, expected ") + what);
  }

  bool at_end() {
    std::string line;
    while (true) {
      const auto pos = in_.tellg();
      if (!std::getline(in_, line)) {
        return true;
      }
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        in_.clear();
        in_.seekg(pos);
        return false;
      }
      ++line_no_;
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError("line " + std::to_string(line_no_) + ": " + msg);
  }

  double to_double(const std::string& s) const {
    double value{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      fail("not a number: '" + s + "'");
    }
    return value;
  }

  std::size_t to_size(const std::string& s) const {
    std::size_t value{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      fail("not a non-negative integer: '" + s + "'");
    }
    return value;
  }

  void expect(const std::vector<std::string>& tokens, std::size_t count, const char* what) const {
    if (tokens.size() != count) {
      fail(std::string("malformed ") + what + " record");
    }
  }

private:
  std::istream& in_;
  std::size_t line_no_{0};
};

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open '" + path + "' for reading");
  }
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open '" + path + "' for writing");
  }
  return out;
}

}  // namespace detail

inline void write_sequence(std::ostream& out, const SnapshotSequence& seq) {
  out << "GSSM v1 " << seq.num_nodes() << ' ' << seq.feature_dim() << ' ' << seq.size() << '\n';
  for (const Snapshot& snap : seq) {
    out << "T " << detail::format_double(snap.timestamp) << '\n';
    out << "E " << snap.graph.num_edges() << '\n';
    for (const Edge& e : snap.graph.edges()) {
      out << e.u << ' ' << e.v << '\n';
    }
    out << "X\n";
    for (Eigen::Index v = 0; v < snap.features.rows(); ++v) {
      for (Eigen::Index j = 0; j < snap.features.cols(); ++j) {
        out << (j ? " " : "") << detail::format_double(snap.features(v, j));
      }
      out << '\n';
    }
  }
}

inline SnapshotSequence read_sequence(std::istream& in) {
  detail::LineReader reader(in);
  auto header = reader.next("header");
  if (header.size() != 5 || header[0] != "GSSM" || header[1] != "v1") {
    reader.fail("malformed header, expected 'GSSM v1 <N_V> <d> <L>'");
  }
  const std::size_t n = reader.to_size(header[2]);
  const std::size_t d = reader.to_size(header[3]);
  const std::size_t len = reader.to_size(header[4]);
  if (n == 0 || d == 0) {
    reader.fail("header declares an empty node set or feature width");
  }
  std::vector<Snapshot> snaps;
  snaps.reserve(len);
  for (std::size_t l = 0; l < len; ++l) {
    auto t = reader.next("T record");
    reader.expect(t, 2, "T");
    if (t[0] != "T") reader.fail("expected 'T <timestamp>'");
    const double tau = reader.to_double(t[1]);
    if (!snaps.empty() && !(tau > snaps.back().timestamp)) {
      reader.fail("timestamps must be strictly increasing");
    }

    auto e = reader.next("E record");
    reader.expect(e, 2, "E");
    if (e[0] != "E") reader.fail("expected 'E <num_edges>'");
    const std::size_t m = reader.to_size(e[1]);
    std::vector<Edge> edges;
    edges.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      auto uv = reader.next("edge");
      reader.expect(uv, 2, "edge");
      const std::size_t u = reader.to_size(uv[0]);
      const std::size_t v = reader.to_size(uv[1]);
      if (u >= n || v >= n) reader.fail("edge endpoint out of range");
      if (u == v) reader.fail("self-loop");
      edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }

    auto x = reader.next("X record");
    reader.expect(x, 1, "X");
    if (x[0] != "X") reader.fail("expected 'X'");
    Matrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t v = 0; v < n; ++v) {
      auto row = reader.next("feature row");
      if (row.size() != d) reader.fail("feature row has the wrong width");
      for (std::size_t j = 0; j < d; ++j) {
        features(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(j)) = reader.to_double(row[j]);
      }
    }
    try {
      snaps.push_back(Snapshot{Graph(n, std::move(edges)), std::move(features), tau});
    } catch (const InvalidInput& err) {
      reader.fail(err.what());
    }
  }
  if (!reader.at_end()) {
    reader.fail("trailing content after the declared snapshots");
  }
  try {
    return SnapshotSequence(std::move(snaps));
  } catch (const InvalidInput& err) {
    throw FormatError(err.what());
  }
}

inline void save_sequence(const std::string& path, const SnapshotSequence& seq) {
  auto out = detail::open_out(path);
  write_sequence(out, seq);
}

inline SnapshotSequence load_sequence(const std::string& path) {
  auto in = detail::open_in(path);
  return read_sequence(in);
}

enum class Split { Train, Val, Test };

struct LabelFile {
  std::size_t num_classes{};
  std::vector<int> labels;
  std::vector<Split> splits;
};

inline void write_labels(std::ostream& out, const LabelFile& lf) {
  out << "GSSML v1 " << lf.labels.size() << ' ' << lf.num_classes << '\n';
  for (std::size_t v = 0; v < lf.labels.size(); ++v) {
    const char* split = lf.splits[v] == Split::Train ? "train" : lf.splits[v] == Split::Val ? "val" : "test";
    out << lf.labels[v] << ' ' << split << '\n';
  }
}

inline LabelFile read_labels(std::istream& in) {
  detail::LineReader reader(in);
  auto header = reader.next("header");
  if (header.size() != 4 || header[0] != "GSSML" || header[1] != "v1") {
    reader.fail("malformed header, expected 'GSSML v1 <N_V> <C>'");
  }
  LabelFile lf;
  const std::size_t n = reader.to_size(header[2]);
  lf.num_classes = reader.to_size(header[3]);
  for (std::size_t v = 0; v < n; ++v) {
    auto rec = reader.next("label");
    reader.expect(rec, 2, "label");
    const std::size_t label = reader.to_size(rec[0]);
    if (label >= lf.num_classes) reader.fail("label out of range");
    lf.labels.push_back(static_cast<int>(label));
    if (rec[1] == "train") {
      lf.splits.push_back(Split::Train);
    } else if (rec[1] == "val") {
      lf.splits.push_back(Split::Val);
    } else if (rec[1] == "test") {
      lf.splits.push_back(Split::Test);
    } else {
      reader.fail("unknown split '" + rec[1] + "'");
    }
  }
  return lf;
}

/// Named-tensor checkpoint. Vectors are stored as single-column tensors.
struct ParamFile {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Matrix>> tensors;

  [[nodiscard]] const Matrix& tensor(const std::string& name) const {
    for (const auto& [key, value] : tensors) {
      if (key == name) return value;
    }
    throw FormatError("checkpoint has no tensor named '" + name + "'");
  }

  [[nodiscard]] const std::string& meta_value(const std::string& key) const {
    const auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("checkpoint has no metadata key '" + key + "'");
    return it->second;
  }
};

inline void write_params(std::ostream& out, const ParamFile& pf) {
  out << "GSSMP v1 " << pf.tensors.size() << '\n';
  for (const auto& [key, value] : pf.meta) {
    out << "M " << key << ' ' << value << '\n';
  }
  for (const auto& [name, t] : pf.tensors) {
    out << "P " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        out << (j ? " " : "") << detail::format_double(t(i, j));
      }
      out << '\n';
    }
  }
}

inline ParamFile read_params(std::istream& in) {
  detail::LineReader reader(in);
  auto header = reader.next("header");
  if (header.size() != 3 || header[0] != "GSSMP" || header[1] != "v1") {
    reader.fail("malformed header, expected 'GSSMP v1 <count>'");
  }
  const std::size_t count = reader.to_size(header[2]);
  ParamFile pf;
  while (pf.tensors.size() < count) {
    auto rec = reader.next("tensor record");
    if (rec[0] == "M") {
      reader.expect(rec, 3, "M");
      pf.meta[rec[1]] = rec[2];
      continue;
    }
    reader.expect(rec, 4, "P");
    if (rec[0] != "P") reader.fail("expected 'P <name> <rows> <cols>'");
    const auto rows = static_cast<Eigen::Index>(reader.to_size(rec[2]));
    const auto cols = static_cast<Eigen::Index>(reader.to_size(rec[3]));
    Matrix t(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      auto row = reader.next("tensor row");
      if (static_cast<Eigen::Index>(row.size()) != cols) reader.fail("tensor row has the wrong width");
      for (Eigen::Index j = 0; j < cols; ++j) {
        t(i, j) = reader.to_double(row[static_cast<std::size_t>(j)]);
      }
    }
    pf.tensors.emplace_back(rec[1], std::move(t));
  }
  return pf;
}

}  // namespace graphssm::io
