#include "cotdre/csv.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cotdre {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& tok, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw IoError("csv: bad numeric value '" + tok + "' on line " +
                  std::to_string(line_no));
  return v;
}

// Shortest representation that round-trips through strtod.
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

}  // namespace

PathCsv parse_path_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("csv: empty input");
  auto header = split(trim(line), ',');
  for (auto& h : header) h = trim(h);

  bool has_weight = !header.empty() && header.back() == "weight";
  const int ncols = static_cast<int>(header.size()) - (has_weight ? 1 : 0);
  if (ncols < 1) throw IoError("csv: no path columns in header");

  // Header must enumerate t-major: t1_d1, t1_d2, ..., tT_dd.
  int T = 0, d = 0;
  {
    int last_t = 0, last_d = 0;
    for (int c = 0; c < ncols; ++c) {
      int t = 0, k = 0;
      if (std::sscanf(header[c].c_str(), "t%d_d%d", &t, &k) != 2)
        throw IoError("csv: malformed column name '" + header[c] + "'");
      if (c == 0 && (t != 1 || k != 1))
        throw IoError("csv: first column must be t1_d1");
      if (c > 0) {
        const bool next_dim = (t == last_t && k == last_d + 1);
        const bool next_time = (t == last_t + 1 && k == 1);
        if (!next_dim && !next_time)
          throw IoError("csv: columns must run t-major (t1_d1..tT_dd)");
      }
      last_t = t;
      last_d = k;
      T = std::max(T, t);
      d = std::max(d, k);
    }
    if (ncols != T * d) throw IoError("csv: incomplete (t, d) column grid");
  }

  PathCsv out;
  out.num_steps = T;
  out.dim = d;
  if (has_weight) out.weights.emplace();

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    const auto toks = split(row, ',');
    if (static_cast<int>(toks.size()) != ncols + (has_weight ? 1 : 0))
      throw IoError("csv: wrong field count on line " + std::to_string(line_no));
    for (int c = 0; c < ncols; ++c)
      out.data.push_back(parse_double(trim(toks[c]), line_no));
    if (has_weight) out.weights->push_back(parse_double(trim(toks.back()), line_no));
    ++out.num_paths;
  }
  if (out.num_paths == 0) throw IoError("csv: no data rows");
  return out;
}

PathCsv read_path_csv(const std::string& filename) {
  std::ifstream f(filename);
  if (!f) throw IoError("csv: cannot open '" + filename + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_path_csv(buf.str());
}

PathBatch to_path_batch(const PathCsv& csv, Bounds bounds) {
  return PathBatch(csv.data, csv.num_paths, csv.num_steps, csv.dim, bounds);
}

DiscreteMeasure to_measure(const PathCsv& csv, Bounds bounds) {
  PathBatch batch = to_path_batch(csv, bounds);
  if (!csv.weights) return DiscreteMeasure::uniform(std::move(batch));
  return DiscreteMeasure(std::move(batch), *csv.weights);
}

std::string format_path_csv(const PathBatch& batch,
                            const std::vector<double>* weights) {
  std::ostringstream out;
  for (int t = 1; t <= batch.num_steps(); ++t) {
    for (int k = 1; k <= batch.dim(); ++k) {
      if (t > 1 || k > 1) out << ',';
      out << 't' << t << "_d" << k;
    }
  }
  if (weights) out << ",weight";
  out << '\n';
  for (int n = 0; n < batch.num_paths(); ++n) {
    const auto p = batch.path(n);
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (c > 0) out << ',';
      out << format_double(p[c]);
    }
    if (weights) out << ',' << format_double((*weights)[n]);
    out << '\n';
  }
  return out.str();
}

void write_path_csv(const std::string& filename, const PathBatch& batch,
                    const std::vector<double>* weights) {
  std::ofstream f(filename, std::ios::binary);
  if (!f) throw IoError("csv: cannot write '" + filename + "'");
  f << format_path_csv(batch, weights);
}

void write_measure_csv(const std::string& filename, const DiscreteMeasure& m) {
  write_path_csv(filename, m.support(), &m.weights());
}

}  // namespace cotdre
