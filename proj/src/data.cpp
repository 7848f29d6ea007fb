#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sha256.hpp"

namespace sftl {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

bool parse_number(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

struct RawTable {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> rows;
};

RawTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  RawTable t;
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty CSV " + path);
  t.names = split_line(line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.names.size())
      throw DataError("ragged CSV row in " + path);
    t.rows.push_back(std::move(cells));
  }
  if (t.rows.empty()) throw DataError("CSV has no data rows: " + path);
  return t;
}

// Numeric columns are z-score normalized; categorical columns one-hot.
struct FeatureBlock {
  std::vector<std::string> out_names;
  Mat values;  // rows x expanded columns
};

FeatureBlock expand_features(const RawTable& t, const std::vector<std::size_t>& cols) {
  FeatureBlock fb;
  std::size_t n = t.rows.size();
  std::vector<std::vector<double>> out_cols;
  for (std::size_t c : cols) {
    bool numeric = true;
    std::vector<double> vals(n);
    for (std::size_t r = 0; r < n; ++r)
      if (!parse_number(t.rows[r][c], &vals[r])) {
        numeric = false;
        break;
      }
    if (numeric) {
      double mean = 0, sq = 0;
      for (double v : vals) mean += v;
      mean /= double(n);
      for (double v : vals) sq += (v - mean) * (v - mean);
      double sd = std::sqrt(sq / double(n));
      if (sd < 1e-12) sd = 1.0;
      for (auto& v : vals) v = std::clamp((v - mean) / sd, -8.0, 8.0);
      fb.out_names.push_back(t.names[c]);
      out_cols.push_back(std::move(vals));
    } else {
      std::set<std::string> uniq;
      for (std::size_t r = 0; r < n; ++r) uniq.insert(t.rows[r][c]);
      for (const auto& value : uniq) {
        std::vector<double> hot(n, 0.0);
        for (std::size_t r = 0; r < n; ++r)
          if (t.rows[r][c] == value) hot[r] = 1.0;
        fb.out_names.push_back(t.names[c] + "=" + value);
        out_cols.push_back(std::move(hot));
      }
    }
  }
  fb.values = Mat(n, out_cols.size());
  for (std::size_t c = 0; c < out_cols.size(); ++c)
    for (std::size_t r = 0; r < n; ++r) fb.values.at(r, c) = out_cols[c][r];
  return fb;
}

}  // namespace

SplitResult load_and_split(const DatasetSpec& spec) {
  RawTable t = read_csv(spec.csv_path);
  auto col_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < t.names.size(); ++i)
      if (t.names[i] == name) return i;
    throw DataError("column not found: " + name);
  };
  std::size_t label_col = col_index(spec.label_column);

  // labels -> {-1,+1}; {0,1} input remapped
  std::size_t n = t.rows.size();
  std::vector<double> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    double v;
    if (!parse_number(t.rows[r][label_col], &v)) throw DataError("non-numeric label");
    if (v == 0.0) v = -1.0;
    if (v != 1.0 && v != -1.0) throw DataError("labels must be in {0,1} or {-1,+1}");
    labels[r] = v;
  }

  std::vector<std::size_t> s_cols, t_cols;
  if (!spec.source_columns.empty() || !spec.target_columns.empty()) {
    for (const auto& c : spec.source_columns) s_cols.push_back(col_index(c));
    for (const auto& c : spec.target_columns) t_cols.push_back(col_index(c));
    for (std::size_t c : s_cols)
      if (std::find(t_cols.begin(), t_cols.end(), c) != t_cols.end())
        throw DataError("feature assigned to both parties: " + t.names[c]);
  } else {
    std::vector<std::size_t> feats;
    for (std::size_t i = 0; i < t.names.size(); ++i)
      if (i != label_col) feats.push_back(i);
    std::size_t half = (feats.size() + 1) / 2;
    s_cols.assign(feats.begin(), feats.begin() + half);
    t_cols.assign(feats.begin() + half, feats.end());
  }
  if (s_cols.empty() || t_cols.empty()) throw DataError("both parties need features");

  FeatureBlock fs = expand_features(t, s_cols);
  FeatureBlock ft = expand_features(t, t_cols);

  // deterministic sample assignment
  if (spec.overlap_frac < 0 || spec.overlap_frac > 1) throw DataError("overlap_frac out of range");
  ElemRng rng(spec.seed);
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = std::uint32_t(i);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  std::size_t n_overlap = std::size_t(std::llround(spec.overlap_frac * double(n)));
  std::size_t rest = n - n_overlap;
  std::size_t s_only = (rest + 1) / 2;
  std::vector<std::uint32_t> s_rows(order.begin(), order.begin() + n_overlap + s_only);
  std::vector<std::uint32_t> t_rows(order.begin(), order.begin() + n_overlap);
  t_rows.insert(t_rows.end(), order.begin() + n_overlap + s_only, order.end());

  std::size_t n_labeled = spec.n_labeled ? std::min<std::size_t>(spec.n_labeled, t_rows.size())
                                         : t_rows.size();
  std::vector<std::uint32_t> lab_pick(t_rows.size());
  for (std::size_t i = 0; i < t_rows.size(); ++i) lab_pick[i] = std::uint32_t(i);
  for (std::size_t i = lab_pick.size(); i > 1; --i)
    std::swap(lab_pick[i - 1], lab_pick[rng.below(i)]);
  lab_pick.resize(n_labeled);
  std::sort(lab_pick.begin(), lab_pick.end());  // local T positions in D_L order

  SplitResult out;
  out.source.x = Mat(s_rows.size(), fs.values.cols);
  out.source.y.resize(s_rows.size());
  for (std::size_t i = 0; i < s_rows.size(); ++i) {
    for (std::size_t c = 0; c < fs.values.cols; ++c)
      out.source.x.at(i, c) = fs.values.at(s_rows[i], c);
    out.source.y[i] = labels[s_rows[i]];
  }
  out.target.x = Mat(t_rows.size(), ft.values.cols);
  for (std::size_t i = 0; i < t_rows.size(); ++i)
    for (std::size_t c = 0; c < ft.values.cols; ++c)
      out.target.x.at(i, c) = ft.values.at(t_rows[i], c);

  out.source.overlap_rows.resize(n_overlap);
  out.target.overlap_rows.resize(n_overlap);
  for (std::size_t k = 0; k < n_overlap; ++k) {
    out.source.overlap_rows[k] = std::uint32_t(k);  // overlap rows lead both views
    out.target.overlap_rows[k] = std::uint32_t(k);
  }
  out.target.labeled_rows = lab_pick;
  out.source.labeled_y.resize(n_labeled);
  for (std::size_t i = 0; i < n_labeled; ++i)
    out.source.labeled_y[i] = labels[t_rows[lab_pick[i]]];

  // digest over the global index agreement
  Sha256 h;
  auto feed32 = [&](std::uint32_t v) { h.update(&v, 4); };
  feed32(std::uint32_t(n));
  feed32(std::uint32_t(n_overlap));
  feed32(std::uint32_t(n_labeled));
  for (std::size_t k = 0; k < n_overlap; ++k) feed32(order[k]);
  for (auto p : lab_pick) feed32(t_rows[p]);
  auto digest = h.finish();
  out.source.digest = digest;
  out.target.digest = digest;

  out.shape.n_source = std::uint32_t(s_rows.size());
  out.shape.n_target = std::uint32_t(t_rows.size());
  out.shape.n_overlap = std::uint32_t(n_overlap);
  out.shape.n_labeled = std::uint32_t(n_labeled);
  out.shape.in_source = std::uint32_t(fs.values.cols);
  out.shape.in_target = std::uint32_t(ft.values.cols);
  return out;
}

void write_synthetic_csv(const std::string& path, std::uint32_t samples,
                         std::uint32_t source_features, std::uint32_t target_features,
                         std::uint64_t seed, double label_noise) {
  std::uint32_t nf = source_features + target_features;
  if (nf == 0 || samples == 0) throw DataError("empty synthetic spec");
  ElemRng rng(seed ^ 0x53594e5448ULL);
  std::vector<double> w(nf);
  for (auto& v : w) v = 2.0 * rng.canonical() - 1.0;
  double b = rng.canonical() - 0.5;

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path);
  for (std::uint32_t c = 0; c < source_features; ++c) f << "s" << c << ",";
  for (std::uint32_t c = 0; c < target_features; ++c) f << "t" << c << ",";
  f << "label\n";
  for (std::uint32_t r = 0; r < samples; ++r) {
    double score = b;
    for (std::uint32_t c = 0; c < nf; ++c) {
      double x = 2.0 * rng.canonical() - 1.0;
      score += w[c] * x;
      f << x << ",";
    }
    int label = score >= 0 ? 1 : 0;
    if (label_noise > 0 && rng.canonical() < label_noise) label = 1 - label;
    f << label << "\n";
  }
}

double weighted_f1(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size() || truth.empty())
    throw DataError("f1 input size mismatch");
  double total = double(truth.size());
  double f1w = 0;
  for (int cls : {+1, -1}) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      bool t = truth[i] == cls, p = predicted[i] == cls;
      support += t;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    double denom = 2 * tp + fp + fn;
    double f1 = denom > 0 ? 2 * tp / denom : 0.0;
    f1w += f1 * support / total;
  }
  return f1w;
}

}  // namespace sftl
