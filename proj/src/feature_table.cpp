#include "wmg/feature_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "wmg/error.hpp"
#include "wmg/rng.hpp"

namespace wmg {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

void require_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second)
      throw ValidationError(std::string("duplicate ") + what + " id '" + id + "'");
  }
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  // A trailing blank line is tolerated; interior blank lines are not.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

void check_id_text(const std::string& id) {
  if (id.find_first_of(",\n\r") != std::string::npos)
    throw ValidationError("id '" + id + "' contains a CSV delimiter");
}

}  // namespace

FeatureTable::FeatureTable(std::vector<std::string> subject_ids,
                           std::vector<std::string> cluster_ids, Eigen::MatrixXd values,
                           BoolMatrix present)
    : subject_ids_(std::move(subject_ids)),
      cluster_ids_(std::move(cluster_ids)),
      values_(std::move(values)),
      present_(std::move(present)) {
  const auto n = static_cast<Eigen::Index>(subject_ids_.size());
  const auto c = static_cast<Eigen::Index>(cluster_ids_.size());
  if (values_.rows() != n || values_.cols() != c || present_.rows() != n ||
      present_.cols() != c) {
    throw ValidationError("feature table dimensions do not match its ids");
  }
  require_unique(subject_ids_, "subject");
  require_unique(cluster_ids_, "cluster");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      if (!present_(i, j)) values_(i, j) = kMissing;
}

FeatureTable FeatureTable::fully_observed(std::vector<std::string> subject_ids,
                                          std::vector<std::string> cluster_ids,
                                          Eigen::MatrixXd values) {
  BoolMatrix present = BoolMatrix::Constant(values.rows(), values.cols(), true);
  return FeatureTable(std::move(subject_ids), std::move(cluster_ids), std::move(values),
                      std::move(present));
}

void FeatureTable::set_missing(Eigen::Index r, Eigen::Index c) {
  values_(r, c) = kMissing;
  present_(r, c) = false;
}

FeatureTable FeatureTable::select_rows(const std::vector<std::size_t>& rows) const {
  const auto n = static_cast<Eigen::Index>(rows.size());
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  Eigen::MatrixXd v(n, cols());
  BoolMatrix p(n, cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    if (src < 0 || src >= this->rows()) throw ArgumentError("row index out of range");
    ids.push_back(subject_ids_[static_cast<std::size_t>(src)]);
    v.row(i) = values_.row(src);
    p.row(i) = present_.row(src);
  }
  return FeatureTable(std::move(ids), cluster_ids_, std::move(v), std::move(p));
}

bool FeatureTable::same_as(const FeatureTable& other) const {
  if (subject_ids_ != other.subject_ids_ || cluster_ids_ != other.cluster_ids_) return false;
  if ((present_ != other.present_).any()) return false;
  for (Eigen::Index i = 0; i < rows(); ++i)
    for (Eigen::Index j = 0; j < cols(); ++j)
      if (present_(i, j) && values_(i, j) != other.values_(i, j)) return false;
  return true;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

FeatureTable parse_feature_table(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("missing header row", 1);
  const auto header = split_commas(lines[0]);
  if (trim(header[0]) != "subject_id")
    throw ParseError("first header cell must be 'subject_id'", 1);
  std::vector<std::string> clusters;
  for (std::size_t j = 1; j < header.size(); ++j) clusters.emplace_back(trim(header[j]));

  const std::size_t n = lines.size() - 1;
  const auto c = static_cast<Eigen::Index>(clusters.size());
  std::vector<std::string> subjects;
  subjects.reserve(n);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), c);
  BoolMatrix present(static_cast<Eigen::Index>(n), c);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line_no = i + 2;
    const auto cells = split_commas(lines[i + 1]);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    subjects.emplace_back(trim(cells[0]));
    for (Eigen::Index j = 0; j < c; ++j) {
      const auto cell = trim(cells[static_cast<std::size_t>(j) + 1]);
      const auto r = static_cast<Eigen::Index>(i);
      if (cell.empty()) {
        present(r, j) = false;
        values(r, j) = kMissing;
        continue;
      }
      double v = 0.0;
      if (!parse_double(cell, v) || !std::isfinite(v))
        throw ParseError("invalid number '" + std::string(cell) + "'", line_no);
      present(r, j) = true;
      values(r, j) = v;
    }
  }
  return FeatureTable(std::move(subjects), std::move(clusters), std::move(values),
                      std::move(present));
}

std::string format_feature_table(const FeatureTable& table) {
  std::string out = "subject_id";
  for (const auto& id : table.cluster_ids()) {
    check_id_text(id);
    out += ',';
    out += id;
  }
  out += '\n';
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    const auto& sid = table.subject_ids()[static_cast<std::size_t>(i)];
    check_id_text(sid);
    out += sid;
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      out += ',';
      if (table.is_present(i, j)) out += format_double(table.value(i, j));
    }
    out += '\n';
  }
  return out;
}

FeatureTable load_feature_table(const std::filesystem::path& path) {
  return parse_feature_table(read_text_file(path));
}

void save_feature_table(const FeatureTable& table, const std::filesystem::path& path) {
  write_text_file(path, format_feature_table(table));
}

EntryMask observed_mask(const FeatureTable& table) { return EntryMask(table.present()); }

std::vector<FoldSplit> split_folds(std::size_t n_rows, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("fold count must be at least 2");
  if (k > n_rows)
    throw ArgumentError("fold count " + std::to_string(k) + " exceeds row count " +
                        std::to_string(n_rows));
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), 0);
  auto rng = Rng::stream(seed, "folds");
  rng.shuffle(order);

  std::vector<FoldSplit> folds(k);
  std::vector<std::size_t> fold_of(n_rows);
  for (std::size_t pos = 0; pos < n_rows; ++pos) fold_of[order[pos]] = pos % k;
  for (std::size_t f = 0; f < k; ++f) folds[f].fold_index = f;
  for (std::size_t row = 0; row < n_rows; ++row) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[row] == f ? folds[f].test_rows : folds[f].train_rows).push_back(row);
    }
  }
  return folds;
}

std::vector<FoldSplit> split_folds(const FeatureTable& table, std::size_t k,
                                   std::uint64_t seed) {
  return split_folds(static_cast<std::size_t>(table.rows()), k, seed);
}

SyntheticDrop inject_synthetic_missing(const FeatureTable& table, double fraction,
                                       std::uint64_t seed,
                                       const std::vector<std::size_t>& rows) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ArgumentError("missing fraction must lie strictly between 0 and 1");

  std::vector<std::size_t> eligible_rows = rows;
  if (eligible_rows.empty()) {
    eligible_rows.resize(static_cast<std::size_t>(table.rows()));
    std::iota(eligible_rows.begin(), eligible_rows.end(), 0);
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> observed;
  for (const auto r : eligible_rows)
    for (Eigen::Index j = 0; j < table.cols(); ++j)
      if (table.is_present(static_cast<Eigen::Index>(r), j))
        observed.emplace_back(static_cast<Eigen::Index>(r), j);
  if (observed.empty()) throw ArgumentError("table has no observed entries to drop");

  const auto n_drop =
      static_cast<std::size_t>(std::round(fraction * static_cast<double>(observed.size())));
  auto rng = Rng::stream(seed, "synthetic-missing");
  rng.partial_shuffle(observed, n_drop);

  SyntheticDrop out{table, EntryMask::none(table.rows(), table.cols())};
  for (std::size_t i = 0; i < n_drop; ++i) {
    const auto [r, c] = observed[i];
    out.table.set_missing(r, c);
    out.dropped.bits(r, c) = true;
  }
  return out;
}

LabelSet load_labels(const std::filesystem::path& path) {
  const auto lines = split_lines(read_text_file(path));
  if (lines.empty()) throw ParseError("missing header row", 1);
  const auto header = split_commas(lines[0]);
  if (header.size() != 2 || trim(header[0]) != "subject_id" || trim(header[1]) != "label")
    throw ParseError("header must be 'subject_id,label'", 1);
  LabelSet out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_commas(lines[i]);
    if (cells.size() != 2) throw ParseError("expected 2 cells", i + 1);
    const auto lab = trim(cells[1]);
    if (lab != "0" && lab != "1") throw ParseError("label must be 0 or 1", i + 1);
    out.subject_ids.emplace_back(trim(cells[0]));
    out.labels.push_back(lab == "1" ? 1 : 0);
  }
  require_unique(out.subject_ids, "subject");
  return out;
}

void save_labels(const LabelSet& labels, const std::filesystem::path& path) {
  if (labels.subject_ids.size() != labels.labels.size())
    throw ArgumentError("label set ids and labels differ in length");
  std::string out = "subject_id,label\n";
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    check_id_text(labels.subject_ids[i]);
    out += labels.subject_ids[i] + ',' + (labels.labels[i] != 0 ? "1" : "0") + '\n';
  }
  write_text_file(path, out);
}

std::vector<int> align_labels(const FeatureTable& table, const LabelSet& labels) {
  std::unordered_map<std::string, int> by_id;
  for (std::size_t i = 0; i < labels.labels.size(); ++i)
    by_id.emplace(labels.subject_ids[i], labels.labels[i]);
  std::vector<int> out;
  out.reserve(table.subject_ids().size());
  for (const auto& sid : table.subject_ids()) {
    const auto it = by_id.find(sid);
    if (it == by_id.end()) throw ValidationError("no label for subject '" + sid + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace wmg
