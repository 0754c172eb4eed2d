#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wmg {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Boolean selection over the entries of an N x C table.
struct EntryMask {
  BoolMatrix bits;

  EntryMask() = default;
  explicit EntryMask(BoolMatrix b) : bits(std::move(b)) {}
  static EntryMask none(Eigen::Index rows, Eigen::Index cols) {
    return EntryMask(BoolMatrix::Constant(rows, cols, false));
  }

  Eigen::Index rows() const { return bits.rows(); }
  Eigen::Index cols() const { return bits.cols(); }
  std::size_t count() const { return static_cast<std::size_t>(bits.count()); }
  bool operator()(Eigen::Index r, Eigen::Index c) const { return bits(r, c); }
};

/// Subjects x clusters matrix of scalar features with explicit missingness.
/// Missing entries hold NaN internally; callers must consult present().
class FeatureTable {
 public:
  FeatureTable() = default;

  /// Validates dimensions and id uniqueness (ValidationError otherwise).
  FeatureTable(std::vector<std::string> subject_ids,
               std::vector<std::string> cluster_ids, Eigen::MatrixXd values,
               BoolMatrix present);

  static FeatureTable fully_observed(std::vector<std::string> subject_ids,
                                     std::vector<std::string> cluster_ids,
                                     Eigen::MatrixXd values);

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }

  const std::vector<std::string>& subject_ids() const { return subject_ids_; }
  const std::vector<std::string>& cluster_ids() const { return cluster_ids_; }
  const Eigen::MatrixXd& values() const { return values_; }
  const BoolMatrix& present() const { return present_; }

  bool is_present(Eigen::Index r, Eigen::Index c) const { return present_(r, c); }
  double value(Eigen::Index r, Eigen::Index c) const { return values_(r, c); }

  void set_value(Eigen::Index r, Eigen::Index c, double v) {
    values_(r, c) = v;
    present_(r, c) = true;
  }
  void set_missing(Eigen::Index r, Eigen::Index c);

  std::size_t observed_count() const { return static_cast<std::size_t>(present_.count()); }
  std::size_t missing_count() const {
    return static_cast<std::size_t>(present_.size()) - observed_count();
  }
  std::size_t observed_in_row(Eigen::Index r) const {
    return static_cast<std::size_t>(present_.row(r).count());
  }

  /// Copy restricted to the given rows, in the given order.
  FeatureTable select_rows(const std::vector<std::size_t>& rows) const;

  /// Entry-wise equality of ids, presence and observed values (bit-exact).
  bool same_as(const FeatureTable& other) const;

 private:
  std::vector<std::string> subject_ids_;
  std::vector<std::string> cluster_ids_;
  Eigen::MatrixXd values_;
  BoolMatrix present_;
};

struct FoldSplit {
  std::size_t fold_index = 0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

FeatureTable load_feature_table(const std::filesystem::path& path);
void save_feature_table(const FeatureTable& table, const std::filesystem::path& path);

/// CSV dialect parse/format on in-memory text.
FeatureTable parse_feature_table(const std::string& text);
std::string format_feature_table(const FeatureTable& table);

EntryMask observed_mask(const FeatureTable& table);

/// Partition of the rows into k seeded, near-equal test sets.
std::vector<FoldSplit> split_folds(const FeatureTable& table, std::size_t k,
                                   std::uint64_t seed);
std::vector<FoldSplit> split_folds(std::size_t n_rows, std::size_t k, std::uint64_t seed);

struct SyntheticDrop {
  FeatureTable table;   // copy with the dropped entries marked missing
  EntryMask dropped;    // locations of the dropped entries
};

/// Marks round(fraction * observed) uniformly chosen observed entries missing.
/// When `rows` is non-empty only entries in those rows are eligible.
SyntheticDrop inject_synthetic_missing(const FeatureTable& table, double fraction,
                                       std::uint64_t seed,
                                       const std::vector<std::size_t>& rows = {});

/// subject_id,label CSV with labels in {0,1}.
struct LabelSet {
  std::vector<std::string> subject_ids;
  std::vector<int> labels;
};
LabelSet load_labels(const std::filesystem::path& path);
void save_labels(const LabelSet& labels, const std::filesystem::path& path);
/// Labels reordered to match the table's subject order (ValidationError if a
/// subject has no label).
std::vector<int> align_labels(const FeatureTable& table, const LabelSet& labels);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Locale-independent parse; false when the text is not a complete number.
bool parse_double(std::string_view text, double& out);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace wmg
