#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace netpred {

class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days days) : days_(days) {}
  Date(int year, unsigned month, unsigned day);

  /// Parses `YYYY-MM-DD`; throws ParseError on malformed or impossible dates.
  static Date parse(std::string_view iso);
  std::string iso() const;
  std::chrono::sys_days days() const { return days_; }

  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

/// Position of a day on the shared trading calendar.
using DayIndex = std::size_t;

/// Half-open range of trading days [begin, end).
struct DayRange {
  DayIndex begin = 0;
  DayIndex end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool contains(DayIndex d) const { return d >= begin && d < end; }
  bool operator==(const DayRange&) const = default;
};

class Calendar {
 public:
  Calendar() = default;
  explicit Calendar(std::vector<Date> days);

  std::size_t size() const { return days_.size(); }
  const Date& operator[](DayIndex i) const { return days_[i]; }
  const std::vector<Date>& days() const { return days_; }
  std::optional<DayIndex> find(const Date& d) const;
  /// Throws InputError when the date is not a trading day.
  DayIndex index_of(const Date& d) const;

 private:
  std::vector<Date> days_;
};

struct BarSeries {
  std::string symbol;
  std::vector<Date> dates;
  std::vector<double> open, high, low, close, volume;

  std::size_t size() const { return dates.size(); }
  /// Throws InputError naming the first offending day.
  void validate() const;
};

/// All series aligned to one calendar, sorted by symbol.
struct BarSet {
  Calendar calendar;
  std::vector<BarSeries> series;

  const BarSeries* find(std::string_view symbol) const;
  const BarSeries& at(std::string_view symbol) const;
};

/// Parses the bars CSV (`symbol,date,open,high,low,close,volume`).
///
/// The calendar is every date seen in the file between the latest first date
/// and the earliest last date over all symbols, optionally restricted to
/// `calendar_filter`. A symbol missing from up to `max_fill` consecutive days
/// is forward-filled from its previous close with zero volume; a longer gap
/// throws CoverageError.
BarSet parse_bars(std::istream& in, const std::optional<std::vector<Date>>& calendar_filter = {},
                  std::size_t max_fill = 3);
BarSet load_bars(const std::filesystem::path& path,
                 const std::optional<std::vector<Date>>& calendar_filter = {},
                 std::size_t max_fill = 3);
void write_bars_csv(std::ostream& out, const BarSet& bars);

enum class Weighting { CapWeighted, PriceWeighted };

struct IndexSpec {
  std::string id;
  Weighting weighting = Weighting::CapWeighted;
  std::vector<std::string> constituents;
};

struct UniverseManifest {
  std::vector<IndexSpec> indices;
  std::map<std::string, double> market_caps;

  /// Checks constituent uniqueness and cap coverage. When
  /// `constituents_per_index` is non-zero every index must have exactly that many.
  void validate(std::size_t constituents_per_index = 0) const;
  /// Deduplicated constituents of all indices, sorted.
  std::vector<std::string> stocks() const;
  const IndexSpec& index(std::string_view id) const;
};

UniverseManifest parse_manifest(std::string_view json_text);
UniverseManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const UniverseManifest& manifest);

enum class Movement : std::int8_t { Fall = -1, Rise = 1 };

inline int sign_value(Movement m) { return static_cast<int>(m); }
/// Sign with the global tie rule: zero maps to Rise.
inline Movement movement_of(double change) { return change >= 0.0 ? Movement::Rise : Movement::Fall; }

/// +1 when close(day) >= close(day - 1), else -1. Throws InputError for day 0.
Movement movement_label(const BarSeries& bars, DayIndex day);

enum class FeatureProfile { Classic, Signal };

std::span<const std::string_view> feature_names(FeatureProfile profile);
std::string_view profile_name(FeatureProfile profile);

/// Days [0, kFeatureWarmup) carry no features; bars need kMinFeatureHistory days.
inline constexpr DayIndex kFeatureWarmup = 29;
inline constexpr std::size_t kMinFeatureHistory = kFeatureWarmup + 1;

class FeatureFrame {
 public:
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  FeatureFrame(std::string symbol, FeatureProfile profile, DayIndex first_day, Matrix values);

  const std::string& symbol() const { return symbol_; }
  FeatureProfile profile() const { return profile_; }
  DayIndex first_day() const { return first_day_; }
  /// One past the last covered day.
  DayIndex end_day() const { return first_day_ + static_cast<DayIndex>(values_.rows()); }
  bool covers(DayIndex d) const { return d >= first_day_ && d < end_day(); }
  std::size_t dimension() const { return static_cast<std::size_t>(values_.cols()); }
  const Matrix& values() const { return values_; }

  std::span<const double> row(DayIndex d) const;
  double value(DayIndex d, std::string_view feature) const;

  bool operator==(const FeatureFrame& other) const;

 private:
  std::string symbol_;
  FeatureProfile profile_;
  DayIndex first_day_;
  Matrix values_;
};

/// Throws InsufficientHistoryError when bars are shorter than kMinFeatureHistory.
FeatureFrame compute_features(const BarSeries& bars, FeatureProfile profile);

/// Counts every dated read made through a view. Reads at or after a view's
/// horizon are counted as violations and rejected.
class AccessAudit {
 public:
  void record(DayIndex day, bool is_label);
  void record_violation() { violations_.fetch_add(1, std::memory_order_relaxed); }

  std::uint64_t feature_reads() const { return feature_reads_.load(); }
  std::uint64_t label_reads() const { return label_reads_.load(); }
  std::uint64_t violations() const { return violations_.load(); }
  /// -1 when nothing was read.
  std::int64_t latest_feature_day() const { return latest_feature_day_.load(); }
  std::int64_t latest_label_day() const { return latest_label_day_.load(); }

 private:
  std::atomic<std::uint64_t> feature_reads_{0};
  std::atomic<std::uint64_t> label_reads_{0};
  std::atomic<std::uint64_t> violations_{0};
  std::atomic<std::int64_t> latest_feature_day_{-1};
  std::atomic<std::int64_t> latest_label_day_{-1};
};

/// Read access to a frame restricted to days before `horizon`.
class FeatureView {
 public:
  FeatureView(const FeatureFrame& frame)  // NOLINT: unrestricted view
      : frame_(&frame), horizon_(frame.end_day()) {}
  FeatureView(const FeatureFrame& frame, DayIndex horizon, AccessAudit* audit = nullptr)
      : frame_(&frame), horizon_(horizon), audit_(audit) {}

  const FeatureFrame& frame() const { return *frame_; }
  DayIndex horizon() const { return horizon_; }
  bool covers(DayIndex d) const { return d < horizon_ && frame_->covers(d); }
  /// Throws LookaheadError when d >= horizon.
  std::span<const double> row(DayIndex d) const;

 private:
  const FeatureFrame* frame_;
  DayIndex horizon_;
  AccessAudit* audit_ = nullptr;
};

/// Daily movement labels of one series; day 0 has no label.
struct LabelSeries {
  std::string symbol;
  std::vector<Movement> values;  // values[0] is unused

  static LabelSeries from_bars(const BarSeries& bars);
};

class LabelView {
 public:
  LabelView(const LabelSeries& labels)  // NOLINT: unrestricted view
      : labels_(&labels), horizon_(labels.values.size()) {}
  LabelView(const LabelSeries& labels, DayIndex horizon, AccessAudit* audit = nullptr)
      : labels_(&labels), horizon_(horizon), audit_(audit) {}

  const std::string& symbol() const { return labels_->symbol; }
  DayIndex horizon() const { return horizon_; }
  Movement at(DayIndex d) const;

 private:
  const LabelSeries* labels_;
  DayIndex horizon_;
  AccessAudit* audit_ = nullptr;
};

/// Train/validation split of target days; see rolling_windows.
struct WindowSplit {
  DayRange train;
  DayRange validation;
};

/// Validation = the `validation_len` trading days before `anchor`; train = the
/// `train_len` days before that. Throws WindowError when history is short.
WindowSplit rolling_windows(const Calendar& calendar, DayIndex anchor, std::size_t train_len,
                            std::size_t validation_len);

/// Supervised next-day samples: row k pairs features of day d - 1 with the
/// label of day d, for each target day d in `targets`.
struct Dataset {
  Eigen::MatrixXd X;
  std::vector<int> y;  // +1 / -1

  std::size_t size() const { return y.size(); }
  bool has_both_classes(std::size_t min_each = 1) const;
};

Dataset next_day_dataset(const FeatureView& features, const LabelView& labels, DayRange targets);

/// CLASSIC features and labels of one stock, as seen by a learner.
struct StockInputs {
  std::string symbol;
  FeatureView classic;
  LabelView labels;
};

}  // namespace netpred
