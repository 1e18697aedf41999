#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kalium/stats.hpp"

namespace kalium {

enum class Feature : std::size_t { Rr, Pr, Qrs, Qt, Qtc, PAxis, QrsAxis, TAxis, Acci };
inline constexpr std::size_t kFeatureCount = 9;

/// CSV column names, in Feature order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "rr_ms", "pr_ms", "qrs_ms", "qt_ms", "qtc_ms", "p_axis_deg", "qrs_axis_deg", "t_axis_deg", "acci"};

std::string_view feature_name(Feature f);
/// Throws ValidationError for an unknown column name.
Feature feature_from_name(std::string_view name);

enum class KLabel : int { Hypo = 0, Normal = 1, Hyper = 2 };
inline constexpr std::size_t kLabelCount = 3;
std::string_view label_name(KLabel label);

/// Seconds since 1970-01-01T00:00:00 (UTC, no leap seconds).
using Timestamp = std::int64_t;

/// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional trailing 'Z'; a space may
/// replace the 'T'. Returns nullopt if the text is not such a timestamp.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

struct EcgRecord {
  std::string patient_id;
  Timestamp timestamp = 0;
  std::array<std::optional<double>, kFeatureCount> features{};

  std::optional<double> operator[](Feature f) const { return features[static_cast<std::size_t>(f)]; }
  bool complete() const;
};

struct LabRecord {
  std::string patient_id;
  Timestamp timestamp = 0;
  double potassium_mm = 0.0;
};

struct CohortSample {
  std::string patient_id;
  std::array<double, kFeatureCount> features{};
  double potassium_mm = 0.0;
  KLabel label = KLabel::Normal;
  std::int64_t delta_t_s = 0;  // ECG time minus lab time
  Timestamp ecg_time = 0;
  Timestamp lab_time = 0;

  double operator[](Feature f) const { return features[static_cast<std::size_t>(f)]; }
};

template <typename Row>
struct ParsedTable {
  std::vector<Row> rows;
  std::vector<std::string> diagnostics;  // "line N: ..." for skipped or suspicious rows
};

ParsedTable<EcgRecord> parse_ecg_csv(std::istream& in);
ParsedTable<LabRecord> parse_labs_csv(std::istream& in);
/// Throws IoError when the file cannot be opened.
ParsedTable<EcgRecord> read_ecg_csv(const std::string& path);
ParsedTable<LabRecord> read_labs_csv(const std::string& path);

/// Rows of the named numeric columns from a headered CSV. Throws
/// ValidationError naming a missing column or an unparsable cell.
std::vector<std::vector<double>> parse_numeric_csv(std::istream& in, const std::vector<std::string>& columns);

std::string write_ecg_csv(const std::vector<EcgRecord>& ecgs);
std::string write_labs_csv(const std::vector<LabRecord>& labs);

/// < 3.5 Hypo, [3.5, 5.0] Normal, > 5.0 Hyper. Throws for k <= 0 or non-finite.
KLabel label_potassium(double k_mm);

/// One sample per patient: the complete ECG / lab pair with the smallest
/// |delta t| inside the inclusive window, ties to the earlier lab and then
/// the earlier ECG. Output is ordered by patient id. Throws ValidationError
/// on an empty result.
std::vector<CohortSample> join_cohort(const std::vector<EcgRecord>& ecgs, const std::vector<LabRecord>& labs,
                                      std::int64_t window_s = 300);

std::array<std::size_t, kLabelCount> class_counts(const std::vector<CohortSample>& samples);

std::string write_cohort_csv(const std::vector<CohortSample>& samples);

struct FeatureRanking {
  std::string name;
  KwResult kw;
  bool significant = false;
  std::optional<double> pearson_r;  // vs potassium, significant features only
};

struct FeatureReport {
  std::vector<FeatureRanking> ranking;  // descending H, ties by name
  double alpha = 0.05;
  std::array<std::size_t, kLabelCount> class_counts{};
  std::vector<std::string> warnings;
};

/// Kruskal-Wallis across the label groups for each named column.
FeatureReport rank_features(const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns,
                            const std::vector<KLabel>& labels, const std::vector<double>& potassium,
                            double alpha = 0.05);

FeatureReport select_features(const std::vector<CohortSample>& samples, double alpha = 0.05);

struct SyntheticData {
  std::vector<EcgRecord> ecgs;
  std::vector<LabRecord> labs;
};

/// Desk-scale cohort: potassium drawn per class in 10:27:5 proportion, T axis
/// affine in potassium plus N(0, noise_sd) degrees, all other features
/// label-independent. Each patient gets one ECG inside the join window and
/// one distractor outside it.
SyntheticData generate_synthetic(std::size_t n, double noise_sd, std::uint64_t seed);

}  // namespace kalium
