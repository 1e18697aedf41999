#include "kalium/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "kalium/error.hpp"

namespace kalium {
namespace {

constexpr std::string_view kPatientColumn = "patient_id";
constexpr std::string_view kTimestampColumn = "timestamp";
constexpr std::string_view kPotassiumColumn = "potassium_mM";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back(trim(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  fields.emplace_back(trim(current));
  return fields;
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

bool is_missing(std::string_view text) {
  text = trim(text);
  return text.empty() || text == "NA" || text == "NaN" || text == "null";
}

// Column lookup for a headered CSV. Throws ValidationError naming the first
// missing required column.
class Header {
 public:
  explicit Header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) index_.emplace(names[i], i);
  }
  std::size_t require(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ValidationError(fmt::format("missing CSV column '{}'", name));
    return it->second;
  }

 private:
  std::map<std::string, std::size_t> index_;
};

template <typename Row, typename ParseRow>
ParsedTable<Row> parse_table(std::istream& in, ParseRow&& parse_row) {
  ParsedTable<Row> table;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::vector<std::string>> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (!header) {
      header = std::move(fields);
      continue;
    }
    if (fields.size() != header->size()) {
      table.diagnostics.push_back(
          fmt::format("line {}: expected {} fields, found {}", line_no, header->size(), fields.size()));
      continue;
    }
    parse_row(Header(*header), fields, line_no, table);
  }
  if (!header) throw ValidationError("CSV input has no header row");
  return table;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}': file not found or unreadable", path));
  return in;
}

}  // namespace

std::string_view feature_name(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

Feature feature_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (kFeatureNames[i] == name) return static_cast<Feature>(i);
  }
  throw ValidationError(fmt::format("unknown feature '{}'", name));
}

std::string_view label_name(KLabel label) {
  switch (label) {
    case KLabel::Hypo: return "hypo";
    case KLabel::Normal: return "normal";
    case KLabel::Hyper: return "hyper";
  }
  return "unknown";
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  auto field = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    const char* first = text.data() + pos;
    const auto [ptr, ec] = std::from_chars(first, first + len, v);
    if (ec != std::errc{} || ptr != first + len) return std::nullopt;
    return v;
  };
  const auto y = field(0, 4), mo = field(5, 2), d = field(8, 2), h = field(11, 2), mi = field(14, 2),
             s = field(17, 2);
  if (!y || !mo || !d || !h || !mi || !s) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*mo)},
                                        std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok() || *h > 23 || *mi > 59 || *s > 59) return std::nullopt;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + *h * 3600 + *mi * 60 + *s;
}

std::string format_timestamp(Timestamp t) {
  const auto days = static_cast<int>(std::floor(static_cast<double>(t) / 86400.0));
  const Timestamp secs = t - static_cast<Timestamp>(days) * 86400;
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), secs / 3600,
                     (secs % 3600) / 60, secs % 60);
}

bool EcgRecord::complete() const {
  return std::all_of(features.begin(), features.end(), [](const auto& v) { return v.has_value(); });
}

ParsedTable<EcgRecord> parse_ecg_csv(std::istream& in) {
  return parse_table<EcgRecord>(in, [](const Header& header, const std::vector<std::string>& fields,
                                       std::size_t line_no, ParsedTable<EcgRecord>& table) {
    EcgRecord rec;
    rec.patient_id = fields[header.require(kPatientColumn)];
    if (rec.patient_id.empty()) {
      table.diagnostics.push_back(fmt::format("line {}: empty patient_id", line_no));
      return;
    }
    const auto ts = parse_timestamp(fields[header.require(kTimestampColumn)]);
    if (!ts) {
      table.diagnostics.push_back(fmt::format("line {}: malformed timestamp", line_no));
      return;
    }
    rec.timestamp = *ts;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const std::string& cell = fields[header.require(kFeatureNames[f])];
      if (is_missing(cell)) continue;
      const auto value = parse_number(cell);
      if (!value) {
        table.diagnostics.push_back(fmt::format("line {}: {} is not a number", line_no, kFeatureNames[f]));
        return;
      }
      const auto feature = static_cast<Feature>(f);
      const bool interval = f <= static_cast<std::size_t>(Feature::Qtc);
      if (interval && *value <= 0.0) {
        table.diagnostics.push_back(fmt::format("line {}: {} must be positive", line_no, kFeatureNames[f]));
        return;
      }
      if (feature == Feature::Acci && (*value < 0.0 || *value != std::floor(*value))) {
        table.diagnostics.push_back(fmt::format("line {}: acci must be a non-negative integer", line_no));
        return;
      }
      rec.features[f] = *value;
    }
    table.rows.push_back(std::move(rec));
  });
}

ParsedTable<LabRecord> parse_labs_csv(std::istream& in) {
  return parse_table<LabRecord>(in, [](const Header& header, const std::vector<std::string>& fields,
                                       std::size_t line_no, ParsedTable<LabRecord>& table) {
    LabRecord rec;
    rec.patient_id = fields[header.require(kPatientColumn)];
    if (rec.patient_id.empty()) {
      table.diagnostics.push_back(fmt::format("line {}: empty patient_id", line_no));
      return;
    }
    const auto ts = parse_timestamp(fields[header.require(kTimestampColumn)]);
    if (!ts) {
      table.diagnostics.push_back(fmt::format("line {}: malformed timestamp", line_no));
      return;
    }
    rec.timestamp = *ts;
    const auto k = parse_number(fields[header.require(kPotassiumColumn)]);
    if (!k || *k <= 0.0) {
      table.diagnostics.push_back(fmt::format("line {}: potassium must be a positive number", line_no));
      return;
    }
    if (*k < 1.0 || *k > 10.0) {
      table.diagnostics.push_back(fmt::format("line {}: potassium {} mM outside plausible range [1, 10]", line_no, *k));
    }
    rec.potassium_mm = *k;
    table.rows.push_back(std::move(rec));
  });
}

ParsedTable<EcgRecord> read_ecg_csv(const std::string& path) {
  auto in = open_input(path);
  return parse_ecg_csv(in);
}

ParsedTable<LabRecord> read_labs_csv(const std::string& path) {
  auto in = open_input(path);
  return parse_labs_csv(in);
}

std::vector<std::vector<double>> parse_numeric_csv(std::istream& in, const std::vector<std::string>& columns) {
  std::vector<std::vector<double>> rows;
  std::optional<std::vector<std::size_t>> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (!index) {
      const Header header(fields);
      index.emplace();
      for (const auto& name : columns) index->push_back(header.require(name));
      continue;
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::size_t at = (*index)[c];
      const auto value = at < fields.size() ? parse_number(fields[at]) : std::nullopt;
      if (!value) throw ValidationError(fmt::format("line {}: column '{}' is not a number", line_no, columns[c]));
      row.push_back(*value);
    }
    rows.push_back(std::move(row));
  }
  if (!index) throw ValidationError("CSV input has no header row");
  return rows;
}

std::string write_ecg_csv(const std::vector<EcgRecord>& ecgs) {
  std::string out = "patient_id,timestamp";
  for (const auto name : kFeatureNames) out += fmt::format(",{}", name);
  out += '\n';
  for (const auto& rec : ecgs) {
    out += fmt::format("{},{}", rec.patient_id, format_timestamp(rec.timestamp));
    for (const auto& v : rec.features) out += v ? fmt::format(",{}", *v) : std::string(",");
    out += '\n';
  }
  return out;
}

std::string write_labs_csv(const std::vector<LabRecord>& labs) {
  std::string out = "patient_id,timestamp,potassium_mM\n";
  for (const auto& rec : labs) {
    out += fmt::format("{},{},{}\n", rec.patient_id, format_timestamp(rec.timestamp), rec.potassium_mm);
  }
  return out;
}

KLabel label_potassium(double k_mm) {
  if (!std::isfinite(k_mm)) throw ValidationError("potassium value must be finite");
  if (k_mm <= 0.0) throw ValidationError(fmt::format("potassium value must be positive, got {}", k_mm));
  if (k_mm < 3.5) return KLabel::Hypo;
  if (k_mm <= 5.0) return KLabel::Normal;
  return KLabel::Hyper;
}

std::vector<CohortSample> join_cohort(const std::vector<EcgRecord>& ecgs, const std::vector<LabRecord>& labs,
                                      std::int64_t window_s) {
  if (window_s < 0) throw ValidationError("join window must be non-negative");
  std::map<std::string, std::vector<const EcgRecord*>> by_patient;
  for (const auto& ecg : ecgs) {
    if (ecg.complete()) by_patient[ecg.patient_id].push_back(&ecg);
  }

  // key: (|dt|, lab time, ecg time)
  using Key = std::tuple<std::int64_t, Timestamp, Timestamp>;
  std::map<std::string, std::pair<Key, CohortSample>> best;
  for (const auto& lab : labs) {
    const auto it = by_patient.find(lab.patient_id);
    if (it == by_patient.end()) continue;
    for (const EcgRecord* ecg : it->second) {
      const std::int64_t dt = ecg->timestamp - lab.timestamp;
      const std::int64_t adt = dt < 0 ? -dt : dt;
      if (adt > window_s) continue;
      const Key key{adt, lab.timestamp, ecg->timestamp};
      auto found = best.find(lab.patient_id);
      if (found != best.end() && !(key < found->second.first)) continue;
      CohortSample s;
      s.patient_id = lab.patient_id;
      for (std::size_t f = 0; f < kFeatureCount; ++f) s.features[f] = *ecg->features[f];
      s.potassium_mm = lab.potassium_mm;
      s.label = label_potassium(lab.potassium_mm);
      s.delta_t_s = dt;
      s.ecg_time = ecg->timestamp;
      s.lab_time = lab.timestamp;
      best.insert_or_assign(lab.patient_id, std::make_pair(key, std::move(s)));
    }
  }

  std::vector<CohortSample> out;
  out.reserve(best.size());
  for (auto& [id, entry] : best) out.push_back(std::move(entry.second));
  if (out.empty()) throw ValidationError("cohort is empty: no complete ECG within the window of a potassium value");
  return out;
}

std::array<std::size_t, kLabelCount> class_counts(const std::vector<CohortSample>& samples) {
  std::array<std::size_t, kLabelCount> counts{};
  for (const auto& s : samples) ++counts[static_cast<std::size_t>(s.label)];
  return counts;
}

std::string write_cohort_csv(const std::vector<CohortSample>& samples) {
  std::string out = "patient_id,ecg_time,lab_time,delta_t_s";
  for (const auto name : kFeatureNames) out += fmt::format(",{}", name);
  out += ",potassium_mM,label\n";
  for (const auto& s : samples) {
    out += fmt::format("{},{},{},{}", s.patient_id, format_timestamp(s.ecg_time), format_timestamp(s.lab_time),
                       s.delta_t_s);
    for (const double v : s.features) out += fmt::format(",{}", v);
    out += fmt::format(",{},{}\n", s.potassium_mm, label_name(s.label));
  }
  return out;
}

FeatureReport rank_features(const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns,
                            const std::vector<KLabel>& labels, const std::vector<double>& potassium, double alpha) {
  if (names.size() != columns.size()) throw ValidationError("feature names and columns differ in count");
  if (labels.size() != potassium.size()) throw ValidationError("labels and potassium differ in length");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("significance level must lie in (0, 1)");

  FeatureReport report;
  report.alpha = alpha;
  for (const auto label : labels) ++report.class_counts[static_cast<std::size_t>(label)];
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    if (report.class_counts[c] > 0) {
      present.push_back(c);
    } else {
      report.warnings.push_back(
          fmt::format("class '{}' has no samples and is left out of the test", label_name(static_cast<KLabel>(c))));
    }
  }
  if (present.size() < 2) throw ValidationError("feature selection needs at least two potassium classes");

  for (std::size_t f = 0; f < names.size(); ++f) {
    const auto& column = columns[f];
    if (column.size() != labels.size()) throw ValidationError(fmt::format("column '{}' has wrong length", names[f]));
    std::vector<std::vector<double>> groups(present.size());
    for (std::size_t i = 0; i < column.size(); ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      const auto slot = static_cast<std::size_t>(std::find(present.begin(), present.end(), c) - present.begin());
      groups[slot].push_back(column[i]);
    }
    FeatureRanking entry;
    entry.name = names[f];
    entry.kw = kruskal_wallis(groups);
    entry.significant = entry.kw.p < alpha;
    if (entry.significant) entry.pearson_r = pearson_r(column, potassium);
    report.ranking.push_back(std::move(entry));
  }
  std::sort(report.ranking.begin(), report.ranking.end(), [](const FeatureRanking& a, const FeatureRanking& b) {
    if (a.kw.h != b.kw.h) return a.kw.h > b.kw.h;
    return a.name < b.name;
  });
  return report;
}

FeatureReport select_features(const std::vector<CohortSample>& samples, double alpha) {
  std::vector<std::string> names(kFeatureNames.begin(), kFeatureNames.end());
  std::vector<std::vector<double>> columns(kFeatureCount);
  std::vector<KLabel> labels;
  std::vector<double> potassium;
  for (const auto& s : samples) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) columns[f].push_back(s.features[f]);
    labels.push_back(s.label);
    potassium.push_back(s.potassium_mm);
  }
  return rank_features(names, columns, labels, potassium, alpha);
}

SyntheticData generate_synthetic(std::size_t n, double noise_sd, std::uint64_t seed) {
  if (n < 10) throw ValidationError("synthetic cohort needs at least 10 patients");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ValidationError("noise_sd must be finite and >= 0");

  // Largest-remainder apportionment of 10:27:5.
  constexpr std::array<double, kLabelCount> weights = {10.0, 27.0, 5.0};
  std::array<std::size_t, kLabelCount> counts{};
  std::array<double, kLabelCount> remainders{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    const double exact = static_cast<double>(n) * weights[c] / 42.0;
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    remainders[c] = exact - std::floor(exact);
    assigned += counts[c];
  }
  while (assigned < n) {
    const auto c = static_cast<std::size_t>(std::max_element(remainders.begin(), remainders.end()) - remainders.begin());
    ++counts[c];
    remainders[c] = -1.0;
    ++assigned;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gauss = [&](double mean, double sd) { return mean + sd * normal(rng); };

  // Per class: normal around a typical value, redrawn until it lands inside
  // the class interval.
  struct ClassShape {
    double mean, sd, lo, hi;
  };
  constexpr std::array<ClassShape, kLabelCount> shapes = {{
      {3.25, 0.15, 2.8, 3.5},  // [2.8, 3.5)
      {4.2, 0.35, 3.5, 5.0},   // [3.5, 5.0]
      {5.5, 0.3, 5.0, 6.2},    // (5.0, 6.2]
  }};
  std::vector<double> potassium;
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    const ClassShape& shape = shapes[c];
    for (std::size_t i = 0; i < counts[c]; ++i) {
      double k = 0.0;
      do {
        k = gauss(shape.mean, shape.sd);
      } while (!(k >= shape.lo && k <= shape.hi) || label_potassium(k) != static_cast<KLabel>(c));
      potassium.push_back(k);
    }
  }
  std::shuffle(potassium.begin(), potassium.end(), rng);

  // 2010-01-01T00:00:00
  constexpr Timestamp base = 1262304000;
  SyntheticData data;
  auto random_ecg = [&](const std::string& id, Timestamp t, double k, bool informative) {
    EcgRecord ecg;
    ecg.patient_id = id;
    ecg.timestamp = t;
    auto set = [&](Feature f, double v) { ecg.features[static_cast<std::size_t>(f)] = std::round(v); };
    set(Feature::Rr, std::max(300.0, gauss(850.0, 150.0)));
    set(Feature::Pr, std::max(60.0, gauss(160.0, 25.0)));
    set(Feature::Qrs, std::max(50.0, gauss(95.0, 12.0)));
    set(Feature::Qt, std::max(200.0, gauss(390.0, 35.0)));
    set(Feature::Qtc, std::max(250.0, gauss(440.0, 30.0)));
    set(Feature::PAxis, gauss(50.0, 25.0));
    set(Feature::QrsAxis, gauss(35.0, 40.0));
    const double t_axis = informative ? 40.0 + 30.0 * (k - 4.2) + noise_sd * normal(rng) : gauss(40.0, 40.0);
    ecg.features[static_cast<std::size_t>(Feature::TAxis)] = t_axis;
    set(Feature::Acci, std::floor(10.0 * unit(rng)));
    return ecg;
  };

  for (std::size_t p = 0; p < n; ++p) {
    const std::string id = fmt::format("P{:04}", p + 1);
    const Timestamp lab_time = base + static_cast<Timestamp>(p) * 86400 + 3600;
    const double k = potassium[p];
    data.labs.push_back({id, lab_time, k});

    const auto offset = static_cast<std::int64_t>(std::floor(601.0 * unit(rng))) - 300;  // [-300, 300]
    const auto far = static_cast<std::int64_t>(301 + std::floor(3000.0 * unit(rng)));
    const Timestamp distractor = unit(rng) < 0.5 ? lab_time - far : lab_time + far;
    if (distractor < lab_time + offset) {
      data.ecgs.push_back(random_ecg(id, distractor, k, false));
      data.ecgs.push_back(random_ecg(id, lab_time + offset, k, true));
    } else {
      data.ecgs.push_back(random_ecg(id, lab_time + offset, k, true));
      data.ecgs.push_back(random_ecg(id, distractor, k, false));
    }
  }
  return data;
}

}  // namespace kalium
