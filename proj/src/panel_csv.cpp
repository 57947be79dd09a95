#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "tgom/data_io.hpp"
#include "tgom/errors.hpp"
#include "tgom/util.hpp"

namespace tgom {

namespace {

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t p = 0; p < line.size(); ++p) {
    const char c = line[p];
    if (quoted) {
      if (c == '"' && p + 1 < line.size() && line[p + 1] == '"') {
        field += '"';
        ++p;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

struct Row {
  std::size_t line = 0;
  std::string id;
  std::string wave;
  std::int32_t interview = 0;
  std::int32_t dob = 0;
  std::vector<std::uint8_t> y;
};

const char* const kFixedColumns[] = {"id", "wave", "interview_date", "dob"};

}  // namespace

PanelDataset parse_panel(std::istream& in, const ParseOptions& options) {
  std::vector<ValidationIssue> issues;
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError({{1, "", "missing_header", "file is empty; expected a header row"}});
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 4 ||
      !std::equal(std::begin(kFixedColumns), std::end(kFixedColumns), header.begin())) {
    throw ValidationError(
        {{1, "", "bad_header", "header must start with id,wave,interview_date,dob"}});
  }
  const std::vector<std::string> items(header.begin() + 4, header.end());
  const std::size_t J = items.size();

  std::vector<Row> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      issues.push_back({line_no, "", "field_count",
                        "expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size())});
      continue;
    }
    for (auto& f : fields) f = trim(f);
    Row r;
    r.line = line_no;
    r.id = fields[0];
    r.wave = fields[1];
    bool ok = true;
    if (r.id.empty()) {
      issues.push_back({line_no, "id", "missing_id", "individual id is empty"});
      ok = false;
    }
    if (r.wave.empty()) {
      issues.push_back({line_no, "wave", "missing_wave", "wave label is empty"});
      ok = false;
    }
    try {
      r.interview = parse_iso_date(fields[2]);
    } catch (const std::invalid_argument& e) {
      issues.push_back({line_no, "interview_date", "bad_date", e.what()});
      ok = false;
    }
    if (fields[3].empty()) {
      issues.push_back({line_no, "dob", "missing_dob", "date of birth is missing"});
      ok = false;
    } else {
      try {
        r.dob = parse_iso_date(fields[3]);
      } catch (const std::invalid_argument& e) {
        issues.push_back({line_no, "dob", "bad_date", e.what()});
        ok = false;
      }
    }
    std::size_t present = 0;
    r.y.assign(J, 0);
    for (std::size_t j = 0; j < J; ++j) {
      const std::string& v = fields[4 + j];
      if (v.empty()) continue;
      ++present;
      if (v == "0" || v == "1") {
        r.y[j] = static_cast<std::uint8_t>(v[0] - '0');
      } else {
        issues.push_back({line_no, items[j], "non_binary", "response '" + v + "' is not 0 or 1"});
        ok = false;
      }
    }
    if (present == 0) continue;  // absent wave
    if (present != J) {
      issues.push_back({line_no, "", "partial_wave",
                        std::to_string(J - present) + " of " + std::to_string(J) +
                            " responses missing; a wave must be complete or absent"});
      ok = false;
    }
    const auto key = std::make_pair(r.id, r.wave);
    if (auto it = seen.find(key); it != seen.end()) {
      issues.push_back({line_no, "wave", "duplicate_wave",
                        "individual '" + r.id + "' wave '" + r.wave + "' already given on row " +
                            std::to_string(it->second)});
      ok = false;
    } else {
      seen.emplace(key, line_no);
    }
    if (ok) rows.push_back(std::move(r));
  }

  // Waves in order of their earliest interview date.
  std::map<std::string, std::int32_t> wave_first;
  for (const auto& r : rows) {
    auto [it, inserted] = wave_first.emplace(r.wave, r.interview);
    if (!inserted) it->second = std::min(it->second, r.interview);
  }
  std::vector<std::string> waves;
  for (const auto& [w, d] : wave_first) waves.push_back(w);
  std::stable_sort(waves.begin(), waves.end(), [&](const std::string& a, const std::string& b) {
    return wave_first[a] < wave_first[b];
  });
  std::unordered_map<std::string, std::size_t> wave_index;
  for (std::size_t t = 0; t < waves.size(); ++t) wave_index[waves[t]] = t;

  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> id_index;
  std::unordered_map<std::string, std::pair<std::int32_t, std::size_t>> dob_of;
  for (const auto& r : rows) {
    if (id_index.emplace(r.id, ids.size()).second) ids.push_back(r.id);
    auto [it, inserted] = dob_of.emplace(r.id, std::make_pair(r.dob, r.line));
    if (!inserted && it->second.first != r.dob) {
      issues.push_back({r.line, "dob", "inconsistent_dob",
                        "date of birth differs from row " + std::to_string(it->second.second)});
    }
  }

  PanelDataset d = make_empty_panel(ids.size(), J, waves.size());
  d.individual_ids = ids;
  d.item_labels = items;
  d.wave_labels = waves;
  d.age_offset = options.age_offset;
  for (std::size_t i = 0; i < ids.size(); ++i) d.dob[i] = dob_of[ids[i]].first;
  for (const auto& r : rows) {
    const std::size_t i = id_index[r.id];
    const std::size_t t = wave_index[r.wave];
    const std::size_t cell = i * d.n_waves + t;
    d.observed[cell] = 1;
    d.interview_day[cell] = r.interview;
    d.ages[cell] = static_cast<double>(r.interview - d.dob[i]) / kDaysPerYear - options.age_offset;
    std::copy(r.y.begin(), r.y.end(), d.outcomes.begin() + static_cast<std::ptrdiff_t>(cell * J));
  }
  std::unordered_map<std::string, std::size_t> first_line;
  for (const auto& r : rows) first_line.emplace(r.id, r.line);
  for (std::size_t i = 0; i < d.n_individuals; ++i) {
    double last = -INFINITY;
    for (std::size_t t = 0; t < d.n_waves; ++t) {
      if (!d.is_observed(i, t)) continue;
      if (d.age(i, t) <= last) {
        issues.push_back({first_line[ids[i]], "interview_date", "age_order",
                          "interviews of individual '" + ids[i] +
                              "' are not in increasing age order across waves"});
        break;
      }
      last = d.age(i, t);
    }
  }
  if (!issues.empty()) {
    std::stable_sort(issues.begin(), issues.end(),
                     [](const ValidationIssue& a, const ValidationIssue& b) { return a.row < b.row; });
    throw ValidationError(std::move(issues));
  }
  return d;
}

PanelDataset parse_panel_file(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open panel file " + path.string());
  return parse_panel(in, options);
}

void write_panel(const PanelDataset& data, std::ostream& out) {
  out << "id,wave,interview_date,dob";
  for (const auto& label : data.item_labels) out << ',' << csv_field(label);
  out << '\n';
  for (std::size_t i = 0; i < data.n_individuals; ++i) {
    for (std::size_t t = 0; t < data.n_waves; ++t) {
      if (!data.is_observed(i, t)) continue;
      out << csv_field(data.individual_ids[i]) << ',' << csv_field(data.wave_labels[t]) << ','
          << format_iso_date(data.interview_day[i * data.n_waves + t]) << ','
          << format_iso_date(data.dob[i]);
      for (std::size_t j = 0; j < data.n_items; ++j) out << ',' << data.y(i, j, t);
      out << '\n';
    }
  }
}

void write_panel_file(const PanelDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write panel file " + path.string());
  write_panel(data, out);
  if (!out) throw IoError("error while writing " + path.string());
}

CohortAssignment assign_cohorts(const PanelDataset& data, const CohortPartition& partition) {
  partition.validate();
  CohortAssignment a;
  const std::size_t C = partition.n_cohorts();
  a.cohort.resize(data.n_individuals);
  a.by_wave.assign(C, std::vector<std::size_t>(data.n_waves, 0));
  a.totals.assign(C, 0);
  for (std::size_t i = 0; i < data.n_individuals; ++i) {
    const std::size_t c = partition.cohort_of(data.dob[i]);
    a.cohort[i] = c;
    ++a.totals[c];
    for (std::size_t t = 0; t < data.n_waves; ++t) {
      if (data.is_observed(i, t)) ++a.by_wave[c][t];
    }
  }
  return a;
}

void write_cohort_table(const CohortAssignment& table, const PanelDataset& data,
                        const CohortPartition& partition, std::ostream& out) {
  out << "cohort,dob_from,dob_to";
  for (const auto& w : data.wave_labels) out << ',' << csv_field(w);
  out << ",individuals\n";
  for (std::size_t c = 0; c < table.totals.size(); ++c) {
    out << (c + 1) << ',' << (c == 0 ? "" : format_iso_date(partition.boundaries[c - 1])) << ','
        << (c + 1 == table.totals.size() ? "" : format_iso_date(partition.boundaries[c]));
    for (std::size_t n : table.by_wave[c]) out << ',' << n;
    out << ',' << table.totals[c] << '\n';
  }
}

}  // namespace tgom
