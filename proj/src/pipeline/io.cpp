#include "xflex/pipeline/io.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "xflex/csv.hpp"
#include "xflex/errors.hpp"

namespace xflex::pipeline {

namespace {

const std::vector<std::string> kKeyColumns{"district", "date", "source", "lead_h"};

}  // namespace

Date parse_date(const std::string& text) {
  int y = 0, m = 0, d = 0;
  char tail = 0;
  if (text.size() != 10 || std::sscanf(text.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &tail) != 3 ||
      text[4] != '-' || text[7] != '-') {
    throw ValidationError("invalid ISO date '" + text + "'");
  }
  const Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw ValidationError("invalid calendar date '" + text + "'");
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

int member_id(const std::string& source) {
  if (source == "reanalysis") return -1;
  if (source == "hres") return 0;
  if (source.size() == 3 && source[0] == 'm' && std::isdigit(static_cast<unsigned char>(source[1])) &&
      std::isdigit(static_cast<unsigned char>(source[2]))) {
    const int id = (source[1] - '0') * 10 + (source[2] - '0');
    if (id >= 1 && id <= 50) return id;
  }
  throw ValidationError("unknown weather source '" + source + "'");
}

bool is_valid_source(const std::string& source) {
  try {
    member_id(source);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

std::vector<FaultRow> load_faults(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"district", "date", "count"}) {
    throw ValidationError(path + ": expected header district,date,count");
  }
  std::vector<FaultRow> rows;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    FaultRow row;
    row.district = cells[0];
    if (row.district.empty()) throw ValidationError(where + ": empty district");
    row.date = parse_date(cells[1]);
    row.count = parse_int(cells[2], where);
    if (row.count < 0) throw ValidationError(where + ": negative count " + cells[2]);
    if (!seen.emplace(row.district, cells[1]).second) {
      throw ValidationError(where + ": duplicate key (" + row.district + ", " + cells[1] + ")");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<WeatherRow> load_weather(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 4 ||
      !std::equal(kKeyColumns.begin(), kKeyColumns.end(), t.header.begin())) {
    throw ValidationError(path + ": expected header district,date,source,lead_h,<covariates>");
  }
  std::vector<WeatherRow> rows;
  std::set<std::tuple<std::string, std::string, std::string, int>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    WeatherRow row;
    row.district = cells[0];
    row.date = parse_date(cells[1]);
    row.source = cells[2];
    if (!is_valid_source(row.source)) throw ValidationError(where + ": unknown source '" + row.source + "'");
    row.lead_hours = static_cast<int>(parse_int(cells[3], where));
    if (row.lead_hours < 0) throw ValidationError(where + ": negative lead time");
    for (std::size_t c = 4; c < cells.size(); ++c) {
      // Empty cells mean "not available"; training joins reject them later.
      if (!cells[c].empty()) row.covariates[t.header[c]] = parse_double(cells[c], where);
    }
    if (!seen.emplace(row.district, cells[1], row.source, row.lead_hours).second) {
      throw ValidationError(where + ": duplicate key (" + row.district + ", " + cells[1] + ", " +
                            row.source + ", " + cells[3] + ")");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

TrainingSet join_training(const std::vector<FaultRow>& faults,
                          const std::vector<WeatherRow>& weather, const std::string& district,
                          const std::vector<std::string>& covariates) {
  std::map<std::chrono::sys_days, const WeatherRow*> reanalysis;
  for (const auto& w : weather) {
    if (w.district == district && w.source == "reanalysis") reanalysis[std::chrono::sys_days(w.date)] = &w;
  }
  std::vector<const FaultRow*> rows;
  for (const auto& f : faults) {
    if (f.district == district) rows.push_back(&f);
  }
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->date < b->date; });

  TrainingSet out;
  out.district = district;
  for (const auto& name : covariates) out.frame.columns[name];
  for (const FaultRow* f : rows) {
    const auto it = reanalysis.find(std::chrono::sys_days(f->date));
    if (it == reanalysis.end()) continue;  // no weather that day: not a training row
    for (const auto& name : covariates) {
      const auto c = it->second->covariates.find(name);
      if (c == it->second->covariates.end()) {
        throw ValidationError("training row (" + district + ", " + format_date(f->date) +
                              ") is missing covariate '" + name + "'");
      }
      out.frame.columns[name].push_back(c->second);
    }
    out.frame.counts.push_back(f->count);
    out.dates.push_back(f->date);
  }
  if (out.frame.size() == 0) throw ValidationError("no training rows for district '" + district + "'");
  return out;
}

std::vector<std::string> districts(const std::vector<FaultRow>& faults) {
  std::set<std::string> s;
  for (const auto& f : faults) s.insert(f.district);
  return {s.begin(), s.end()};
}

}  // namespace xflex::pipeline
