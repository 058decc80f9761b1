#pragma once

// Synthetic district data for trying the pipeline end to end. Counts follow a
// discrete gamma bulk with a discrete GP tail whose scales depend on wind and
// precipitation, so the default model class contains the generating law.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xflex/banding.hpp"
#include "xflex/pipeline/bundle.hpp"
#include "xflex/pipeline/io.hpp"

namespace xflex::pipeline {

struct DemoOptions {
  std::size_t districts = 3;
  Date start = std::chrono::year{2016} / std::chrono::April / 1;
  Date end = std::chrono::year{2024} / std::chrono::March / 31;
  /// First date with NWP rows; default is two years before `end`.
  std::optional<Date> nwp_from;
  std::vector<int> leads{0, 24, 72, 120};
  std::size_t members = 50;  ///< EPS members, in addition to HRES
  std::uint64_t seed = 1;
};

struct DemoData {
  std::vector<FaultRow> faults;
  std::vector<WeatherRow> weather;
  std::map<std::string, BandSpec> bands;
  PipelineConfig config;
};

DemoData make_demo(const DemoOptions& options = {});
/// faults.csv, weather.csv, bands.json and config.json.
void write_demo(const DemoData& demo, const std::string& dir);

}  // namespace xflex::pipeline
