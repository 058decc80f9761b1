#pragma once

// Red/Amber/Green fault bands. Green covers counts <= tau_AG, Amber covers
// tau_AG < counts <= tau_RA, Red covers counts > tau_RA.

#include <string>

#include "xflex/splice.hpp"

namespace xflex {

struct BandSpec {
  int tau_AG = 5;
  int tau_RA = 15;
  std::string district;
  int resolution_hours = 24;

  void validate() const;
};

struct BandProbabilities {
  double p_green = 0.0;
  double p_amber = 0.0;
  double p_red = 0.0;
};

enum class Band { Green, Amber, Red };

char band_letter(Band b);
Band band_from_letter(char c);
/// Band that an observed count falls into.
Band observed_band(std::int64_t count, const BandSpec& spec);

BandProbabilities band_probs(const CountDistribution& dist, const BandSpec& spec);

/// Green if p_green > 0.8; else Red if p_red > 0.2; else Amber if
/// p_amber > p_red; otherwise the modal band, ties going to the more severe.
Band assign_band(const BandProbabilities& p);

}  // namespace xflex
