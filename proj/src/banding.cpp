#include "xflex/banding.hpp"

#include <algorithm>

#include "xflex/errors.hpp"

namespace xflex {

void BandSpec::validate() const {
  if (!(0 < tau_AG && tau_AG < tau_RA)) {
    throw ValidationError("band thresholds need 0 < tau_AG < tau_RA (district '" + district + "')");
  }
}

char band_letter(Band b) {
  switch (b) {
    case Band::Green:
      return 'G';
    case Band::Amber:
      return 'A';
    case Band::Red:
      return 'R';
  }
  return '?';
}

Band band_from_letter(char c) {
  switch (c) {
    case 'G':
      return Band::Green;
    case 'A':
      return Band::Amber;
    case 'R':
      return Band::Red;
    default:
      throw ValidationError(std::string("unknown band letter '") + c + "'");
  }
}

Band observed_band(std::int64_t count, const BandSpec& spec) {
  if (count <= spec.tau_AG) return Band::Green;
  if (count <= spec.tau_RA) return Band::Amber;
  return Band::Red;
}

BandProbabilities band_probs(const CountDistribution& dist, const BandSpec& spec) {
  spec.validate();
  const double f_ag = std::clamp(dist.cdf(spec.tau_AG), 0.0, 1.0);
  const double f_ra = std::clamp(dist.cdf(spec.tau_RA), f_ag, 1.0);
  return {f_ag, f_ra - f_ag, 1.0 - f_ra};
}

Band assign_band(const BandProbabilities& p) {
  if (p.p_green > 0.8) return Band::Green;
  if (p.p_red > 0.2) return Band::Red;
  if (p.p_amber > p.p_red) return Band::Amber;
  // Modal band; >= keeps the more severe band on ties.
  if (p.p_red >= p.p_amber && p.p_red >= p.p_green) return Band::Red;
  if (p.p_amber >= p.p_green) return Band::Amber;
  return Band::Green;
}

}  // namespace xflex
