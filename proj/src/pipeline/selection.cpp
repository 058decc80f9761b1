#include "xflex/pipeline/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <sstream>

#include "xflex/errors.hpp"
#include "xflex/parallel.hpp"
#include "xflex/scoring.hpp"

namespace xflex::pipeline {

namespace {

constexpr double kTie = 1e-12;

std::array<double, 3> as_array(const BandProbabilities& p) { return {p.p_green, p.p_amber, p.p_red}; }

}  // namespace

std::string Candidate::label() const {
  std::ostringstream os;
  os << "alpha_T=" << alpha_T << " tail=[";
  const auto names = tail.covariates();
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << "]";
  return os.str();
}

nlohmann::json SelectionResult::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : ledger) {
    nlohmann::json r{{"label", s.candidate.label()},
                     {"alpha_T", s.candidate.alpha_T},
                     {"tail", formula_to_json(s.candidate.tail)},
                     {"disqualified", s.disqualified}};
    if (s.disqualified) {
      r["reason"] = s.reason;
    } else {
      nlohmann::json skill = nlohmann::json::array();
      nlohmann::json auc = nlohmann::json::array();
      for (int b = 0; b < 3; ++b) {
        skill.push_back(s.skill[b] ? nlohmann::json(*s.skill[b]) : nlohmann::json());
        auc.push_back(s.auc[b] ? nlohmann::json(*s.auc[b]) : nlohmann::json());
      }
      r["brier"] = s.brier;
      r["brier_reference"] = s.brier_ref;
      r["brier_skill"] = skill;
      r["auc"] = auc;
      r["mean_brier_skill"] = s.mean_skill;
      r["mean_auc"] = s.mean_auc;
    }
    rows.push_back(std::move(r));
  }
  return {{"chosen", ledger.at(chosen).candidate.label()},
          {"chosen_alpha_T", ledger.at(chosen).candidate.alpha_T},
          {"reference", "climatology"},
          {"candidates", rows}};
}

std::size_t choose_candidate(const std::vector<CandidateScore>& scores) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    if (s.disqualified) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = scores[*best];
    if (s.mean_skill > b.mean_skill + kTie ||
        (std::abs(s.mean_skill - b.mean_skill) <= kTie && s.mean_auc > b.mean_auc + kTie)) {
      best = i;
    }
  }
  if (!best) throw ValidationError("every model candidate was disqualified");
  return *best;
}

std::vector<Candidate> candidates_from(const PipelineConfig& config) {
  std::vector<Formula> tails = config.candidate_tails;
  if (tails.empty()) tails.push_back(config.tail);
  std::vector<double> alphas = config.candidate_alphas;
  if (alphas.empty()) alphas.push_back(config.alpha_T);
  std::vector<Candidate> out;
  for (double a : alphas) {
    for (const auto& t : tails) out.push_back(Candidate{a, t});
  }
  return out;
}

SelectionResult select_model(const TrainingSet& data, const FoldPlan& folds,
                             const PipelineConfig& config, const BandSpec& bands,
                             const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw ValidationError("no model candidates to select from");
  const std::size_t n = data.frame.size();
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = folds.fold_of(data.dates[i]);
    if (!f) throw ValidationError("fold plan does not cover " + format_date(data.dates[i]));
    fold_of[i] = *f;
  }
  std::vector<int> observed(n);
  for (std::size_t i = 0; i < n; ++i) {
    observed[i] = static_cast<int>(observed_band(data.frame.counts[i], bands));
  }

  // Climatology reference: band frequencies of each training fold.
  std::vector<std::array<double, 3>> climatology(n);
  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    std::array<double, 3> freq{};
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) continue;
      freq[static_cast<std::size_t>(observed[i])] += 1.0;
      m += 1.0;
    }
    if (m > 0.0) {
      for (double& v : freq) v /= m;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) climatology[i] = freq;
    }
  }

  SelectionResult result;
  result.ledger.resize(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    CandidateScore& score = result.ledger[c];
    score.candidate = candidates[c];
    std::vector<std::array<double, 3>> probs(n);
    std::vector<bool> covered(n, false);
    for (std::size_t f = 0; f < folds.folds.size(); ++f) {
      std::vector<std::size_t> train, test;
      for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
      if (test.empty() || train.empty()) continue;
      TrainingSet tr;
      tr.district = data.district;
      tr.frame = data.frame.subset(train);
      for (std::size_t i : train) tr.dates.push_back(data.dates[i]);
      try {
        const ModelBundle b = fit_bundle(tr, config, bands, candidates[c].alpha_T, candidates[c].tail);
        for (std::size_t i : test) {
          probs[i] = as_array(band_probs(b.predict(data.frame.row(i)), bands));
          covered[i] = true;
        }
      } catch (const std::exception& e) {
        score.disqualified = true;
        score.reason = "fold " + folds.folds[f].label + ": " + e.what();
        return;
      }
    }
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!covered[i]) continue;
      ++m;
      for (std::size_t b = 0; b < 3; ++b) {
        const bool hit = observed[i] == static_cast<int>(b);
        score.brier[b] += brier(std::clamp(probs[i][b], 0.0, 1.0), hit);
        score.brier_ref[b] += brier(climatology[i][b], hit);
      }
    }
    if (m == 0) {
      score.disqualified = true;
      score.reason = "no out-of-fold rows";
      return;
    }
    double skill_sum = 0.0, auc_sum = 0.0;
    int skill_n = 0, auc_n = 0;
    for (std::size_t b = 0; b < 3; ++b) {
      score.brier[b] /= static_cast<double>(m);
      score.brier_ref[b] /= static_cast<double>(m);
      score.skill[b] = brier_skill(score.brier[b], score.brier_ref[b]);
      std::vector<double> s;
      std::unique_ptr<bool[]> lab(new bool[m]);
      std::size_t k = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!covered[i]) continue;
        s.push_back(probs[i][b]);
        lab[k++] = observed[i] == static_cast<int>(b);
      }
      score.auc[b] = auc(s, std::span<const bool>(lab.get(), m));
      if (score.skill[b]) {
        skill_sum += *score.skill[b];
        ++skill_n;
      }
      if (score.auc[b]) {
        // Improvement over the constant climatology forecast (AUC 0.5).
        auc_sum += *score.auc[b] - 0.5;
        ++auc_n;
      }
    }
    score.mean_skill = skill_n > 0 ? skill_sum / skill_n : -std::numeric_limits<double>::infinity();
    score.mean_auc = auc_n > 0 ? auc_sum / auc_n : 0.0;
  });
  result.chosen = choose_candidate(result.ledger);
  return result;
}

}  // namespace xflex::pipeline
