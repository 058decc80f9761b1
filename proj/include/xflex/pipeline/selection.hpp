#pragma once

// Cross-validated choice of the transition level and the tail covariate set.
// Candidates are ranked by the mean Brier skill over the three bands; the mean
// AUC only separates candidates whose Brier skill ties.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xflex/pipeline/bundle.hpp"
#include "xflex/pipeline/folds.hpp"

namespace xflex::pipeline {

struct Candidate {
  double alpha_T = 0.9;
  Formula tail;
  std::string label() const;
};

struct CandidateScore {
  Candidate candidate;
  bool disqualified = false;
  std::string reason;
  std::array<double, 3> brier{};      ///< out-of-fold mean BS, green/amber/red
  std::array<double, 3> brier_ref{};  ///< climatology reference
  std::array<std::optional<double>, 3> skill{};
  std::array<std::optional<double>, 3> auc{};
  double mean_skill = 0.0;
  double mean_auc = 0.0;
};

struct SelectionResult {
  std::size_t chosen = 0;
  std::vector<CandidateScore> ledger;
  const Candidate& winner() const { return ledger.at(chosen).candidate; }
  nlohmann::json to_json() const;
};

/// Index of the winner among qualified candidates. Throws ValidationError when
/// every candidate is disqualified.
std::size_t choose_candidate(const std::vector<CandidateScore>& scores);

/// Every (alpha_T, tail set) pair from the config.
std::vector<Candidate> candidates_from(const PipelineConfig& config);

SelectionResult select_model(const TrainingSet& data, const FoldPlan& folds,
                             const PipelineConfig& config, const BandSpec& bands,
                             const std::vector<Candidate>& candidates);

}  // namespace xflex::pipeline
