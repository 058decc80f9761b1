#include "xflex/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>

#include "xflex/errors.hpp"

namespace xflex {

namespace {

// Ranks 1..n with ties averaged.
std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double pinball(double y, double q, double alpha) {
  return y >= q ? (y - q) * alpha : (q - y) * (1.0 - alpha);
}

double brier(double p_event, bool occurred) {
  if (!(p_event >= 0.0 && p_event <= 1.0)) throw ValidationError("probability must lie in [0, 1]");
  const double d = p_event - (occurred ? 1.0 : 0.0);
  return d * d;
}

std::optional<double> brier_skill(double bs, double bs_ref) {
  if (bs_ref == 0.0) return std::nullopt;
  return 1.0 - bs / bs_ref;
}

std::optional<double> auc(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc needs one label per score");
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) rank_sum += ranks[i];
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

MulticlassAuc multiclass_auc(const std::vector<std::vector<double>>& probs,
                             const std::vector<int>& labels) {
  if (probs.size() != labels.size()) throw ValidationError("one label per forecast is required");
  MulticlassAuc out;
  if (probs.empty()) return out;
  const std::size_t classes = probs.front().size();
  std::vector<double> pooled_scores;
  std::vector<bool> pooled_labels;
  double macro_sum = 0.0;
  int macro_n = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> s(probs.size());
    std::vector<char> l(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      s[i] = probs[i][c];
      l[i] = labels[i] == static_cast<int>(c);
      pooled_scores.push_back(s[i]);
      pooled_labels.push_back(l[i] != 0);
    }
    std::vector<bool> lb(l.begin(), l.end());
    std::unique_ptr<bool[]> raw(new bool[lb.size()]);
    for (std::size_t i = 0; i < lb.size(); ++i) raw[i] = lb[i];
    auto a = auc(s, std::span<const bool>(raw.get(), lb.size()));
    out.per_class.push_back(a);
    if (a) {
      macro_sum += *a;
      ++macro_n;
    }
  }
  if (macro_n > 0) out.macro = macro_sum / macro_n;
  std::unique_ptr<bool[]> raw(new bool[pooled_labels.size()]);
  for (std::size_t i = 0; i < pooled_labels.size(); ++i) raw[i] = pooled_labels[i];
  out.micro = auc(pooled_scores, std::span<const bool>(raw.get(), pooled_labels.size()));
  return out;
}

ReliabilityTable reliability_from_quantiles(const std::vector<std::vector<double>>& quantiles,
                                            std::span<const std::int64_t> observations,
                                            std::span<const double> levels,
                                            const std::vector<bool>& selected,
                                            const std::string& condition) {
  if (quantiles.size() != observations.size() || selected.size() != observations.size()) {
    throw ValidationError("reliability inputs must align");
  }
  ReliabilityTable table;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    ReliabilityRow row;
    row.level = levels[l];
    row.condition = condition;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < observations.size(); ++i) {
      if (!selected[i]) continue;
      ++row.n;
      if (static_cast<double>(observations[i]) <= quantiles[i][l]) ++hits;
    }
    row.coverage = row.n > 0 ? static_cast<double>(hits) / static_cast<double>(row.n)
                             : std::numeric_limits<double>::quiet_NaN();
    row.insufficient = row.n < kMinReliabilityRows;
    table.rows.push_back(row);
  }
  return table;
}

ReliabilityTable reliability(const std::vector<const CountDistribution*>& forecasts,
                             std::span<const std::int64_t> observations,
                             std::span<const double> levels, const std::vector<bool>& selected,
                             const std::string& condition) {
  if (forecasts.size() != observations.size()) throw ValidationError("reliability inputs must align");
  std::vector<std::vector<double>> q(forecasts.size(), std::vector<double>(levels.size()));
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    if (i < selected.size() && !selected[i]) continue;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      q[i][l] = static_cast<double>(forecasts[i]->quantile(levels[l]));
    }
  }
  return reliability_from_quantiles(q, observations, levels, selected, condition);
}

double twcrps_sample(std::span<const std::int64_t> samples, std::int64_t y, double a) {
  if (samples.size() < 2) throw ValidationError("twCRPS needs at least two samples");
  const double vy = std::max(static_cast<double>(y), a);
  std::vector<double> v(samples.size());
  double first = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    v[i] = std::max(static_cast<double>(samples[i]), a);
    first += std::abs(v[i] - vy);
  }
  const double n = static_cast<double>(v.size());
  first /= n;
  // sum_{i,j} |v_i - v_j| = 2 sum_k v_(k) (2k - n - 1), k = 1..n.
  std::sort(v.begin(), v.end());
  double pair_sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    pair_sum += v[k] * (2.0 * static_cast<double>(k + 1) - n - 1.0);
  }
  pair_sum *= 2.0;
  return std::max(0.0, first - 0.5 * pair_sum / (n * n));
}

std::vector<double> rmse_quantiles(const std::vector<std::vector<double>>& estimated,
                                   const std::vector<std::vector<double>>& truth) {
  if (estimated.size() != truth.size() || estimated.empty()) {
    throw ValidationError("rmse needs aligned, non-empty rows");
  }
  const std::size_t m = estimated.front().size();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    if (estimated[i].size() != m || truth[i].size() != m) throw ValidationError("rmse level mismatch");
    for (std::size_t l = 0; l < m; ++l) {
      const double d = estimated[i][l] - truth[i][l];
      out[l] += d * d;
    }
  }
  for (double& v : out) v = std::sqrt(v / static_cast<double>(estimated.size()));
  return out;
}

ScoreReport scaled_pinball(const ScoreReport& report, const std::string& baseline_source,
                           int baseline_lead) {
  std::map<std::pair<std::string, std::string>, double> baseline;
  for (const auto& r : report.rows) {
    if (r.source == baseline_source && r.lead_hours == baseline_lead && r.flag.empty()) {
      baseline[{r.district, r.metric}] = r.value;
    }
  }
  ScoreReport out;
  for (auto r : report.rows) {
    const auto it = baseline.find({r.district, r.metric});
    if (it == baseline.end()) {
      r.value = std::numeric_limits<double>::quiet_NaN();
      r.flag = "missing_baseline";
    } else if (it->second == 0.0) {
      r.value = std::numeric_limits<double>::quiet_NaN();
      r.flag = "zero_baseline";
    } else {
      r.value /= it->second;
    }
    r.metric = "scaled_" + r.metric;
    out.rows.push_back(std::move(r));
  }
  return out;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw ValidationError("spearman needs >= 3 pairs");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  SpearmanResult out;
  if (sxx == 0.0 || syy == 0.0) return out;
  out.rho = sxy / std::sqrt(sxx * syy);
  if (out.rho >= 1.0) {
    out.p_one_sided = 0.0;
    return out;
  }
  const double t = out.rho * std::sqrt((n - 2.0) / (1.0 - out.rho * out.rho));
  boost::math::students_t dist(n - 2.0);
  out.p_one_sided = boost::math::cdf(boost::math::complement(dist, t));
  return out;
}

}  // namespace xflex
