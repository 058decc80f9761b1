#include "xflex/design.hpp"

#include <cmath>

#include "xflex/errors.hpp"

namespace xflex {

const std::vector<double>& Frame::column(const std::string& name) const {
  const auto it = columns.find(name);
  if (it == columns.end()) throw ValidationError("missing covariate '" + name + "'");
  return it->second;
}

CovariateMap Frame::row(std::size_t i) const {
  CovariateMap out;
  for (const auto& [name, values] : columns) out.emplace(name, values[i]);
  return out;
}

Frame Frame::subset(const std::vector<std::size_t>& rows) const {
  Frame out;
  out.counts.reserve(rows.size());
  for (std::size_t r : rows) out.counts.push_back(counts[r]);
  for (const auto& [name, values] : columns) {
    auto& dst = out.columns[name];
    dst.reserve(rows.size());
    for (std::size_t r : rows) dst.push_back(values[r]);
  }
  return out;
}

void Frame::validate() const {
  for (const auto& [name, values] : columns) {
    if (values.size() != counts.size()) {
      throw ValidationError("column '" + name + "' length differs from the counts");
    }
  }
  for (auto c : counts) {
    if (c < 0) throw ValidationError("counts must be nonnegative");
  }
}

double require_covariate(const CovariateMap& x, const std::string& name) {
  const auto it = x.find(name);
  if (it == x.end()) throw ValidationError("missing covariate '" + name + "'");
  return it->second;
}

std::vector<std::string> Formula::covariates() const {
  std::vector<std::string> out = linear;
  for (const auto& s : smooths) out.push_back(s.covariate_name);
  return out;
}

void Design::finalize(std::vector<Eigen::VectorXd> column_means) {
  constraint_ = std::move(column_means);
  null_space_.clear();
  penalties_.clear();
  columns_ = 1 + static_cast<Eigen::Index>(formula_.linear.size());
  for (std::size_t t = 0; t < bases_.size(); ++t) {
    const Eigen::Index k = bases_[t].dim();
    // Orthonormal basis of the complement of the constraint vector, so the
    // smooth sums to zero over the training rows.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraint_[t]);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
    Eigen::MatrixXd z = q.rightCols(k - 1);
    PenaltyBlock block;
    block.offset = columns_;
    block.size = k - 1;
    block.matrix = z.transpose() * bases_[t].penalty() * z;
    null_space_.push_back(std::move(z));
    penalties_.push_back(std::move(block));
    columns_ += k - 1;
  }
}

Design Design::build(const Frame& frame, const Formula& formula) {
  Design d;
  d.formula_ = formula;
  std::vector<Eigen::VectorXd> means;
  for (const auto& spec : formula.smooths) {
    const auto& col = frame.column(spec.covariate_name);
    d.bases_.push_back(build_basis(col, spec));
    means.push_back(d.bases_.back().design().colwise().mean().transpose());
  }
  for (const auto& name : formula.linear) (void)frame.column(name);
  d.finalize(std::move(means));
  return d;
}

Eigen::MatrixXd Design::matrix(const Frame& frame) const {
  const auto n = static_cast<Eigen::Index>(frame.size());
  Eigen::MatrixXd x(n, columns_);
  x.col(0).setOnes();
  Eigen::Index c = 1;
  for (const auto& name : formula_.linear) {
    const auto& col = frame.column(name);
    for (Eigen::Index i = 0; i < n; ++i) x(i, c) = col[static_cast<std::size_t>(i)];
    ++c;
  }
  for (std::size_t t = 0; t < bases_.size(); ++t) {
    const auto& col = frame.column(bases_[t].spec().covariate_name);
    const Eigen::MatrixXd raw = bases_[t].evaluate(col);
    x.middleCols(c, null_space_[t].cols()) = raw * null_space_[t];
    c += null_space_[t].cols();
  }
  return x;
}

Eigen::VectorXd Design::row(const CovariateMap& xmap) const {
  Eigen::VectorXd r(columns_);
  r(0) = 1.0;
  Eigen::Index c = 1;
  for (const auto& name : formula_.linear) {
    const double v = require_covariate(xmap, name);
    if (!std::isfinite(v)) throw ValidationError("non-finite covariate '" + name + "'");
    r(c++) = v;
  }
  for (std::size_t t = 0; t < bases_.size(); ++t) {
    const double v = require_covariate(xmap, bases_[t].spec().covariate_name);
    if (!std::isfinite(v)) {
      throw ValidationError("non-finite covariate '" + bases_[t].spec().covariate_name + "'");
    }
    r.segment(c, null_space_[t].cols()) = null_space_[t].transpose() * bases_[t].evaluate(v);
    c += null_space_[t].cols();
  }
  return r;
}

namespace {

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json formula_to_json(const Formula& f) {
  nlohmann::json smooths = nlohmann::json::array();
  for (const auto& s : f.smooths) {
    smooths.push_back({{"covariate", s.covariate_name},
                       {"basis_dim", s.basis_dim},
                       {"degree", s.degree},
                       {"penalty_order", s.penalty_order}});
  }
  return {{"linear", f.linear}, {"smooths", smooths}};
}

Formula formula_from_json(const nlohmann::json& j) {
  Formula f;
  if (j.contains("linear")) f.linear = j.at("linear").get<std::vector<std::string>>();
  if (j.contains("smooths")) {
    for (const auto& s : j.at("smooths")) {
      SplineSpec spec;
      spec.covariate_name = s.at("covariate").get<std::string>();
      spec.basis_dim = s.value("basis_dim", 10);
      spec.degree = s.value("degree", 3);
      spec.penalty_order = s.value("penalty_order", 2);
      spec.validate();
      f.smooths.push_back(spec);
    }
  }
  return f;
}

nlohmann::json Design::to_json() const {
  nlohmann::json bases = nlohmann::json::array();
  for (std::size_t t = 0; t < bases_.size(); ++t) {
    bases.push_back({{"knots", bases_[t].knots()}, {"column_means", vec_to_json(constraint_[t])}});
  }
  return {{"formula", formula_to_json(formula_)}, {"bases", bases}};
}

Design Design::from_json(const nlohmann::json& j) {
  Design d;
  d.formula_ = formula_from_json(j.at("formula"));
  const auto& bases = j.at("bases");
  if (bases.size() != d.formula_.smooths.size()) {
    throw ValidationError("design has a basis count different from its smooth terms");
  }
  std::vector<Eigen::VectorXd> means;
  for (std::size_t t = 0; t < bases.size(); ++t) {
    d.bases_.emplace_back(d.formula_.smooths[t], bases[t].at("knots").get<std::vector<double>>());
    means.push_back(vec_from_json(bases[t].at("column_means")));
  }
  d.finalize(std::move(means));
  return d;
}

}  // namespace xflex
