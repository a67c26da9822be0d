#include "lowrank/penalty.hpp"

#include <cmath>

#include "lowrank/errors.hpp"

namespace lowrank::penalty {

namespace {

constexpr double kSigmaZeroRel = 1e-12;
constexpr double kDegenerateFrob = 1e-12;

bool allowed_exponent(double x) {
  return std::abs(x - 1.0 / 3.0) < 1e-12 || std::abs(x - 0.5) < 1e-12 ||
         std::abs(x - 2.0 / 3.0) < 1e-12;
}

double schatten_sum(const Eigen::Ref<const VectorXd>& sigma, double p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > 0.0) s += std::pow(sigma(i), p);
  return s;
}

// d/dsigma_i of (sum sigma^p)^(1/p), with sigma clamped at eps inside the
// negative power so quasi-norm gradients stay bounded near zero.
VectorXd schatten_grad(const Eigen::Ref<const VectorXd>& sigma, double p, double eps) {
  const double s = schatten_sum(sigma, p);
  VectorXd g = VectorXd::Zero(sigma.size());
  if (s <= 0.0) return g;
  const double outer = std::pow(s, 1.0 / p - 1.0);
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    g(i) = outer * std::pow(std::max(sigma(i), eps), p - 1.0);
  return g;
}

}  // namespace

PenaltySpec PenaltySpec::ratio(double lambda) {
  PenaltySpec s;
  s.kind = Kind::Ratio;
  s.lambda = lambda;
  s.validate();
  return s;
}

PenaltySpec PenaltySpec::nuclear(double lambda) {
  PenaltySpec s;
  s.kind = Kind::Nuclear;
  s.lambda = lambda;
  s.validate();
  return s;
}

PenaltySpec PenaltySpec::schatten(double p, double lambda) {
  PenaltySpec s;
  s.kind = Kind::Schatten;
  s.p = p;
  s.lambda = lambda;
  s.validate();
  return s;
}

PenaltySpec PenaltySpec::schatten_ratio(double p, double q, double lambda) {
  PenaltySpec s;
  s.kind = Kind::SchattenRatio;
  s.p = p;
  s.q = q;
  s.lambda = lambda;
  s.validate();
  return s;
}

void PenaltySpec::validate() const {
  if (lambda < 0.0 || !std::isfinite(lambda))
    throw InvalidConfigError("penalty: lambda must be finite and >= 0");
  if (kind == Kind::Schatten || kind == Kind::SchattenRatio) {
    if (!allowed_exponent(p))
      throw InvalidConfigError("penalty: p must be one of 1/3, 1/2, 2/3");
  }
  if (kind == Kind::SchattenRatio) {
    if (!allowed_exponent(q))
      throw InvalidConfigError("penalty: q must be one of 1/3, 1/2, 2/3");
    if (!(p < q))
      throw InvalidConfigError("penalty: schatten_ratio requires p < q");
  }
}

namespace {

std::string rational_name(double x) {
  if (std::abs(x - 1.0 / 3.0) < 1e-12) return "1/3";
  if (std::abs(x - 0.5) < 1e-12) return "1/2";
  if (std::abs(x - 2.0 / 3.0) < 1e-12) return "2/3";
  return std::to_string(x);
}

double parse_rational(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return std::stod(text);
  return std::stod(text.substr(0, slash)) / std::stod(text.substr(slash + 1));
}

}  // namespace

std::string PenaltySpec::name() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::Ratio: return "ratio";
    case Kind::Nuclear: return "nuclear";
    case Kind::Schatten: return "schatten:" + rational_name(p);
    case Kind::SchattenRatio:
      return "schatten_ratio:" + rational_name(p) + ":" + rational_name(q);
  }
  return "none";
}

PenaltySpec PenaltySpec::parse(const std::string& text, double lambda) {
  std::string head = text;
  std::string arg1, arg2;
  const auto c1 = text.find(':');
  if (c1 != std::string::npos) {
    head = text.substr(0, c1);
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string::npos) {
      arg1 = text.substr(c1 + 1);
    } else {
      arg1 = text.substr(c1 + 1, c2 - c1 - 1);
      arg2 = text.substr(c2 + 1);
    }
  }
  if (head == "none") return PenaltySpec::none();
  if (head == "ratio") return PenaltySpec::ratio(lambda);
  if (head == "nuclear" || head == "nuc") return PenaltySpec::nuclear(lambda);
  if (head == "schatten") {
    if (arg1.empty()) throw InvalidConfigError("penalty: schatten requires :p");
    return PenaltySpec::schatten(parse_rational(arg1), lambda);
  }
  if (head == "schatten_ratio") {
    if (arg1.empty() || arg2.empty())
      throw InvalidConfigError("penalty: schatten_ratio requires :p:q");
    return PenaltySpec::schatten_ratio(parse_rational(arg1), parse_rational(arg2), lambda);
  }
  throw InvalidConfigError("penalty: unknown kind '" + text + "'");
}

double penalty_value_sigma(const PenaltySpec& spec, const Eigen::Ref<const VectorXd>& sigma) {
  switch (spec.kind) {
    case PenaltySpec::Kind::None:
      return 0.0;
    case PenaltySpec::Kind::Ratio: {
      const double frob = sigma.norm();
      if (frob < kDegenerateFrob)
        throw DegenerateSpectrumError("penalty: ratio undefined at ||W||_F ~ 0");
      return sigma.sum() / frob;
    }
    case PenaltySpec::Kind::Nuclear:
      return sigma.sum();
    case PenaltySpec::Kind::Schatten:
      return std::pow(schatten_sum(sigma, spec.p), 1.0 / spec.p);
    case PenaltySpec::Kind::SchattenRatio: {
      const double denom = std::pow(schatten_sum(sigma, spec.q), 1.0 / spec.q);
      if (denom < kDegenerateFrob)
        throw DegenerateSpectrumError("penalty: schatten_ratio undefined at W ~ 0");
      return std::pow(schatten_sum(sigma, spec.p), 1.0 / spec.p) / denom;
    }
  }
  return 0.0;
}

double penalty_value(const PenaltySpec& spec, const Eigen::Ref<const MatrixXd>& w) {
  if (spec.kind == PenaltySpec::Kind::None) return 0.0;
  return penalty_value_sigma(spec, spectral::svd(w).sigma);
}

PenaltyEval penalty_gradient(const PenaltySpec& spec, const spectral::Svd& svd) {
  const VectorXd& sigma = svd.sigma;
  const Eigen::Index k = sigma.size();
  PenaltyEval out;
  out.value = penalty_value_sigma(spec, sigma);
  if (spec.kind == PenaltySpec::Kind::None) {
    out.gradient = MatrixXd::Zero(svd.u.rows(), svd.vt.cols());
    return out;
  }
  const double sigma_max = k > 0 ? sigma.maxCoeff() : 0.0;
  const double eps = kSigmaZeroRel * sigma_max;
  VectorXd g = VectorXd::Zero(k);
  switch (spec.kind) {
    case PenaltySpec::Kind::None:
      break;
    case PenaltySpec::Kind::Ratio: {
      const double frob = sigma.norm();
      const double nuc = sigma.sum();
      // Quotient rule on ||W||_*/||W||_F; the nuclear part keeps the
      // subgradient restricted to sigma_i above the zero threshold.
      for (Eigen::Index i = 0; i < k; ++i) {
        const double nuclear_part = sigma(i) > eps ? 1.0 / frob : 0.0;
        g(i) = nuclear_part - nuc * sigma(i) / (frob * frob * frob);
      }
      break;
    }
    case PenaltySpec::Kind::Nuclear:
      for (Eigen::Index i = 0; i < k; ++i) g(i) = sigma(i) > eps ? 1.0 : 0.0;
      break;
    case PenaltySpec::Kind::Schatten:
      if (sigma_max > 0.0) g = schatten_grad(sigma, spec.p, eps);
      break;
    case PenaltySpec::Kind::SchattenRatio: {
      if (sigma_max <= 0.0) break;
      const double sp = std::pow(schatten_sum(sigma, spec.p), 1.0 / spec.p);
      const double sq = std::pow(schatten_sum(sigma, spec.q), 1.0 / spec.q);
      const VectorXd gp = schatten_grad(sigma, spec.p, eps);
      const VectorXd gq = schatten_grad(sigma, spec.q, eps);
      g = (gp * sq - sp * gq) / (sq * sq);
      break;
    }
  }
  out.gradient = svd.u * g.asDiagonal() * svd.vt;
  return out;
}

}  // namespace lowrank::penalty
