#include "lowrank/optimizer.hpp"

#include <cmath>

namespace lowrank::opt {

OptimizerSpec OptimizerSpec::defaults(OptKind kind) {
  OptimizerSpec s;
  s.kind = kind;
  switch (kind) {
    case OptKind::GdMomentum:
      s.momentum = 0.9;
      break;
    case OptKind::Rmsprop:
      s.beta2 = 0.99;  // smoothing constant
      break;
    case OptKind::Adadelta:
      s.beta2 = 0.9;  // rho
      s.epsilon = 1e-6;
      break;
    case OptKind::Adagrad:
      s.epsilon = 1e-10;
      break;
    case OptKind::AdamW:
      s.weight_decay = 1e-2;
      break;
    default:
      break;
  }
  return s;
}

OptKind OptimizerSpec::parse_kind(const std::string& name) {
  if (name == "gd" || name == "sgd") return OptKind::Gd;
  if (name == "gd_momentum" || name == "momentum") return OptKind::GdMomentum;
  if (name == "adam") return OptKind::Adam;
  if (name == "adamw") return OptKind::AdamW;
  if (name == "adamax") return OptKind::Adamax;
  if (name == "nadam") return OptKind::Nadam;
  if (name == "radam") return OptKind::Radam;
  if (name == "adagrad") return OptKind::Adagrad;
  if (name == "adadelta") return OptKind::Adadelta;
  if (name == "rmsprop") return OptKind::Rmsprop;
  throw InvalidConfigError("optimizer: unknown kind '" + name + "'");
}

std::string OptimizerSpec::kind_name(OptKind kind) {
  switch (kind) {
    case OptKind::Gd: return "gd";
    case OptKind::GdMomentum: return "gd_momentum";
    case OptKind::Adam: return "adam";
    case OptKind::AdamW: return "adamw";
    case OptKind::Adamax: return "adamax";
    case OptKind::Nadam: return "nadam";
    case OptKind::Radam: return "radam";
    case OptKind::Adagrad: return "adagrad";
    case OptKind::Adadelta: return "adadelta";
    case OptKind::Rmsprop: return "rmsprop";
  }
  return "gd";
}

void OptimizerSpec::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw InvalidConfigError("optimizer: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw InvalidConfigError("optimizer: betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw InvalidConfigError("optimizer: epsilon must be positive");
  if (momentum < 0.0) throw InvalidConfigError("optimizer: momentum must be >= 0");
  if (weight_decay < 0.0) throw InvalidConfigError("optimizer: weight_decay must be >= 0");
}

namespace {

void ensure_state(const OptimizerSpec& spec, OptimizerState& state,
                  const std::vector<MatrixXd>& params) {
  if (state.initialized()) {
    if (state.m.size() != params.size())
      throw InvalidInputError("optimizer: state does not match parameter count");
    for (size_t i = 0; i < params.size(); ++i)
      if (state.m[i].rows() != params[i].rows() || state.m[i].cols() != params[i].cols())
        throw InvalidInputError("optimizer: state does not match parameter shapes");
    return;
  }
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  state.extra.reserve(params.size());
  for (const auto& p : params) {
    state.m.push_back(MatrixXd::Zero(p.rows(), p.cols()));
    state.v.push_back(MatrixXd::Zero(p.rows(), p.cols()));
    state.extra.push_back(MatrixXd::Zero(p.rows(), p.cols()));
  }
  state.mu_product = 1.0;
  state.step_count = 0;
}

}  // namespace

void step(const OptimizerSpec& spec, OptimizerState& state, std::vector<MatrixXd>& params,
          const std::vector<MatrixXd>& grads) {
  spec.validate();
  if (grads.size() != params.size())
    throw InvalidInputError("optimizer: gradient count does not match parameters");
  for (size_t i = 0; i < params.size(); ++i)
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols())
      throw InvalidInputError("optimizer: gradient shape mismatch");
  ensure_state(spec, state, params);
  for (const auto& g : grads)
    if (!g.allFinite())
      throw DivergedError("optimizer: non-finite gradient", state.step_count + 1);

  state.step_count += 1;
  const long t = state.step_count;
  const double lr = spec.lr;
  const double b1 = spec.beta1;
  const double b2 = spec.beta2;
  const double eps = spec.epsilon;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));

  switch (spec.kind) {
    case OptKind::Gd:
      for (size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
      break;

    case OptKind::GdMomentum:
      for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = spec.momentum * state.m[i] + grads[i];
        params[i] -= lr * state.m[i];
      }
      break;

    case OptKind::AdamW:
      for (auto& p : params) p *= (1.0 - lr * spec.weight_decay);
      [[fallthrough]];
    case OptKind::Adam:
      for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
        MatrixXd vhat = state.v[i] / bc2;
        if (spec.amsgrad) {
          state.extra[i] = state.extra[i].cwiseMax(vhat);
          vhat = state.extra[i];
        }
        params[i].array() -=
            lr * (state.m[i].array() / bc1) / (vhat.array().sqrt() + eps);
      }
      break;

    case OptKind::Adamax:
      for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        // exponentially weighted infinity norm, floored at |g| + eps
        state.extra[i] = (b2 * state.extra[i])
                             .cwiseMax((grads[i].cwiseAbs().array() + eps).matrix());
        params[i].array() -= (lr / bc1) * state.m[i].array() / state.extra[i].array();
      }
      break;

    case OptKind::Nadam: {
      const double psi = 0.004;  // momentum decay
      const double mu_t = b1 * (1.0 - 0.5 * std::pow(0.96, static_cast<double>(t) * psi));
      const double mu_next =
          b1 * (1.0 - 0.5 * std::pow(0.96, static_cast<double>(t + 1) * psi));
      state.mu_product *= mu_t;
      const double mu_product_next = state.mu_product * mu_next;
      for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
        const auto denom = (state.v[i].array() / bc2).sqrt() + eps;
        params[i].array() -= lr *
                             ((1.0 - mu_t) / (1.0 - state.mu_product) * grads[i].array() +
                              mu_next / (1.0 - mu_product_next) * state.m[i].array()) /
                             denom;
      }
      break;
    }

    case OptKind::Radam: {
      const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
      const double b2t = std::pow(b2, static_cast<double>(t));
      const double rho_t = rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
      for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
        const MatrixXd mhat = state.m[i] / bc1;
        if (rho_t > 5.0) {
          const double rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                                        ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
          params[i].array() -=
              lr * rect * mhat.array() / ((state.v[i].array() / bc2).sqrt() + eps);
        } else {
          params[i] -= lr * mhat;
        }
      }
      break;
    }

    case OptKind::Adagrad:
      for (size_t i = 0; i < params.size(); ++i) {
        state.v[i] += grads[i].cwiseProduct(grads[i]);
        params[i].array() -= lr * grads[i].array() / (state.v[i].array().sqrt() + eps);
      }
      break;

    case OptKind::Adadelta: {
      const double rho = b2;
      for (size_t i = 0; i < params.size(); ++i) {
        state.v[i] = rho * state.v[i] + (1.0 - rho) * grads[i].cwiseProduct(grads[i]);
        const MatrixXd delta =
            (grads[i].array() * (state.extra[i].array() + eps).sqrt() /
             (state.v[i].array() + eps).sqrt())
                .matrix();
        state.extra[i] = rho * state.extra[i] + (1.0 - rho) * delta.cwiseProduct(delta);
        params[i] -= lr * delta;
      }
      break;
    }

    case OptKind::Rmsprop:
      for (size_t i = 0; i < params.size(); ++i) {
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
        params[i].array() -= lr * grads[i].array() / (state.v[i].array().sqrt() + eps);
      }
      break;
  }
}

}  // namespace lowrank::opt
