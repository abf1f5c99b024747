#include "lipflow/fdiv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lipflow::fdiv {

namespace {

void require_nonempty(const Vector& phi_p, const Vector& phi_q) {
  if (phi_p.size() == 0 || phi_q.size() == 0)
    throw InvalidArgument("objective: sample arrays must be nonempty");
}

double log_mean_exp(const Vector& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().mean());
}

// Throws DivergedError when the conjugate sum is not representable.
void check_finite_conjugate(double mean_fstar, const Vector& args) {
  if (std::isfinite(mean_fstar)) return;
  const double magnitude = args.size() ? args.cwiseAbs().maxCoeff() : 0.0;
  throw DivergedError("objective diverged: f* overflow at argument magnitude " +
                          std::to_string(magnitude),
                      magnitude);
}

void check_ceiling(const ObjectiveValue& v) {
  if (!std::isfinite(v.divergence_estimate))
    throw DivergedError("objective diverged: non-finite estimate", v.divergence_estimate);
  if (v.divergence_estimate > kDivergenceCeiling)
    throw DivergedError("objective diverged: estimate " + std::to_string(v.divergence_estimate) +
                            " exceeds ceiling",
                        v.divergence_estimate);
}

double alpha_conjugate_second(double alpha, double y) {
  if (y <= 0.0) return 0.0;
  return std::pow((alpha - 1.0) * y, (2.0 - alpha) / (alpha - 1.0));
}

}  // namespace

void FDivSpec::validate() const {
  if (kind == Kind::alpha && !(alpha > 1.0))
    throw InvalidArgument("FDivSpec: alpha must be > 1");
  if (nu_mode == NuMode::analytic && kind != Kind::kl)
    throw InvalidArgument("FDivSpec: analytic nu mode requires the KL generator");
  if ((nu_mode == NuMode::none) != (kind == Kind::ipm))
    throw InvalidArgument("FDivSpec: nu mode 'none' goes with, and only with, the IPM objective");
}

FDivSpec parse_spec(std::string_view f, double alpha, std::string_view nu_mode) {
  FDivSpec spec;
  if (f == "kl")
    spec.kind = Kind::kl;
  else if (f == "alpha")
    spec.kind = Kind::alpha;
  else if (f == "ipm")
    spec.kind = Kind::ipm;
  else
    throw InvalidArgument("unknown f-divergence '" + std::string(f) + "'");
  spec.alpha = alpha;
  if (nu_mode.empty())
    spec.nu_mode = spec.kind == Kind::ipm ? NuMode::none : NuMode::joint;
  else if (nu_mode == "joint")
    spec.nu_mode = NuMode::joint;
  else if (nu_mode == "analytic")
    spec.nu_mode = NuMode::analytic;
  else if (nu_mode == "none")
    spec.nu_mode = NuMode::none;
  else
    throw InvalidArgument("unknown nu_mode '" + std::string(nu_mode) + "'");
  spec.validate();
  return spec;
}

std::string_view to_string(Kind k) noexcept {
  switch (k) {
    case Kind::kl: return "kl";
    case Kind::alpha: return "alpha";
    case Kind::ipm: return "ipm";
  }
  return "?";
}

std::string_view to_string(NuMode m) noexcept {
  switch (m) {
    case NuMode::joint: return "joint";
    case NuMode::analytic: return "analytic";
    case NuMode::none: return "none";
  }
  return "?";
}

double f_value(const FDivSpec& spec, double x) {
  if (x < 0.0) throw InvalidArgument("f_value: argument must be >= 0");
  switch (spec.kind) {
    case Kind::kl:
      return x == 0.0 ? 0.0 : x * std::log(x);
    case Kind::alpha:
      return (std::pow(x, spec.alpha) - 1.0) / (spec.alpha * (spec.alpha - 1.0));
    case Kind::ipm:
      // Conjugate of the identity pairing: 0 at x = 1, +inf elsewhere.
      return x == 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

double f_derivative(const FDivSpec& spec, double x) {
  if (!(x > 0.0)) throw InvalidArgument("f_derivative: argument must be > 0");
  switch (spec.kind) {
    case Kind::kl: return std::log(x) + 1.0;
    case Kind::alpha: return std::pow(x, spec.alpha - 1.0) / (spec.alpha - 1.0);
    case Kind::ipm: break;
  }
  throw InvalidArgument("f_derivative: undefined for the IPM objective");
}

double f_conjugate(const FDivSpec& spec, double y) {
  switch (spec.kind) {
    case Kind::kl:
      return std::exp(y - 1.0);
    case Kind::alpha: {
      const double a = spec.alpha;
      const double at_zero = 1.0 / (a * (a - 1.0));
      if (y <= 0.0) return at_zero;
      return std::pow((a - 1.0) * y, a / (a - 1.0)) / a + at_zero;
    }
    case Kind::ipm:
      return y;
  }
  return 0.0;
}

double f_conjugate_derivative(const FDivSpec& spec, double y) {
  switch (spec.kind) {
    case Kind::kl:
      return std::exp(y - 1.0);
    case Kind::alpha:
      if (y <= 0.0) return 0.0;
      return std::pow((spec.alpha - 1.0) * y, 1.0 / (spec.alpha - 1.0));
    case Kind::ipm:
      return 1.0;
  }
  return 0.0;
}

double optimal_nu(const FDivSpec& spec, const Vector& phi_q) {
  if (phi_q.size() == 0) throw InvalidArgument("optimal_nu: empty sample");
  switch (spec.kind) {
    case Kind::ipm:
      return 0.0;
    case Kind::kl:
      return log_mean_exp(phi_q) - 1.0;
    case Kind::alpha:
      break;
  }
  // Root of g(nu) = mean f*'(phi - nu) - 1, decreasing in nu. At hi every
  // argument is <= 0 so g = -1; at lo every argument is >= 1/(alpha-1) so g >= 0.
  const double a = spec.alpha;
  double lo = phi_q.minCoeff() - 1.0 / (a - 1.0);
  double hi = phi_q.maxCoeff();
  auto g = [&](double nu) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < phi_q.size(); ++j) s += f_conjugate_derivative(spec, phi_q(j) - nu);
    return s / static_cast<double>(phi_q.size()) - 1.0;
  };
  auto dg = [&](double nu) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < phi_q.size(); ++j) s += alpha_conjugate_second(a, phi_q(j) - nu);
    return -s / static_cast<double>(phi_q.size());
  };
  double nu = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double gv = g(nu);
    if (gv == 0.0) return nu;
    if (gv > 0.0)
      lo = nu;
    else
      hi = nu;
    const double slope = dg(nu);
    double next = slope < 0.0 ? nu - gv / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - nu) <= 1e-15 * std::max(1.0, std::abs(nu)) || hi - lo <= 1e-15 * std::max(1.0, std::abs(nu)))
      return next;
    nu = next;
  }
  return nu;
}

ObjectiveValue objective(const FDivSpec& spec, const Vector& phi_p, const Vector& phi_q, double nu) {
  require_nonempty(phi_p, phi_q);
  ObjectiveValue v;
  v.ep_term = phi_p.mean();
  switch (spec.nu_mode) {
    case NuMode::none:
      v.eq_term = phi_q.mean();
      v.nu_star = 0.0;
      break;
    case NuMode::analytic:
      v.eq_term = log_mean_exp(phi_q);
      v.nu_star = v.eq_term - 1.0;
      break;
    case NuMode::joint: {
      const Vector args = phi_q.array() - nu;
      double s = 0.0;
      for (Eigen::Index j = 0; j < args.size(); ++j) s += f_conjugate(spec, args(j));
      const double mean_fstar = s / static_cast<double>(args.size());
      check_finite_conjugate(mean_fstar, args);
      v.eq_term = nu + mean_fstar;
      v.nu_star = optimal_nu(spec, phi_q);
      break;
    }
  }
  v.divergence_estimate = v.ep_term - v.eq_term;
  check_ceiling(v);
  return v;
}

ObjectiveValue tightened_objective(const FDivSpec& spec, const Vector& phi_p, const Vector& phi_q) {
  if (spec.nu_mode != NuMode::joint) return objective(spec, phi_p, phi_q, 0.0);
  require_nonempty(phi_p, phi_q);
  return objective(spec, phi_p, phi_q, optimal_nu(spec, phi_q));
}

ObjectiveGradient objective_gradients(const FDivSpec& spec, const Vector& phi_p,
                                      const Vector& phi_q, double nu) {
  require_nonempty(phi_p, phi_q);
  ObjectiveGradient out;
  const double inv_m = 1.0 / static_cast<double>(phi_p.size());
  const double inv_n = 1.0 / static_cast<double>(phi_q.size());
  out.d_phi_p = Vector::Constant(phi_p.size(), inv_m);
  out.value.ep_term = phi_p.mean();

  switch (spec.nu_mode) {
    case NuMode::none:
      out.d_phi_q = Vector::Constant(phi_q.size(), -inv_n);
      out.value.eq_term = phi_q.mean();
      break;
    case NuMode::analytic: {
      const double m = phi_q.maxCoeff();
      const Vector w = (phi_q.array() - m).exp();
      const double total = w.sum();
      out.d_phi_q = -w / total;
      out.value.eq_term = m + std::log(total * inv_n);
      out.value.nu_star = out.value.eq_term - 1.0;
      break;
    }
    case NuMode::joint: {
      const Eigen::Index n = phi_q.size();
      Vector args = phi_q.array() - nu;
      out.d_phi_q.resize(n);
      double fstar_sum = 0.0;
      double deriv_sum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double fs = f_conjugate(spec, args(j));
        const double fd = f_conjugate_derivative(spec, args(j));
        fstar_sum += fs;
        deriv_sum += fd;
        out.d_phi_q(j) = -fd * inv_n;
      }
      const double mean_fstar = fstar_sum * inv_n;
      check_finite_conjugate(mean_fstar, args);
      check_finite_conjugate(deriv_sum, args);
      out.value.eq_term = nu + mean_fstar;
      out.d_nu = -1.0 + deriv_sum * inv_n;
      out.has_nu = true;
      out.value.nu_star = nu;
      break;
    }
  }
  out.value.divergence_estimate = out.value.ep_term - out.value.eq_term;
  check_ceiling(out.value);
  return out;
}

DiscriminatorTrainer::DiscriminatorTrainer(FDivSpec spec, netdisc::DiscriminatorNet net,
                                           netdisc::AdamConfig adam)
    : spec_(spec), net_(std::move(net)), adam_(adam) {
  spec_.validate();
}

ObjectiveValue DiscriminatorTrainer::train(const Matrix& p, const Matrix& q, int steps) {
  if (p.cols() != q.cols()) throw InvalidArgument("estimate_divergence: P and Q dimensions differ");
  if (p.rows() == 0 || q.rows() == 0) throw InvalidArgument("estimate_divergence: empty sample");
  const Eigen::Index m = p.rows();
  const Eigen::Index n = q.rows();
  stacked_.resize(m + n, p.cols());
  stacked_.topRows(m) = p;
  stacked_.bottomRows(n) = q;
  Vector upstream(m + n);
  for (int s = 0; s < steps; ++s) {
    net_.forward(stacked_, cache_);
    const Vector& out = cache_.output;
    const ObjectiveGradient og = objective_gradients(spec_, out.head(m), out.tail(n), net_.nu());
    upstream.head(m) = og.d_phi_p;
    upstream.tail(n) = og.d_phi_q;
    net_.backward(cache_, upstream, grads_, true, false);
    netdisc::adam_step(net_, grads_, og.has_nu ? og.d_nu : 0.0, adam_);
  }
  net_.forward(stacked_, cache_);
  return tightened_objective(spec_, cache_.output.head(m), cache_.output.tail(n));
}

ObjectiveValue DiscriminatorTrainer::evaluate(const Matrix& p, const Matrix& q) const {
  if (p.cols() != q.cols()) throw InvalidArgument("evaluate: P and Q dimensions differ");
  return tightened_objective(spec_, net_.forward(p), net_.forward(q));
}

std::pair<ObjectiveValue, netdisc::DiscriminatorNet> estimate_divergence(
    const FDivSpec& spec, netdisc::DiscriminatorNet net, const Matrix& p, const Matrix& q,
    int inner_steps, const netdisc::AdamConfig& adam) {
  if (inner_steps < 0) throw InvalidArgument("estimate_divergence: inner_steps must be >= 0");
  if (net.input_dim() != p.cols())
    throw InvalidArgument("estimate_divergence: network input dimension does not match samples");
  DiscriminatorTrainer trainer(spec, std::move(net), adam);
  const ObjectiveValue v = trainer.train(p, q, inner_steps);
  return {v, trainer.net()};
}

}  // namespace lipflow::fdiv
