#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "lipflow/netdisc.hpp"

// f-divergence generators, their Legendre conjugates, and the Lipschitz
// regularized variational objective
//
//   E_P[phi] - inf_nu { nu + E_Q[f*(phi - nu)] }
//
// estimated on empirical samples.
namespace lipflow::fdiv {

enum class Kind { kl, alpha, ipm };
enum class NuMode { joint, analytic, none };

struct FDivSpec {
  Kind kind = Kind::kl;
  double alpha = 2.0;  // used when kind == alpha, must be > 1
  NuMode nu_mode = NuMode::joint;

  static FDivSpec kl(NuMode mode = NuMode::joint) { return {Kind::kl, 2.0, mode}; }
  static FDivSpec alpha_div(double a) { return {Kind::alpha, a, NuMode::joint}; }
  static FDivSpec ipm() { return {Kind::ipm, 2.0, NuMode::none}; }

  /// Throws InvalidArgument on an inconsistent (kind, alpha, nu_mode).
  void validate() const;
};

/// Parse the config spellings f = "kl"|"alpha"|"ipm", nu_mode = "joint"|"analytic"|"none".
/// An empty nu_mode picks the default for the kind.
FDivSpec parse_spec(std::string_view f, double alpha, std::string_view nu_mode);
std::string_view to_string(Kind k) noexcept;
std::string_view to_string(NuMode m) noexcept;

/// The estimate is declared diverged above this value.
inline constexpr double kDivergenceCeiling = 1e9;

/// Signals an objective that left the representable range (f* overflow,
/// non-finite values, or an estimate above kDivergenceCeiling).
class DivergedError : public std::runtime_error {
public:
  DivergedError(const std::string& what, double magnitude)
      : std::runtime_error(what), magnitude_(magnitude) {}
  double magnitude() const noexcept { return magnitude_; }

private:
  double magnitude_;
};

double f_value(const FDivSpec& spec, double x);
double f_derivative(const FDivSpec& spec, double x);
/// Legendre conjugate f*(y) = sup_{x >= 0} { x y - f(x) }.
double f_conjugate(const FDivSpec& spec, double y);
double f_conjugate_derivative(const FDivSpec& spec, double y);

struct ObjectiveValue {
  double divergence_estimate = 0.0;  // ep_term - eq_term
  double ep_term = 0.0;              // mean phi over P
  double eq_term = 0.0;              // nu + mean f*(phi_Q - nu), or its analytic/IPM form
  double nu_star = 0.0;              // minimizing nu (0 in IPM mode)
};

/// argmin_nu { nu + mean f*(phi_Q - nu) }.
double optimal_nu(const FDivSpec& spec, const Vector& phi_q);

/// Objective at the given nu (joint mode). Analytic-KL mode uses the
/// Donsker-Varadhan form and ignores nu; IPM mode returns mean difference.
ObjectiveValue objective(const FDivSpec& spec, const Vector& phi_p, const Vector& phi_q, double nu);

/// Objective with nu replaced by its optimum.
ObjectiveValue tightened_objective(const FDivSpec& spec, const Vector& phi_p, const Vector& phi_q);

struct ObjectiveGradient {
  ObjectiveValue value;
  Vector d_phi_p;  // d objective / d phi(Y_i)
  Vector d_phi_q;  // d objective / d phi(X_j)
  double d_nu = 0.0;
  bool has_nu = false;
};

ObjectiveGradient objective_gradients(const FDivSpec& spec, const Vector& phi_p,
                                      const Vector& phi_q, double nu);

/// Owns a discriminator and its optimizer; runs full-batch ascent steps on
/// the variational objective between a moving sample P and a fixed Q.
class DiscriminatorTrainer {
public:
  DiscriminatorTrainer(FDivSpec spec, netdisc::DiscriminatorNet net, netdisc::AdamConfig adam);

  /// `steps` ascent steps; returns the tightened objective at the final weights.
  ObjectiveValue train(const Matrix& p, const Matrix& q, int steps);

  ObjectiveValue evaluate(const Matrix& p, const Matrix& q) const;

  const FDivSpec& spec() const noexcept { return spec_; }
  const netdisc::DiscriminatorNet& net() const noexcept { return net_; }
  netdisc::DiscriminatorNet& net() noexcept { return net_; }
  void reset_optimizer() { adam_ = netdisc::AdamState(adam_.config()); }

private:
  FDivSpec spec_;
  netdisc::DiscriminatorNet net_;
  netdisc::AdamState adam_;
  Matrix stacked_;
  netdisc::ForwardCache cache_;
  netdisc::Gradients grads_;
};

/// Train `net` for `inner_steps` ascent steps on (P, Q) and return the final
/// estimate together with the trained network.
std::pair<ObjectiveValue, netdisc::DiscriminatorNet> estimate_divergence(
    const FDivSpec& spec, netdisc::DiscriminatorNet net, const Matrix& p, const Matrix& q,
    int inner_steps, const netdisc::AdamConfig& adam = {});

}  // namespace lipflow::fdiv
