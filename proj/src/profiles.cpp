#include "torvm/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace torvm {

namespace {

// Base function b(e, p) with its partials.
MuValue base(const ProfileSpec& s, double e, double p) {
  MuValue v;
  const double ex = std::exp(-e);
  switch (s.family) {
    case ProfileFamily::Zero:
      break;
    case ProfileFamily::StableEven: {
      const double g = std::exp(-e - p * p);
      v = {g, -g, -2.0 * p * g};
      break;
    }
    case ProfileFamily::Instability: {
      const double q = 1.0 + s.beta * p * p;
      v = {q * ex, -q * ex, 2.0 * s.beta * p * ex};
      break;
    }
    case ProfileFamily::SmallMuP: {
      const double t = std::tanh(p);
      const double q = 1.0 + s.eps * t;
      v = {q * ex, -q * ex, s.eps * (1.0 - t * t) * ex};
      break;
    }
    case ProfileFamily::LinearTilt: {
      const double q = 1.0 + s.eps * p;
      if (q > 0.0) v = {q * ex, -q * ex, s.eps * ex};
      break;
    }
  }
  return v;
}

}  // namespace

ProfileFamily parse_family(const std::string& name) {
  if (name == "zero") return ProfileFamily::Zero;
  if (name == "stable_even") return ProfileFamily::StableEven;
  if (name == "instability") return ProfileFamily::Instability;
  if (name == "small_mu_p") return ProfileFamily::SmallMuP;
  if (name == "linear_tilt") return ProfileFamily::LinearTilt;
  throw std::invalid_argument("unknown profile family: " + name);
}

std::string family_name(ProfileFamily f) {
  switch (f) {
    case ProfileFamily::Zero: return "zero";
    case ProfileFamily::StableEven: return "stable_even";
    case ProfileFamily::Instability: return "instability";
    case ProfileFamily::SmallMuP: return "small_mu_p";
    case ProfileFamily::LinearTilt: return "linear_tilt";
  }
  return "zero";
}

SpeciesMode parse_species_mode(const std::string& name) {
  if (name == "mirror") return SpeciesMode::Mirror;
  if (name == "identical") return SpeciesMode::Identical;
  throw std::invalid_argument("unknown species mode: " + name);
}

std::string species_mode_name(SpeciesMode m) {
  return m == SpeciesMode::Mirror ? "mirror" : "identical";
}

MuProfile::MuProfile(const ProfileSpec& spec) : spec_(spec) {
  if (!(spec_.K >= 0.0)) throw std::invalid_argument("MuProfile: K must be nonnegative");
  if (spec_.c_plus < 0.0 || spec_.c_minus < 0.0)
    throw std::invalid_argument("MuProfile: amplitudes must be nonnegative");
  if (!(spec_.gamma > 3.0)) throw std::invalid_argument("MuProfile: decay exponent must exceed 3");
}

bool MuProfile::is_zero() const {
  return spec_.family == ProfileFamily::Zero || (spec_.c_plus == 0.0 && spec_.c_minus == 0.0);
}

MuValue MuProfile::eval_unchecked(int sign, double e, double p) const {
  const bool flip = sign < 0 && spec_.mode == SpeciesMode::Mirror;
  const double c = sign > 0 ? spec_.c_plus : spec_.c_minus;
  const double K = spec_.K;
  const double arg = (flip ? -p : p) * K;
  MuValue b = base(spec_, e, arg);
  const double dp_sign = flip ? -K : K;
  return {c * b.mu, c * b.mu_e, c * b.mu_p * dp_sign};
}

MuValue MuProfile::eval(int sign, double e, double p) const {
  if (!(e >= 1.0)) throw std::domain_error("MuProfile: energy below rest mass");
  return eval_unchecked(sign, e, p);
}

double MuProfile::evaluate(int sign, double e, double p, MuPart which) const {
  const MuValue v = eval(sign, e, p);
  switch (which) {
    case MuPart::Value: return v.mu;
    case MuPart::DE: return v.mu_e;
    case MuPart::DP: return v.mu_p;
  }
  return v.mu;
}

MuProfile MuProfile::scale_in_p(double K) const {
  if (!(K > 0.0)) throw std::invalid_argument("scale_in_p: K must be positive");
  ProfileSpec s = spec_;
  s.K *= K;
  return MuProfile(s);
}

namespace {

template <class F>
void for_lattice(double a, double amax, F&& f) {
  const int ne = 80, np = 41;
  for (int i = 0; i < ne; ++i) {
    // Dense near e = 1, reaching e = 40.
    const double t = static_cast<double>(i) / (ne - 1);
    const double e = 1.0 + 39.0 * t * t;
    const double pmax = (a + 1.0) * (std::sqrt(e * e - 1.0) + amax);
    for (int k = 0; k < np; ++k) {
      const double p = pmax * (2.0 * k / (np - 1) - 1.0);
      f(e, p);
    }
  }
}

}  // namespace

double MuProfile::sampled_decay_constant(double a, double amax) const {
  double sup = 0.0;
  for_lattice(a, amax, [&](double e, double p) {
    for (int s : {1, -1}) {
      const MuValue v = eval(s, e, p);
      const double env = (std::abs(v.mu) + std::abs(v.mu_e) + std::abs(v.mu_p)) *
                         (1.0 + std::pow(e, spec_.gamma));
      sup = std::max(sup, env);
    }
  });
  return sup;
}

const HypothesisCheck& HypothesisReport::get(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("no hypothesis check named " + name);
}

HypothesisReport validate_hypotheses(const MuProfile& prof, double a, double amax,
                                     double eps_threshold) {
  const double gam = prof.gamma();
  double env_sup = 0.0, min_mu = 0.0, max_mu_e = -INFINITY, mirror = 0.0;
  double max_pmup = -INFINITY, eps_sup = 0.0, coercive = INFINITY, mixed = INFINITY;
  bool any_positive = false;

  for_lattice(a, amax, [&](double e, double p) {
    const double ep = std::pow(e, gam);
    for (int s : {1, -1}) {
      const MuValue v = prof.eval(s, e, p);
      env_sup = std::max(env_sup, (std::abs(v.mu) + std::abs(v.mu_e) + std::abs(v.mu_p)) * (1.0 + ep));
      min_mu = std::min(min_mu, v.mu);
      if (v.mu > 0.0) {
        any_positive = true;
        max_mu_e = std::max(max_mu_e, v.mu_e);
      }
      max_pmup = std::max(max_pmup, p * v.mu_p);
      eps_sup = std::max(eps_sup, std::abs(v.mu_p) * (1.0 + ep));
      if (p != 0.0) coercive = std::min(coercive, p * v.mu_p / (p * p * std::exp(-e)));
      mixed = std::min(mixed, p * v.mu_p + e * v.mu_e);
    }
    const double mp = prof.eval(1, e, p).mu;
    const double mm = prof.eval(-1, e, -p).mu;
    mirror = std::max(mirror, std::abs(mp - mm));
  });

  HypothesisReport rep;
  const double cmu = prof.c_mu() > 0.0 ? prof.c_mu() : env_sup;
  rep.checks.push_back({"decay", env_sup <= cmu * (1.0 + 1e-12), cmu - env_sup,
                        "sampled sup of (|mu|+|mu_e|+|mu_p|)(1+e^gamma)"});
  rep.checks.push_back({"nonnegative", min_mu >= 0.0, min_mu, "min mu"});
  if (!any_positive) max_mu_e = 0.0;
  rep.checks.push_back({"monotone", !any_positive || max_mu_e < 0.0, -max_mu_e,
                        "max mu_e where mu > 0 (negated)"});
  rep.checks.push_back({"mirror_symmetry", mirror <= 1e-14, mirror,
                        "max |mu+(e,p) - mu-(e,-p)|"});
  rep.checks.push_back({"p_mu_p_nonpositive", max_pmup <= 0.0, -max_pmup, "max p mu_p (negated)"});
  rep.checks.push_back({"small_mu_p", eps_sup <= eps_threshold, eps_sup,
                        "sup |mu_p|(1+e^gamma)"});
  rep.checks.push_back({"p_mu_p_coercive", coercive > 0.0, coercive,
                        "inf p mu_p / (p^2 e^{-e}) (c0 estimate)"});
  rep.checks.push_back({"mixed_positive", mixed > 0.0, mixed, "min p mu_p + e mu_e"});
  return rep;
}

}  // namespace torvm
