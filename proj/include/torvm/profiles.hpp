#pragma once

#include <string>
#include <vector>

namespace torvm {

// Equilibrium distribution families mu(e, p). Species sign is +1 for ions and
// -1 for electrons.
enum class ProfileFamily { Zero, StableEven, Instability, SmallMuP, LinearTilt };

// How the electron profile is derived from the base function b(e, p).
//   Mirror:    mu+(e,p) = c+ b(e,p),  mu-(e,p) = c- b(e,-p)
//   Identical: mu+(e,p) = c+ b(e,p),  mu-(e,p) = c- b(e,p)
enum class SpeciesMode { Mirror, Identical };

struct ProfileSpec {
  ProfileFamily family = ProfileFamily::Zero;
  SpeciesMode mode = SpeciesMode::Mirror;
  double c_plus = 0.0;
  double c_minus = 0.0;
  double beta = 1.0;   // instability family: (1 + beta p^2) e^{-e}
  double eps = 0.1;    // small-mu_p family: e^{-e}(1 + eps tanh p); linear tilt: (1 + eps p)_+
  double K = 1.0;      // evaluation at (e, K p); K = 0 freezes p at zero
  double gamma = 4.0;  // decay exponent in the envelope C / (1 + e^gamma)
  double c_mu = 0.0;   // decay constant; 0 means "estimate by sampling"
};

ProfileFamily parse_family(const std::string& name);
std::string family_name(ProfileFamily f);
SpeciesMode parse_species_mode(const std::string& name);
std::string species_mode_name(SpeciesMode m);

struct MuValue {
  double mu = 0.0, mu_e = 0.0, mu_p = 0.0;
};

enum class MuPart { Value, DE, DP };

class MuProfile {
 public:
  MuProfile() = default;
  explicit MuProfile(const ProfileSpec& spec);

  const ProfileSpec& spec() const { return spec_; }
  ProfileFamily family() const { return spec_.family; }
  double K() const { return spec_.K; }
  double gamma() const { return spec_.gamma; }
  double c_mu() const { return spec_.c_mu; }
  bool is_zero() const;

  // Value and partial derivatives of mu^sign at (e, p); e >= 1 is required.
  MuValue eval(int sign, double e, double p) const;
  double evaluate(int sign, double e, double p, MuPart which) const;

  // Same evaluation without the domain check (used on hot paths where e >= 1
  // holds by construction up to rounding).
  MuValue eval_unchecked(int sign, double e, double p) const;

  // Profile evaluated at (e, K p).
  MuProfile scale_in_p(double K) const;

  // Estimate of sup (|mu| + |mu_e| + |mu_p|)(1 + e^gamma) over the reachable
  // set for major radius a and field bound amax = sup |A_phi|.
  double sampled_decay_constant(double a, double amax = 0.0) const;

 private:
  ProfileSpec spec_;
};

struct HypothesisCheck {
  std::string name;
  bool holds = false;
  double margin = 0.0;  // sampled worst case; sign convention per check
  std::string detail;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;
  const HypothesisCheck& get(const std::string& name) const;
  bool holds(const std::string& name) const { return get(name).holds; }
};

// Sampled checks on a deterministic (e, p) lattice covering the kinematically
// reachable set |p| <= (a + 1)(sqrt(e^2 - 1) + amax), 1 <= e <= e_max.
//   decay, nonnegative, monotone, mirror_symmetry, p_mu_p_nonpositive,
//   small_mu_p (eps threshold), p_mu_p_coercive, mixed_positive.
HypothesisReport validate_hypotheses(const MuProfile& profile, double a, double amax = 0.0,
                                     double eps_threshold = 0.05);

}  // namespace torvm
