#include "torvm/profiles.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace torvm;

namespace {

ProfileSpec spec(ProfileFamily f, SpeciesMode m, double c = 0.1) {
  ProfileSpec s;
  s.family = f;
  s.mode = m;
  s.c_plus = c;
  s.c_minus = 0.7 * c;
  s.beta = 1.5;
  s.eps = 0.2;
  s.K = 1.3;
  return s;
}

const ProfileFamily kFamilies[] = {ProfileFamily::StableEven, ProfileFamily::Instability, ProfileFamily::SmallMuP,
                                   ProfileFamily::LinearTilt};

}  // namespace

TEST_CASE("family and mode names round-trip") {
  for (auto f : {ProfileFamily::Zero, ProfileFamily::StableEven, ProfileFamily::Instability, ProfileFamily::SmallMuP,
                 ProfileFamily::LinearTilt})
    CHECK(parse_family(family_name(f)) == f);
  CHECK(parse_species_mode("mirror") == SpeciesMode::Mirror);
  CHECK(parse_species_mode(species_mode_name(SpeciesMode::Identical)) == SpeciesMode::Identical);
  CHECK_THROWS(parse_family("bogus"));
  CHECK_THROWS(parse_species_mode("bogus"));
}

TEST_CASE("partial derivatives agree with central differences") {
  const double h = 1e-6;
  for (auto f : kFamilies)
    for (auto m : {SpeciesMode::Mirror, SpeciesMode::Identical}) {
      const MuProfile prof(spec(f, m));
      for (int sg : {1, -1})
        for (double e : {1.2, 2.0, 3.5})
          for (double p : {-1.7, -0.3, 0.4, 2.2}) {
            const MuValue v = prof.eval(sg, e, p);
            const double de = (prof.eval(sg, e + h, p).mu - prof.eval(sg, e - h, p).mu) / (2 * h);
            const double dp = (prof.eval(sg, e, p + h).mu - prof.eval(sg, e, p - h).mu) / (2 * h);
            CHECK(v.mu_e == doctest::Approx(de).epsilon(1e-6).scale(1e-3));
            CHECK(v.mu_p == doctest::Approx(dp).epsilon(1e-6).scale(1e-3));
            CHECK(prof.evaluate(sg, e, p, MuPart::DP) == v.mu_p);
          }
    }
}

TEST_CASE("mirror mode maps p to -p between species") {
  for (auto f : kFamilies) {
    ProfileSpec s = spec(f, SpeciesMode::Mirror);
    s.c_minus = s.c_plus;
    const MuProfile prof(s);
    for (double p : {-2.0, 0.5, 1.1}) {
      CHECK(prof.eval(-1, 1.5, p).mu == doctest::Approx(prof.eval(1, 1.5, -p).mu));
      CHECK(prof.eval(-1, 1.5, p).mu_p == doctest::Approx(-prof.eval(1, 1.5, -p).mu_p));
    }
    CHECK(validate_hypotheses(prof, 3.0).holds("mirror_symmetry"));
  }
}

TEST_CASE("K scaling evaluates the base profile at K p") {
  ProfileSpec s = spec(ProfileFamily::Instability, SpeciesMode::Identical);
  s.K = 1.0;
  const MuProfile one(s);
  const MuProfile scaled = one.scale_in_p(2.5);
  CHECK(scaled.K() == doctest::Approx(2.5));
  CHECK(scaled.eval(1, 1.4, 0.8).mu == doctest::Approx(one.eval(1, 1.4, 2.0).mu));
  CHECK(scaled.eval(1, 1.4, 0.8).mu_p == doctest::Approx(2.5 * one.eval(1, 1.4, 2.0).mu_p));
  CHECK_THROWS(one.scale_in_p(0.0));
}

TEST_CASE("K = 0 freezes the momentum dependence") {
  ProfileSpec s = spec(ProfileFamily::Instability, SpeciesMode::Mirror);
  s.K = 0.0;
  const MuProfile prof(s);
  CHECK(prof.eval(1, 2.0, 5.0).mu == doctest::Approx(prof.eval(1, 2.0, 0.0).mu));
  CHECK(prof.eval(1, 2.0, 5.0).mu_p == 0.0);
}

TEST_CASE("invalid specifications and energies are rejected") {
  ProfileSpec s = spec(ProfileFamily::StableEven, SpeciesMode::Mirror);
  s.c_plus = -1.0;
  CHECK_THROWS(MuProfile(s));
  s = spec(ProfileFamily::StableEven, SpeciesMode::Mirror);
  s.gamma = 3.0;
  CHECK_THROWS(MuProfile(s));
  const MuProfile prof(spec(ProfileFamily::StableEven, SpeciesMode::Mirror));
  CHECK_THROWS_AS(prof.eval(1, 0.9, 0.0), std::domain_error);
}

TEST_CASE("zero profile") {
  const MuProfile z(ProfileSpec{});
  CHECK(z.is_zero());
  CHECK(z.eval(1, 2.0, 1.0).mu == 0.0);
  ProfileSpec s = spec(ProfileFamily::StableEven, SpeciesMode::Mirror, 0.0);
  s.c_minus = 0.0;
  CHECK(MuProfile(s).is_zero());
}

TEST_CASE("hypothesis flags per family") {
  const double a = 3.0;
  const auto even = validate_hypotheses(MuProfile(spec(ProfileFamily::StableEven, SpeciesMode::Mirror)), a);
  CHECK(even.holds("nonnegative"));
  CHECK(even.holds("monotone"));
  CHECK(even.holds("p_mu_p_nonpositive"));

  const auto inst = validate_hypotheses(MuProfile(spec(ProfileFamily::Instability, SpeciesMode::Mirror)), a);
  CHECK(inst.holds("monotone"));
  CHECK_FALSE(inst.holds("p_mu_p_nonpositive"));

  ProfileSpec sm = spec(ProfileFamily::SmallMuP, SpeciesMode::Mirror, 0.1);
  sm.eps = 0.01;
  CHECK(validate_hypotheses(MuProfile(sm), a).holds("small_mu_p"));
  sm.eps = 5.0;
  sm.c_plus = sm.c_minus = 1.0;
  CHECK_FALSE(validate_hypotheses(MuProfile(sm), a).holds("small_mu_p"));
  CHECK_THROWS(even.get("no_such_check"));
}

TEST_CASE("sampled decay constant bounds the envelope") {
  const MuProfile prof(spec(ProfileFamily::Instability, SpeciesMode::Mirror));
  const double c = prof.sampled_decay_constant(3.0);
  CHECK(c > 0.0);
  // (1, 0) is a lattice point.
  const MuValue v = prof.eval(1, 1.0, 0.0);
  CHECK((std::abs(v.mu) + std::abs(v.mu_e) + std::abs(v.mu_p)) * 2.0 <= c * (1 + 1e-12));
  CHECK(prof.sampled_decay_constant(3.0, 0.5) >= c);
}
