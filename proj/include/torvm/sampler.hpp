#pragma once

#include "torvm/equilibrium.hpp"
#include "torvm/trajectories.hpp"

#include <cstdint>
#include <vector>

namespace torvm {

// Randomised quasi-Monte Carlo phase-space nodes on the torus cross-section
// times the velocity ball |v| <= vmax. Each node carries the importance weight
// for integrals over Omega x R^3 (toroidal angle included), multiplied by the
// species weight |mu_e^{+-}| at the node.
struct PhaseNode {
  PhaseState z;        // sign is meaningful only for inhomogeneous equilibria
  double weight = 0.0; // sum over the species represented by this node
  // Weight of the toroidal mirror image (v_phi -> -v_phi) when the sample is
  // mirrored; its trajectory is the image of this one.
  double mirror_weight = 0.0;
};

struct SamplerOptions {
  int n_points = 4096;     // quasi-random points (each also used time-reversed)
  std::uint64_t seed = 1;  // random shift of the low-discrepancy sequence
  double vmax = 12.0;
  // Pair every node with its v_phi mirror image when the fields vanish. The
  // free flow commutes with the mirror, so the pair shares one trajectory and
  // the parts odd in v_phi cancel exactly up to the weight difference.
  bool mirror_vphi = true;
};

struct PhaseSample {
  // Homogeneous equilibria share one flow for both species, so each point is
  // a single node with the summed weight; otherwise one node per species.
  std::vector<PhaseNode> nodes;
  bool merged_species = false;
  bool mirrored = false;
};

PhaseSample draw_phase_nodes(const Equilibrium& eq, const SamplerOptions& opt);

// Points (u in [0,1)^dim) of a randomly shifted Sobol sequence.
std::vector<std::vector<double>> shifted_sobol(int n, int dim, std::uint64_t seed);

}  // namespace torvm
