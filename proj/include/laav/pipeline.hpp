#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "laav/atoms.hpp"
#include "laav/dataio.hpp"
#include "laav/errors.hpp"
#include "laav/fine2coarse.hpp"
#include "laav/multicut.hpp"
#include "laav/rng.hpp"
#include "laav/rv.hpp"
#include "laav/trajectory.hpp"

namespace laav {

// Every per-stage seed is derived from the single top-level seed, so one knob
// reproduces a whole run.
struct PipelineConfig {
  AtomConstructionConfig atoms;
  FineModelConfig fine;
  VotingParams voting;
  RvParams rv;
  int num_motions = 0;  // C; 0 takes the count stored in the trajectory file
  std::uint64_t seed = 0;
  bool rv_random_init = false;  // plain randomized-voting arm, for comparisons

  // Locked voting assumes the initialization is trustworthy. Above this track
  // noise level the stage labels only warm-start the voting instead.
  double lock_noise_ceiling = 0.25;  // pixels

  PipelineConfig() {
    atoms.min_frame_separation = 0;  // 0 = scale with the sequence length
  }
};

struct PipelineResult {
  Labeling labeling;
  int iterations_used = 0;
  bool converged = false;
  int num_motions = 0;
  int atom_count = 0;
  double coverage = 0.0;  // fraction of features joined to at least one atom
  std::optional<double> error_total;  // only when ground truth is present

  // per-feature snapshots of the intermediate stages (-1 = not yet labeled)
  std::vector<int> stage_fine;
  std::vector<int> stage_coarse;
};

namespace detail {

// Features inherit the label of the atoms containing them; ties go to the
// smallest label.
inline std::vector<int> features_from_atom_labels(std::span<const Atom> atoms,
                                                  const std::vector<int>& atom_labels,
                                                  int feature_count, int label_count) {
  std::vector<int> out(feature_count, -1);
  std::vector<std::vector<int>> votes(feature_count,
                                      std::vector<int>(label_count, 0));
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (int f : atoms[a].feature_ids) ++votes[f][atom_labels[a]];
  for (int f = 0; f < feature_count; ++f) {
    int best = -1, best_votes = 0;
    for (int lbl = 0; lbl < label_count; ++lbl)
      if (votes[f][lbl] > best_votes) {
        best_votes = votes[f][lbl];
        best = lbl;
      }
    out[f] = best;
  }
  return out;
}

}  // namespace detail

// The full engine: atoms -> multicut to 2C fine models -> epipolar voting and
// spectral coarsening to C motions -> moderate randomized voting over the
// features no atom claimed. Falls back to plain randomized voting when the
// scene yields too few atoms (heavy noise does this), matching how the method
// degrades in that regime.
inline PipelineResult run_pipeline(const TrajectorySet& traj,
                                   const PipelineConfig& cfg) {
  traj.validate();
  const int c = (cfg.num_motions > 0) ? cfg.num_motions : traj.num_motions;
  if (c < 1)
    throw std::invalid_argument("pipeline: motion count missing (set C)");
  if (traj.feature_count < 3)
    throw std::invalid_argument("pipeline: need at least 3 features");

  PipelineResult result;
  result.num_motions = c;
  result.stage_fine.assign(traj.feature_count, -1);
  result.stage_coarse.assign(traj.feature_count, -1);

  std::vector<int> initial(traj.feature_count, -1);

  if (!cfg.rv_random_init) {
    AtomConstructionConfig acfg = cfg.atoms;
    if (acfg.min_frame_separation <= 0)
      acfg.min_frame_separation =
          AtomConstructionConfig::defaults_for(traj).min_frame_separation;
    acfg.seed = derive_seed(cfg.seed, "atoms");

    const AtomBuildResult built = build_atoms(traj, acfg);
    result.atom_count = static_cast<int>(built.atoms.size());
    result.coverage =
        1.0 - static_cast<double>(built.unassigned.size()) / traj.feature_count;

    if (result.atom_count >= 2 * c) {
      const std::vector<int> fine =
          fine_models_from_atoms(built.atoms, traj, cfg.fine, 2 * c);
      result.stage_fine = detail::features_from_atom_labels(
          built.atoms, fine, traj.feature_count, 2 * c);

      const std::vector<MotionModel> models =
          assemble_motion_models(built.atoms, fine, 2 * c, traj.frame_count);

      VotingParams vparams = cfg.voting;
      vparams.seed = derive_seed(cfg.seed, "voting");
      const SymmetricMatrix z =
          accumulate_affinity(models, built.atoms, traj, vparams);
      const std::vector<int> coarse =
          coarsen(models, z, c, derive_seed(cfg.seed, "coarsen"));

      std::vector<int> atom_coarse(built.atoms.size());
      for (std::size_t a = 0; a < built.atoms.size(); ++a)
        atom_coarse[a] = coarse[fine[a]];
      result.stage_coarse = detail::features_from_atom_labels(
          built.atoms, atom_coarse, traj.feature_count, c);
      initial = result.stage_coarse;
    }
    // else: too few atoms; every feature stays unlabeled and the voting pass
    // below random-initializes all groups
  }

  RvParams rv = cfg.rv;
  rv.seed = derive_seed(cfg.seed, "rv");
  if (rv.lock_initial && estimate_noise_sigma(traj) >= cfg.lock_noise_ceiling)
    rv.lock_initial = false;
  const FinetuneResult tuned = finetune(traj, initial, c, rv);
  result.labeling = tuned.labeling;
  result.iterations_used = tuned.iterations_used;
  result.converged = tuned.converged;

  if (traj.ground_truth && traj.num_motions == c)
    result.error_total =
        misclassification_error(result.labeling.labels, *traj.ground_truth, c);
  return result;
}

}  // namespace laav
