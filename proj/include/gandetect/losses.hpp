#pragma once

#include "gandetect/autodiff.hpp"

#include <vector>

namespace gandetect {

/// 2N latent vectors with a fixed-point-free pairing: row i's positive is
/// row partner[i].
struct LatentBatch {
  std::vector<Var> latents;
  std::vector<std::size_t> partner;

  /// Rows laid out as [a0, b0, a1, b1, ...] with a_k paired to b_k.
  static LatentBatch from_view_pairs(std::vector<Var> latents);
  void validate() const;
};

/// Per-anchor NT-Xent terms
///   l_i = -sim(z_i, z_p(i)) / tau + log sum_{j != i} exp(sim(z_i, z_j) / tau)
/// for rows of `latents` (2N x d), cosine similarity on unnormalized rows.
Eigen::VectorXd nt_xent_terms(const RowMatrix& latents, const std::vector<std::size_t>& partner,
                              double temperature);

/// Mean of the per-anchor terms over all 2N anchors, recorded on the latents' tape.
Var nt_xent_loss(const LatentBatch& batch, double temperature);

/// Binary cross-entropy of a probability, evaluated through its logit.
double bce_loss(double score, int label);
/// softplus(z) - label * z, the cross-entropy of logistic(z) against label.
Var bce_with_logits(Var logit, int label);

}  // namespace gandetect
