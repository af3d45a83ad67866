#include "gandetect/losses.hpp"

#include "gandetect/errors.hpp"
#include "gandetect/ops.hpp"

#include <cmath>
#include <limits>

namespace gandetect {

namespace {

struct Normalized {
  RowMatrix unit;          // rows scaled to unit length
  Eigen::VectorXd norms;
};

Normalized normalize_rows(const RowMatrix& z) {
  Normalized n{z, z.rowwise().norm()};
  for (Index i = 0; i < z.rows(); ++i) {
    if (!(n.norms[i] > kNormEpsilon)) {
      throw DegenerateInput("nt_xent: latent " + std::to_string(i) + " has norm below 1e-12");
    }
    n.unit.row(i) /= n.norms[i];
  }
  return n;
}

// Row-wise softmax over j != i (diagonal excluded) and the per-anchor terms.
void softmax_terms(const RowMatrix& logits, const std::vector<std::size_t>& partner,
                   RowMatrix& probs, Eigen::VectorXd& terms) {
  const Index m = logits.rows();
  probs = RowMatrix::Zero(m, m);
  terms.resize(m);
  for (Index i = 0; i < m; ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < m; ++j) {
      if (j != i) peak = std::max(peak, logits(i, j));
    }
    double total = 0.0;
    for (Index j = 0; j < m; ++j) {
      if (j == i) continue;
      probs(i, j) = std::exp(logits(i, j) - peak);
      total += probs(i, j);
    }
    probs.row(i) /= total;
    terms[i] = -logits(i, static_cast<Index>(partner[i])) + peak + std::log(total);
  }
}

void check_pairing(std::size_t m, const std::vector<std::size_t>& partner) {
  if (m < 4 || m % 2 != 0) {
    throw ContractViolation("nt_xent: batch needs an even number of at least 4 latents, got " +
                            std::to_string(m));
  }
  if (partner.size() != m) throw ContractViolation("nt_xent: pairing does not cover the batch");
  for (std::size_t i = 0; i < m; ++i) {
    if (partner[i] >= m || partner[i] == i || partner[partner[i]] != i) {
      throw ContractViolation("nt_xent: pairing must be an involution without fixed points");
    }
  }
}

}  // namespace

LatentBatch LatentBatch::from_view_pairs(std::vector<Var> latents) {
  LatentBatch b;
  b.partner.resize(latents.size());
  for (std::size_t i = 0; i < latents.size(); ++i) b.partner[i] = i ^ 1U;
  b.latents = std::move(latents);
  b.validate();
  return b;
}

void LatentBatch::validate() const {
  check_pairing(latents.size(), partner);
  const Shape& shape = latents.front().shape();
  for (const Var& v : latents) {
    if (v.shape() != shape || shape.size() != 1) {
      throw ContractViolation("nt_xent: latents must be vectors of equal length");
    }
    if (v.tape != latents.front().tape) throw ContractViolation("nt_xent: latents on different tapes");
  }
}

Eigen::VectorXd nt_xent_terms(const RowMatrix& latents, const std::vector<std::size_t>& partner,
                              double temperature) {
  if (!(temperature > 0.0)) throw ContractViolation("nt_xent: temperature must be positive");
  check_pairing(static_cast<std::size_t>(latents.rows()), partner);
  const Normalized n = normalize_rows(latents);
  const RowMatrix logits = n.unit * n.unit.transpose() / temperature;
  RowMatrix probs;
  Eigen::VectorXd terms;
  softmax_terms(logits, partner, probs, terms);
  return terms;
}

Var nt_xent_loss(const LatentBatch& batch, double temperature) {
  batch.validate();
  if (!(temperature > 0.0)) throw ContractViolation("nt_xent: temperature must be positive");
  const Index m = static_cast<Index>(batch.latents.size());
  const Index d = batch.latents.front().shape()[0];
  RowMatrix z(m, d);
  for (Index i = 0; i < m; ++i) z.row(i) = batch.latents[i].value().data().transpose();

  Normalized n = normalize_rows(z);
  const RowMatrix logits = n.unit * n.unit.transpose() / temperature;
  RowMatrix probs;
  Eigen::VectorXd terms;
  softmax_terms(logits, batch.partner, probs, terms);
  const double loss = terms.mean();

  Tape& tape = *batch.latents.front().tape;
  return tape.record(
      Tensor::scalar(loss), batch.latents,
      [n = std::move(n), probs = std::move(probs), partner = batch.partner, temperature, m](
          const Tensor& g, const std::vector<Tensor*>& gin) {
        // dL/dlogits = (softmax - onehot(partner)) / m
        RowMatrix dlogits = probs;
        for (Index i = 0; i < m; ++i) dlogits(i, static_cast<Index>(partner[i])) -= 1.0;
        dlogits *= g.item() / static_cast<double>(m);
        const RowMatrix dunit = (dlogits + dlogits.transpose()) * n.unit / temperature;
        for (Index i = 0; i < m; ++i) {
          if (!gin[i]) continue;
          const Eigen::VectorXd u = n.unit.row(i).transpose();
          const Eigen::VectorXd du = dunit.row(i).transpose();
          gin[i]->data() += (du - u.dot(du) * u) / n.norms[i];
        }
      });
}

double bce_loss(double score, int label) {
  if (!(score > 0.0 && score < 1.0)) throw ContractViolation("bce_loss: score must lie in (0, 1)");
  if (label != 0 && label != 1) throw ContractViolation("bce_loss: label must be 0 or 1");
  const double logit = std::log(score) - std::log1p(-score);
  return std::max(logit, 0.0) - label * logit + std::log1p(std::exp(-std::abs(logit)));
}

Var bce_with_logits(Var logit, int label) {
  if (label != 0 && label != 1) throw ContractViolation("bce: label must be 0 or 1");
  const double z = logit.value().item();
  const double loss = std::max(z, 0.0) - label * z + std::log1p(std::exp(-std::abs(z)));
  const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return logit.tape->record(Tensor::scalar(loss), {logit},
                            [p, label](const Tensor& g, const std::vector<Tensor*>& gin) {
                              gin[0]->data().array() += g.item() * (p - label);
                            });
}

}  // namespace gandetect
