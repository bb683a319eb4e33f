#pragma once

// Training losses: per-stage heatmap MSE summed over views, summed
// cross-entropy over the discrete action tokens, the MoE balance loss
// averaged over layers, and their weighted combination.

#include <vector>

#include "atgmoe/action.hpp"
#include "atgmoe/moe.hpp"
#include "atgmoe/tensor.hpp"

namespace atgmoe::pipeline {

using nc::Tensor;

struct LossWeights {
  double lambda1 = 1.0, lambda2 = 1.0, lambda3 = 1.0, lambda4 = 0.01;
};

template <class S>
struct LossBreakdown {
  double l_s1 = 0, l_s2 = 0, l_ar = 0, l_aux = 0;
  LossWeights weights;
  double total = 0;  // always exactly the weighted sum of the components
  Tensor<S> total_tensor;
};

// sum_v MSE(pred_v, gt_v) over matching flattened heatmaps.
template <class S>
Tensor<S> heatmap_loss(const std::vector<Tensor<S>>& pred, const std::vector<Tensor<S>>& gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("heatmap_loss: view count mismatch");
  Tensor<S> total;
  for (size_t v = 0; v < pred.size(); ++v) {
    auto l = nc::mse(pred[v], gt[v]);
    total = total.defined() ? nc::add(total, l) : l;
  }
  return total;
}

// sum_k CE(logits_k, gt bin_k) over the discrete token sequence.
template <class S>
Tensor<S> sequence_ce(const std::vector<Tensor<S>>& token_logits,
                      const ActionTokenSequence& gt) {
  if (token_logits.size() != gt.tokens.size())
    throw std::invalid_argument("sequence_ce: token count mismatch");
  Tensor<S> total;
  for (size_t k = 0; k < token_logits.size(); ++k) {
    auto l = nc::cross_entropy_sum(token_logits[k], {gt.tokens[k].value});
    total = total.defined() ? nc::add(total, l) : l;
  }
  return total;
}

template <class S>
struct SampleLossInputs {
  std::vector<Tensor<S>> coarse_pred, coarse_gt;
  std::vector<Tensor<S>> fine_pred, fine_gt;
  std::vector<Tensor<S>> token_logits;
  ActionTokenSequence gt_tokens;
};

// Full per-sample loss. L_total = l1*L_s1 + l2*L_s2 + l3*L_ar + l4*L_aux,
// with L_aux averaged over the MoE layers present in `records`.
template <class S>
LossBreakdown<S> compute_losses(const SampleLossInputs<S>& in, const moe::RecordSet<S>& records,
                                const LossWeights& w, int64_t experts, double tau) {
  auto l_s1 = heatmap_loss(in.coarse_pred, in.coarse_gt);
  auto l_s2 = heatmap_loss(in.fine_pred, in.fine_gt);
  auto l_ar = sequence_ce(in.token_logits, in.gt_tokens);
  auto l_aux = moe::aux_loss_mean(records, experts, tau);
  LossBreakdown<S> out;
  out.weights = w;
  out.l_s1 = static_cast<double>(l_s1.item());
  out.l_s2 = static_cast<double>(l_s2.item());
  out.l_ar = static_cast<double>(l_ar.item());
  out.l_aux = static_cast<double>(l_aux.item());
  out.total_tensor =
      nc::add(nc::add(nc::scale(l_s1, w.lambda1), nc::scale(l_s2, w.lambda2)),
              nc::add(nc::scale(l_ar, w.lambda3), nc::scale(l_aux, w.lambda4)));
  out.total = w.lambda1 * out.l_s1 + w.lambda2 * out.l_s2 + w.lambda3 * out.l_ar +
              w.lambda4 * out.l_aux;
  return out;
}

}  // namespace atgmoe::pipeline
