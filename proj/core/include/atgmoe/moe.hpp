#pragma once

// Mixture-of-experts feed-forward with per-skill routers, top-k sparse
// gating, shared experts, a learned per-skill mixing coefficient, and the
// load-balancing auxiliary loss.
//
// Routing per token: softmax over the skill's router logits, keep the k_top
// strongest experts with their softmax weights (no renormalization after
// truncation; ties break toward the lowest expert index). The layer output
// mixes the routed combination with the mean of the shared experts through
// alpha = sigmoid(per-skill logit). The residual connection is applied by
// the caller.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "atgmoe/config.hpp"
#include "atgmoe/nn.hpp"
#include "atgmoe/param_store.hpp"
#include "atgmoe/random.hpp"
#include "atgmoe/tensor.hpp"

namespace atgmoe::moe {

using nc::Tensor;

// Per-token routing statistics accumulated over a batch. Soft probabilities
// stay live graph nodes so the auxiliary loss backpropagates into routers;
// hard assignments are constants by definition.
template <class S>
struct RoutingRecord {
  std::vector<Tensor<S>> soft;            // each [1, E]
  std::vector<std::vector<double>> hard;  // each length E with k_top ones
  std::vector<std::string> skills;        // token provenance, for stats export
  int64_t expert_calls = 0;               // routed-expert evaluations (sparsity check)

  size_t token_count() const { return soft.size(); }

  void merge(RoutingRecord&& o) {
    soft.insert(soft.end(), std::make_move_iterator(o.soft.begin()),
                std::make_move_iterator(o.soft.end()));
    hard.insert(hard.end(), o.hard.begin(), o.hard.end());
    skills.insert(skills.end(), o.skills.begin(), o.skills.end());
    expert_calls += o.expert_calls;
  }
};

struct TopK {
  std::vector<int64_t> indices;  // ascending by selection order (max first)
};

// Deterministic top-k of a probability row; strict > keeps the lowest index
// on ties.
inline TopK top_k_select(const std::vector<double>& probs, int64_t k) {
  TopK out;
  std::vector<bool> taken(probs.size(), false);
  for (int64_t pick = 0; pick < k; ++pick) {
    int64_t best = -1;
    double best_v = -1.0;
    for (size_t e = 0; e < probs.size(); ++e) {
      if (taken[e]) continue;
      if (probs[e] > best_v) {
        best_v = probs[e];
        best = static_cast<int64_t>(e);
      }
    }
    taken[static_cast<size_t>(best)] = true;
    out.indices.push_back(best);
  }
  return out;
}

template <class S>
class MoeLayer {
 public:
  MoeLayer(nc::ParamStore<S>& store, const std::string& prefix, int64_t dim, const MoeConfig& cfg,
           const std::vector<std::string>& skills, Rng& rng)
      : dim_(dim), experts_(cfg.experts), k_top_(cfg.k_top), shared_(cfg.shared), tau_(cfg.tau) {
    for (int64_t e = 0; e < experts_; ++e) {
      std::string p = prefix + ".expert" + std::to_string(e);
      ew1_.push_back(store.add(p + ".w1", {dim, cfg.hidden}, rng, 0.02));
      eb1_.push_back(store.add_constant_init(p + ".b1", {cfg.hidden}, S(0)));
      ew2_.push_back(store.add(p + ".w2", {cfg.hidden, dim}, rng, 0.02));
      eb2_.push_back(store.add_constant_init(p + ".b2", {dim}, S(0)));
    }
    for (int64_t e = 0; e < shared_; ++e) {
      std::string p = prefix + ".shared" + std::to_string(e);
      sw1_.push_back(store.add(p + ".w1", {dim, cfg.hidden}, rng, 0.02));
      sb1_.push_back(store.add_constant_init(p + ".b1", {cfg.hidden}, S(0)));
      sw2_.push_back(store.add(p + ".w2", {cfg.hidden, dim}, rng, 0.02));
      sb2_.push_back(store.add_constant_init(p + ".b2", {dim}, S(0)));
    }
    for (const auto& skill : skills) {
      router_[skill] = store.add(prefix + ".router." + skill, {dim, experts_}, rng, 0.02);
      // logit 0 => alpha 0.5, both paths train from the start
      alpha_logit_[skill] = store.add_constant_init(prefix + ".alpha." + skill, {1}, S(0));
    }
  }

  int64_t experts() const { return experts_; }
  int64_t k_top() const { return k_top_; }
  double tau() const { return tau_; }

  const Tensor<S>& router(const std::string& skill) const {
    auto it = router_.find(skill);
    if (it == router_.end()) throw std::invalid_argument("moe: unregistered skill '" + skill + "'");
    return it->second;
  }
  const Tensor<S>& alpha_logit(const std::string& skill) const {
    auto it = alpha_logit_.find(skill);
    if (it == alpha_logit_.end())
      throw std::invalid_argument("moe: unregistered skill '" + skill + "'");
    return it->second;
  }

  // Softmax routing for a single token row [1, dim]; returns the live soft
  // distribution and the hard top-k selection.
  std::pair<Tensor<S>, TopK> route(const Tensor<S>& x_row, const std::string& skill) const {
    auto probs = nc::softmax(nc::matmul(x_row, router(skill)), 1);
    std::vector<double> pv(probs.values().begin(), probs.values().end());
    return {probs, top_k_select(pv, k_top_)};
  }

  // Full layer forward for a [T, dim] sequence; appends to `record`.
  Tensor<S> forward(const Tensor<S>& x, const std::string& skill, RoutingRecord<S>& record) const {
    int64_t t = x.size(0);
    auto alpha = nc::reshape(nc::sigmoid(alpha_logit(skill)), {1, 1});
    auto one_minus = nc::sub(Tensor<S>::full({1, 1}, S(1)), alpha);
    std::vector<Tensor<S>> rows;
    rows.reserve(static_cast<size_t>(t));
    for (int64_t i = 0; i < t; ++i) {
      auto xi = nc::slice(x, 0, i, 1);
      auto [soft, sel] = route(xi, skill);

      Tensor<S> y_router;
      for (int64_t e : sel.indices) {
        auto w_e = nc::slice(soft, 1, e, 1);  // [1,1], stays in the graph
        auto y_e = nn::mlp2(xi, ew1_[static_cast<size_t>(e)], eb1_[static_cast<size_t>(e)],
                            ew2_[static_cast<size_t>(e)], eb2_[static_cast<size_t>(e)]);
        auto contrib = nc::mul(y_e, w_e);
        y_router = y_router.defined() ? nc::add(y_router, contrib) : contrib;
        record.expert_calls++;
      }

      Tensor<S> y_se;
      for (int64_t e = 0; e < shared_; ++e) {
        auto y_e = nn::mlp2(xi, sw1_[static_cast<size_t>(e)], sb1_[static_cast<size_t>(e)],
                            sw2_[static_cast<size_t>(e)], sb2_[static_cast<size_t>(e)]);
        y_se = y_se.defined() ? nc::add(y_se, y_e) : y_e;
      }
      y_se = nc::scale(y_se, 1.0 / static_cast<double>(shared_));

      rows.push_back(nc::add(nc::mul(y_router, alpha), nc::mul(y_se, one_minus)));

      std::vector<double> hard(static_cast<size_t>(experts_), 0.0);
      for (int64_t e : sel.indices) hard[static_cast<size_t>(e)] = 1.0;
      record.soft.push_back(soft);
      record.hard.push_back(std::move(hard));
      record.skills.push_back(skill);
    }
    return nc::concat(rows, 0);
  }

  // Gradient norms for the isolation checks.
  double router_grad_norm(const std::string& skill) const { return grad_norm(router(skill)); }
  double alpha_grad_norm(const std::string& skill) const { return grad_norm(alpha_logit(skill)); }
  double shared_grad_norm() const {
    double s = 0;
    for (const auto& w : sw1_) s += grad_norm(w);
    for (const auto& w : sw2_) s += grad_norm(w);
    return s;
  }

 private:
  static double grad_norm(const Tensor<S>& t) {
    double s = 0;
    for (S g : t.grads()) s += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(s);
  }

  int64_t dim_, experts_, k_top_, shared_;
  double tau_;
  std::vector<Tensor<S>> ew1_, eb1_, ew2_, eb2_;
  std::vector<Tensor<S>> sw1_, sb1_, sw2_, sb2_;
  std::map<std::string, Tensor<S>> router_;
  std::map<std::string, Tensor<S>> alpha_logit_;
};

// Per-layer record collection for a forward pass or a whole batch.
template <class S>
struct RecordSet {
  std::map<std::string, RoutingRecord<S>> by_layer;

  RoutingRecord<S>& layer(const std::string& id) { return by_layer[id]; }

  void merge(RecordSet&& o) {
    for (auto& [id, rec] : o.by_layer) by_layer[id].merge(std::move(rec));
  }
  size_t token_count() const {
    size_t n = 0;
    for (const auto& [id, rec] : by_layer) n += rec.token_count();
    return n;
  }
  int64_t expert_calls() const {
    int64_t n = 0;
    for (const auto& [id, rec] : by_layer) n += rec.expert_calls;
    return n;
  }
};

// Load-balance loss over an accumulated record:
//   P_e = mean soft probability, F_e = mean hard assignment,
//   loss = max(0, (sum_e P_e F_e - tau) / (E - 1)).
// The sum runs over all E experts; with E = 1 the loss is defined as 0.
template <class S>
Tensor<S> aux_loss(const RoutingRecord<S>& record, int64_t experts, double tau) {
  if (record.token_count() == 0) throw std::invalid_argument("moe: aux_loss over empty record");
  if (experts <= 1) return Tensor<S>::scalar(S(0));
  auto soft_all = nc::concat(record.soft, 0);      // [N, E]
  auto p = nc::mean(soft_all, {0});                // [E]
  std::vector<S> f(static_cast<size_t>(experts), S(0));
  for (const auto& h : record.hard)
    for (size_t e = 0; e < h.size(); ++e) f[e] += static_cast<S>(h[e]);
  for (auto& v : f) v /= static_cast<S>(record.token_count());
  auto f_t = Tensor<S>::from_data({experts}, std::move(f));
  auto dot = nc::sum(nc::mul(p, f_t));
  auto shifted = nc::sub(dot, Tensor<S>::scalar(static_cast<S>(tau)));
  return nc::relu(nc::scale(shifted, 1.0 / static_cast<double>(experts - 1)));
}

// Mean of the per-layer auxiliary losses over every layer holding tokens.
template <class S>
Tensor<S> aux_loss_mean(const RecordSet<S>& records, int64_t experts, double tau) {
  Tensor<S> total;
  int64_t n = 0;
  for (const auto& [id, rec] : records.by_layer) {
    if (rec.token_count() == 0) continue;
    auto l = aux_loss(rec, experts, tau);
    total = total.defined() ? nc::add(total, l) : l;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("moe: aux_loss_mean over empty record set");
  return nc::scale(total, 1.0 / static_cast<double>(n));
}

}  // namespace atgmoe::moe
