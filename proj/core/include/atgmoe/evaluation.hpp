#pragma once

// Seeded benchmark runs over the toy suite and the routing-statistics
// export. Reports carry the config hash and seed so results are fully
// reproducible from the report alone.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "atgmoe/episode.hpp"
#include "atgmoe/policy.hpp"
#include <json.hpp>

namespace atgmoe::pipeline {

struct SkillScore {
  int cases = 0;
  int grasp = 0, overall = 0, collisions = 0;
  double success_steps_sum = 0;

  double gsr_pct() const { return 100.0 * grasp / std::max(1, cases); }
  double osr_pct() const { return 100.0 * overall / std::max(1, cases); }
  double collision_pct() const { return 100.0 * collisions / std::max(1, cases); }
  std::optional<double> avg_success_step() const {
    if (overall == 0) return std::nullopt;
    return success_steps_sum / overall;
  }
};

template <class S>
nlohmann::json benchmark(const PolicyModel<S>& model, const std::vector<std::string>& skills,
                         Difficulty difficulty, int n_cases, uint64_t seed,
                         const Vocabulary& vocab, const std::string& router_skill = "") {
  const auto& cfg = model.config();
  auto cameras = physical_cameras(static_cast<int>(cfg.env.cameras),
                                  static_cast<int>(cfg.env.camera_w),
                                  static_cast<int>(cfg.env.camera_h), cfg.env.workspace);
  nlohmann::json skills_json = nlohmann::json::object();
  SkillScore agg;
  for (const auto& skill : skills) {
    SkillScore score;
    score.cases = n_cases;
    for (int c = 0; c < n_cases; ++c) {
      uint64_t case_seed = seed * 1000003ULL + static_cast<uint64_t>(c);
      SceneState scene = generate_scene(skill, difficulty, case_seed);
      EpisodeOptions opt;
      opt.router_skill = router_skill;
      auto outcome = run_episode(model, std::move(scene), cameras, vocab, opt);
      score.grasp += outcome.metrics.grasp_success ? 1 : 0;
      score.overall += outcome.metrics.overall_success ? 1 : 0;
      score.collisions += outcome.metrics.collision ? 1 : 0;
      if (outcome.metrics.steps_to_success)
        score.success_steps_sum += *outcome.metrics.steps_to_success;
    }
    nlohmann::json sj = {{"cases", score.cases},
                         {"gsr_pct", score.gsr_pct()},
                         {"osr_pct", score.osr_pct()},
                         {"collision_pct", score.collision_pct()}};
    if (auto avg = score.avg_success_step())
      sj["avg_success_step"] = *avg;
    else
      sj["avg_success_step"] = nullptr;
    skills_json[skill] = sj;
    agg.cases += score.cases;
    agg.grasp += score.grasp;
    agg.overall += score.overall;
    agg.collisions += score.collisions;
    agg.success_steps_sum += score.success_steps_sum;
  }
  nlohmann::json report;
  report["config_hash"] = cfg.config_hash();
  report["seed"] = seed;
  report["difficulty"] = difficulty == Difficulty::Easy ? "easy" : "hard";
  report["cases_per_skill"] = n_cases;
  if (!router_skill.empty()) report["router_skill"] = router_skill;
  report["skills"] = skills_json;
  report["aggregate"] = {{"gsr_pct", agg.gsr_pct()},
                         {"osr_pct", agg.osr_pct()},
                         {"collision_pct", agg.collision_pct()},
                         {"avg_success_step", agg.overall
                                                  ? nlohmann::json(agg.success_steps_sum / agg.overall)
                                                  : nlohmann::json(nullptr)}};
  return report;
}

inline void print_benchmark_table(std::ostream& os, const nlohmann::json& report) {
  os << "difficulty: " << report.at("difficulty").get<std::string>()
     << "  cases/skill: " << report.at("cases_per_skill").get<int>() << "\n";
  os << std::left << std::setw(20) << "skill" << std::right << std::setw(10) << "GSR%"
     << std::setw(10) << "OSR%" << std::setw(12) << "Coll%" << std::setw(14) << "AvgStep"
     << "\n";
  auto row = [&](const std::string& name, const nlohmann::json& s) {
    os << std::left << std::setw(20) << name << std::right << std::fixed << std::setprecision(2)
       << std::setw(10) << s.at("gsr_pct").get<double>() << std::setw(10)
       << s.at("osr_pct").get<double>() << std::setw(12) << s.at("collision_pct").get<double>();
    if (s.at("avg_success_step").is_null())
      os << std::setw(14) << "-";
    else
      os << std::setw(14) << s.at("avg_success_step").get<double>();
    os << "\n";
  };
  for (auto it = report.at("skills").begin(); it != report.at("skills").end(); ++it)
    row(it.key(), it.value());
  row("(aggregate)", report.at("aggregate"));
}

// Routing statistics grouped by (layer, skill): mean soft probability P_e,
// hard assignment frequency F_e, and the skill's mixing coefficient alpha.
template <class S>
void write_routing_csv(std::ostream& os, const moe::RecordSet<S>& records,
                       const PolicyModel<S>& model, int64_t step) {
  os << "step,layer,skill,expert,P_e,F_e,alpha_e\n";
  const auto& cfg = model.config();
  for (const auto& [layer_id, rec] : records.by_layer) {
    const ccmt::CcmtDecoder<S>* dec = model.decoder_for_layer(layer_id);
    if (!dec) continue;
    int64_t block = 0;
    auto pos = layer_id.rfind(".block");
    if (pos != std::string::npos) block = std::stoll(layer_id.substr(pos + 6));
    const auto& layer = dec->moe_layer(block);

    std::vector<std::string> seen;
    for (const auto& s : rec.skills)
      if (std::find(seen.begin(), seen.end(), s) == seen.end()) seen.push_back(s);
    for (const auto& skill : seen) {
      std::vector<double> p(static_cast<size_t>(cfg.moe.experts), 0.0);
      std::vector<double> f(static_cast<size_t>(cfg.moe.experts), 0.0);
      int64_t n = 0;
      for (size_t t = 0; t < rec.skills.size(); ++t) {
        if (rec.skills[t] != skill) continue;
        const auto& soft = rec.soft[t].values();
        for (size_t e = 0; e < p.size(); ++e) {
          p[e] += static_cast<double>(soft[e]);
          f[e] += rec.hard[t][e];
        }
        ++n;
      }
      if (n == 0) continue;
      double alpha = 1.0 / (1.0 + std::exp(-static_cast<double>(
                                layer.alpha_logit(skill).values()[0])));
      for (size_t e = 0; e < p.size(); ++e)
        os << step << "," << layer_id << "," << skill << "," << e << "," << p[e] / n << ","
           << f[e] / n << "," << alpha << "\n";
    }
  }
}

}  // namespace atgmoe::pipeline
