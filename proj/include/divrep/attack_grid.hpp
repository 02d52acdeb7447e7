#pragma once

#include <json.hpp>

#include "divrep/attacks.hpp"
#include "divrep/config.hpp"

namespace divrep {

// Attack sweep description: {"attacks": [{"kind": "fgsm", "epsilon": 0.1}, ...]}
inline std::vector<AttackConfig> parse_attack_grid(const json& j) {
  check_keys(j, "attack grid", {"attacks"});
  DIVREP_CHECK_CFG(j.contains("attacks") && j.at("attacks").is_array(),
                   "attack grid needs an 'attacks' array");
  std::vector<AttackConfig> out;
  for (const auto& a : j.at("attacks")) {
    check_keys(a, "attack",
               {"kind", "epsilon", "steps", "step_size", "random_start", "c", "iters", "lr",
                "kappa"});
    AttackConfig cfg;
    std::string kind = a.at("kind").get<std::string>();
    if (kind == "fgsm")
      cfg.kind = AttackConfig::Kind::fgsm;
    else if (kind == "pgd")
      cfg.kind = AttackConfig::Kind::pgd;
    else if (kind == "cw")
      cfg.kind = AttackConfig::Kind::cw;
    else
      throw ConfigError("unknown attack kind: " + kind);
    cfg.epsilon = get_or(a, "epsilon", cfg.epsilon);
    cfg.pgd_steps = get_or(a, "steps", cfg.pgd_steps);
    cfg.pgd_step_size = get_or(a, "step_size", cfg.pgd_step_size);
    cfg.pgd_random_start = get_or(a, "random_start", cfg.pgd_random_start);
    cfg.cw_c = get_or(a, "c", cfg.cw_c);
    cfg.cw_iters = get_or(a, "iters", cfg.cw_iters);
    cfg.cw_lr = get_or(a, "lr", cfg.cw_lr);
    cfg.cw_kappa = get_or(a, "kappa", cfg.cw_kappa);
    cfg.validate();
    out.push_back(cfg);
  }
  DIVREP_CHECK_CFG(!out.empty(), "attack grid is empty");
  return out;
}

// default sweep: FGSM epsilon grid + the paper's PGD budgets + C&W c sweep
inline std::vector<AttackConfig> default_attack_grid() {
  std::vector<AttackConfig> out;
  for (double eps : {0.05, 0.1, 0.15, 0.2, 0.25, 0.3}) {
    AttackConfig c;
    c.kind = AttackConfig::Kind::fgsm;
    c.epsilon = eps;
    out.push_back(c);
  }
  for (double eps : {0.1, 0.2}) {
    AttackConfig c;
    c.kind = AttackConfig::Kind::pgd;
    c.epsilon = eps;
    out.push_back(c);
  }
  for (double cc : {0.01, 0.1, 1.0}) {
    AttackConfig c;
    c.kind = AttackConfig::Kind::cw;
    c.cw_c = cc;
    out.push_back(c);
  }
  return out;
}

}  // namespace divrep
