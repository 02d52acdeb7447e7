#pragma once

#include <json.hpp>

#include "divrep/metrics/dci.hpp"
#include "divrep/metrics/scores.hpp"

namespace divrep::metrics {

struct MetricReport {
  double mig = 0, sap = 0, irs = 0, fvae = 0, dci = 0;
  std::vector<double> mig_per_factor, sap_per_factor, irs_per_dim, dci_per_dim;
  MetricSettings settings;
  int64_t rows = 0;
  int num_factors = 0;

  void validate() const {
    for (double v : {mig, sap, irs, fvae, dci})
      DIVREP_CHECK(v >= 0.0 && v <= 1.0, "metric scores must lie in [0,1]");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["mig"] = mig;
    j["sap"] = sap;
    j["irs"] = irs;
    j["fvae"] = fvae;
    j["dci"] = dci;
    j["per_factor"] = {{"mig", mig_per_factor}, {"sap", sap_per_factor}};
    j["per_dim"] = {{"irs", irs_per_dim}, {"dci", dci_per_dim}};
    j["estimation"] = {{"rows", rows},
                       {"num_factors", num_factors},
                       {"mig_bins", settings.mig_bins},
                       {"sap_bins", settings.sap_bins},
                       {"fvae_votes", settings.fvae_votes},
                       {"fvae_probe", settings.fvae_probe},
                       {"dci_trees", settings.dci_trees},
                       {"dci_depth", settings.dci_depth},
                       {"seed", settings.seed}};
    return j;
  }
};

inline MetricReport compute_metrics(const CodeFactorTable& table, MetricSettings s = {}) {
  MetricReport r;
  r.settings = s;
  r.rows = table.rows();
  r.num_factors = table.num_factors;
  auto m = mig(table, s.mig_bins);
  r.mig = m.score;
  r.mig_per_factor = m.per_factor;
  auto sp = sap(table, s.sap_bins, s.seed);
  r.sap = sp.score;
  r.sap_per_factor = sp.per_factor;
  auto ir = irs(table);
  r.irs = ir.score;
  r.irs_per_dim = ir.per_dim;
  auto fv = fvae_score(table, s.fvae_votes, s.fvae_probe, s.seed);
  r.fvae = fv.score;
  auto dc = dci_disentanglement(table, s.dci_trees, s.dci_depth, s.seed);
  r.dci = dc.score;
  r.dci_per_dim = dc.per_dim;
  r.validate();
  return r;
}

}  // namespace divrep::metrics
