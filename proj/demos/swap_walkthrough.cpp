// Walkthrough of the detect-and-swap mechanics on a tiny shapes grid:
// sample a weakly supervised pair, rank latent divergences, swap, and show
// the loss terms as a short training run progresses.

#include <cstdio>

#include "divrep/trainer.hpp"

using namespace divrep;

int main() {
  RunConfig cfg;
  cfg.dataset.kind = "shapes_grid";
  cfg.dataset.canvas = 24;
  cfg.dataset.colors = 4;
  cfg.dataset.scales = 2;
  cfg.dataset.pos = 4;
  cfg.model.dim_p = 4;
  cfg.model.dim_nk = 2;
  cfg.model.dim_nu = 2;
  cfg.model.enc_channels = {8, 16};
  cfg.model.fc_dim = 32;
  cfg.model.classifier_hidden = {16};
  cfg.model.projection_hidden = {16};
  cfg.model.projection_dim = 8;
  cfg.seed = 7;

  auto bundle = cfg.dataset.build();
  auto splits = data::make_splits(bundle.grid, bundle.policy);
  VaeModel<float> model(cfg.model.build(bundle), cfg.seed);

  data::PairOptions popt;
  popt.eligible = bundle.pair_eligible;
  popt.allowed = splits.train.allowed_values;
  Rng rng(3);

  auto pair = data::sample_pair(bundle.grid, 1, rng, popt);
  std::printf("pair: k=%d, hidden df = {", pair.k);
  for (size_t i = 0; i < pair.df.size(); ++i)
    std::printf("%s%s", i ? ", " : "", bundle.grid.spec.factors[(size_t)pair.df[i]].name.c_str());
  std::printf("}\n");

  auto show_divergence = [&](const char* tag) {
    Tensorf x({2, 3, 24, 24});
    std::copy(pair.x_l.ptr(), pair.x_l.ptr() + pair.x_l.numel(), x.ptr());
    std::copy(pair.x_m.ptr(), pair.x_m.ptr() + pair.x_m.numel(), x.ptr() + pair.x_l.numel());
    auto code = model.encode(x);
    auto div = pairwise_divergence(code, code, 0, 1);
    auto plan = select_keep_set(div, pair.k, model.partition());
    std::printf("%s per-dim divergence (z_n dims %d..%d):", tag, model.partition().n_begin(),
                model.partition().n_end() - 1);
    for (int d = model.partition().n_begin(); d < model.partition().n_end(); ++d)
      std::printf(" %.3f", div[(size_t)d]);
    std::printf("  -> keep {");
    for (size_t i = 0; i < plan.keep_set.size(); ++i)
      std::printf("%s%d", i ? ", " : "", plan.keep_set[i]);
    std::printf("}\n");
  };
  show_divergence("untrained");

  nn::AdamConfig<float> ocfg;
  nn::Adam<float> cls(model.classifier_params(), ocfg), gen(model.generative_params(), ocfg);
  StepOptions opt;
  Rng prng(11), erng(12);
  LossWeights weights;
  for (int step = 0; step < 120; ++step) {
    auto batch = assemble_pair_batch<float>(bundle.grid, popt, 12, 1, prng);
    opt.num_swap = 1 + step / 30;
    auto terms = alternate_step(model, batch, weights, opt, cls, gen, erng);
    if (step % 30 == 0)
      std::printf("step %3d: recon=%.1f kl=%.2f dis=%.2f sup=%.1f zp=%.2f\n", step,
                  terms.vae_recon, terms.vae_kl, terms.disentangle, terms.contrastive, terms.zp);
  }
  show_divergence("trained  ");
  return 0;
}
