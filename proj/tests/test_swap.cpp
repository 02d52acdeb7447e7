#include <catch2/catch_amalgamated.hpp>

#include "divrep/swap.hpp"

using namespace divrep;

namespace {

const LatentPartition kPart{.dim_p = 2, .dim_nk = 2, .dim_nu = 2};  // d_z = 6, z_n = dims 2..5

GaussianCode<double> make_code(std::vector<double> mu, std::vector<double> lv,
                               LatentPartition p = kPart) {
  GaussianCode<double> c{Tensor<double>({1, static_cast<int64_t>(mu.size())}),
                         Tensor<double>({1, static_cast<int64_t>(lv.size())}), p};
  c.mu.data.assign(mu.begin(), mu.end());
  c.log_var.data.assign(lv.begin(), lv.end());
  return c;
}

}  // namespace

TEST_CASE("pairwise divergence closed forms") {
  SECTION("identical codes give the exact zero vector") {
    auto a = make_code({0.3, -1, 0.5, 2, -0.7, 0.1}, {0.2, 0, -0.5, 1, 0.3, -0.2});
    auto div = pairwise_divergence(a, a);
    for (double v : div) REQUIRE(v == 0.0);
  }
  SECTION("N(0,1) vs N(1,1) = 0.5") {
    auto a = make_code({0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0});
    auto b = make_code({1, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0});
    auto div = pairwise_divergence(a, b);
    REQUIRE(std::abs(div[0] - 0.5) < 1e-12);
    for (size_t d = 1; d < 6; ++d) REQUIRE(div[d] == 0.0);
  }
  SECTION("N(0,1) vs N(0,4) = log2 + 1/8 - 1/2") {
    auto a = make_code({0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0});
    auto b = make_code({0, 0, 0, 0, 0, 0}, {std::log(4.0), 0, 0, 0, 0, 0});
    auto div = pairwise_divergence(a, b);
    REQUIRE(std::abs(div[0] - (std::log(2.0) + 0.125 - 0.5)) < 1e-12);
  }
  SECTION("printed variant differs from the standard form") {
    auto a = make_code({0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0});
    auto b = make_code({0, 0, 0, 0, 0, 0}, {std::log(4.0), 0, 0, 0, 0, 0});
    DivergenceOptions printed{.form = DivergenceForm::printed};
    auto div = pairwise_divergence(a, b, printed);
    // (1 + 0)/2 + log(1/2) - 1/2 = -log 2
    REQUIRE(std::abs(div[0] - (-std::log(2.0))) < 1e-12);
  }
  SECTION("symmetric option averages both directions") {
    auto a = make_code({0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0});
    auto b = make_code({1, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0});
    DivergenceOptions sym{.symmetric = true};
    REQUIRE(std::abs(pairwise_divergence(a, b, sym)[0] - 0.5) < 1e-12);
  }
  SECTION("non-finite codes are a numeric error") {
    auto a = make_code({0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0});
    auto b = a;
    b.mu[0] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(pairwise_divergence(a, b), NumericError);
  }
}

TEST_CASE("select_keep_set") {
  std::vector<double> div(6, 0.0);
  SECTION("argmax on z_n with k=1") {
    div = {9, 9, 0.9, 0.1, 0.1, 0.1};  // z_p entries must be ignored
    auto plan = select_keep_set(div, 1, kPart);
    REQUIRE(plan.keep_set == std::vector<int>{2});
    REQUIRE(plan.swap_set == std::vector<int>{3, 4, 5});
    REQUIRE(plan.active_swap == plan.swap_set);
    REQUIRE(plan.num_swapped == 3);
  }
  SECTION("k = |z_n| leaves nothing to swap") {
    auto plan = select_keep_set(div, 4, kPart);
    REQUIRE(plan.keep_set == std::vector<int>{2, 3, 4, 5});
    REQUIRE(plan.swap_set.empty());
    REQUIRE(plan.num_swapped == 0);
  }
  SECTION("exact tie at rank k keeps the lowest index") {
    div = {0, 0, 0.5, 0.7, 0.5, 0.1};
    auto plan = select_keep_set(div, 2, kPart);
    REQUIRE(plan.keep_set == std::vector<int>{2, 3});
  }
  SECTION("amount curriculum swaps the lowest-divergence dims first") {
    div = {0, 0, 0.9, 0.5, 0.2, 0.3};
    auto plan = select_keep_set(div, 1, kPart, 2);
    REQUIRE(plan.keep_set == std::vector<int>{2});
    REQUIRE(plan.swap_set == std::vector<int>{3, 4, 5});
    REQUIRE(plan.active_swap == std::vector<int>{4, 5});
    REQUIRE(plan.num_swapped == 2);
  }
  SECTION("k out of range") {
    REQUIRE_THROWS_AS(select_keep_set(div, 0, kPart), ArgError);
    REQUIRE_THROWS_AS(select_keep_set(div, 5, kPart), ArgError);
  }
}

TEST_CASE("swap_latents algebra") {
  Rng rng(77);
  auto random_code = [&] {
    GaussianCode<double> c{Tensor<double>({1, 6}), Tensor<double>({1, 6}), kPart};
    rng.fill_normal(c.mu, 2.0);
    rng.fill_normal(c.log_var, 1.0);
    return c;
  };
  SECTION("double swap restores the pair bit-exactly, 10000 trials") {
    for (int trial = 0; trial < 10000; ++trial) {
      auto a = random_code(), b = random_code();
      auto div = pairwise_divergence(a, b);
      auto plan = select_keep_set(div, 1 + static_cast<int>(rng.below(4)), kPart);
      auto [a1, b1] = swap_latents(a, b, plan);
      auto [a2, b2] = swap_latents(a1, b1, plan);
      REQUIRE(a2.mu.data == a.mu.data);
      REQUIRE(a2.log_var.data == a.log_var.data);
      REQUIRE(b2.mu.data == b.mu.data);
      REQUIRE(b2.log_var.data == b.log_var.data);
    }
  }
  SECTION("empty swap set exchanges exactly the z_p slices") {
    auto a = random_code(), b = random_code();
    auto plan = select_keep_set(pairwise_divergence(a, b), 4, kPart);
    auto [ah, bh] = swap_latents(a, b, plan);
    for (int d = 0; d < 2; ++d) {
      REQUIRE(ah.mu.at2(0, d) == b.mu.at2(0, d));
      REQUIRE(bh.mu.at2(0, d) == a.mu.at2(0, d));
    }
    for (int d = 2; d < 6; ++d) {
      REQUIRE(ah.mu.at2(0, d) == a.mu.at2(0, d));
      REQUIRE(bh.mu.at2(0, d) == b.mu.at2(0, d));
    }
  }
  SECTION("plan covering all z_n is a full code exchange") {
    auto a = random_code(), b = random_code();
    SwapPlan plan;
    plan.swap_set = {2, 3, 4, 5};
    plan.active_swap = plan.swap_set;
    plan.num_swapped = 4;
    auto [ah, bh] = swap_latents(a, b, plan);
    REQUIRE(ah.mu.data == b.mu.data);
    REQUIRE(ah.log_var.data == b.log_var.data);
    REQUIRE(bh.mu.data == a.mu.data);
  }
  SECTION("swap conserves the multiset of per-dimension values") {
    for (int trial = 0; trial < 100; ++trial) {
      auto a = random_code(), b = random_code();
      auto plan = select_keep_set(pairwise_divergence(a, b), 2, kPart, 1);
      auto [ah, bh] = swap_latents(a, b, plan);
      for (int d = 0; d < 6; ++d) {
        std::set<double> before{a.mu.at2(0, d), b.mu.at2(0, d)};
        std::set<double> after{ah.mu.at2(0, d), bh.mu.at2(0, d)};
        REQUIRE(before == after);
      }
    }
  }
}

TEST_CASE("detection recall on planted differences") {
  // codes where exactly k dims differ by |dmu| >= 3 with sigma = 1
  Rng rng(123);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    int k = 1 + static_cast<int>(rng.below(3));
    GaussianCode<double> a{Tensor<double>({1, 6}), Tensor<double>({1, 6}, 0.0), kPart};
    rng.fill_normal(a.mu);
    auto b = a;
    auto planted = rng.choose_k(4, k);  // z_n offsets
    std::sort(planted.begin(), planted.end());
    for (int off : planted) {
      double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      b.mu.at2(0, 2 + off) += sign * (3.0 + rng.uniform(0.0, 2.0));
    }
    auto plan = select_keep_set(pairwise_divergence(a, b), k, kPart);
    std::vector<int> expect;
    for (int off : planted) expect.push_back(2 + off);
    if (plan.keep_set != expect) ++failures;
  }
  REQUIRE(failures == 0);
}

TEST_CASE("disentangle loss") {
  SECTION("identical reconstructions give zero") {
    Tensor<double> img({1, 4});
    img.data = {0.2, 0.6, 0.9, 0.4};
    REQUIRE(disentangle_loss(img, img, img, img) == 0.0);
  }
  SECTION("nonnegative on random inputs") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      Tensor<double> a({1, 6}), b({1, 6}), c({1, 6}), d({1, 6});
      rng.fill_uniform(a, 0.01, 0.99);
      rng.fill_uniform(b, 0.01, 0.99);
      rng.fill_uniform(c, 0.01, 0.99);
      rng.fill_uniform(d, 0.01, 0.99);
      REQUIRE(disentangle_loss(a, b, c, d) >= 0.0);
      REQUIRE(disentangle_loss(a, b, c, d, ReconDistance::mse) >= 0.0);
    }
  }
  SECTION("two-pixel toy value matches the hand-computed distance") {
    Tensor<double> x_rec({1, 2}), x_hat({1, 2});
    x_rec.data = {0.3, 0.8};
    x_hat.data = {0.6, 0.5};
    double hand = 0.3 * std::log(0.3 / 0.6) + 0.7 * std::log(0.7 / 0.4) +
                  0.8 * std::log(0.8 / 0.5) + 0.2 * std::log(0.2 / 0.5);
    double got = disentangle_loss(x_rec, x_rec, x_hat, x_rec);
    REQUIRE(std::abs(got - hand) < 1e-9);
    double mse_hand = 0.3 * 0.3 + 0.3 * 0.3;
    REQUIRE(std::abs(disentangle_loss(x_rec, x_rec, x_hat, x_rec, ReconDistance::mse) -
                     mse_hand) < 1e-12);
  }
}

TEST_CASE("curriculum schedules") {
  CurriculumState st;
  st.amount_end = 4;  // |d_z| - k
  st.amount_ramp_steps = 100;
  st.k_max = 3;
  st.difficulty_ramp_steps = 90;
  SECTION("step 0 starts at (1, 1)") {
    auto v = curriculum_step(st);
    REQUIRE(v.num_swap == 1);
    REQUIRE(v.k_effective == 1);
  }
  SECTION("clamped at the end values") {
    st.step = 100;
    auto v = curriculum_step(st);
    REQUIRE(v.num_swap == 4);
    REQUIRE(v.k_effective == 3);
    st.step = 100000;
    v = curriculum_step(st);
    REQUIRE(v.num_swap == 4);
    REQUIRE(v.k_effective == 3);
  }
  SECTION("monotone nondecreasing in step") {
    int prev_swap = 0, prev_k = 0;
    for (int64_t s = 0; s <= 150; ++s) {
      st.step = s;
      auto v = curriculum_step(st);
      REQUIRE(v.num_swap >= prev_swap);
      REQUIRE(v.k_effective >= prev_k);
      prev_swap = v.num_swap;
      prev_k = v.k_effective;
    }
  }
  SECTION("disabled warmups sit at the end values") {
    st.amount_on = false;
    st.difficulty_on = false;
    st.step = 0;
    auto v = curriculum_step(st);
    REQUIRE(v.num_swap == 4);
    REQUIRE(v.k_effective == 3);
  }
}
