// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/dataplane_check.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <random>

#include "bsrl/dataplane.hpp"
#include "bsrl/error.hpp"
#include "json.hpp"

namespace bsrl::dataplane {

namespace {

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

CheckResult examples() {
  CheckResult r{"worked examples", true, ""};
  auto expect = [&](bool ok, const char* what) {
    if (!ok && r.passed) {
      r.passed = false;
      r.detail = what;
    }
  };
  const TokenizedEpisode t{{1, 7, 1, 8, 1, 9, 9}, std::vector<std::uint8_t>(7, 1), 1};
  expect(compute_masks(t).response_mask == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 1, 1}, "mask example");
  const auto adv = normalize_group({10, 20, 30}, {"a", "a", "a"});
  expect(near(adv[0], -1, 1e-6) && near(adv[1], 0, 1e-9) && near(adv[2], 1, 1e-6), "normalize {10,20,30}");
  expect(near(clipped_surrogate(1.5, 1, 0.2), 1.2, 1e-9), "clip 1.5");
  expect(near(clipped_surrogate(0.5, -1, 0.2), -0.8, 1e-9), "clip 0.5");
  expect(near(clipped_surrogate(1.0, 2, 0.2), 2.0, 1e-9), "identity ratio");
  const std::vector<std::uint8_t> one{1};
  expect(near(trajectory_weight({std::log(3.0)}, {0.0}, one, 2.0), 2.0, 1e-9), "truncation");
  if (r.passed) r.detail = "masks, normalization, clipping, truncation";
  return r;
}

CheckResult masks(std::mt19937_64& rng, int layouts) {
  int failures = 0;
  for (int n = 0; n < layouts; ++n) {
    TokenizedEpisode t;
    const auto turns = 1 + rng() % 8;
    for (std::uint64_t p = rng() % 3; p > 0; --p) t.token_ids.push_back(kPadId);
    for (std::uint64_t k = 0; k < turns; ++k) {
      t.token_ids.push_back(kTurnStartId);
      for (std::uint64_t j = rng() % 5; j > 0; --j) t.token_ids.push_back(kByteBase + static_cast<TokenId>(rng() % 8));
    }
    t.attention_mask.assign(t.token_ids.size(), 1);
    // Explicit turn labelling.
    std::vector<std::uint8_t> want;
    int turn = 0;
    for (auto id : t.token_ids) {
      if (id == kTurnStartId) ++turn;
      want.push_back(turn >= 3 && turn % 2 == 1);
    }
    if (compute_masks(t).response_mask != want) ++failures;
  }
  return {"mask equivalence", failures == 0, fmt::format("{} layouts, {} failures", layouts, failures)};
}

GrpoEpisode random_episode(std::mt19937_64& rng, double clip_eps) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t vocab = 2 + rng() % 7, n = 1 + rng() % 16;
  GrpoEpisode e;
  const double adv = 2.0 * u(rng);
  for (std::size_t t = 0; t < n; ++t) {
    e.targets.push_back(static_cast<TokenId>(rng() % vocab));
    e.loss_mask.push_back(rng() % 4 != 0 || t == 0);
    e.advantages.push_back(e.loss_mask.back() ? adv : 0.0);
    std::vector<double> z(vocab), q(vocab);
    for (auto& v : z) v = g(rng);
    for (auto& v : q) v = g(rng);
    e.learner_logits.push_back(z);
    e.ref_logits.push_back(q);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (double v : z) s += std::exp(v - m);
    const double lp = z[static_cast<std::size_t>(e.targets.back())] - m - std::log(s);
    // Keep rho at least 1e-3 away from both clip edges.
    double rho;
    do {
      rho = 1.0 + 0.6 * u(rng);
    } while (std::abs(rho - (1 - clip_eps)) < 2e-3 || std::abs(rho - (1 + clip_eps)) < 2e-3);
    e.logp_old.push_back(lp - std::log(rho));
    e.logp_sampler.push_back(e.logp_old.back() + 0.2 * u(rng));
  }
  return e;
}

CheckResult gradient(std::mt19937_64& rng, int instances, double tol) {
  double worst = 0.0;
  int failures = 0;
  const double h = 1e-5;
  for (int n = 0; n < instances; ++n) {
    GrpoConfig cfg;
    cfg.clip_eps = 0.2;
    cfg.kl_coeff = (n % 3) * 0.1;
    cfg.trunc_c = n % 2 ? 1.5 : 10.0;
    std::vector<GrpoEpisode> batch{random_episode(rng, cfg.clip_eps)};
    const auto base = grpo_loss(batch, cfg, true);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < batch[0].targets.size(); ++t) {
      for (std::size_t k = 0; k < batch[0].learner_logits[t].size(); ++k) {
        auto plus = batch, minus = batch;
        plus[0].learner_logits[t][k] += h;
        minus[0].learner_logits[t][k] -= h;
        const double fd = (grpo_loss(plus, cfg).objective - grpo_loss(minus, cfg).objective) / (2 * h);
        const double an = base.grad[0][t][k];
        num += (fd - an) * (fd - an);
        den += fd * fd;
      }
    }
    const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
    worst = std::max(worst, rel);
    if (rel > tol) ++failures;
  }
  return {"gradient vs finite differences", failures == 0,
          fmt::format("{} instances, worst relative error {:.3g}", instances, worst)};
}

CheckResult golden(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::kIo, "cannot open golden file " + path);
  const auto j = nlohmann::json::parse(in);
  int checked = 0, failures = 0;
  for (const auto& c : j.at("masks")) {
    TokenizedEpisode t{c.at("ids").get<std::vector<TokenId>>(), {}, kTurnStartId};
    t.attention_mask.assign(t.token_ids.size(), 1);
    const auto m = compute_masks(t);
    ++checked;
    if (m.response_mask != c.at("response_mask").get<std::vector<std::uint8_t>>() ||
        m.loss_mask != c.at("loss_mask").get<std::vector<std::uint8_t>>()) {
      ++failures;
    }
  }
  for (const auto& c : j.at("grpo")) {
    GrpoConfig cfg;
    cfg.clip_eps = c.at("config").at("clip_eps");
    cfg.kl_coeff = c.at("config").at("kl_coeff");
    if (!c.at("config").at("trunc_c").is_null()) cfg.trunc_c = c.at("config").at("trunc_c");
    std::vector<GrpoEpisode> batch;
    for (const auto& e : c.at("batch")) {
      batch.push_back({e.at("targets"), e.at("loss_mask"), e.at("advantages"), e.at("learner_logits"),
                       e.at("ref_logits"), e.at("logp_old"), e.at("logp_sampler")});
    }
    ++checked;
    if (!near(grpo_loss(batch, cfg).objective, c.at("objective").get<double>(), 1e-9)) ++failures;
  }
  return {"golden fixtures", failures == 0, fmt::format("{} cases, {} failures", checked, failures)};
}

}  // namespace

std::vector<CheckResult> run_dataplane_check(const CheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<CheckResult> out;
  out.push_back(examples());
  out.push_back(masks(rng, options.mask_layouts));
  out.push_back(gradient(rng, options.gradient_instances, options.gradient_rel_tol));
  if (options.golden_path) out.push_back(golden(*options.golden_path));
  return out;
}

}  // namespace bsrl::dataplane
