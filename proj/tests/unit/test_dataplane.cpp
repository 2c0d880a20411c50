// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "bsrl/dataplane.hpp"
#include "bsrl/dataplane_check.hpp"
#include "bsrl/error.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles/dataplane_oracles.hpp"

using namespace bsrl;
using namespace bsrl::dataplane;

#ifndef BSRL_TEST_DATA_DIR
#error "BSRL_TEST_DATA_DIR must point at tests/data"
#endif

namespace {

EpisodeLog log_of(std::vector<Turn> turns) { return {"ep", std::move(turns), "g"}; }

TokenizedEpisode toks(std::vector<TokenId> ids) {
  TokenizedEpisode t;
  t.attention_mask.assign(ids.size(), 1);
  t.token_ids = std::move(ids);
  return t;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const bsrl::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

std::vector<double> log_softmax(const std::vector<double>& z) {
  double s = 0;
  for (double v : z) s += std::exp(v);
  std::vector<double> out;
  for (double v : z) out.push_back(v - std::log(s));
  return out;
}

// One-token episode over a 2-symbol vocabulary whose ratio is exactly `rho`.
GrpoEpisode single_token(double rho, double adv) {
  GrpoEpisode e;
  e.targets = {0};
  e.loss_mask = {1};
  e.advantages = {adv};
  e.learner_logits = {{0.3, -0.2}};
  e.ref_logits = {{0.0, 0.0}};
  const double lp = log_softmax(e.learner_logits[0])[0];
  e.logp_old = {lp - std::log(rho)};
  e.logp_sampler = e.logp_old;
  return e;
}

nlohmann::json golden() {
  std::ifstream in(std::string(BSRL_TEST_DATA_DIR) + "/dataplane_golden.json");
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("standardize: message structure") {
  const auto one = standardize(log_of({{"s1", "a1", 5.0}}), "sys", false);
  REQUIRE(one.size() == 3);
  CHECK(one[0] == Message{Role::kSystem, "sys"});
  CHECK(one[1].role == Role::kUser);
  CHECK(one[1].content == "\nTurn 1:\nState:\ns1\n Always output: <answer> ... </answer>\n");
  CHECK(one[2] == Message{Role::kAssistant, "a1"});

  const auto two = standardize(log_of({{"s1", "a1", {}}, {"s2", "a2", {}}}), "sys", false);
  REQUIRE(two.size() == 5);
  CHECK(two[3].role == Role::kUser);
  CHECK(two[3].content.find("Turn 2:\nState:\ns2") != std::string::npos);
  check_alternation(two);

  const auto rew = standardize(log_of({{"s1", "a1", 5.0}}), "sys", true);
  REQUIRE(rew.size() == 4);
  CHECK(rew[3] == Message{Role::kUser, "Reward:\n5\n"});

  // A reward message is the open user message for the next turn.
  const auto rew2 = standardize(log_of({{"s1", "a1", 5.0}, {"s2", "a2", -3.0}}), "sys", true);
  CHECK(rew2.size() == 6);
  check_alternation(rew2);

  CHECK(code_of([] { standardize(log_of({}), "sys", false); }) == ErrorCode::kSchema);
}

TEST_CASE("standardize matches golden transcripts") {
  for (const auto& c : golden().at("standardize")) {
    EpisodeLog log;
    log.episode_id = c["log"]["episode_id"];
    for (const auto& t : c["log"]["turns"]) log.turns.push_back({t["state"], t["action"], t["reward"].get<double>()});
    const auto got = standardize(log, c["system_prompt"], c["include_rewards"]);
    const auto& want = c["messages"];
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(to_string(got[i].role) == want[i][0].get<std::string>());
      CHECK(got[i].content == want[i][1].get<std::string>());
    }
  }
}

TEST_CASE("alternation check flags parity breaks") {
  MessageSequence bad{{Role::kSystem, ""}, {Role::kUser, ""}, {Role::kUser, ""}};
  CHECK(code_of([&] { check_alternation(bad); }) == ErrorCode::kSchema);
  MessageSequence no_sys{{Role::kUser, ""}};
  CHECK(code_of([&] { check_alternation(no_sys); }) == ErrorCode::kSchema);
}

TEST_CASE("compute_masks worked examples") {
  const auto m = compute_masks(toks({1, 7, 1, 8, 1, 9, 9}), 4.5);
  CHECK(m.response_mask == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 1, 1});
  CHECK(m.loss_mask == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 1});
  CHECK(m.score_vector == std::vector<double>{0, 0, 0, 0, 0, 4.5});

  CHECK(compute_masks(toks({1, 7, 7, 7})).response_mask == std::vector<std::uint8_t>(4, 0));

  // Five turns: only turns 3 and 5 are selected.
  const auto five = compute_masks(toks({1, 10, 1, 11, 1, 12, 1, 13, 1, 14}));
  CHECK(five.response_mask == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 1, 0, 0, 1, 1});

  CHECK(code_of([] { compute_masks(toks({7, 8, 9})); }) == ErrorCode::kMask);
  auto bad = toks({1, 2});
  bad.attention_mask.pop_back();
  CHECK(code_of([&] { compute_masks(bad); }) == ErrorCode::kSchema);
}

TEST_CASE("masks over a tokenized conversation select assistant text") {
  const auto msgs = standardize(log_of({{"s1", "a1", 1.0}, {"s2", "a2", 2.0}}), "sys", false);
  const auto t = tokenize(msgs);
  const auto m = compute_masks(t);
  std::string selected;
  for (std::size_t i = 0; i < t.token_ids.size(); ++i) {
    if (m.response_mask[i] && t.token_ids[i] >= kByteBase) {
      selected.push_back(static_cast<char>(t.token_ids[i] - kByteBase));
    }
  }
  CHECK(selected == "a1a2");
}

TEST_CASE("property: masks equal the turn-enumeration oracle") {
  std::mt19937_64 rng(99);
  int failures = 0;
  for (int n = 0; n < 10000; ++n) {
    std::vector<TokenId> ids(rng() % 4, kPadId);
    const auto turns = 1 + rng() % 9;
    for (std::uint64_t k = 0; k < turns; ++k) {
      ids.push_back(kTurnStartId);
      for (auto j = rng() % 6; j > 0; --j) ids.push_back(static_cast<TokenId>(2 + rng() % 20));
    }
    const auto m = compute_masks(toks(ids));
    const auto want = oracle::response_mask_by_turns(ids, kTurnStartId);
    if (m.response_mask != want) ++failures;
    // loss mask is the response mask shifted by one, never wider
    for (std::size_t t = 0; t < m.loss_mask.size(); ++t) {
      if (m.loss_mask[t] != want[t]) ++failures;
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("masks match golden fixtures") {
  for (const auto& c : golden().at("masks")) {
    const auto m = compute_masks(toks(c["ids"].get<std::vector<TokenId>>()));
    CHECK(m.response_mask == c["response_mask"].get<std::vector<std::uint8_t>>());
    CHECK(m.loss_mask == c["loss_mask"].get<std::vector<std::uint8_t>>());
  }
}

TEST_CASE("left padding") {
  auto batch = pad_left({toks({1, 5}), toks({1, 6, 7, 8})});
  CHECK(batch[0].token_ids == std::vector<TokenId>{0, 0, 1, 5});
  CHECK(batch[0].attention_mask == std::vector<std::uint8_t>{0, 0, 1, 1});
  CHECK(batch[1].token_ids.size() == 4);
  CHECK(compute_masks(batch[0]).response_mask == std::vector<std::uint8_t>(4, 0));
}

TEST_CASE("episode return") {
  CHECK(episode_return(log_of({{"", "", 5.0}, {"", "", -3.0}, {"", "", 10.0}})) == 12.0);
  CHECK(episode_return(log_of({{"", "", 5.0}, {"", "", {}}})) == 5.0);
  CHECK(episode_return(log_of({{"", "", -7.0}})) == -7.0);
}

TEST_CASE("group normalization examples") {
  const auto a = normalize_group({10, 20, 30}, {"x", "x", "x"});
  CHECK(a[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(a[1] == 0.0);
  CHECK(a[2] == doctest::Approx(1.0).epsilon(1e-6));
  const auto b = normalize_group({1, -1}, {"x", "x"});
  CHECK(std::abs(b[0] - 0.7071) < 1e-4);
  CHECK(std::abs(b[1] + 0.7071) < 1e-4);
  CHECK(normalize_group({5}, {"x"}) == std::vector<double>{0.0});
  // zero-variance group
  CHECK(normalize_group({3, 3, 3}, {"x", "x", "x"}) == std::vector<double>{0, 0, 0});
  // batch grouping ignores tags
  const auto c = normalize_group({10, 20, 30}, {}, 1e-6, Grouping::kBatch);
  CHECK(c[2] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(code_of([] { normalize_group({1, 2}, {"x"}); }) == ErrorCode::kSchema);
}

TEST_CASE("property: normalization moments and scale invariance") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-50, 50);
  const double eps = 1e-6;
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng() % 10;
    std::vector<double> r(n);
    std::vector<std::string> tags(n, "g");
    for (auto& x : r) x = u(rng);
    const auto a = normalize_group(r, tags, eps);
    double mean = 0;
    for (double x : a) mean += x;
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean) < 1e-9);
    const double sd = oracle::pairwise_sample_std(a);
    CHECK(sd <= 1.0 + 1e-12);
    CHECK(sd >= 1.0 - 10 * eps);
    const double lambda = 0.5 + 4 * std::abs(u(rng)) / 50;
    std::vector<double> scaled;
    for (double x : r) scaled.push_back(lambda * x);
    const auto b = normalize_group(scaled, tags, eps);
    for (std::size_t i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-5));
  }
}

TEST_CASE("normalization matches golden fixtures") {
  for (const auto& c : golden().at("normalize")) {
    const auto a = normalize_group(c["returns"].get<std::vector<double>>(),
                                   c["tags"].get<std::vector<std::string>>(), c["eps"].get<double>());
    const auto want = c["advantages"].get<std::vector<double>>();
    REQUIRE(a.size() == want.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("advantage broadcast") {
  CHECK(broadcast_advantage(2, {0, 0, 1, 1}) == std::vector<double>{0, 0, 2, 2});
  CHECK(broadcast_advantage(0, {1, 1}) == std::vector<double>{0, 0});
  CHECK(broadcast_advantage(3, {0, 0}) == std::vector<double>{0, 0});
  std::mt19937_64 rng(8);
  for (int n = 0; n < 100; ++n) {
    std::vector<std::uint8_t> m(1 + rng() % 20);
    for (auto& x : m) x = rng() % 2;
    const auto a = broadcast_advantage(1.0 + static_cast<double>(rng() % 5), m);
    for (std::size_t t = 0; t < m.size(); ++t) {
      if (a[t] != 0.0) CHECK(m[t] == 1);
    }
  }
}

TEST_CASE("token ratio") {
  CHECK(token_ratio({-1.0}, {-1.0})[0] == 1.0);
  CHECK(token_ratio({std::log(2.0)}, {0.0})[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(token_ratio({-std::log(4.0)}, {0.0})[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(code_of([] { token_ratio({NAN}, {0.0}); }) == ErrorCode::kNumeric);
}

TEST_CASE("clipped surrogate examples") {
  GrpoConfig cfg;
  cfg.clip_eps = 0.2;
  CHECK(std::abs(grpo_loss({single_token(1.5, 1.0)}, cfg).objective - 1.2) < 1e-9);
  CHECK(std::abs(grpo_loss({single_token(0.5, -1.0)}, cfg).objective + 0.8) < 1e-9);

  // rho = 1 everywhere, A = 2 on every response token, no KL, no truncation.
  GrpoEpisode e;
  for (int t = 0; t < 5; ++t) {
    e.targets.push_back(t % 3);
    e.loss_mask.push_back(t != 1);
    e.advantages.push_back(t != 1 ? 2.0 : 0.0);
    e.learner_logits.push_back({0.1 * t, -0.3, 0.7});
    e.ref_logits.push_back({0.0, 0.0, 0.0});
    const double lp = log_softmax(e.learner_logits.back())[static_cast<std::size_t>(e.targets.back())];
    e.logp_old.push_back(lp);
    e.logp_sampler.push_back(lp);
  }
  CHECK(std::abs(grpo_loss({e}, cfg).objective - 2.0) < 1e-9);
}

TEST_CASE("truncated trajectory weight") {
  const std::vector<std::uint8_t> m{1, 1, 0};
  CHECK(std::abs(trajectory_weight({std::log(3.0), 0, 5}, {0, 0, 0}, m, 2.0) - 2.0) < 1e-9);
  CHECK(std::abs(trajectory_weight({std::log(3.0), 0, 5}, {0, 0, 0}, m, 4.0) - 3.0) < 1e-9);
  // the weight multiplies the episode objective
  GrpoConfig cfg;
  cfg.trunc_c = 2.0;
  auto e = single_token(1.1, 1.0);
  e.logp_sampler[0] = e.logp_old[0] - std::log(3.0);
  const auto r = grpo_loss({e}, cfg);
  CHECK(std::abs(r.episodes[0].weight - 2.0) < 1e-9);
  CHECK(std::abs(r.objective - 2.2) < 1e-9);
}

TEST_CASE("property: clipped term never exceeds the unclipped term") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 3.0), a(-3.0, 3.0);
  for (int n = 0; n < 10000; ++n) {
    const double rho = u(rng), adv = a(rng);
    CHECK(clipped_surrogate(rho, adv, 0.2) <= rho * adv);
  }
}

TEST_CASE("property: analytic gradient matches central differences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    GrpoConfig cfg;
    cfg.clip_eps = 0.2;
    cfg.kl_coeff = std::abs(u(rng)) * 0.5;
    cfg.trunc_c = inst % 2 ? 1.2 : 5.0;
    std::vector<GrpoEpisode> batch(1 + rng() % 3);
    for (auto& e : batch) {
      const std::size_t vocab = 2 + rng() % 7, len = 1 + rng() % 16;
      const double adv = 2 * u(rng);
      for (std::size_t t = 0; t < len; ++t) {
        e.targets.push_back(static_cast<TokenId>(rng() % vocab));
        e.loss_mask.push_back(t == 0 || rng() % 3 != 0);
        e.advantages.push_back(e.loss_mask.back() ? adv : 0.0);
        std::vector<double> z(vocab), q(vocab);
        for (auto& v : z) v = g(rng);
        for (auto& v : q) v = g(rng);
        e.learner_logits.push_back(z);
        e.ref_logits.push_back(q);
        double rho;
        do {
          rho = 1.0 + 0.6 * u(rng);
        } while (std::abs(rho - 0.8) < 1e-3 || std::abs(rho - 1.2) < 1e-3);
        const double lp = log_softmax(z)[static_cast<std::size_t>(e.targets.back())];
        e.logp_old.push_back(lp - std::log(rho));
        e.logp_sampler.push_back(e.logp_old.back() + 0.3 * u(rng));
      }
    }
    const auto analytic = grpo_loss(batch, cfg, true).grad;
    const auto fd = oracle::fd_gradient(batch, [&](const auto& b) { return grpo_loss(b, cfg).objective; });
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (std::size_t t = 0; t < fd[i].size(); ++t) {
        for (std::size_t k = 0; k < fd[i][t].size(); ++k) {
          const double err = std::abs(analytic[i][t][k] - fd[i][t][k]) /
                             std::max(std::abs(fd[i][t][k]), 1e-6);
          worst = std::max(worst, err);
        }
      }
    }
  }
  MESSAGE("worst per-entry relative error " << worst);
  CHECK(worst <= 1e-4);
}

TEST_CASE("grpo matches golden objectives") {
  for (const auto& c : golden().at("grpo")) {
    GrpoConfig cfg;
    cfg.clip_eps = c["config"]["clip_eps"];
    cfg.kl_coeff = c["config"]["kl_coeff"];
    if (!c["config"]["trunc_c"].is_null()) cfg.trunc_c = c["config"]["trunc_c"];
    std::vector<GrpoEpisode> batch;
    for (const auto& e : c["batch"]) {
      batch.push_back({e["targets"], e["loss_mask"], e["advantages"], e["learner_logits"],
                       e["ref_logits"], e["logp_old"], e["logp_sampler"]});
    }
    const auto r = grpo_loss(batch, cfg);
    CHECK(r.objective == doctest::Approx(c["objective"].get<double>()).epsilon(1e-9));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(r.episodes[i].weight == doctest::Approx(c["weights"][i].get<double>()).epsilon(1e-12));
    }
  }
}

TEST_CASE("grpo errors") {
  GrpoConfig cfg;
  auto e = single_token(1.0, 1.0);
  e.loss_mask = {0};
  CHECK(code_of([&] { grpo_loss({e}, cfg); }) == ErrorCode::kDegenerate);
  e = single_token(1.0, 1.0);
  e.logp_old.push_back(0.0);
  CHECK(code_of([&] { grpo_loss({e}, cfg); }) == ErrorCode::kSchema);
  e = single_token(1.0, 1.0);
  e.learner_logits[0][1] = NAN;
  CHECK(code_of([&] { grpo_loss({e}, cfg); }) == ErrorCode::kNumeric);
  cfg.clip_eps = 1.5;
  CHECK(code_of([&] { grpo_loss({single_token(1.0, 1.0)}, cfg); }) == ErrorCode::kConfig);
}

TEST_CASE("canonical record") {
  const auto log = log_of({{"s1", "a1", 4.0}, {"s2", "a2", -1.0}});
  const auto t = tokenize(standardize(log, "sys", false));
  const auto m = compute_masks(t, episode_return(log));
  const auto r = to_canonical("ep", t, m, episode_return(log), 7, "g");
  CHECK(r.reward == 3.0);
  CHECK(r.version == 7);
  CHECK(r.metadata.loss_mask == m.loss_mask);
  CHECK(r.metadata.response_mask == m.response_mask);
  CHECK(r.metadata.group_tag == "g");
  CHECK_FALSE(schema_violation(r).has_value());
  auto short_mask = m;
  short_mask.loss_mask.pop_back();
  CHECK(code_of([&] { to_canonical("ep", t, short_mask, 3, 0, "g"); }) == ErrorCode::kSchema);
}

TEST_CASE("synthetic episodes") {
  SynthOptions o;
  o.seed = 42;
  o.n = 20;
  const auto a = synth_episodes(o), b = synth_episodes(o);
  CHECK(a == b);
  CHECK(a.size() == 20);
  o.n = 0;
  CHECK(synth_episodes(o).empty());
  o.n = 10;
  o.min_turns = o.max_turns = 1;
  for (const auto& e : synth_episodes(o)) CHECK(e.turns.size() == 1);
  o.n_groups = 2;
  const auto g = synth_episodes(o);
  CHECK(g[0].group_tag == "g0");
  CHECK(g[1].group_tag == "g1");
  CHECK(g[2].group_tag == "g0");
  o.min_turns = 3;
  CHECK_THROWS_AS(synth_episodes(o), bsrl::Error);
}

TEST_CASE("jsonl round trip") {
  SynthOptions o;
  o.n = 5;
  const auto logs = synth_episodes(o);
  std::stringstream ss;
  write_jsonl(ss, logs);
  CHECK(read_episode_jsonl(ss) == logs);

  std::vector<TrajectoryRecord> recs;
  for (const auto& log : logs) {
    const auto t = tokenize(standardize(log, "rules", true));
    const auto m = compute_masks(t);
    recs.push_back(to_canonical(log.episode_id, t, m, episode_return(log), 3, log.group_tag, {}, 0.25));
  }
  std::stringstream rs;
  write_jsonl(rs, recs);
  CHECK(read_record_jsonl(rs) == recs);

  std::stringstream bad("{\"episode_id\": \"x\", \"turns\": []}\n");
  try {
    read_episode_jsonl(bad);
    FAIL("expected schema error");
  } catch (const bsrl::Error& e) {
    CHECK(e.code() == ErrorCode::kSchema);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  std::stringstream junk("\n{not json\n");
  CHECK(code_of([&] { read_episode_jsonl(junk); }) == ErrorCode::kSchema);
}

TEST_CASE("library self-check passes") {
  CheckOptions o;
  o.mask_layouts = 500;
  o.gradient_instances = 10;
  o.golden_path = std::string(BSRL_TEST_DATA_DIR) + "/dataplane_golden.json";
  for (const auto& r : run_dataplane_check(o)) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
}
