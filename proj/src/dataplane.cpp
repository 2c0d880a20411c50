// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/dataplane.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "json.hpp"

#include "bsrl/error.hpp"

namespace bsrl::dataplane {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "?";
}

namespace {

void check_log(const EpisodeLog& log) {
  if (log.turns.empty()) raise(ErrorCode::kSchema, "episode '" + log.episode_id + "' has no turns");
  for (const auto& t : log.turns) {
    if (t.reward && !std::isfinite(*t.reward)) {
      raise(ErrorCode::kSchema, "episode '" + log.episode_id + "' has a non-finite reward");
    }
  }
}

}  // namespace

MessageSequence standardize(const EpisodeLog& log, const std::string& system_prompt,
                            bool include_reward_messages, const std::string& user_prefix) {
  check_log(log);
  MessageSequence m{{Role::kSystem, system_prompt}, {Role::kUser, user_prefix}};
  for (std::size_t idx = 0; idx < log.turns.size(); ++idx) {
    const auto& turn = log.turns[idx];
    if (m.back().role == Role::kAssistant) m.push_back({Role::kUser, ""});
    m.back().content += fmt::format("\nTurn {}:\n", idx + 1);
    m.back().content += fmt::format("State:\n{}\n Always output: {}\n", turn.state, kAnswerFormat);
    m.push_back({Role::kAssistant, turn.action});
    if (include_reward_messages && turn.reward) {
      m.push_back({Role::kUser, fmt::format("Reward:\n{}\n", *turn.reward)});
    }
  }
  return m;
}

void check_alternation(const MessageSequence& messages) {
  if (messages.empty() || messages.front().role != Role::kSystem) {
    raise(ErrorCode::kSchema, "message sequence must start with the system prompt");
  }
  for (std::size_t i = 1; i < messages.size(); ++i) {
    const Role want = i % 2 == 1 ? Role::kUser : Role::kAssistant;
    if (messages[i].role != want) {
      raise(ErrorCode::kSchema, fmt::format("message {} is {} but turn parity expects {}", i,
                                            to_string(messages[i].role), to_string(want)));
    }
  }
}

TokenizedEpisode tokenize(const MessageSequence& messages) {
  TokenizedEpisode out;
  for (const auto& msg : messages) {
    out.token_ids.push_back(kTurnStartId);
    out.token_ids.push_back(kRoleBase + static_cast<TokenId>(msg.role));
    for (const unsigned char ch : msg.content) out.token_ids.push_back(kByteBase + ch);
    out.token_ids.push_back(kTurnEndId);
  }
  out.attention_mask.assign(out.token_ids.size(), 1);
  return out;
}

std::vector<TokenizedEpisode> pad_left(std::vector<TokenizedEpisode> batch) {
  std::size_t longest = 0;
  for (const auto& e : batch) longest = std::max(longest, e.token_ids.size());
  for (auto& e : batch) {
    const auto pad = longest - e.token_ids.size();
    e.token_ids.insert(e.token_ids.begin(), pad, kPadId);
    e.attention_mask.insert(e.attention_mask.begin(), pad, 0);
  }
  return batch;
}

MaskSet compute_masks(const TokenizedEpisode& tokens, double score) {
  const auto& ids = tokens.token_ids;
  if (ids.empty()) raise(ErrorCode::kSchema, "empty token sequence");
  if (tokens.attention_mask.size() != ids.size()) {
    raise(ErrorCode::kSchema, "attention mask length differs from token length");
  }
  MaskSet out;
  out.response_mask.resize(ids.size());
  std::int64_t c = 0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] == tokens.turn_start_token_id) ++c;
    out.response_mask[t] = (c > 1 && c % 2 == 1) ? 1 : 0;
  }
  if (c == 0) raise(ErrorCode::kMask, "no turn-start tokens in sequence");
  out.loss_mask.assign(out.response_mask.begin(), out.response_mask.end() - 1);
  out.score_vector.assign(ids.size() - 1, 0.0);
  if (!out.score_vector.empty()) out.score_vector.back() = score;
  return out;
}

double episode_return(const EpisodeLog& log) {
  double r = 0.0;
  for (const auto& t : log.turns) r += t.reward.value_or(0.0);
  return r;
}

std::vector<double> normalize_group(const std::vector<double>& returns,
                                    const std::vector<std::string>& group_tags, double eps,
                                    Grouping grouping) {
  if (grouping == Grouping::kState && group_tags.size() != returns.size()) {
    raise(ErrorCode::kSchema, "group tags do not align with returns");
  }
  if (!(eps > 0.0)) raise(ErrorCode::kConfig, "normalization eps must be > 0");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    if (!std::isfinite(returns[i])) raise(ErrorCode::kNumeric, "non-finite return");
    groups[grouping == Grouping::kState ? group_tags[i] : std::string()].push_back(i);
  }
  std::vector<double> adv(returns.size(), 0.0);
  for (const auto& [tag, idx] : groups) {
    const auto n = static_cast<double>(idx.size());
    double mean = 0.0;
    for (auto i : idx) mean += returns[i];
    mean /= n;
    double ss = 0.0;
    for (auto i : idx) ss += (returns[i] - mean) * (returns[i] - mean);
    const double sd = idx.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    for (auto i : idx) adv[i] = (returns[i] - mean) / (sd + eps);
  }
  return adv;
}

std::vector<double> broadcast_advantage(double advantage, const std::vector<std::uint8_t>& mask) {
  std::vector<double> out(mask.size(), 0.0);
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t]) out[t] = advantage;
  }
  return out;
}

std::vector<double> token_ratio(const std::vector<double>& logp_new,
                                const std::vector<double>& logp_old) {
  if (logp_new.size() != logp_old.size()) raise(ErrorCode::kSchema, "log-prob arrays differ in length");
  std::vector<double> out(logp_new.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (std::isnan(logp_new[t]) || std::isnan(logp_old[t])) {
      raise(ErrorCode::kNumeric, fmt::format("NaN log-prob at position {}", t));
    }
    out[t] = std::exp(logp_new[t] - logp_old[t]);
  }
  return out;
}

void GrpoConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) raise(ErrorCode::kConfig, "clip_eps must be in (0, 1)");
  if (!(kl_coeff >= 0.0) || !std::isfinite(kl_coeff)) raise(ErrorCode::kConfig, "kl_coeff must be >= 0");
  if (!(trunc_c >= 1.0)) raise(ErrorCode::kConfig, "trunc_C must be >= 1");
  if (!(norm_eps > 0.0)) raise(ErrorCode::kConfig, "norm_eps must be > 0");
}

double clipped_surrogate(double rho, double advantage, double clip_eps) {
  const double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(rho * advantage, clipped * advantage);
}

double trajectory_weight(const std::vector<double>& logp_old, const std::vector<double>& logp_sampler,
                         const std::vector<std::uint8_t>& mask, double trunc_c) {
  if (logp_old.size() != mask.size() || logp_sampler.size() != mask.size()) {
    raise(ErrorCode::kSchema, "weight inputs differ in length");
  }
  double log_ratio = 0.0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t]) log_ratio += logp_old[t] - logp_sampler[t];
  }
  if (std::isnan(log_ratio)) raise(ErrorCode::kNumeric, "NaN trajectory log-ratio");
  if (log_ratio >= std::log(trunc_c)) return trunc_c;
  return std::exp(log_ratio);
}

namespace {

std::vector<double> log_softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  std::vector<double> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k] - lse;
  return out;
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) raise(ErrorCode::kNumeric, std::string("non-finite value in ") + what);
  }
}

void check_episode(const GrpoEpisode& e, std::size_t index) {
  const auto n = e.targets.size();
  auto mismatch = [&](const char* what) {
    raise(ErrorCode::kSchema, fmt::format("episode {}: {} length differs from targets", index, what));
  };
  if (e.loss_mask.size() != n) mismatch("loss_mask");
  if (e.advantages.size() != n) mismatch("advantages");
  if (e.learner_logits.size() != n) mismatch("learner_logits");
  if (e.ref_logits.size() != n) mismatch("ref_logits");
  if (e.logp_old.size() != n) mismatch("logp_old");
  if (e.logp_sampler.size() != n) mismatch("logp_sampler");
  check_finite(e.advantages, "advantages");
  check_finite(e.logp_old, "logp_old");
  check_finite(e.logp_sampler, "logp_sampler");
  for (std::size_t t = 0; t < n; ++t) {
    const auto v = e.learner_logits[t].size();
    if (v == 0 || e.ref_logits[t].size() != v) {
      raise(ErrorCode::kSchema, fmt::format("episode {}: logit rows at {} are empty or differ", index, t));
    }
    if (e.targets[t] < 0 || static_cast<std::size_t>(e.targets[t]) >= v) {
      raise(ErrorCode::kSchema, fmt::format("episode {}: target {} outside vocabulary", index, t));
    }
    check_finite(e.learner_logits[t], "learner_logits");
    check_finite(e.ref_logits[t], "ref_logits");
  }
  if (std::none_of(e.loss_mask.begin(), e.loss_mask.end(), [](auto m) { return m != 0; })) {
    raise(ErrorCode::kDegenerate, fmt::format("episode {} has an empty response mask", index));
  }
}

}  // namespace

GrpoResult grpo_loss(const std::vector<GrpoEpisode>& batch, const GrpoConfig& cfg, bool with_grad) {
  cfg.validate();
  if (batch.empty()) raise(ErrorCode::kDegenerate, "empty batch");
  GrpoResult out;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double lo = 1.0 - cfg.clip_eps, hi = 1.0 + cfg.clip_eps;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& e = batch[i];
    check_episode(e, i);
    const auto n = e.targets.size();
    double denom = 0.0;
    for (auto m : e.loss_mask) denom += m ? 1.0 : 0.0;

    EpisodeResult er;
    er.weight = trajectory_weight(e.logp_old, e.logp_sampler, e.loss_mask, cfg.trunc_c);
    std::vector<std::vector<double>> grad;
    if (with_grad) grad.resize(n);

    for (std::size_t t = 0; t < n; ++t) {
      const auto lp = log_softmax(e.learner_logits[t]);
      const auto lq = log_softmax(e.ref_logits[t]);
      const auto y = static_cast<std::size_t>(e.targets[t]);
      TokenDiagnostics d;
      d.rho = std::exp(lp[y] - e.logp_old[t]);
      const double a = e.advantages[t];
      const double unclipped = d.rho * a;
      const double clipped = std::clamp(d.rho, lo, hi) * a;
      d.surrogate = std::min(unclipped, clipped);
      d.clipped = clipped < unclipped;
      for (std::size_t k = 0; k < lp.size(); ++k) d.kl += std::exp(lp[k]) * (lp[k] - lq[k]);

      if (e.loss_mask[t]) {
        er.surrogate += d.surrogate;
        er.kl += d.kl;
      }
      if (with_grad) {
        grad[t].assign(lp.size(), 0.0);
        if (e.loss_mask[t]) {
          const double ds = d.clipped ? 0.0 : a;
          const double scale = er.weight / denom * inv_batch;
          for (std::size_t k = 0; k < lp.size(); ++k) {
            const double p = std::exp(lp[k]);
            const double drho = d.rho * ((k == y ? 1.0 : 0.0) - p);
            const double dkl = p * (lp[k] - lq[k] - d.kl);
            grad[t][k] = scale * (ds * drho - cfg.kl_coeff * dkl);
          }
        }
      }
      er.tokens.push_back(d);
    }
    er.surrogate /= denom;
    er.kl /= denom;
    er.objective = er.weight * (er.surrogate - cfg.kl_coeff * er.kl);
    out.objective += er.objective * inv_batch;
    out.episodes.push_back(std::move(er));
    if (with_grad) out.grad.push_back(std::move(grad));
  }
  return out;
}

TrajectoryRecord to_canonical(const std::string& episode_id, const TokenizedEpisode& tokens,
                              const MaskSet& masks, double episode_return_value, Version version,
                              const std::string& group_tag, std::vector<double> sampler_logprobs,
                              std::optional<double> advantage) {
  const auto l = tokens.token_ids.size();
  if (masks.response_mask.size() != l) raise(ErrorCode::kSchema, "response mask length != token length");
  if (masks.loss_mask.size() + 1 != l) raise(ErrorCode::kSchema, "loss mask length != token length - 1");
  TrajectoryRecord r;
  r.prompt_id = episode_id;
  r.response_payload = tokens.token_ids;
  r.reward = episode_return_value;
  r.version = version;
  r.metadata.loss_mask = masks.loss_mask;
  r.metadata.response_mask = masks.response_mask;
  r.metadata.group_tag = group_tag;
  r.metadata.sampler_token_logprobs = std::move(sampler_logprobs);
  r.metadata.advantage = advantage;
  if (auto why = schema_violation(r)) raise(ErrorCode::kSchema, *why);
  return r;
}

std::vector<EpisodeLog> synth_episodes(const SynthOptions& o) {
  if (o.n < 0) raise(ErrorCode::kConfig, "episode count must be >= 0");
  if (o.min_turns < 1 || o.max_turns < o.min_turns) raise(ErrorCode::kConfig, "bad turns range");
  if (o.vocab.empty()) raise(ErrorCode::kConfig, "action vocabulary is empty");
  if (o.n_groups < 1) raise(ErrorCode::kConfig, "n_groups must be >= 1");
  if (!(o.reward_scale >= 0.0)) raise(ErrorCode::kConfig, "reward_scale must be >= 0");
  // Modulo draws rather than std distributions keep output identical across
  // standard libraries.
  std::mt19937_64 rng(o.seed);
  auto draw = [&](std::uint64_t k) { return rng() % k; };
  const auto scale = static_cast<std::uint64_t>(std::floor(o.reward_scale));
  constexpr std::string_view kRanks = "23456789TJQKA";
  constexpr std::string_view kSuits = "cdhs";
  std::vector<EpisodeLog> out;
  for (std::int64_t i = 0; i < o.n; ++i) {
    EpisodeLog log;
    log.episode_id = fmt::format("ep{:06d}", i);
    log.group_tag = fmt::format("g{}", i % o.n_groups);
    const int span = o.max_turns - o.min_turns + 1;
    const int turns = o.min_turns + static_cast<int>(draw(static_cast<std::uint64_t>(span)));
    for (int t = 0; t < turns; ++t) {
      Turn turn;
      turn.state = fmt::format("hand {}{} {}{} pot {}", kRanks[draw(13)], kSuits[draw(4)],
                               kRanks[draw(13)], kSuits[draw(4)], 10 * (1 + draw(20)));
      turn.action = fmt::format("<answer> {} </answer>", o.vocab[draw(o.vocab.size())]);
      turn.reward = static_cast<double>(static_cast<std::int64_t>(draw(2 * scale + 1)) -
                                        static_cast<std::int64_t>(scale));
      log.turns.push_back(std::move(turn));
    }
    out.push_back(std::move(log));
  }
  return out;
}

namespace {

json to_json(const EpisodeLog& log) {
  json turns = json::array();
  for (const auto& t : log.turns) {
    json jt{{"state", t.state}, {"action", t.action}};
    if (t.reward) jt["reward"] = *t.reward;
    turns.push_back(std::move(jt));
  }
  return {{"episode_id", log.episode_id}, {"group_tag", log.group_tag}, {"turns", std::move(turns)}};
}

json to_json(const TrajectoryRecord& r) {
  json meta{{"loss_mask", r.metadata.loss_mask},
            {"response_mask", r.metadata.response_mask},
            {"group_tag", r.metadata.group_tag},
            {"sampler_token_logprobs", r.metadata.sampler_token_logprobs}};
  if (r.metadata.advantage) meta["advantage"] = *r.metadata.advantage;
  return {{"prompt_id", r.prompt_id}, {"response", r.response_payload}, {"reward", r.reward},
          {"version", r.version},     {"metadata", std::move(meta)}};
}

EpisodeLog episode_from_json(const json& j) {
  EpisodeLog log;
  log.episode_id = j.at("episode_id").get<std::string>();
  log.group_tag = j.value("group_tag", std::string());
  for (const auto& jt : j.at("turns")) {
    Turn t;
    t.state = jt.at("state").get<std::string>();
    t.action = jt.at("action").get<std::string>();
    if (jt.contains("reward") && !jt["reward"].is_null()) t.reward = jt["reward"].get<double>();
    log.turns.push_back(std::move(t));
  }
  check_log(log);
  return log;
}

TrajectoryRecord record_from_json(const json& j) {
  TrajectoryRecord r;
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.response_payload = j.at("response").get<std::vector<TokenId>>();
  r.reward = j.at("reward").get<double>();
  r.version = j.at("version").get<Version>();
  const auto& m = j.at("metadata");
  r.metadata.loss_mask = m.value("loss_mask", std::vector<std::uint8_t>{});
  r.metadata.response_mask = m.value("response_mask", std::vector<std::uint8_t>{});
  r.metadata.group_tag = m.value("group_tag", std::string());
  r.metadata.sampler_token_logprobs = m.value("sampler_token_logprobs", std::vector<double>{});
  if (m.contains("advantage") && !m["advantage"].is_null()) r.metadata.advantage = m["advantage"].get<double>();
  if (auto why = schema_violation(r)) raise(ErrorCode::kSchema, *why);
  return r;
}

template <typename T, typename Parse>
std::vector<T> read_lines(std::istream& in, Parse parse) {
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      raise(ErrorCode::kSchema, fmt::format("line {}: {}", lineno, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

}  // namespace

void write_jsonl(std::ostream& out, const std::vector<EpisodeLog>& logs) {
  for (const auto& l : logs) out << to_json(l).dump() << '\n';
}

void write_jsonl(std::ostream& out, const std::vector<TrajectoryRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<EpisodeLog> read_episode_jsonl(std::istream& in) {
  return read_lines<EpisodeLog>(in, episode_from_json);
}

std::vector<TrajectoryRecord> read_record_jsonl(std::istream& in) {
  return read_lines<TrajectoryRecord>(in, record_from_json);
}

}  // namespace bsrl::dataplane
