// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// Task adapter: episode logs to chat messages to tokens, turn-aware masks,
// returns and group-normalized advantages, and the clipped GRPO objective
// with a truncated trajectory importance weight over toy categorical
// policies.

#pragma once

#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bsrl/record.hpp"

namespace bsrl::dataplane {

struct Turn {
  std::string state;
  std::string action;
  std::optional<double> reward;  // chips; missing counts as 0

  bool operator==(const Turn&) const = default;
};

struct EpisodeLog {
  std::string episode_id;
  std::vector<Turn> turns;
  std::string group_tag;

  bool operator==(const EpisodeLog&) const = default;
};

enum class Role { kSystem, kUser, kAssistant };
std::string_view to_string(Role role);

struct Message {
  Role role;
  std::string content;

  bool operator==(const Message&) const = default;
};

using MessageSequence = std::vector<Message>;

inline constexpr std::string_view kAnswerFormat = "<answer> ... </answer>";

/// System prompt, then per turn a header and the state appended to the open
/// user message (a new one is opened after an assistant message), then the
/// action as an assistant message, then optionally "Reward:\n{r}\n" as a user
/// message. Throws Error(kSchema) for an empty or non-finite log.
MessageSequence standardize(const EpisodeLog& log, const std::string& system_prompt,
                            bool include_reward_messages, const std::string& user_prefix = "");

/// Throws Error(kSchema) unless the sequence is system, then strictly
/// alternating user/assistant starting with user. Turn-parity masks are only
/// meaningful for such sequences.
void check_alternation(const MessageSequence& messages);

// Toy vocabulary: special ids then one id per byte.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kTurnStartId = 1;
inline constexpr TokenId kRoleBase = 2;  // + Role
inline constexpr TokenId kTurnEndId = 5;
inline constexpr TokenId kByteBase = 6;
inline constexpr TokenId kVocabSize = kByteBase + 256;

struct TokenizedEpisode {
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> attention_mask;
  TokenId turn_start_token_id = kTurnStartId;

  bool operator==(const TokenizedEpisode&) const = default;
};

/// Each message becomes [turn_start, role, bytes..., turn_end].
TokenizedEpisode tokenize(const MessageSequence& messages);

/// Left-pads every episode to the longest length with kPadId / mask 0.
std::vector<TokenizedEpisode> pad_left(std::vector<TokenizedEpisode> batch);

struct MaskSet {
  std::vector<std::uint8_t> response_mask;  // length L
  std::vector<std::uint8_t> loss_mask;      // length L-1
  std::vector<double> score_vector;         // length L-1, score in the last slot

  bool operator==(const MaskSet&) const = default;
};

/// c_t = number of turn-start tokens up to and including t; response tokens
/// have c_t > 1 and c_t odd. Throws Error(kMask) without any turn start and
/// Error(kSchema) for mismatched lengths or L < 2.
MaskSet compute_masks(const TokenizedEpisode& tokens, double score = 0.0);

double episode_return(const EpisodeLog& log);

enum class Grouping { kState, kBatch };

/// (R - mean_G) / (sample_std_G + eps) per group; singleton groups give 0.
std::vector<double> normalize_group(const std::vector<double>& returns,
                                    const std::vector<std::string>& group_tags,
                                    double eps = 1e-6, Grouping grouping = Grouping::kState);

std::vector<double> broadcast_advantage(double advantage, const std::vector<std::uint8_t>& mask);

/// exp(new - old) per token. Throws Error(kNumeric) on NaN, Error(kSchema) on
/// mismatched lengths.
std::vector<double> token_ratio(const std::vector<double>& logp_new,
                                const std::vector<double>& logp_old);

struct GrpoConfig {
  double clip_eps = 0.2;
  double kl_coeff = 0.0;
  double trunc_c = std::numeric_limits<double>::infinity();
  double norm_eps = 1e-6;
  Grouping grouping = Grouping::kState;

  void validate() const;
};

/// min(rho*A, clip(rho, 1-eps, 1+eps)*A).
double clipped_surrogate(double rho, double advantage, double clip_eps);

/// One episode in the shifted (next-token) frame of length L-1. Row t of the
/// logit matrices is the categorical distribution over the toy vocabulary for
/// predicting targets[t].
struct GrpoEpisode {
  std::vector<TokenId> targets;
  std::vector<std::uint8_t> loss_mask;
  std::vector<double> advantages;  // per position, zero off the mask
  std::vector<std::vector<double>> learner_logits;
  std::vector<std::vector<double>> ref_logits;
  std::vector<double> logp_old;      // pi_theta_old(target)
  std::vector<double> logp_sampler;  // pi_sampler(target)
};

struct TokenDiagnostics {
  double rho = 1.0;
  double surrogate = 0.0;
  double kl = 0.0;
  bool clipped = false;  // the clipped branch is strictly smaller
};

struct EpisodeResult {
  double weight = 1.0;  // truncated trajectory importance weight
  double surrogate = 0.0;
  double kl = 0.0;
  double objective = 0.0;  // weight * (surrogate - beta * kl)
  std::vector<TokenDiagnostics> tokens;
};

struct GrpoResult {
  double objective = 0.0;  // mean over episodes
  std::vector<EpisodeResult> episodes;
  /// d objective / d learner_logits, same shape as the inputs. The weight is
  /// a constant (it depends only on cached old and sampler log-probs).
  std::vector<std::vector<std::vector<double>>> grad;
};

/// Throws Error(kDegenerate) for an empty mask, Error(kSchema) for shape
/// mismatches and Error(kNumeric) for non-finite inputs.
GrpoResult grpo_loss(const std::vector<GrpoEpisode>& batch, const GrpoConfig& cfg,
                     bool with_grad = false);

/// min(exp(sum over masked positions of logp_old - logp_sampler), C).
double trajectory_weight(const std::vector<double>& logp_old,
                         const std::vector<double>& logp_sampler,
                         const std::vector<std::uint8_t>& mask, double trunc_c);

/// Throws Error(kSchema) for inconsistent lengths.
TrajectoryRecord to_canonical(const std::string& episode_id, const TokenizedEpisode& tokens,
                              const MaskSet& masks, double episode_return_value, Version version,
                              const std::string& group_tag,
                              std::vector<double> sampler_logprobs = {},
                              std::optional<double> advantage = std::nullopt);

struct SynthOptions {
  std::uint64_t seed = 0;
  std::int64_t n = 16;
  int min_turns = 1;
  int max_turns = 4;
  std::vector<std::string> vocab = {"fold", "check", "call", "raise"};
  int n_groups = 4;
  double reward_scale = 10.0;  // rewards are integers in [-scale, scale]
};

std::vector<EpisodeLog> synth_episodes(const SynthOptions& options);

// Line-delimited JSON. Readers throw Error(kSchema) with the line number.
void write_jsonl(std::ostream& out, const std::vector<EpisodeLog>& logs);
void write_jsonl(std::ostream& out, const std::vector<TrajectoryRecord>& records);
std::vector<EpisodeLog> read_episode_jsonl(std::istream& in);
std::vector<TrajectoryRecord> read_record_jsonl(std::istream& in);

}  // namespace bsrl::dataplane
