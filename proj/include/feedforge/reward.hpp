#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedforge/jsonl.hpp"

namespace feedforge {

using FeatureVector = std::vector<double>;

class Featurizer {
public:
    virtual ~Featurizer() = default;
    virtual std::string_view id() const = 0;
    virtual int version() const = 0;
    virtual std::size_t dim() const = 0;
    virtual FeatureVector featurize(std::string_view instruction, std::string_view response) const = 0;
};

/// Default 8-dimensional surface featurizer:
///   0 log(1 + response tokens)        4 punctuation characters per response byte
///   1 log(1 + instruction tokens)     5 mean response word length / 10
///   2 response type-token ratio       6 log(1 + hedge-word count)
///   3 share of instruction terms      7 1 if the response states "Confidence:", else 0
///     that reappear in the response
class TextStatsFeaturizer : public Featurizer {
public:
    std::string_view id() const override { return "text-stats"; }
    int version() const override { return 1; }
    std::size_t dim() const override { return 8; }
    FeatureVector featurize(std::string_view instruction, std::string_view response) const override;
};

struct RewardParams {
    std::vector<double> weights;
    double bias = 0;

    static RewardParams zeros(std::size_t dim) { return {std::vector<double>(dim, 0.0), 0.0}; }
    bool operator==(const RewardParams&) const = default;
};

// weights . f + bias. Throws ContractError on a dimension mismatch.
double score(const RewardParams& params, std::span<const double> features);

// -ln sigmoid(r_c - r_r - m), evaluated without overflow for any finite input.
// Throws ContractError on non-finite input.
double ranking_loss(double reward_chosen, double reward_rejected, double margin);

struct Gradient {
    std::vector<double> weights;
    double bias = 0;
};

// dL/dw = -sigmoid(-z) (f_c - f_r); dL/db = 0 because the bias cancels in r_c - r_r.
Gradient loss_gradient(const RewardParams& params, std::span<const double> chosen, std::span<const double> rejected,
                       double margin);

struct FeaturePair {
    FeatureVector chosen;
    FeatureVector rejected;
    double margin = 0;
    std::string id;
};

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 512;
    double lr_initial = 1e-5;
    double lr_final = 1e-6;
    double warmup_ratio = 0.03;
    std::uint64_t seed = 0;

    // Throws ConfigError when lr_final > lr_initial, warmup_ratio outside [0, 1), or zero sizes.
    void validate() const;
};

// Linear warmup over the first floor(warmup_ratio * total_steps) steps, then
// cosine decay from lr_initial to lr_final at the last step.
double learning_rate_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

struct CurvePoint {
    std::size_t step = 0;
    double lr = 0;
    double mean_loss = 0;
};

struct TrainResult {
    RewardParams params;
    std::vector<double> epoch_mean_loss;
    std::vector<CurvePoint> curve;
};

/// Plain mini-batch SGD on the ranking loss. Each epoch visits the pairs in an
/// order shuffled by the stream (seed, epoch), so the result is a pure function
/// of (pairs, cfg, init). A non-finite loss aborts with TrainingError naming
/// the step and the batch's pair ids.
TrainResult train(std::span<const FeaturePair> pairs, const TrainConfig& cfg,
                  std::optional<RewardParams> init = std::nullopt);

// Share of pairs where score(chosen) > score(rejected); exact ties count one half.
double pairwise_accuracy(const RewardParams& params, std::span<const FeaturePair> pairs);

json params_to_json(const RewardParams& params, const Featurizer& featurizer);
RewardParams params_from_json(const json& j);

// "step,lr,mean_loss" rows.
std::string curve_to_csv(std::span<const CurvePoint> curve);

} // namespace feedforge
