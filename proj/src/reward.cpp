#include "feedforge/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "feedforge/decontam.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/rng.hpp"
#include "feedforge/text.hpp"

namespace feedforge {

namespace {

const std::unordered_set<std::string> kHedges = {"perhaps", "probably", "maybe",    "might",  "possibly",
                                                 "guess",   "suppose",  "likely",   "unsure", "uncertain"};

// sigmoid(-z) without overflow.
double sigmoid_neg(double z) {
    if (z >= 0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

} // namespace

FeatureVector TextStatsFeaturizer::featurize(std::string_view instruction, std::string_view response) const {
    const auto resp_ws = text::split_whitespace(response);
    const auto resp_terms = normalize_tokens(response);
    const auto instr_terms = normalize_tokens(instruction);

    FeatureVector f(dim(), 0.0);
    f[0] = std::log1p(static_cast<double>(resp_ws.size()));
    f[1] = std::log1p(static_cast<double>(text::count_tokens(instruction)));

    std::unordered_set<std::string> resp_types(resp_terms.begin(), resp_terms.end());
    f[2] = resp_terms.empty() ? 0.0 : static_cast<double>(resp_types.size()) / static_cast<double>(resp_terms.size());

    std::unordered_set<std::string> instr_types(instr_terms.begin(), instr_terms.end());
    std::size_t shared = 0;
    for (const auto& t : instr_types) shared += resp_types.contains(t) ? 1 : 0;
    f[3] = instr_types.empty() ? 0.0 : static_cast<double>(shared) / static_cast<double>(instr_types.size());

    std::size_t punct = 0;
    for (char c : response) punct += std::ispunct(static_cast<unsigned char>(c)) ? 1 : 0;
    f[4] = response.empty() ? 0.0 : static_cast<double>(punct) / static_cast<double>(response.size());

    std::size_t chars = 0;
    for (auto w : resp_ws) chars += w.size();
    f[5] = resp_ws.empty() ? 0.0 : static_cast<double>(chars) / static_cast<double>(resp_ws.size()) / 10.0;

    std::size_t hedges = 0;
    for (const auto& t : resp_terms) hedges += kHedges.contains(t) ? 1 : 0;
    f[6] = std::log1p(static_cast<double>(hedges));

    f[7] = text::to_lower_ascii(response).find("confidence:") != std::string::npos ? 1.0 : 0.0;
    return f;
}

double score(const RewardParams& params, std::span<const double> features) {
    if (features.size() != params.weights.size())
        throw ContractError("feature dimension " + std::to_string(features.size()) + " does not match weights " +
                            std::to_string(params.weights.size()));
    double s = params.bias;
    for (std::size_t i = 0; i < features.size(); ++i) s += params.weights[i] * features[i];
    return s;
}

double ranking_loss(double reward_chosen, double reward_rejected, double margin) {
    if (!std::isfinite(reward_chosen) || !std::isfinite(reward_rejected) || !std::isfinite(margin))
        throw ContractError("ranking_loss needs finite inputs");
    const double z = reward_chosen - reward_rejected - margin;
    // ln(1 + e^-z): for z < 0 factor out e^-z so the exponent never overflows.
    if (z >= 0) return std::log1p(std::exp(-z));
    if (z < -30) return -z + std::exp(z);
    return -z + std::log1p(std::exp(z));
}

Gradient loss_gradient(const RewardParams& params, std::span<const double> chosen, std::span<const double> rejected,
                       double margin) {
    const double z = score(params, chosen) - score(params, rejected) - margin;
    if (!std::isfinite(z)) throw ContractError("loss_gradient needs finite scores");
    const double s = sigmoid_neg(z);
    Gradient g;
    g.weights.resize(chosen.size());
    for (std::size_t i = 0; i < chosen.size(); ++i) g.weights[i] = -s * (chosen[i] - rejected[i]);
    g.bias = 0.0;
    return g;
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(lr_initial >= 0) || !(lr_final >= 0)) throw ConfigError("learning rates must be nonnegative");
    if (lr_final > lr_initial) throw ConfigError("lr_final must not exceed lr_initial");
    if (!(warmup_ratio >= 0 && warmup_ratio < 1)) throw ConfigError("warmup_ratio must lie in [0, 1)");
}

double learning_rate_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
    const auto warmup = static_cast<std::size_t>(std::floor(cfg.warmup_ratio * static_cast<double>(total_steps)));
    if (step < warmup) return cfg.lr_initial * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const std::size_t decay_steps = total_steps > warmup + 1 ? total_steps - warmup - 1 : 1;
    const double progress = std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(decay_steps));
    return cfg.lr_final + 0.5 * (cfg.lr_initial - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainResult train(std::span<const FeaturePair> pairs, const TrainConfig& cfg, std::optional<RewardParams> init) {
    cfg.validate();
    if (pairs.empty()) throw ContractError("train needs at least one pair");
    const std::size_t dim = pairs.front().chosen.size();
    for (const auto& p : pairs)
        if (p.chosen.size() != dim || p.rejected.size() != dim)
            throw ContractError("pair " + p.id + " has inconsistent feature dimensions");

    TrainResult result;
    result.params = init ? *init : RewardParams::zeros(dim);
    if (result.params.weights.size() != dim) throw ContractError("initial parameters have the wrong dimension");

    const std::size_t n = pairs.size();
    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = cfg.epochs * steps_per_epoch;

    std::vector<std::size_t> order(n);
    std::vector<double> grad(dim);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        double epoch_loss = 0;
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++step) {
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const double lr = learning_rate_at(step, total_steps, cfg);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0;
            for (std::size_t k = begin; k < end; ++k) {
                const auto& p = pairs[order[k]];
                const double rc = score(result.params, p.chosen);
                const double rr = score(result.params, p.rejected);
                const double z = rc - rr - p.margin;
                const double loss = std::isfinite(z) ? ranking_loss(rc, rr, p.margin) : z;
                if (!std::isfinite(loss)) {
                    std::ostringstream msg;
                    msg << "non-finite loss at step " << step << " (epoch " << epoch << "); batch pairs:";
                    for (std::size_t q = begin; q < end && q < begin + 16; ++q) msg << ' ' << pairs[order[q]].id;
                    throw TrainingError(msg.str());
                }
                batch_loss += loss;
                const double s = sigmoid_neg(z);
                for (std::size_t d = 0; d < dim; ++d) grad[d] -= s * (p.chosen[d] - p.rejected[d]);
            }
            const double count = static_cast<double>(end - begin);
            for (std::size_t d = 0; d < dim; ++d) result.params.weights[d] -= lr * grad[d] / count;
            epoch_loss += batch_loss;
            result.curve.push_back({step, lr, batch_loss / count});
        }
        result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(n));
    }
    return result;
}

double pairwise_accuracy(const RewardParams& params, std::span<const FeaturePair> pairs) {
    if (pairs.empty()) return 0.0;
    double correct = 0;
    for (const auto& p : pairs) {
        const double rc = score(params, p.chosen);
        const double rr = score(params, p.rejected);
        if (rc > rr) correct += 1.0;
        else if (rc == rr) correct += 0.5;
    }
    return correct / static_cast<double>(pairs.size());
}

json params_to_json(const RewardParams& params, const Featurizer& featurizer) {
    return {
        {"dim", params.weights.size()},
        {"weights", params.weights},
        {"bias", params.bias},
        {"featurizer_id", featurizer.id()},
        {"featurizer_version", featurizer.version()},
    };
}

RewardParams params_from_json(const json& j) {
    RewardParams p;
    p.weights = j.at("weights").get<std::vector<double>>();
    p.bias = j.at("bias").get<double>();
    if (j.at("dim").get<std::size_t>() != p.weights.size()) throw ParseError("params: dim does not match weights");
    for (double w : p.weights)
        if (!std::isfinite(w)) throw ParseError("params: non-finite weight");
    return p;
}

std::string curve_to_csv(std::span<const CurvePoint> curve) {
    std::ostringstream out;
    out.precision(17);
    out << "step,lr,mean_loss\n";
    for (const auto& c : curve) out << c.step << ',' << c.lr << ',' << c.mean_loss << '\n';
    return out.str();
}

} // namespace feedforge
