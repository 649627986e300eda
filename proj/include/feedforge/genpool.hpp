#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedforge/corpus.hpp"
#include "feedforge/llm_client.hpp"

namespace feedforge {

enum class Backend { mock, http };

struct ModelSpec {
    std::string name;
    Backend backend = Backend::mock;
    std::optional<std::string> endpoint;
    Decoding decoding;
};

// Throws ConfigError on duplicate names or an http model without an endpoint.
void validate_model_pool(std::span<const ModelSpec> pool);

// {"models": [{"name","backend","endpoint"?,"decoding"?:{temperature,top_p,max_tokens}}]}
std::vector<ModelSpec> load_model_pool(const std::filesystem::path& path);

enum class PrincipleAspect { helpfulness, truthfulness, honesty, verbalized_calibration };
enum class PrincipleOrigin { human, model_curated };

inline constexpr std::array<PrincipleAspect, 4> kPrincipleAspects = {
    PrincipleAspect::helpfulness, PrincipleAspect::truthfulness, PrincipleAspect::honesty,
    PrincipleAspect::verbalized_calibration};

std::string_view to_string(PrincipleAspect aspect);
std::optional<PrincipleAspect> parse_principle_aspect(std::string_view name);

struct PrinciplePrompt {
    PrincipleAspect aspect = PrincipleAspect::helpfulness;
    std::string text;
    PrincipleOrigin origin = PrincipleOrigin::human;
};

// {"version", "principles": [{"aspect","text","origin"}]}
std::vector<PrinciplePrompt> load_principles(const std::filesystem::path& path);

using AspectWeights = std::map<PrincipleAspect, double>;

// Source -> aspect weights. Sources without an entry use the default weights,
// which start out uniform over the four aspects.
struct AspectMap {
    std::map<SourceTag, AspectWeights> per_source;
    AspectWeights default_weights = {{PrincipleAspect::helpfulness, 1.0},
                                     {PrincipleAspect::truthfulness, 1.0},
                                     {PrincipleAspect::honesty, 1.0},
                                     {PrincipleAspect::verbalized_calibration, 1.0}};

    const AspectWeights& for_source(SourceTag source) const;
};

AspectMap aspect_map_from_json(const json& j);

// k distinct models, uniform without replacement, from the stream (seed, salt).
std::vector<ModelSpec> sample_models(std::span<const ModelSpec> pool, std::size_t k, std::uint64_t seed,
                                     std::uint64_t salt = 0);

// Draws an aspect by the source's weights (restricted to aspects that have
// principles), then a uniform principle of that aspect.
const PrinciplePrompt& sample_principle(SourceTag source, const AspectMap& aspect_map,
                                        std::span<const PrinciplePrompt> principles, std::uint64_t seed);

struct Completion {
    std::string instruction_id;
    std::string model;
    PrincipleAspect principle_aspect = PrincipleAspect::helpfulness;
    std::string system_prompt;
    std::string text;
    Decoding decoding;
    std::size_t token_count = 0;

    bool operator==(const Completion&) const = default;
};

struct GenerationFailure {
    std::string instruction_id;
    std::string model;
    std::string kind; // ChatErrorKind name, or "config"
    std::string message;
};

struct GenerationResult {
    std::vector<Completion> completions; // sorted by model name
    std::vector<GenerationFailure> failures;
};

// One request per model: system = that model's principle text, user = instruction text.
// A failing model is recorded and never aborts its siblings.
GenerationResult generate_completions(const Instruction& instruction, std::span<const ModelSpec> models,
                                      std::span<const PrinciplePrompt> principles, ChatClient& client);

// Every model shares one principle.
GenerationResult generate_completions(const Instruction& instruction, std::span<const ModelSpec> models,
                                      const PrinciplePrompt& principle, ChatClient& client);

} // namespace feedforge
