#include "feedforge/genpool.hpp"

#include <algorithm>
#include <set>

#include "feedforge/errors.hpp"
#include "feedforge/rng.hpp"
#include "feedforge/text.hpp"

namespace feedforge {

void validate_model_pool(std::span<const ModelSpec> pool) {
    std::set<std::string> names;
    for (const auto& m : pool) {
        if (m.name.empty()) throw ConfigError("model with empty name in pool");
        if (!names.insert(m.name).second) throw ConfigError("duplicate model name \"" + m.name + "\" in pool");
        if (m.backend == Backend::http && (!m.endpoint || m.endpoint->empty()))
            throw ConfigError("http model \"" + m.name + "\" needs an endpoint");
        if (m.decoding.temperature < 0 || !(m.decoding.top_p > 0 && m.decoding.top_p <= 1) ||
            m.decoding.max_tokens <= 0)
            throw ConfigError("model \"" + m.name + "\" has invalid decoding parameters");
    }
}

std::vector<ModelSpec> load_model_pool(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    std::vector<ModelSpec> pool;
    try {
        for (const auto& m : doc.at("models")) {
            ModelSpec spec;
            spec.name = m.at("name").get<std::string>();
            const std::string backend = m.value("backend", "mock");
            if (backend == "mock") spec.backend = Backend::mock;
            else if (backend == "http") spec.backend = Backend::http;
            else throw ConfigError("model \"" + spec.name + "\": unknown backend \"" + backend + "\"");
            if (m.contains("endpoint") && m["endpoint"].is_string()) spec.endpoint = m["endpoint"].get<std::string>();
            if (m.contains("decoding")) {
                const auto& d = m["decoding"];
                spec.decoding.temperature = d.value("temperature", spec.decoding.temperature);
                spec.decoding.top_p = d.value("top_p", spec.decoding.top_p);
                spec.decoding.max_tokens = d.value("max_tokens", spec.decoding.max_tokens);
            }
            pool.push_back(std::move(spec));
        }
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    validate_model_pool(pool);
    return pool;
}

std::string_view to_string(PrincipleAspect aspect) {
    switch (aspect) {
    case PrincipleAspect::helpfulness: return "helpfulness";
    case PrincipleAspect::truthfulness: return "truthfulness";
    case PrincipleAspect::honesty: return "honesty";
    case PrincipleAspect::verbalized_calibration: return "verbalized_calibration";
    }
    return "helpfulness";
}

std::optional<PrincipleAspect> parse_principle_aspect(std::string_view name) {
    for (auto a : kPrincipleAspects)
        if (to_string(a) == name) return a;
    return std::nullopt;
}

std::vector<PrinciplePrompt> load_principles(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    std::vector<PrinciplePrompt> out;
    try {
        for (const auto& p : doc.at("principles")) {
            PrinciplePrompt pp;
            auto aspect = parse_principle_aspect(p.at("aspect").get<std::string>());
            if (!aspect) throw ConfigError("unknown principle aspect " + p.at("aspect").dump());
            pp.aspect = *aspect;
            pp.text = p.at("text").get<std::string>();
            if (text::trim(pp.text).empty()) throw ConfigError("empty principle text");
            const std::string origin = p.value("origin", "human");
            if (origin == "human") pp.origin = PrincipleOrigin::human;
            else if (origin == "model_curated") pp.origin = PrincipleOrigin::model_curated;
            else throw ConfigError("unknown principle origin \"" + origin + "\"");
            out.push_back(std::move(pp));
        }
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return out;
}

const AspectWeights& AspectMap::for_source(SourceTag source) const {
    auto it = per_source.find(source);
    return it == per_source.end() ? default_weights : it->second;
}

namespace {

AspectWeights weights_from_json(const json& j) {
    AspectWeights w;
    for (const auto& [name, value] : j.items()) {
        auto aspect = parse_principle_aspect(name);
        if (!aspect) throw ConfigError("unknown aspect \"" + name + "\" in aspect map");
        const double v = value.get<double>();
        if (!(v >= 0)) throw ConfigError("aspect weights must be nonnegative");
        w[*aspect] = v;
    }
    return w;
}

} // namespace

AspectMap aspect_map_from_json(const json& j) {
    AspectMap map;
    if (j.contains("default")) map.default_weights = weights_from_json(j["default"]);
    if (j.contains("sources")) {
        for (const auto& [name, weights] : j["sources"].items()) {
            auto tag = parse_source_tag(name);
            if (!tag) throw ConfigError("unknown source \"" + name + "\" in aspect map");
            map.per_source[*tag] = weights_from_json(weights);
        }
    }
    return map;
}

std::vector<ModelSpec> sample_models(std::span<const ModelSpec> pool, std::size_t k, std::uint64_t seed,
                                     std::uint64_t salt) {
    if (k > pool.size())
        throw ConfigError("cannot sample " + std::to_string(k) + " models from a pool of " +
                          std::to_string(pool.size()));
    Rng rng(derive_seed(seed, salt));
    std::vector<ModelSpec> out;
    for (std::size_t i : rng.sample_indices(pool.size(), k)) out.push_back(pool[i]);
    return out;
}

const PrinciplePrompt& sample_principle(SourceTag source, const AspectMap& aspect_map,
                                        std::span<const PrinciplePrompt> principles, std::uint64_t seed) {
    std::map<PrincipleAspect, std::vector<std::size_t>> by_aspect;
    for (std::size_t i = 0; i < principles.size(); ++i) by_aspect[principles[i].aspect].push_back(i);

    std::vector<std::pair<PrincipleAspect, double>> eligible;
    double total = 0;
    for (const auto& [aspect, weight] : aspect_map.for_source(source)) {
        if (weight > 0 && by_aspect.contains(aspect)) {
            eligible.emplace_back(aspect, weight);
            total += weight;
        }
    }
    if (eligible.empty())
        throw ConfigError("no principle available for any positively weighted aspect of source " +
                          std::string(to_string(source)));

    Rng rng(seed);
    double u = rng.uniform01() * total;
    PrincipleAspect chosen = eligible.back().first;
    for (const auto& [aspect, weight] : eligible) {
        if (u < weight) {
            chosen = aspect;
            break;
        }
        u -= weight;
    }
    const auto& members = by_aspect[chosen];
    return principles[members[static_cast<std::size_t>(rng.below(members.size()))]];
}

GenerationResult generate_completions(const Instruction& instruction, std::span<const ModelSpec> models,
                                      std::span<const PrinciplePrompt> principles, ChatClient& client) {
    if (principles.size() != models.size())
        throw ContractError("generate_completions needs one principle per model");
    GenerationResult result;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto& model = models[i];
        const auto& principle = principles[i];
        try {
            auto resp = client.complete(make_request(model.name, principle.text, instruction.text, model.decoding));
            Completion c;
            c.instruction_id = instruction.id;
            c.model = model.name;
            c.principle_aspect = principle.aspect;
            c.system_prompt = principle.text;
            c.token_count = text::count_tokens(resp.text);
            c.text = std::move(resp.text);
            c.decoding = model.decoding;
            result.completions.push_back(std::move(c));
        } catch (const ChatError& e) {
            result.failures.push_back({instruction.id, model.name, std::string(to_string(e.kind())), e.what()});
        } catch (const ConfigError& e) {
            result.failures.push_back({instruction.id, model.name, "config", e.what()});
        }
    }
    std::sort(result.completions.begin(), result.completions.end(),
              [](const Completion& a, const Completion& b) { return a.model < b.model; });
    std::sort(result.failures.begin(), result.failures.end(),
              [](const GenerationFailure& a, const GenerationFailure& b) { return a.model < b.model; });
    return result;
}

GenerationResult generate_completions(const Instruction& instruction, std::span<const ModelSpec> models,
                                      const PrinciplePrompt& principle, ChatClient& client) {
    std::vector<PrinciplePrompt> per_model(models.size(), principle);
    return generate_completions(instruction, models, per_model, client);
}

} // namespace feedforge
