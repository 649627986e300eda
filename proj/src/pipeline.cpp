#include "feedforge/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "feedforge/decontam.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"
#include "feedforge/parallel.hpp"
#include "feedforge/rng.hpp"
#include "feedforge/select_eval.hpp"
#include "feedforge/serialization.hpp"
#include "feedforge/text.hpp"

namespace feedforge {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

namespace {

// Field lookups that report the dotted field path on failure.
const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw ConfigError("config: missing field \"" + path + "\"");
    return obj.at(key);
}

template <typename T>
T get_as(const json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field \"" + path + "\" has the wrong type");
    }
}

template <typename T>
T optional_field(const json& obj, const std::string& key, const std::string& path, T fallback) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
    return get_as<T>(obj.at(key), path);
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

Backend parse_backend(const std::string& name, const std::string& path) {
    if (name == "mock") return Backend::mock;
    if (name == "http") return Backend::http;
    throw ConfigError("config: field \"" + path + "\" must be \"mock\" or \"http\"");
}

std::string backend_name(Backend b) { return b == Backend::mock ? "mock" : "http"; }

std::string relative_string(const fs::path& p, const fs::path& base) {
    auto rel = p.lexically_relative(base);
    return (rel.empty() ? p : rel).generic_string();
}

std::string file_digest(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return digest128_hex(data);
}

} // namespace

PipelineConfig parse_pipeline_config(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
    PipelineConfig cfg;
    cfg.base_dir = base_dir;
    cfg.seed = get_as<std::uint64_t>(field(doc, "seed", "seed"), "seed");
    cfg.concurrency = optional_field<std::size_t>(doc, "concurrency", "concurrency", cfg.concurrency);

    const auto& paths = field(doc, "paths", "paths");
    const auto& sources = field(paths, "sources", "paths.sources");
    if (!sources.is_object()) throw ConfigError("config: field \"paths.sources\" must be an object");
    for (const auto& [name, value] : sources.items()) {
        const std::string path = "paths.sources." + name;
        auto tag = parse_source_tag(name);
        if (!tag) throw ConfigError("config: unknown source \"" + name + "\" in \"paths.sources\"");
        cfg.sources[*tag] = resolve(base_dir, get_as<std::string>(value, path));
    }
    for (const auto& e : optional_field<std::vector<std::string>>(paths, "eval_sets", "paths.eval_sets", {}))
        cfg.eval_sets.push_back(resolve(base_dir, e));
    if (paths.contains("external_pairs") && !paths["external_pairs"].is_null())
        cfg.external_pairs = resolve(base_dir, get_as<std::string>(paths["external_pairs"], "paths.external_pairs"));
    cfg.store_dir = resolve(base_dir, get_as<std::string>(field(paths, "store", "paths.store"), "paths.store"));
    cfg.cache_dir = resolve(base_dir, optional_field<std::string>(paths, "cache", "paths.cache", "cache"));

    const auto& sampling = field(doc, "sampling", "sampling");
    cfg.sampling.max_instruction_tokens = optional_field<std::size_t>(
        sampling, "max_instruction_tokens", "sampling.max_instruction_tokens", kDefaultMaxInstructionTokens);
    const auto& quotas = field(sampling, "quotas", "sampling.quotas");
    if (!quotas.is_array()) throw ConfigError("config: field \"sampling.quotas\" must be an array");
    for (std::size_t i = 0; i < quotas.size(); ++i) {
        const std::string path = "sampling.quotas[" + std::to_string(i) + "]";
        const auto name = get_as<std::string>(field(quotas[i], "source", path + ".source"), path + ".source");
        auto tag = parse_source_tag(name);
        if (!tag) throw ConfigError("config: unknown source \"" + name + "\" in \"" + path + "\"");
        try {
            cfg.sampling.quotas.emplace_back(*tag, quota_from_json(quotas[i]));
        } catch (const json::exception&) {
            throw ConfigError("config: malformed quota \"" + path + "\"");
        }
    }

    cfg.model_pool = resolve(base_dir, get_as<std::string>(field(doc, "model_pool", "model_pool"), "model_pool"));
    cfg.principles = resolve(base_dir, get_as<std::string>(field(doc, "principles", "principles"), "principles"));
    if (doc.contains("aspect_map") && !doc["aspect_map"].is_null())
        cfg.aspect_map = resolve(base_dir, get_as<std::string>(doc["aspect_map"], "aspect_map"));
    cfg.models_per_instruction =
        optional_field<std::size_t>(doc, "models_per_instruction", "models_per_instruction", kGroupSize);

    if (doc.contains("judge")) {
        const auto& j = doc["judge"];
        auto& s = cfg.judge.settings;
        s.model = optional_field<std::string>(j, "model", "judge.model", s.model);
        s.temperature = optional_field<double>(j, "temperature", "judge.temperature", s.temperature);
        s.top_p = optional_field<double>(j, "top_p", "judge.top_p", s.top_p);
        s.max_tokens = optional_field<int>(j, "max_tokens", "judge.max_tokens", s.max_tokens);
        cfg.judge.backend = parse_backend(optional_field<std::string>(j, "backend", "judge.backend", "mock"),
                                          "judge.backend");
        if (j.contains("endpoint") && !j["endpoint"].is_null())
            cfg.judge.endpoint = get_as<std::string>(j["endpoint"], "judge.endpoint");
    }

    if (doc.contains("http")) {
        const auto& h = doc["http"];
        auto& s = cfg.http;
        s.timeout_ms = optional_field<std::int64_t>(h, "timeout_ms", "http.timeout_ms", s.timeout_ms);
        s.max_attempts = optional_field<int>(h, "max_attempts", "http.max_attempts", s.max_attempts);
        s.base_delay_ms = optional_field<std::int64_t>(h, "base_delay_ms", "http.base_delay_ms", s.base_delay_ms);
        s.max_delay_ms = optional_field<std::int64_t>(h, "max_delay_ms", "http.max_delay_ms", s.max_delay_ms);
    }

    if (doc.contains("pairs")) {
        const auto& p = doc["pairs"];
        const auto mode = optional_field<std::string>(p, "score_mode", "pairs.score_mode", "fine_grained");
        if (mode == "fine_grained") cfg.score_mode = ScoreMode::fine_grained;
        else if (mode == "overall") cfg.score_mode = ScoreMode::overall;
        else throw ConfigError("config: field \"pairs.score_mode\" must be \"fine_grained\" or \"overall\"");
        const auto ties = optional_field<std::string>(p, "ties", "pairs.ties", "drop");
        if (ties == "drop") cfg.ties = TiePolicy::drop;
        else if (ties == "keep_zero_margin") cfg.ties = TiePolicy::keep_zero_margin;
        else throw ConfigError("config: field \"pairs.ties\" must be \"drop\" or \"keep_zero_margin\"");
    }

    if (doc.contains("mix")) {
        for (const auto& t :
             optional_field<std::vector<std::string>>(doc["mix"], "external_tags", "mix.external_tags", {}))
            cfg.external_tags.insert(t);
    }

    if (doc.contains("train")) {
        const auto& t = doc["train"];
        auto& c = cfg.train;
        c.epochs = optional_field<std::size_t>(t, "epochs", "train.epochs", c.epochs);
        c.batch_size = optional_field<std::size_t>(t, "batch_size", "train.batch_size", c.batch_size);
        c.lr_initial = optional_field<double>(t, "lr_initial", "train.lr_initial", c.lr_initial);
        c.lr_final = optional_field<double>(t, "lr_final", "train.lr_final", c.lr_final);
        c.warmup_ratio = optional_field<double>(t, "warmup_ratio", "train.warmup_ratio", c.warmup_ratio);
    }

    if (doc.contains("bon")) {
        const auto& b = doc["bon"];
        cfg.bon.model = optional_field<std::string>(b, "model", "bon.model", "");
        cfg.bon.ns = optional_field<std::vector<std::size_t>>(b, "ns", "bon.ns", cfg.bon.ns);
        cfg.bon.instructions = optional_field<std::size_t>(b, "instructions", "bon.instructions", 0);
    }

    if (doc.contains("eval")) {
        const auto& e = doc["eval"];
        cfg.eval.model_a = optional_field<std::string>(e, "model_a", "eval.model_a", "");
        cfg.eval.model_b = optional_field<std::string>(e, "model_b", "eval.model_b", "");
        cfg.eval.instructions = optional_field<std::size_t>(e, "instructions", "eval.instructions", 0);
        cfg.eval.decoding.temperature =
            optional_field<double>(e, "temperature", "eval.temperature", cfg.eval.decoding.temperature);
        cfg.eval.decoding.top_p = optional_field<double>(e, "top_p", "eval.top_p", cfg.eval.decoding.top_p);
        cfg.eval.decoding.max_tokens =
            optional_field<int>(e, "max_tokens", "eval.max_tokens", cfg.eval.decoding.max_tokens);
    }

    cfg.sampling.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config: file given by --config not found: " + path.string());
    json doc;
    try {
        doc = read_json_file(path);
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    return parse_pipeline_config(doc, base);
}

void apply_overrides(PipelineConfig& cfg, const ConfigOverrides& o) {
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.sampling.seed = *o.seed;
        cfg.train.seed = *o.seed;
    }
    if (o.concurrency) cfg.concurrency = *o.concurrency;
    if (o.backend) {
        cfg.backend_override = *o.backend;
        cfg.judge.backend = *o.backend;
    }
}

void PipelineConfig::validate() const {
    auto need = [](const fs::path& p, const std::string& name) {
        if (!fs::is_regular_file(p)) throw ConfigError("config: \"" + name + "\" does not exist: " + p.string());
    };
    for (const auto& [tag, p] : sources) need(p, "paths.sources." + std::string(to_string(tag)));
    for (std::size_t i = 0; i < eval_sets.size(); ++i)
        need(eval_sets[i], "paths.eval_sets[" + std::to_string(i) + "]");
    if (external_pairs) need(*external_pairs, "paths.external_pairs");
    need(model_pool, "model_pool");
    need(principles, "principles");
    if (aspect_map) need(*aspect_map, "aspect_map");
    if (concurrency == 0) throw ConfigError("config: field \"concurrency\" must be positive");
    if (models_per_instruction == 0) throw ConfigError("config: field \"models_per_instruction\" must be positive");
    sampling.validate();
    for (const auto& [tag, quota] : sampling.quotas)
        if (!sources.contains(tag))
            throw ConfigError("config: \"sampling.quotas\" names source " + std::string(to_string(tag)) +
                              " missing from \"paths.sources\"");
    if (judge.backend == Backend::http && !judge.endpoint)
        throw ConfigError("config: field \"judge.endpoint\" is required for the http backend");
    if (http.max_attempts < 1) throw ConfigError("config: field \"http.max_attempts\" must be positive");
    try {
        train.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: train: ") + e.what());
    }
    for (std::size_t n : bon.ns)
        if (n == 0) throw ConfigError("config: field \"bon.ns\" must hold positive values");
}

std::string PipelineConfig::digest() const {
    json files = json::object();
    auto add = [&](const std::string& name, const fs::path& p) {
        files[name] = {{"path", relative_string(p, base_dir)}, {"digest", file_digest(p)}};
    };
    for (const auto& [tag, p] : sources) add("source." + std::string(to_string(tag)), p);
    for (std::size_t i = 0; i < eval_sets.size(); ++i) add("eval_set." + std::to_string(i), eval_sets[i]);
    if (external_pairs) add("external_pairs", *external_pairs);
    add("model_pool", model_pool);
    add("principles", principles);
    if (aspect_map) add("aspect_map", *aspect_map);

    json quotas = json::array();
    for (const auto& [tag, q] : sampling.quotas) {
        auto j = quota_to_json(q);
        j["source"] = to_string(tag);
        quotas.push_back(j);
    }
    const json effective = {
        {"seed", seed},
        {"files", files},
        {"quotas", quotas},
        {"max_instruction_tokens", sampling.max_instruction_tokens},
        {"models_per_instruction", models_per_instruction},
        {"backend_override", backend_override ? backend_name(*backend_override) : ""},
        {"judge",
         {{"model", judge.settings.model},
          {"backend", backend_name(judge.backend)},
          {"endpoint", judge.endpoint.value_or("")},
          {"temperature", judge.settings.temperature},
          {"top_p", judge.settings.top_p},
          {"max_tokens", judge.settings.max_tokens}}},
        {"score_mode", to_string(score_mode)},
        {"ties", ties == TiePolicy::drop ? "drop" : "keep_zero_margin"},
        {"external_tags", external_tags},
        {"train",
         {{"epochs", train.epochs},
          {"batch_size", train.batch_size},
          {"lr_initial", train.lr_initial},
          {"lr_final", train.lr_final},
          {"warmup_ratio", train.warmup_ratio}}},
        {"bon", {{"model", bon.model}, {"ns", bon.ns}, {"instructions", bon.instructions}}},
        {"eval",
         {{"model_a", eval.model_a},
          {"model_b", eval.model_b},
          {"instructions", eval.instructions},
          {"decoding", to_json(eval.decoding)}}},
    };
    return digest128_hex(effective.dump()).substr(0, 16);
}

fs::path artifact_path(const PipelineConfig& cfg, std::string_view stage, std::string_view ext) {
    return cfg.store_dir / (std::string(stage) + "." + cfg.digest() + "." + std::string(ext));
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct StageContext {
    const PipelineConfig& cfg;
    std::string digest;
    bool dry_run;
    StageResult result;

    fs::path path(std::string_view stage, std::string_view ext = "jsonl") const {
        return cfg.store_dir / (std::string(stage) + "." + digest + "." + std::string(ext));
    }

    // Predecessor artifact; a missing one is a usage error.
    fs::path input(std::string_view stage, std::string_view ext = "jsonl") const {
        auto p = path(stage, ext);
        if (!fs::exists(p))
            throw ConfigError("missing artifact " + p.filename().string() + "; run `" + std::string(stage) +
                              "` first");
        return p;
    }

    void write_jsonl_artifact(std::string_view stage, const std::vector<json>& records) {
        auto p = path(stage);
        result.artifacts.push_back(p);
        if (!dry_run) write_jsonl(p, records);
    }

    void write_text_artifact(std::string_view stage, std::string_view ext, const std::string& data) {
        auto p = path(stage, ext);
        result.artifacts.push_back(p);
        if (!dry_run) write_text_atomic(p, data);
    }
};

template <typename T, typename Fn>
std::vector<T> read_store(const fs::path& p, Fn&& from_json) {
    std::vector<T> out;
    auto issues = read_jsonl(p, [&](const json& j, std::size_t) { out.push_back(from_json(j)); });
    if (!issues.empty())
        throw ParseError(p.filename().string() + ": line " + std::to_string(issues.front().line) + ": " +
                         issues.front().message);
    return out;
}

std::vector<Instruction> read_instructions(const fs::path& p) {
    return read_store<Instruction>(p, [](const json& j) { return instruction_from_json(j); });
}

template <typename T>
std::vector<json> to_records(const std::vector<T>& items) {
    std::vector<json> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(to_json(it));
    return out;
}

// Owns the backends for one stage run. Mock and http responses are cached
// under separate namespaces so switching backends never mixes answers.
class Backends {
public:
    explicit Backends(const PipelineConfig& cfg) : cfg_(cfg) {}

    ChatClient& client(Backend backend, const std::optional<std::string>& endpoint) {
        if (backend == Backend::mock) {
            if (!mock_) {
                mock_ = std::make_unique<MockClient>(cfg_.seed);
                mock_cached_ = std::make_unique<CachingClient>(
                    *mock_, ResponseCache(cfg_.cache_dir / ("mock-" + std::to_string(cfg_.seed))), cfg_.concurrency);
            }
            return *mock_cached_;
        }
        if (!endpoint) throw ConfigError("http backend requires an endpoint");
        auto it = http_.find(*endpoint);
        if (it == http_.end()) {
            if (!api_key_) api_key_ = api_key_from_env();
            HttpChatConfig hc;
            hc.base_url = *endpoint;
            hc.timeout = std::chrono::milliseconds(cfg_.http.timeout_ms);
            hc.retry.max_attempts = cfg_.http.max_attempts;
            hc.retry.base_delay = std::chrono::milliseconds(cfg_.http.base_delay_ms);
            hc.retry.max_delay = std::chrono::milliseconds(cfg_.http.max_delay_ms);
            auto entry = std::make_unique<HttpEntry>();
            entry->client = std::make_unique<HttpChatClient>(hc, *api_key_);
            entry->cached = std::make_unique<CachingClient>(*entry->client, ResponseCache(cfg_.cache_dir / "http"),
                                                            cfg_.concurrency);
            it = http_.emplace(*endpoint, std::move(entry)).first;
        }
        return *it->second->cached;
    }

    ChatClient& judge() { return client(cfg_.judge.backend, cfg_.judge.endpoint); }

    // Routes pool models by name.
    RoutingClient& models(std::span<const ModelSpec> pool) {
        for (const auto& m : pool) router_.route(m.name, client(m.backend, m.endpoint));
        return router_;
    }

private:
    struct HttpEntry {
        std::unique_ptr<HttpChatClient> client;
        std::unique_ptr<CachingClient> cached;
    };

    const PipelineConfig& cfg_;
    std::unique_ptr<MockClient> mock_;
    std::unique_ptr<CachingClient> mock_cached_;
    std::map<std::string, std::unique_ptr<HttpEntry>> http_;
    std::optional<std::string> api_key_;
    RoutingClient router_;
};

std::vector<ModelSpec> load_pool(const PipelineConfig& cfg) {
    auto pool = load_model_pool(cfg.model_pool);
    if (cfg.backend_override) {
        for (auto& m : pool) m.backend = *cfg.backend_override;
        validate_model_pool(pool);
    }
    return pool;
}

const ModelSpec& find_model(std::span<const ModelSpec> pool, const std::string& name, const std::string& field_name) {
    if (name.empty()) throw ConfigError("config: field \"" + field_name + "\" is required for this stage");
    for (const auto& m : pool)
        if (m.name == name) return m;
    throw ConfigError("config: field \"" + field_name + "\" names unknown model \"" + name + "\"");
}

std::vector<Instruction> head(std::vector<Instruction> items, std::size_t limit) {
    if (limit != 0 && items.size() > limit) items.resize(limit);
    return items;
}

void stage_sample(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    std::map<SourceTag, std::vector<Instruction>> loaded;
    json skipped = json::array();
    for (const auto& [tag, quota] : cfg.sampling.quotas) {
        auto load = load_source(cfg.sources.at(tag), tag);
        for (const auto& issue : load.skipped)
            skipped.push_back({{"source", to_string(tag)}, {"line", issue.line}, {"message", issue.message}});
        loaded[tag] = std::move(load.instructions);
    }
    auto assembly = assemble_pool(cfg.sampling, loaded);
    ctx.write_jsonl_artifact("sample", to_records(assembly.pool));
    ctx.result.report["instructions"] = assembly.pool.size();
    ctx.result.report["shortfalls"] = to_records(assembly.shortfalls);
    ctx.result.report["skipped_lines"] = skipped;
    if (!skipped.empty()) {
        ctx.result.exit_code = kExitPartial;
        ctx.result.report["failures"] = skipped;
    }
}

void stage_decontam(StageContext& ctx) {
    const auto pool = read_instructions(ctx.input("sample"));
    std::vector<EvalText> evals;
    json skipped = json::array();
    for (const auto& p : ctx.cfg.eval_sets) {
        std::vector<LineIssue> issues;
        auto texts = load_eval_texts(p, &issues);
        for (const auto& issue : issues)
            skipped.push_back({{"file", p.filename().string()}, {"line", issue.line}, {"message", issue.message}});
        evals.insert(evals.end(), texts.begin(), texts.end());
    }
    const auto index = build_index(evals);
    auto filtered = filter_pool(pool, index);
    ctx.write_jsonl_artifact("decontam", to_records(filtered.clean));
    ctx.write_jsonl_artifact("decontam-flagged", to_records(filtered.report.flagged));
    ctx.result.report["input"] = pool.size();
    ctx.result.report["clean"] = filtered.clean.size();
    ctx.result.report["removed"] = filtered.report.removed_count;
    ctx.result.report["eval_texts"] = evals.size();
    ctx.result.report["eval_grams"] = index.gram_count();
    if (!skipped.empty()) {
        ctx.result.exit_code = kExitPartial;
        ctx.result.report["failures"] = skipped;
    }
}

void stage_generate(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto instructions = read_instructions(ctx.input("decontam"));
    const auto pool = load_pool(cfg);
    const auto principles = load_principles(cfg.principles);
    const AspectMap aspects = cfg.aspect_map ? aspect_map_from_json(read_json_file(*cfg.aspect_map)) : AspectMap{};
    if (cfg.models_per_instruction > pool.size())
        throw ConfigError("config: field \"models_per_instruction\" exceeds the model pool size");
    ctx.result.report["instructions"] = instructions.size();
    if (ctx.dry_run) {
        ctx.result.artifacts.push_back(ctx.path("generate"));
        ctx.result.report["planned_calls"] = instructions.size() * cfg.models_per_instruction;
        return;
    }

    Backends backends(cfg);
    auto& router = backends.models(pool);
    std::vector<GenerationResult> results(instructions.size());
    parallel_for(instructions.size(), cfg.concurrency, [&](std::size_t i) {
        const auto& ins = instructions[i];
        auto models = sample_models(pool, cfg.models_per_instruction, cfg.seed, fnv1a64(ins.id));
        std::vector<PrinciplePrompt> chosen;
        for (const auto& m : models)
            chosen.push_back(sample_principle(ins.source, aspects, principles,
                                              derive_seed(cfg.seed, ins.id + '\0' + m.name)));
        results[i] = generate_completions(ins, models, chosen, router);
    });

    std::vector<json> records;
    json failures = json::array();
    for (const auto& r : results) {
        for (const auto& c : r.completions) records.push_back(to_json(c));
        for (const auto& f : r.failures)
            failures.push_back(
                {{"instruction_id", f.instruction_id}, {"model", f.model}, {"kind", f.kind}, {"message", f.message}});
    }
    ctx.write_jsonl_artifact("generate", records);
    ctx.result.report["completions"] = records.size();
    ctx.result.report["failed_calls"] = failures.size();
    if (!failures.empty()) {
        ctx.result.exit_code = kExitPartial;
        ctx.result.report["failures"] = failures;
    }
}

// Completions grouped by instruction, in instruction store order.
std::vector<std::pair<const Instruction*, std::vector<Completion>>> group_completions(
    const std::vector<Instruction>& instructions, const std::vector<Completion>& completions) {
    std::map<std::string, std::vector<Completion>> by_id;
    for (const auto& c : completions) by_id[c.instruction_id].push_back(c);
    std::vector<std::pair<const Instruction*, std::vector<Completion>>> groups;
    for (const auto& ins : instructions) {
        auto it = by_id.find(ins.id);
        if (it != by_id.end()) groups.emplace_back(&ins, std::move(it->second));
    }
    return groups;
}

void stage_annotate(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto instructions = read_instructions(ctx.input("decontam"));
    const auto completions = read_store<Completion>(ctx.input("generate"), completion_from_json);
    const auto groups = group_completions(instructions, completions);
    ctx.result.report["groups"] = groups.size();
    if (ctx.dry_run) {
        ctx.result.artifacts.push_back(ctx.path("annotate"));
        ctx.result.report["planned_calls"] = groups.size() * 2 * kGroupSize;
        return;
    }

    Backends backends(cfg);
    auto& judge = backends.judge();
    std::vector<GroupAnnotation> results(groups.size());
    json failures = json::array();
    std::vector<bool> short_group(groups.size(), false);
    parallel_for(groups.size(), cfg.concurrency, [&](std::size_t i) {
        const auto& [ins, group] = groups[i];
        if (group.size() != kGroupSize) {
            short_group[i] = true;
            return;
        }
        results[i] = annotate_group(*ins, group, judge, cfg.judge.settings);
    });

    std::vector<json> records;
    std::size_t judge_calls = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (short_group[i]) {
            failures.push_back({{"instruction_id", groups[i].first->id},
                                {"target", "group"},
                                {"kind", "incomplete_group"},
                                {"message", "group holds " + std::to_string(groups[i].second.size()) +
                                                " completions; annotation needs " + std::to_string(kGroupSize)}});
            continue;
        }
        judge_calls += results[i].judge_calls;
        for (const auto& r : results[i].records) records.push_back(to_json(r));
        for (const auto& f : results[i].failures)
            failures.push_back({{"instruction_id", f.instruction_id},
                                {"target", f.target},
                                {"kind", f.kind},
                                {"message", f.message}});
    }
    ctx.write_jsonl_artifact("annotate", records);
    ctx.result.report["records"] = records.size();
    ctx.result.report["judge_calls"] = judge_calls;
    if (!failures.empty()) {
        ctx.result.exit_code = kExitPartial;
        ctx.result.report["failures"] = failures;
    }
}

void stage_pairs(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto instructions = read_instructions(ctx.input("decontam"));
    const auto annotated = read_store<AnnotatedCompletion>(ctx.input("annotate"), annotated_from_json);
    std::map<std::string, std::vector<const AnnotatedCompletion*>> by_id;
    for (const auto& a : annotated) by_id[a.completion.instruction_id].push_back(&a);

    std::vector<ComparisonPair> pairs;
    std::size_t skipped_incomplete = 0;
    for (const auto& ins : instructions) {
        auto it = by_id.find(ins.id);
        if (it == by_id.end()) continue;
        std::vector<ScoredCompletion> group;
        for (const auto* a : it->second) {
            const bool usable = !a->incomplete && (cfg.score_mode == ScoreMode::fine_grained
                                                       ? a->ratings.size() == kRatingAspects.size()
                                                       : a->critique.has_value());
            if (!usable) {
                ++skipped_incomplete;
                continue;
            }
            const double s = cfg.score_mode == ScoreMode::fine_grained ? aggregate_score(a->ratings)
                                                                        : a->critique->overall_score;
            group.push_back({{ins.id, a->completion.model}, a->completion.text, s});
        }
        for (auto& p : build_pairs(group, range_for(cfg.score_mode), cfg.ties)) {
            p.prompt = ins.text;
            pairs.push_back(std::move(p));
        }
    }
    ctx.write_jsonl_artifact("pairs", to_records(pairs));
    ctx.result.report["pairs"] = pairs.size();
    ctx.result.report["skipped_incomplete"] = skipped_incomplete;
    ctx.result.report["score_mode"] = to_string(cfg.score_mode);
}

void stage_mix(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    auto ultra = read_store<ComparisonPair>(ctx.input("pairs"), pair_from_json);
    std::vector<ExternalPair> external;
    json skipped = json::array();
    if (cfg.external_pairs) {
        std::vector<LineIssue> issues;
        external = load_external_pairs(*cfg.external_pairs, &issues);
        for (const auto& issue : issues) skipped.push_back({{"line", issue.line}, {"message", issue.message}});
    }
    auto store = mix_datasets(std::move(ultra), external, cfg.external_tags);
    ctx.write_jsonl_artifact("mix", to_records(store.pairs));
    ctx.result.report["pairs"] = store.pairs.size();
    ctx.result.report["per_tag"] = store.per_tag;
    if (!skipped.empty()) {
        ctx.result.exit_code = kExitPartial;
        ctx.result.report["failures"] = skipped;
    }
}

void stage_train(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto pairs = read_store<ComparisonPair>(ctx.input("mix"), pair_from_json);
    if (pairs.empty()) throw ContractError("no preference pairs to train on");
    const TextStatsFeaturizer featurizer;
    std::vector<FeaturePair> features(pairs.size());
    parallel_for(pairs.size(), cfg.concurrency, [&](std::size_t i) {
        const auto& p = pairs[i];
        features[i] = {featurizer.featurize(p.prompt, p.chosen_text), featurizer.featurize(p.prompt, p.rejected_text),
                       p.margin, p.id};
    });
    ctx.result.report["pairs"] = pairs.size();
    if (ctx.dry_run) {
        ctx.result.artifacts.push_back(ctx.path("train-rm", "json"));
        ctx.result.artifacts.push_back(ctx.path("train-rm-curve", "csv"));
        return;
    }
    const auto trained = train(features, cfg.train);
    ctx.write_text_artifact("train-rm", "json", params_to_json(trained.params, featurizer).dump(2) + "\n");
    ctx.write_text_artifact("train-rm-curve", "csv", curve_to_csv(trained.curve));
    ctx.result.report["epoch_mean_loss"] = trained.epoch_mean_loss;
    ctx.result.report["train_accuracy"] = pairwise_accuracy(trained.params, features);
}

struct SampledResponse {
    std::optional<std::string> text;
    json failure;
};

SampledResponse sample_response(ChatClient& client, const ModelSpec& model, const Instruction& ins,
                                const Decoding& decoding, std::uint32_t sample_index) {
    try {
        auto resp = client.complete(make_request(model.name, std::nullopt, ins.text, decoding, sample_index));
        return {std::move(resp.text), nullptr};
    } catch (const ChatError& e) {
        return {std::nullopt,
                {{"instruction_id", ins.id},
                 {"model", model.name},
                 {"sample_index", sample_index},
                 {"kind", to_string(e.kind())},
                 {"message", e.what()}}};
    }
}

void stage_bon(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto instructions = head(read_instructions(ctx.input("decontam")), cfg.bon.instructions);
    const auto params = params_from_json(read_json_file(ctx.input("train-rm", "json")));
    const auto pool = load_pool(cfg);
    const auto& model = find_model(pool, cfg.bon.model, "bon.model");
    if (cfg.bon.ns.empty()) throw ConfigError("config: field \"bon.ns\" must not be empty");
    const std::size_t pool_size = *std::max_element(cfg.bon.ns.begin(), cfg.bon.ns.end());
    ctx.result.report["instructions"] = instructions.size();
    if (ctx.dry_run) {
        ctx.result.artifacts.push_back(ctx.path("bon-pools"));
        ctx.result.artifacts.push_back(ctx.path("bon", "csv"));
        ctx.result.report["planned_calls"] = instructions.size() * pool_size;
        return;
    }

    Backends backends(cfg);
    auto& router = backends.models(pool);
    const TextStatsFeaturizer featurizer;
    const Decoding decoding{1.0, 1.0, model.decoding.max_tokens};
    const std::size_t calls = instructions.size() * pool_size;
    std::vector<SampledResponse> samples(calls);
    parallel_for(calls, cfg.concurrency, [&](std::size_t k) {
        samples[k] = sample_response(router, model, instructions[k / pool_size], decoding,
                                     static_cast<std::uint32_t>(k % pool_size));
    });

    std::vector<CandidatePool> pools;
    json failures = json::array();
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        CandidatePool cp{instructions[i].id, {}};
        bool complete = true;
        for (std::size_t s = 0; s < pool_size; ++s) {
            auto& sample = samples[i * pool_size + s];
            if (!sample.text) {
                failures.push_back(sample.failure);
                complete = false;
                continue;
            }
            const double r = score(params, featurizer.featurize(instructions[i].text, *sample.text));
            cp.candidates.push_back({*sample.text, r});
        }
        if (complete) pools.push_back(std::move(cp));
    }
    const auto rows = best_of_n_curve(pools, cfg.bon.ns, nullptr);
    ctx.write_jsonl_artifact("bon-pools", to_records(pools));
    ctx.write_text_artifact("bon", "csv", bon_curve_to_csv(rows));
    json curve = json::array();
    for (const auto& r : rows) curve.push_back({{"n", r.n}, {"mean_reward", r.mean_reward}});
    ctx.result.report["pools"] = pools.size();
    ctx.result.report["curve"] = curve;
    if (!failures.empty()) {
        ctx.result.exit_code = kExitPartial;
        ctx.result.report["failures"] = failures;
    }
}

void stage_eval(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto instructions = head(read_instructions(ctx.input("decontam")), cfg.eval.instructions);
    const auto pool = load_pool(cfg);
    const auto& model_a = find_model(pool, cfg.eval.model_a, "eval.model_a");
    const auto& model_b = find_model(pool, cfg.eval.model_b, "eval.model_b");
    ctx.result.report["instructions"] = instructions.size();
    if (ctx.dry_run) {
        ctx.result.artifacts.push_back(ctx.path("eval"));
        ctx.result.report["planned_calls"] = instructions.size() * 3;
        return;
    }

    Backends backends(cfg);
    auto& router = backends.models(pool);
    std::vector<SampledResponse> a(instructions.size()), b(instructions.size());
    parallel_for(instructions.size() * 2, cfg.concurrency, [&](std::size_t k) {
        const auto& ins = instructions[k / 2];
        if (k % 2 == 0) a[k / 2] = sample_response(router, model_a, ins, cfg.eval.decoding, 0);
        else b[k / 2] = sample_response(router, model_b, ins, cfg.eval.decoding, 0);
    });

    std::vector<Match> matches;
    json failures = json::array();
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        if (!a[i].text) failures.push_back(a[i].failure);
        if (!b[i].text) failures.push_back(b[i].failure);
        if (a[i].text && b[i].text)
            matches.push_back({instructions[i].id, instructions[i].text, *a[i].text, *b[i].text});
    }
    auto report = win_rate_eval(matches, backends.judge(), cfg.judge.settings, cfg.seed, cfg.concurrency);
    for (const auto& o : report.outcomes)
        if (!o.valid && o.error != "unparseable verdict")
            failures.push_back({{"instruction_id", o.instruction_id}, {"kind", "judge"}, {"message", o.error}});

    ctx.write_jsonl_artifact("eval", to_records(report.outcomes));
    ctx.result.report["matches"] = matches.size();
    ctx.result.report["wins"] = report.wins;
    ctx.result.report["ties"] = report.ties;
    ctx.result.report["losses"] = report.losses;
    ctx.result.report["invalid"] = report.invalid;
    ctx.result.report["win_pct"] = report.win_pct;
    ctx.result.report["tie_pct"] = report.tie_pct;
    ctx.result.report["lose_pct"] = report.lose_pct;
    if (!failures.empty()) {
        ctx.result.exit_code = kExitPartial;
        ctx.result.report["failures"] = failures;
    }
}

void stage_stats(StageContext& ctx) {
    const auto instructions = read_instructions(ctx.input("decontam"));
    const auto completions = read_store<Completion>(ctx.input("generate"), completion_from_json);
    const auto annotated = read_store<AnnotatedCompletion>(ctx.input("annotate"), annotated_from_json);
    const auto pairs = read_store<ComparisonPair>(ctx.input("pairs"), pair_from_json);

    std::vector<Critique> critiques;
    std::size_t min_ratings = annotated.empty() ? 0 : kRatingAspects.size();
    std::size_t max_ratings = 0;
    std::size_t incomplete = 0;
    for (const auto& a : annotated) {
        if (a.critique) critiques.push_back(*a.critique);
        min_ratings = std::min(min_ratings, a.ratings.size());
        max_ratings = std::max(max_ratings, a.ratings.size());
        incomplete += a.incomplete ? 1 : 0;
    }
    auto stats = to_json(dataset_stats(instructions, completions, critiques, pairs));
    stats["annotated"] = annotated.size();
    stats["incomplete_annotations"] = incomplete;
    stats["min_ratings_per_completion"] = min_ratings;
    stats["max_ratings_per_completion"] = max_ratings;
    ctx.write_text_artifact("stats", "json", stats.dump(2) + "\n");
    ctx.result.report["stats"] = stats;
}

} // namespace

StageResult run_stage(std::string_view stage, const PipelineConfig& cfg, bool dry_run) {
    cfg.validate();
    StageContext ctx{cfg, cfg.digest(), dry_run, {}};
    if (stage == "sample") stage_sample(ctx);
    else if (stage == "decontam") stage_decontam(ctx);
    else if (stage == "generate") stage_generate(ctx);
    else if (stage == "annotate") stage_annotate(ctx);
    else if (stage == "pairs") stage_pairs(ctx);
    else if (stage == "mix") stage_mix(ctx);
    else if (stage == "train-rm") stage_train(ctx);
    else if (stage == "bon") stage_bon(ctx);
    else if (stage == "eval") stage_eval(ctx);
    else if (stage == "stats") stage_stats(ctx);
    else throw ConfigError("unknown stage \"" + std::string(stage) + "\"");

    auto& report = ctx.result.report;
    report["stage"] = stage;
    report["config_digest"] = ctx.digest;
    report["dry_run"] = dry_run;
    json names = json::array();
    for (const auto& p : ctx.result.artifacts) names.push_back(p.filename().string());
    report["artifacts"] = names;
    if (!dry_run) write_json_file(ctx.path(std::string(stage) + "-report", "json"), report);
    return std::move(ctx.result);
}

void emit_error_report(std::string_view stage, int exit_code, std::string_view kind, std::string_view message,
                       const std::optional<fs::path>& store_dir, std::ostream& err, const json& details) {
    json report = {{"stage", stage}, {"exit_code", exit_code}, {"kind", kind}, {"message", message}};
    if (!details.empty()) report["details"] = details;
    err << report.dump() << '\n';
    if (store_dir) {
        try {
            write_json_file(*store_dir / ("error." + std::string(stage) + ".json"), report);
        } catch (const Error&) {
            // The stderr copy above is the report of record when the store is unwritable.
        }
    }
}

int run_stage_guarded(std::string_view stage, const PipelineConfig& cfg, bool dry_run, std::ostream& out,
                      std::ostream& err) {
    const std::optional<fs::path> store = dry_run ? std::nullopt : std::optional<fs::path>(cfg.store_dir);
    try {
        auto result = run_stage(stage, cfg, dry_run);
        if (result.exit_code == kExitPartial) {
            const auto failures = result.report.value("failures", json::array());
            emit_error_report(stage, kExitPartial, "partial_failure",
                              std::to_string(failures.size()) + " record(s) failed", store, err, failures);
        } else if (store) {
            std::error_code ec;
            fs::remove(*store / ("error." + std::string(stage) + ".json"), ec);
        }
        out << result.report.dump() << '\n';
        return result.exit_code;
    } catch (const ConfigError& e) {
        emit_error_report(stage, kExitUsage, "config", e.what(), store, err);
        return kExitUsage;
    } catch (const std::exception& e) {
        std::string kind = "fatal";
        if (dynamic_cast<const IoError*>(&e)) kind = "io";
        else if (dynamic_cast<const TrainingError*>(&e)) kind = "training";
        else if (dynamic_cast<const ParseError*>(&e)) kind = "parse";
        else if (dynamic_cast<const ContractError*>(&e)) kind = "contract";
        emit_error_report(stage, kExitFatal, kind, e.what(), store, err);
        return kExitFatal;
    }
}

} // namespace feedforge
