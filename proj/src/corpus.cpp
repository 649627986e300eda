#include "feedforge/corpus.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_map>

#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"
#include "feedforge/rng.hpp"
#include "feedforge/text.hpp"

namespace feedforge {

namespace {

constexpr std::array<std::pair<SourceTag, std::string_view>, 7> kSourceNames{{
    {SourceTag::truthful_qa, "truthful_qa"},
    {SourceTag::false_qa, "false_qa"},
    {SourceTag::evol_instruct, "evol_instruct"},
    {SourceTag::ultrachat, "ultrachat"},
    {SourceTag::sharegpt, "sharegpt"},
    {SourceTag::flan, "flan"},
    {SourceTag::custom, "custom"},
}};

std::vector<Instruction> pick(std::span<const Instruction> items, std::vector<std::size_t> idx) {
    std::sort(idx.begin(), idx.end());
    std::vector<Instruction> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(items[i]);
    return out;
}

} // namespace

std::string_view to_string(SourceTag tag) {
    for (const auto& [t, name] : kSourceNames)
        if (t == tag) return name;
    return "custom";
}

std::optional<SourceTag> parse_source_tag(std::string_view name) {
    for (const auto& [t, n] : kSourceNames)
        if (n == name) return t;
    return std::nullopt;
}

std::string instruction_id(SourceTag source, std::string_view text) {
    std::string key(to_string(source));
    key.push_back('\0');
    key.append(text);
    return digest128_hex(key);
}

Instruction make_instruction(SourceTag source, std::string text, std::optional<std::string> task_label) {
    if (text::trim(text).empty()) throw ContractError("instruction text is empty");
    Instruction ins;
    ins.id = instruction_id(source, text);
    ins.source = source;
    ins.token_count = text::count_tokens(text);
    ins.text = std::move(text);
    ins.task_label = std::move(task_label);
    return ins;
}

json to_json(const Instruction& ins) {
    json j;
    j["id"] = ins.id;
    j["source"] = to_string(ins.source);
    j["text"] = ins.text;
    j["task_label"] = ins.task_label ? json(*ins.task_label) : json(nullptr);
    j["token_count"] = ins.token_count;
    return j;
}

Instruction instruction_from_json(const json& j) {
    auto tag = parse_source_tag(j.at("source").get<std::string>());
    if (!tag) throw ParseError("unknown source tag " + j.at("source").dump());
    std::optional<std::string> label;
    if (j.contains("task_label") && j["task_label"].is_string()) label = j["task_label"].get<std::string>();
    Instruction ins = make_instruction(*tag, j.at("text").get<std::string>(), std::move(label));
    if (j.contains("id") && j["id"].get<std::string>() != ins.id)
        throw ParseError("instruction id does not match its content: " + j["id"].get<std::string>());
    return ins;
}

SourceLoad load_source(const std::filesystem::path& path, SourceTag source) {
    SourceLoad load;
    load.skipped = read_jsonl(path, [&](const json& rec, std::size_t) {
        if (!rec.contains("text") || !rec["text"].is_string()) throw ParseError("missing string field \"text\"");
        std::optional<std::string> label;
        if (rec.contains("task_label") && !rec["task_label"].is_null()) {
            if (!rec["task_label"].is_string()) throw ParseError("\"task_label\" must be a string");
            label = rec["task_label"].get<std::string>();
        }
        load.instructions.push_back(make_instruction(source, rec["text"].get<std::string>(), std::move(label)));
    });
    return load;
}

std::vector<Instruction> stratified_sample(std::span<const Instruction> instructions, std::size_t cot_count,
                                           std::size_t per_task_count, std::size_t max_tokens,
                                           std::uint64_t seed) {
    // Strata in first-appearance order; each holds indices into instructions.
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        const auto& ins = instructions[i];
        if (!ins.task_label) throw ContractError("stratified sampling needs a task_label on instruction " + ins.id);
        if (ins.token_count > max_tokens) continue;
        auto [it, inserted] = strata.try_emplace(*ins.task_label);
        if (inserted) order.push_back(*ins.task_label);
        it->second.push_back(i);
    }

    std::vector<std::size_t> chosen;
    for (const auto& task : order) {
        const auto& members = strata[task];
        std::size_t quota = task == kCotTask ? cot_count : per_task_count;
        Rng rng(derive_seed(seed, task));
        for (std::size_t k : rng.sample_indices(members.size(), quota)) chosen.push_back(members[k]);
    }
    return pick(instructions, std::move(chosen));
}

std::vector<Instruction> random_sample(std::span<const Instruction> instructions, std::size_t n,
                                       std::uint64_t seed) {
    Rng rng(seed);
    return pick(instructions, rng.sample_indices(instructions.size(), n));
}

void SamplingPlan::validate() const {
    std::set<SourceTag> seen;
    for (const auto& [tag, quota] : quotas) {
        if (!seen.insert(tag).second)
            throw ConfigError("source " + std::string(to_string(tag)) + " appears twice in the sampling plan");
        if (const auto* r = std::get_if<RandomN>(&quota); r && r->count == 0)
            throw ConfigError("random quota for " + std::string(to_string(tag)) + " must be positive");
        if (const auto* s = std::get_if<Stratified>(&quota); s && (s->cot_count == 0 || s->per_task_count == 0))
            throw ConfigError("stratified quota for " + std::string(to_string(tag)) + " must be positive");
    }
    if (max_instruction_tokens == 0) throw ConfigError("max_instruction_tokens must be positive");
}

SamplingPlan SamplingPlan::reference(std::uint64_t seed) {
    SamplingPlan plan;
    plan.seed = seed;
    plan.quotas = {
        {SourceTag::truthful_qa, TakeAll{}},
        {SourceTag::false_qa, TakeAll{}},
        {SourceTag::evol_instruct, RandomN{10000}},
        {SourceTag::ultrachat, RandomN{10000}},
        {SourceTag::sharegpt, RandomN{20000}},
        {SourceTag::flan, Stratified{3000, 10}},
    };
    return plan;
}

json quota_to_json(const Quota& q) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TakeAll>) {
                return {{"kind", "take_all"}};
            } else if constexpr (std::is_same_v<T, RandomN>) {
                return {{"kind", "random"}, {"count", v.count}};
            } else {
                return {{"kind", "stratified"}, {"cot_count", v.cot_count}, {"per_task_count", v.per_task_count}};
            }
        },
        q);
}

Quota quota_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "take_all") return TakeAll{};
    if (kind == "random") return RandomN{j.at("count").get<std::size_t>()};
    if (kind == "stratified")
        return Stratified{j.at("cot_count").get<std::size_t>(), j.at("per_task_count").get<std::size_t>()};
    throw ConfigError("unknown quota kind \"" + kind + "\"");
}

PoolAssembly assemble_pool(const SamplingPlan& plan, const std::map<SourceTag, std::vector<Instruction>>& sources) {
    plan.validate();
    PoolAssembly out;
    for (const auto& [tag, quota] : plan.quotas) {
        auto it = sources.find(tag);
        if (it == sources.end())
            throw ConfigError("sampling plan references unloaded source " + std::string(to_string(tag)));
        // Repeated lines within one source collapse to their first occurrence.
        std::vector<Instruction> items;
        std::set<std::string> seen_ids;
        for (const auto& ins : it->second)
            if (seen_ids.insert(ins.id).second) items.push_back(ins);
        const std::uint64_t stream = derive_seed(plan.seed, to_string(tag));

        std::vector<Instruction> taken;
        std::size_t requested = 0;
        if (std::holds_alternative<TakeAll>(quota)) {
            taken = items;
            requested = items.size();
        } else if (const auto* r = std::get_if<RandomN>(&quota)) {
            taken = random_sample(items, r->count, stream);
            requested = r->count;
        } else {
            const auto& s = std::get<Stratified>(quota);
            taken = stratified_sample(items, s.cot_count, s.per_task_count, plan.max_instruction_tokens, stream);
            // Requested size for a stratified quota depends on the strata present.
            std::set<std::string> tasks;
            bool has_cot = false;
            for (const auto& ins : items) {
                if (ins.task_label == kCotTask) has_cot = true;
                else if (ins.task_label) tasks.insert(*ins.task_label);
            }
            requested = (has_cot ? s.cot_count : 0) + tasks.size() * s.per_task_count;
        }
        if (taken.size() < requested) out.shortfalls.push_back({tag, requested, taken.size()});
        out.pool.insert(out.pool.end(), std::make_move_iterator(taken.begin()), std::make_move_iterator(taken.end()));
    }
    return out;
}

} // namespace feedforge
