#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fixture {

namespace fs = std::filesystem;

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Copies the bundled pipeline fixture into dest with data paths made absolute,
// so runs never write next to the checked-in fixture. Returns the config path.
inline fs::path make_copy(const fs::path& fixture_dir, const fs::path& data_dir, const fs::path& dest,
                          const nlohmann::json& patch = nlohmann::json::object()) {
    fs::remove_all(dest);
    fs::create_directories(dest);
    for (const char* sub : {"sources", "eval"})
        fs::copy(fixture_dir / sub, dest / sub, fs::copy_options::recursive);
    fs::copy_file(fixture_dir / "external_pairs.jsonl", dest / "external_pairs.jsonl");
    auto cfg = nlohmann::json::parse(slurp(fixture_dir / "config.json"));
    cfg["model_pool"] = (data_dir / "model_pool.json").string();
    cfg["principles"] = (data_dir / "principles.json").string();
    cfg["aspect_map"] = (data_dir / "aspect_map.json").string();
    cfg.merge_patch(patch);
    std::ofstream(dest / "config.json") << cfg.dump(2);
    return dest / "config.json";
}

// Every regular file under dir keyed by relative path.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

} // namespace fixture
