#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace feedforge {

using json = nlohmann::json;

struct LineIssue {
    std::size_t line = 0; // 1-based
    std::string message;
};

// Calls on_record for every non-blank line that parses as a JSON object.
// Lines that fail to parse, or whose handler throws, are reported through the
// returned list and skipped. Throws IoError when the file cannot be opened.
std::vector<LineIssue> read_jsonl(const std::filesystem::path& path,
                                  const std::function<void(const json&, std::size_t line)>& on_record);

json read_json_file(const std::filesystem::path& path);

// Atomic replace: the data is written to a sibling temp file, then renamed over path.
void write_text_atomic(const std::filesystem::path& path, const std::string& data);

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);
void write_json_file(const std::filesystem::path& path, const json& value);

} // namespace feedforge
