#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace exitrack {

/// Shortest decimal text that parses back to exactly `value`.
[[nodiscard]] std::string format_double(double value);
/// Strict full-string number parse; std::nullopt on any trailing junk.
[[nodiscard]] std::optional<double> parse_double(std::string_view text);
[[nodiscard]] std::optional<std::int64_t> parse_int(std::string_view text);

/// Ordered flat key=value document. Keys keep first-insertion order on output.
class KeyValues {
public:
    void set(const std::string& key, std::string value);
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    void set(const std::string& key, double value) { set(key, format_double(value)); }
    void set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "1" : "0")); }

    [[nodiscard]] bool contains(const std::string& key) const;
    [[nodiscard]] std::optional<std::string> get(const std::string& key) const;
    [[nodiscard]] std::string require(const std::string& key) const;
    [[nodiscard]] double get_double(const std::string& key) const;
    [[nodiscard]] std::int64_t get_int(const std::string& key) const;

    [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }

    [[nodiscard]] std::string to_string() const;
    static KeyValues parse(std::string_view text, const std::string& source = "<string>");

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

[[nodiscard]] KeyValues read_kv(const std::filesystem::path& path);
void write_kv(const std::filesystem::path& path, const KeyValues& kv);

/// Whole-file helpers.
[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace exitrack
