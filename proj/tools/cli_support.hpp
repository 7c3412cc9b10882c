#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace cli {

using nlohmann::json;

/// Reads nested JSON objects as CLI11 config items: {"seed": 3, "thomee": {"h": "1/8,1/16"}}.
/// Arrays become one comma-joined value, so `"h": ["1/8", "1/16"]` and `"h": "1/8,1/16"` agree.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool, bool, std::string) const override;
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

/// Every option of `app` and of its invoked subcommands, as given or defaulted, values verbatim.
json echo_config(const CLI::App& app);

/// "1/16" or "0.0625".
double parse_h(const std::string& text);
/// Comma-separated h values.
std::vector<double> parse_h_list(const std::string& text);
/// Comma-separated integers; "a..b" expands to the inclusive range.
std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

std::uint64_t fnv1a64(const std::filesystem::path& file);

struct Assertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

class Csv {
public:
    Csv(const std::filesystem::path& path, const std::vector<std::string>& header);

    template <class... T>
    void row(const T&... values) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
        out_ << '\n';
    }
    void row(const std::vector<double>& values);

private:
    static std::string cell(double v);
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I v) {
        return std::to_string(v);
    }

    std::ofstream out_;
};

/// Output directory, timings, assertions and the manifest of one recipe run.
class Run {
public:
    Run(std::string recipe, json config, std::filesystem::path directory);

    [[nodiscard]] const std::filesystem::path& directory() const { return dir_; }
    std::filesystem::path path(const std::string& name);

    Csv csv(const std::string& name, const std::vector<std::string>& header);
    /// name.f64 (little-endian float64, row-major `shape`) and name.json sidecar.
    void raw(const std::string& name, std::span<const double> data, const std::vector<std::size_t>& shape,
             json sidecar = json::object());
    void write_json(const std::string& name, const json& value);

    template <class F>
    auto stage(const std::string& name, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
            f();
            record_stage(name, t0);
        } else {
            auto result = f();
            record_stage(name, t0);
            return result;
        }
    }

    void check(const std::string& name, bool pass, const std::string& detail);
    /// Extra key in the manifest's "results" object.
    void result(const std::string& key, json value) { results_[key] = std::move(value); }

    /// Writes manifest.json listing every file in the directory, prints one line per
    /// assertion, and returns the exit code (0 when all pass, 1 otherwise).
    int finish();

private:
    void record_stage(const std::string& name, std::chrono::steady_clock::time_point t0);

    std::string recipe_;
    json config_;
    std::filesystem::path dir_;
    bool created_ = false;
    json stages_ = json::array();
    json results_ = json::object();
    std::vector<Assertion> assertions_;
};

/// --out when given, else $MEMBRANE_OUT/<recipe>, else ./membrane_out/<recipe>.
std::filesystem::path output_directory(const std::string& explicit_out, const std::string& recipe);

std::string format(const char* f, auto... args) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

}  // namespace cli
