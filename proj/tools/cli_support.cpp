#include "cli_support.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <Eigen/Core>
#include <cholmod.h>
#include <fftw3.h>

#include "membrane/common.hpp"
#include "membrane/kernels.hpp"

namespace cli {

namespace fs = std::filesystem;

namespace {

std::string to_input(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_array()) {
        std::string out;
        for (const auto& e : v) out += (out.empty() ? "" : ",") + to_input(e);
        return out;
    }
    return v.dump();
}

void flatten(const json& node, std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : node.items()) {
        if (value.is_object()) {
            parents.push_back(key);
            flatten(value, parents, items);
            parents.pop_back();
            continue;
        }
        CLI::ConfigItem item;
        item.parents = parents;
        item.name = key;
        item.inputs = {to_input(value)};
        items.push_back(std::move(item));
    }
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string t; std::getline(ss, t, sep);) {
        t.erase(0, t.find_first_not_of(" \t"));
        t.erase(t.find_last_not_of(" \t") + 1);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

double parse_number(const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw membrane::ConfigError("not a number: '" + t + "'");
    }
    if (used != t.size()) throw membrane::ConfigError("not a number: '" + t + "'");
    return v;
}

int parse_int(const std::string& t) {
    const double v = parse_number(t);
    if (v != static_cast<int>(v)) throw membrane::ConfigError("not an integer: '" + t + "'");
    return static_cast<int>(v);
}

json versions() {
    return {{"membrane", std::string(MEMBRANE_VERSION)},
            {"eigen", format("%d.%d.%d", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"cholmod", format("%d.%d.%d", CHOLMOD_MAIN_VERSION, CHOLMOD_SUB_VERSION, CHOLMOD_SUBSUB_VERSION)},
            {"fftw", std::string(fftw_version)},
            {"compiler", std::string(__VERSION__)}};
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
    return echo_config(*app).dump(2);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
    json j;
    try {
        j = json::parse(input, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    std::vector<std::string> parents;
    flatten(j, parents, items);
    return items;
}

json echo_config(const CLI::App& app) {
    json out = json::object();
    for (const CLI::Option* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config" || name.empty()) continue;
        if (opt->count() > 0) {
            const auto& r = opt->results();
            std::string joined;
            for (const auto& s : r) joined += (joined.empty() ? "" : ",") + s;
            out[name] = joined;
        } else {
            out[name] = opt->get_default_str();
        }
    }
    for (const CLI::App* sub : app.get_subcommands()) out[sub->get_name()] = echo_config(*sub);
    return out;
}

double parse_h(const std::string& text) {
    const auto slash = text.find('/');
    double h = 0.0;
    if (slash == std::string::npos) {
        h = parse_number(text);
    } else {
        const double den = parse_number(text.substr(slash + 1));
        if (den == 0.0) throw membrane::ConfigError("zero denominator in '" + text + "'");
        h = parse_number(text.substr(0, slash)) / den;
    }
    if (!(h > 0.0)) throw membrane::ConfigError("spacing must be positive: '" + text + "'");
    return h;
}

std::vector<double> parse_h_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& t : split(text, ',')) out.push_back(parse_h(t));
    if (out.empty()) throw membrane::ConfigError("empty h list");
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const auto& t : split(text, ',')) {
        const auto dots = t.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_int(t));
            continue;
        }
        const int a = parse_int(t.substr(0, dots)), b = parse_int(t.substr(dots + 2));
        if (b < a) throw membrane::ConfigError("empty range '" + t + "'");
        for (int v = a; v <= b; ++v) out.push_back(v);
    }
    if (out.empty()) throw membrane::ConfigError("empty integer list");
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& t : split(text, ',')) out.push_back(parse_number(t));
    return out;
}

std::uint64_t fnv1a64(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::uint64_t h = 14695981039346656037ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

Csv::Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw membrane::ConfigError("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
}

void Csv::row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << cell(values[i]);
    out_ << '\n';
}

std::string Csv::cell(double v) { return format("%.17g", v); }

Run::Run(std::string recipe, json config, fs::path directory)
    : recipe_(std::move(recipe)), config_(std::move(config)), dir_(std::move(directory)) {}

fs::path Run::path(const std::string& name) {
    if (!created_) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw membrane::ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
        created_ = true;
    }
    return dir_ / name;
}

Csv Run::csv(const std::string& name, const std::vector<std::string>& header) { return Csv(path(name), header); }

void Run::raw(const std::string& name, std::span<const double> data, const std::vector<std::size_t>& shape,
              json sidecar) {
    std::ofstream out(path(name + ".f64"), std::ios::binary);
    for (double v : data) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
    sidecar["dtype"] = "float64";
    sidecar["byte_order"] = "little";
    sidecar["layout"] = "row-major";
    sidecar["shape"] = shape;
    sidecar["data"] = name + ".f64";
    write_json(name + ".json", sidecar);
}

void Run::write_json(const std::string& name, const json& value) {
    std::ofstream out(path(name));
    out << value.dump(2) << '\n';
}

void Run::record_stage(const std::string& name, std::chrono::steady_clock::time_point t0) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stages_.push_back({{"name", name}, {"seconds", s}});
}

void Run::check(const std::string& name, bool pass, const std::string& detail) {
    assertions_.push_back({name, pass, detail});
}

int Run::finish() {
    const fs::path manifest_path = path("manifest.json");
    json files = json::array();
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(dir_))
        if (e.is_regular_file() && e.path() != manifest_path) found.push_back(e.path());
    std::sort(found.begin(), found.end());
    for (const auto& p : found)
        files.push_back({{"name", fs::relative(p, dir_).generic_string()},
                         {"bytes", fs::file_size(p)},
                         {"fnv1a64", format("%016llx", static_cast<unsigned long long>(fnv1a64(p)))}});

    bool all = true;
    json checks = json::array();
    std::vector<std::string> failed;
    for (const auto& a : assertions_) {
        all = all && a.pass;
        if (!a.pass) failed.push_back(a.name);
        checks.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
        std::printf("%s %s: %s\n", a.pass ? "PASS" : "FAIL", a.name.c_str(), a.detail.c_str());
    }
    json manifest = {{"recipe", recipe_},
                     {"config", config_},
                     {"versions", versions()},
                     {"threads", membrane::kernels::max_threads()},
                     {"stages", stages_},
                     {"results", results_},
                     {"assertions", checks},
                     {"failed", failed},
                     {"pass", all},
                     {"files", files}};
    write_json("manifest.json", manifest);
    std::printf("%s: %s (%s)\n", recipe_.c_str(), all ? "pass" : "FAIL", manifest_path.string().c_str());
    return all ? 0 : 1;
}

fs::path output_directory(const std::string& explicit_out, const std::string& recipe) {
    if (!explicit_out.empty()) return explicit_out;
    if (const char* env = std::getenv("MEMBRANE_OUT"); env != nullptr && *env != '\0') return fs::path(env) / recipe;
    return fs::path("membrane_out") / recipe;
}

}  // namespace cli
