#include "patch3d/config.hpp"

#include "patch3d/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace patch3d {

std::string format_double(double value)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

double parse_double(const std::string& text)
{
    // strtod accepts "inf" and the %.17g output exactly.
    const char* begin = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw Error(ErrorKind::ParseError, "not a number: '" + text + "'");
    }
    return v;
}

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

void KeyValues::set(const std::string& key, const std::string& value)
{
    if (values_.count(key) == 0) {
        order_.push_back(key);
    }
    values_[key] = value;
}

std::optional<std::string> KeyValues::get(const std::string& key) const
{
    auto it = values_.find(key);
    if (it == values_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const
{
    return get(key).value_or(fallback);
}

double KeyValues::get_double(const std::string& key, double fallback) const
{
    auto v = get(key);
    return v ? parse_double(*v) : fallback;
}

std::size_t KeyValues::get_size(const std::string& key, std::size_t fallback) const
{
    auto v = get(key);
    if (!v) {
        return fallback;
    }
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
        throw Error(ErrorKind::ParseError, "not a non-negative integer: '" + *v + "'");
    }
    return out;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const
{
    auto v = get(key);
    if (!v) {
        return fallback;
    }
    const auto s = lower(*v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
        return false;
    }
    throw Error(ErrorKind::ParseError, "not a boolean: '" + *v + "'");
}

KeyValues parse_key_values(std::istream& in, const std::string& source)
{
    KeyValues kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::ConfigError,
                        source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw Error(ErrorKind::ConfigError, source + ":" + std::to_string(line_no) + ": empty key");
        }
        kv.set(key, trim(line.substr(eq + 1)));
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::ConfigError, "cannot open " + path.string());
    }
    return parse_key_values(in, path.string());
}

void write_key_values(const KeyValues& kv, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    for (const auto& key : kv.keys()) {
        out << key << " = " << *kv.get(key) << "\n";
    }
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }
}

const char* to_string(Command command)
{
    switch (command) {
    case Command::Synth: return "synth";
    case Command::Fit: return "fit";
    case Command::Score: return "score";
    case Command::Eval: return "eval";
    case Command::SweepK: return "sweep-k";
    case Command::Bench: return "bench";
    }
    return "unknown";
}

std::optional<Command> parse_command(const std::string& name)
{
    for (auto c : {Command::Synth, Command::Fit, Command::Score, Command::Eval, Command::SweepK, Command::Bench}) {
        if (name == to_string(c)) {
            return c;
        }
    }
    return std::nullopt;
}

std::vector<std::size_t> parse_size_list(const std::string& text)
{
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            continue;
        }
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size()) {
            throw Error(ErrorKind::ParseError, "bad list entry '" + item + "'");
        }
        out.push_back(v);
    }
    return out;
}

namespace {

const std::set<std::string>& known_keys()
{
    static const std::set<std::string> keys = {
        "dataset_root", "out_dir", "k", "delta", "normal_k", "feature_k", "normalize", "seed", "max_iters",
        "object_top_fraction", "k_list", "diagnostics", "shapes", "synth_points", "synth_train", "synth_test",
        "synth_anomalous", "synth_sigma", "anomaly_radius", "amplitude_mean", "amplitude_halfwidth", "anomaly_sign",
    };
    return keys;
}

std::vector<std::string> split_names(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

} // namespace

RunConfig make_run_config(const KeyValues& kv, const Overrides& overrides, Command command)
{
    RunConfig cfg;
    std::vector<std::string> problems;

    for (const auto& key : kv.keys()) {
        if (known_keys().count(key) == 0) {
            problems.push_back("unknown key '" + key + "'");
        }
    }
    // Each field is read independently so one bad value does not hide others.
    auto read = [&](const char* key, auto&& apply) {
        try {
            apply();
        } catch (const Error& e) {
            problems.push_back(std::string(key) + ": " + e.what());
        }
    };

    read("k", [&] { cfg.pipeline.cut.k = kv.get_size("k", cfg.pipeline.cut.k); });
    read("delta", [&] { cfg.pipeline.cut.delta = kv.get_double("delta", cfg.pipeline.cut.delta); });
    read("max_iters", [&] { cfg.pipeline.cut.max_iters = kv.get_size("max_iters", cfg.pipeline.cut.max_iters); });
    read("normal_k", [&] { cfg.pipeline.fpfh.normal_k = kv.get_size("normal_k", cfg.pipeline.fpfh.normal_k); });
    read("feature_k", [&] { cfg.pipeline.fpfh.feature_k = kv.get_size("feature_k", cfg.pipeline.fpfh.feature_k); });
    read("normalize", [&] { cfg.pipeline.normalize = kv.get_bool("normalize", cfg.pipeline.normalize); });
    read("object_top_fraction",
         [&] { cfg.pipeline.object_top_fraction = kv.get_double("object_top_fraction", cfg.pipeline.object_top_fraction); });
    read("seed", [&] { cfg.seed = kv.get_size("seed", cfg.seed); });
    read("diagnostics", [&] { cfg.diagnostics = kv.get_bool("diagnostics", cfg.diagnostics); });
    read("k_list", [&] {
        if (auto v = kv.get("k_list")) {
            cfg.k_list = parse_size_list(*v);
        }
    });
    if (auto v = kv.get("dataset_root")) {
        cfg.dataset_root = *v;
    }
    if (auto v = kv.get("out_dir")) {
        cfg.out_dir = *v;
    }

    auto& s = cfg.synth;
    if (auto v = kv.get("shapes")) {
        s.shapes = split_names(*v);
    }
    read("synth_points", [&] { s.points = kv.get_size("synth_points", s.points); });
    read("synth_train", [&] { s.train_per_class = kv.get_size("synth_train", s.train_per_class); });
    read("synth_test", [&] { s.test_per_class = kv.get_size("synth_test", s.test_per_class); });
    read("synth_anomalous", [&] { s.anomalous_per_class = kv.get_size("synth_anomalous", s.anomalous_per_class); });
    read("synth_sigma", [&] { s.sigma = kv.get_double("synth_sigma", s.sigma); });
    read("anomaly_radius", [&] { s.anomaly_radius = kv.get_double("anomaly_radius", s.anomaly_radius); });
    read("amplitude_mean", [&] { s.amplitude_mean = kv.get_double("amplitude_mean", s.amplitude_mean); });
    read("amplitude_halfwidth",
         [&] { s.amplitude_halfwidth = kv.get_double("amplitude_halfwidth", s.amplitude_halfwidth); });
    if (auto v = kv.get("anomaly_sign")) {
        const auto name = lower(*v);
        if (name == "bump") {
            s.sign = AnomalySign::Bump;
        } else if (name == "dent") {
            s.sign = AnomalySign::Dent;
        } else if (name == "random") {
            s.sign = AnomalySign::Random;
        } else {
            problems.push_back("anomaly_sign: expected bump, dent or random");
        }
    }

    if (overrides.k) {
        cfg.pipeline.cut.k = *overrides.k;
    }
    if (overrides.delta) {
        cfg.pipeline.cut.delta = *overrides.delta;
    }
    if (overrides.seed) {
        cfg.seed = *overrides.seed;
    }
    if (overrides.out) {
        cfg.out_dir = *overrides.out;
    }
    if (overrides.dataset) {
        cfg.dataset_root = *overrides.dataset;
    }
    if (overrides.k_list) {
        read("k_list", [&] { cfg.k_list = parse_size_list(*overrides.k_list); });
    }
    cfg.pipeline.cut.seed = cfg.seed;

    if (cfg.pipeline.cut.k < 1) {
        problems.push_back("k: must be >= 1");
    }
    if (!(cfg.pipeline.cut.delta >= 1.0)) {
        problems.push_back("delta: must be >= 1");
    }
    if (cfg.pipeline.cut.max_iters < 1) {
        problems.push_back("max_iters: must be >= 1");
    }
    if (cfg.pipeline.fpfh.normal_k < 3) {
        problems.push_back("normal_k: must be >= 3");
    }
    if (cfg.pipeline.fpfh.feature_k < 1) {
        problems.push_back("feature_k: must be >= 1");
    }
    if (!(cfg.pipeline.object_top_fraction >= 0.0 && cfg.pipeline.object_top_fraction <= 1.0)) {
        problems.push_back("object_top_fraction: must lie in [0, 1]");
    }
    if (cfg.k_list.empty() || std::any_of(cfg.k_list.begin(), cfg.k_list.end(), [](auto k) { return k < 1; })) {
        problems.push_back("k_list: needs one or more entries >= 1");
    }
    if (command == Command::Synth) {
        static const std::set<std::string> shapes = {"sphere", "cylinder", "torus", "superellipsoid"};
        if (s.shapes.empty()) {
            problems.push_back("shapes: at least one shape required");
        }
        for (const auto& shape : s.shapes) {
            if (shapes.count(shape) == 0) {
                problems.push_back("shapes: unknown shape '" + shape + "'");
            }
        }
        if (s.points < 100) {
            problems.push_back("synth_points: must be >= 100");
        }
        if (s.train_per_class < 1) {
            problems.push_back("synth_train: must be >= 1");
        }
        if (s.anomalous_per_class > s.test_per_class) {
            problems.push_back("synth_anomalous: exceeds synth_test");
        }
        if (!(s.sigma >= 0.0)) {
            problems.push_back("synth_sigma: must be >= 0");
        }
        if (!(s.anomaly_radius > 0.0 && s.anomaly_radius < 1.0)) {
            problems.push_back("anomaly_radius: must lie in (0, 1)");
        }
        if (!(s.amplitude_halfwidth >= 0.0 && s.amplitude_mean - s.amplitude_halfwidth >= 0.0)) {
            problems.push_back("amplitude_mean/amplitude_halfwidth: range must satisfy 0 <= lo <= hi");
        }
    } else {
        if (cfg.dataset_root.empty()) {
            problems.push_back("dataset_root: required");
        } else if (!std::filesystem::is_directory(cfg.dataset_root)) {
            problems.push_back("dataset_root: '" + cfg.dataset_root.string() + "' does not exist");
        }
    }
    if (cfg.out_dir.empty()) {
        problems.push_back("out_dir: required");
    }

    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) {
            msg += "\n  - " + p;
        }
        throw Error(ErrorKind::ConfigError, msg);
    }
    return cfg;
}

} // namespace patch3d
