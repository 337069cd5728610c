#ifndef PATCH3D_CONFIG_HPP
#define PATCH3D_CONFIG_HPP

#include "patch3d/memory_model.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace patch3d {

// Shortest decimal form that reads back to the same double (17 significant digits).
std::string format_double(double value);
double parse_double(const std::string& text);

/// Flat `key = value` store; `#` starts a comment. Keys keep insertion order
/// on output so files are reproducible.
class KeyValues {
public:
    void set(const std::string& key, const std::string& value);
    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::vector<std::string>& keys() const noexcept { return order_; }

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const KeyValues& kv, const std::filesystem::path& path);

enum class AnomalySign { Bump, Dent, Random };

struct SynthConfig {
    std::vector<std::string> shapes = {"sphere", "cylinder", "torus", "superellipsoid"};
    std::size_t points = 4096;
    std::size_t train_per_class = 4;
    std::size_t test_per_class = 20;
    std::size_t anomalous_per_class = 10;  // of the test clouds
    double sigma = 0.005;
    double anomaly_radius = 0.3;
    double amplitude_mean = 0.07;
    double amplitude_halfwidth = 0.03;
    AnomalySign sign = AnomalySign::Random;
};

enum class Command { Synth, Fit, Score, Eval, SweepK, Bench };

const char* to_string(Command command);
std::optional<Command> parse_command(const std::string& name);

struct RunConfig {
    PipelineParams pipeline;
    std::uint64_t seed = 7;
    std::filesystem::path dataset_root;
    std::filesystem::path out_dir = "patch3d_out";
    std::vector<std::size_t> k_list = {1, 2, 4, 8, 16};
    SynthConfig synth;
    bool diagnostics = false;
};

/// CLI-level overrides applied on top of the config file.
struct Overrides {
    std::optional<std::size_t> k;
    std::optional<double> delta;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<std::filesystem::path> dataset;
    std::optional<std::string> k_list;
};

// Builds and validates a RunConfig. Every violated field is collected into a
// single ConfigError.
RunConfig make_run_config(const KeyValues& kv, const Overrides& overrides, Command command);

std::vector<std::size_t> parse_size_list(const std::string& text);

} // namespace patch3d

#endif // PATCH3D_CONFIG_HPP
