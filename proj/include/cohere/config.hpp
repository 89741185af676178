#pragma once

// JSON run configuration for the command-line tool. Every field is optional;
// unknown keys and mistyped values are rejected with the offending path.

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohere/optimizer.hpp"

namespace cohere {

struct ValidationSettings {
    int samples = 50;
    std::uint64_t seed = 1;
    std::vector<int> resolutions{12};
    double zeta_min = 0.3;
    double zeta_max = 2.0;
};

struct OutputSettings {
    std::string directory = ".";
    std::string trace = "trace.tsv";
    std::string geometry = "geometry.tsv";
    std::string checkpoint = "checkpoint.tsv";
    int checkpoint_every = 1;
};

struct RunConfig {
    OptimizationConfig optimization;
    ValidationSettings validation;
    OutputSettings output;

    std::string path(const std::string& file) const {
        if (file.empty() || file.front() == '/' || output.directory.empty()) return file;
        return output.directory + "/" + file;
    }
};

namespace detail {

using nlohmann::json;

class ConfigReader {
public:
    ConfigReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.push_back(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        read(*it, key, out);
    }

    ConfigReader section(const char* key) {
        seen_.push_back(key);
        static const json empty = json::object();
        auto it = j_.find(key);
        return ConfigReader(it == j_.end() ? empty : *it, where(key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                fail(it.key(), "unknown key");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw Error(Errc::parse, "config: " + (key.empty() ? path_ : where(key)) + ": " + msg);
    }

private:
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void read(const json& v, const char* key, double& out) {
        if (!v.is_number()) fail(key, "expected a number");
        out = v.get<double>();
    }
    void read(const json& v, const char* key, int& out) {
        if (!v.is_number_integer()) fail(key, "expected an integer");
        out = v.get<int>();
    }
    void read(const json& v, const char* key, long& out) {
        if (!v.is_number_integer()) fail(key, "expected an integer");
        out = v.get<long>();
    }
    void read(const json& v, const char* key, std::uint64_t& out) {
        if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
        out = v.get<std::uint64_t>();
    }
    void read(const json& v, const char* key, std::string& out) {
        if (!v.is_string()) fail(key, "expected a string");
        out = v.get<std::string>();
    }
    void read(const json& v, const char* key, std::optional<double>& out) {
        if (v.is_null()) {
            out.reset();
            return;
        }
        double d = 0.0;
        read(v, key, d);
        out = d;
    }
    void read(const json& v, const char* key, std::vector<int>& out) {
        if (!v.is_array()) fail(key, "expected an array of integers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number_integer()) fail(key, "expected an array of integers");
            out.push_back(e.get<int>());
        }
    }

    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

} // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // report line and column of the failing byte
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw Error(Errc::parse, "config: line " + std::to_string(line) + ", column " + std::to_string(col) +
                                     ": invalid JSON");
    }

    RunConfig rc;
    detail::ConfigReader root(j, "");
    {
        auto s = root.section("optimization");
        auto& o = rc.optimization;
        std::string scenario = to_string(o.scenario), rotation = to_string(o.rotation);
        s.get("scenario", scenario);
        s.get("rotation", rotation);
        s.get("atom_zeta", o.atom_zeta);
        s.get("max_iterations", o.max_iterations);
        s.get("dipole_d", o.dipole_d);
        s.get("dipole_mu", o.dipole_mu);
        s.get("backplate_depth", o.backplate_depth);
        s.get("block_permittivity", o.block_permittivity);
        s.finish();
        if (scenario == "backplate")
            o.scenario = Scenario::backplate;
        else if (scenario == "freestanding")
            o.scenario = Scenario::freestanding;
        else
            s.fail("scenario", "expected 'backplate' or 'freestanding'");
        if (rotation == "perpendicular")
            o.rotation = Rotation::perpendicular;
        else if (rotation == "parallel")
            o.rotation = Rotation::parallel;
        else
            s.fail("rotation", "expected 'perpendicular' or 'parallel'");
    }
    {
        auto s = root.section("region");
        auto& r = rc.optimization.region;
        s.get("extent_x", r.extent_x);
        s.get("extent_y", r.extent_y);
        s.get("layers", r.layers);
        s.get("block_size", r.block_size);
        s.finish();
    }
    {
        auto s = root.section("fdtd");
        auto& f = rc.optimization.fdtd;
        s.get("resolution", f.resolution);
        s.get("box_half_extent", f.box_half_extent);
        s.get("pml_thickness", f.pml_thickness);
        s.get("courant_factor", f.courant_factor);
        s.get("source_fractional_bandwidth", f.source_fractional_bandwidth);
        s.get("decay_threshold", f.decay_threshold);
        s.get("max_steps", f.max_steps);
        s.get("threads", f.threads);
        s.finish();
    }
    {
        auto s = root.section("validation");
        auto& v = rc.validation;
        s.get("samples", v.samples);
        s.get("seed", v.seed);
        s.get("resolutions", v.resolutions);
        s.get("zeta_min", v.zeta_min);
        s.get("zeta_max", v.zeta_max);
        s.finish();
    }
    {
        auto s = root.section("output");
        auto& o = rc.output;
        s.get("directory", o.directory);
        s.get("trace", o.trace);
        s.get("geometry", o.geometry);
        s.get("checkpoint", o.checkpoint);
        s.get("checkpoint_every", o.checkpoint_every);
        s.finish();
    }
    root.finish();
    try {
        rc.optimization.validate();
    } catch (const Error& e) {
        throw Error(Errc::parse, std::string("config: ") + e.what());
    }
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::io, "cannot open config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

/// Full configuration as JSON, every field explicit; parse_run_config accepts it back.
inline nlohmann::json run_config_json(const RunConfig& rc) {
    const auto& o = rc.optimization;
    nlohmann::json j;
    j["optimization"] = {{"scenario", to_string(o.scenario)},
                         {"rotation", to_string(o.rotation)},
                         {"atom_zeta", o.zeta()},
                         {"max_iterations", o.max_iterations},
                         {"dipole_d", o.dipole_d},
                         {"dipole_mu", o.dipole_mu},
                         {"backplate_depth", o.backplate_depth},
                         {"block_permittivity", o.block_permittivity}};
    j["region"] = {{"extent_x", o.region.extent_x},
                   {"extent_y", o.region.extent_y},
                   {"layers", o.region.layers},
                   {"block_size", o.region.block_size}};
    j["fdtd"] = {{"resolution", o.fdtd.resolution},
                 {"box_half_extent", o.fdtd.box_half_extent},
                 {"pml_thickness", o.fdtd.pml_thickness},
                 {"courant_factor", o.fdtd.courant_factor},
                 {"source_fractional_bandwidth", o.fdtd.source_fractional_bandwidth},
                 {"decay_threshold", o.fdtd.decay_threshold},
                 {"max_steps", o.fdtd.max_steps},
                 {"threads", o.fdtd.threads}};
    j["validation"] = {{"samples", rc.validation.samples},
                       {"seed", rc.validation.seed},
                       {"resolutions", rc.validation.resolutions},
                       {"zeta_min", rc.validation.zeta_min},
                       {"zeta_max", rc.validation.zeta_max}};
    j["output"] = {{"directory", rc.output.directory},
                   {"trace", rc.output.trace},
                   {"geometry", rc.output.geometry},
                   {"checkpoint", rc.output.checkpoint},
                   {"checkpoint_every", rc.output.checkpoint_every}};
    return j;
}

} // namespace cohere
