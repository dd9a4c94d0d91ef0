#pragma once

#include "ztrack/appearance.hpp"
#include "ztrack/filter.hpp"
#include "ztrack/linking.hpp"
#include "ztrack/motion.hpp"
#include "ztrack/simulator.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ztrack {

struct DetectionConfig {
    int min_blob_area = 20;
    int threshold = 127; ///< gray > threshold is foreground
};

struct AppConfig {
    MotionParams motion;
    AppearanceParams appearance;
    FilterConfig filter;
    LinkingConfig linking;
    DetectionConfig detection;
    SimConfig sim;
    std::uint64_t seed = 1;
};

/// Flat INI-style key/value config: [section] headers, '=' pairs, '#' or ';'
/// comments.
class IniFile {
public:
    IniFile() = default;

    static IniFile load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("config: cannot open " + path);
        IniFile ini;
        std::string line;
        std::string section;
        while (std::getline(f, line)) {
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r\n");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r\n");
                return s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[' && line.back() == ']') {
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error("config: malformed line: " + line);
            }
            ini.values_[section + "." + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
        return ini;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : std::stod(it->second);
    }

    long get_long(const std::string& key, long fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : std::stol(it->second);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return it->second == "1" || it->second == "true" || it->second == "yes";
    }

private:
    std::map<std::string, std::string> values_;
};

inline AppConfig config_from_ini(const IniFile& ini) {
    AppConfig c;
    auto& m = c.motion;
    m.sigma_v = ini.get_double("motion.sigma_v", m.sigma_v);
    m.sigma_theta1 = ini.get_double("motion.sigma_theta1", m.sigma_theta1);
    m.sigma_theta2 = ini.get_double("motion.sigma_theta2", m.sigma_theta2);
    m.mix_weight1 = ini.get_double("motion.mix_weight1", m.mix_weight1);
    m.attenuation_d = ini.get_double("motion.attenuation_d", m.attenuation_d);
    c.seed = static_cast<std::uint64_t>(ini.get_long("motion.seed", 1));

    auto& a = c.appearance;
    a.sigma_delta = ini.get_double("appearance.sigma_delta", a.sigma_delta);
    a.mean_update_rate = ini.get_double("appearance.mean_update_rate", a.mean_update_rate);
    a.cumulative_means = ini.get_bool("appearance.cumulative_means", a.cumulative_means);

    auto& f = c.filter;
    f.n_particles = static_cast<int>(ini.get_long("filter.n_particles", f.n_particles));
    f.gating_radius = ini.get_double("filter.gating_radius", f.gating_radius);
    f.resample_threshold = ini.get_double("filter.resample_threshold", f.resample_threshold);
    f.error_deviation = ini.get_double("filter.error_deviation", f.error_deviation);
    f.max_coast = static_cast<int>(ini.get_long("filter.max_coast", f.max_coast));
    f.uniform_weights = ini.get_bool("filter.uniform_weights", f.uniform_weights);
    f.constant_velocity = ini.get_bool("filter.constant_velocity", f.constant_velocity);

    c.linking.max_enumerable =
        static_cast<int>(ini.get_long("linking.max_enumerable", c.linking.max_enumerable));

    c.detection.min_blob_area =
        static_cast<int>(ini.get_long("detection.min_blob_area", c.detection.min_blob_area));
    c.detection.threshold =
        static_cast<int>(ini.get_long("detection.threshold", c.detection.threshold));

    auto& s = c.sim;
    s.n_fish = static_cast<int>(ini.get_long("sim.n_fish", s.n_fish));
    s.width = static_cast<int>(ini.get_long("sim.width", s.width));
    s.height = static_cast<int>(ini.get_long("sim.height", s.height));
    s.n_frames = ini.get_long("sim.n_frames", s.n_frames);
    s.cruise_speed = ini.get_double("sim.cruise_speed", s.cruise_speed);
    s.speed_smoothing = ini.get_double("sim.speed_smoothing", s.speed_smoothing);
    s.body_length = ini.get_double("sim.body_length", s.body_length);
    s.body_width = ini.get_double("sim.body_width", s.body_width);
    s.bend_amplitude = ini.get_double("sim.bend_amplitude", s.bend_amplitude);
    s.bend_gain = ini.get_double("sim.bend_gain", s.bend_gain);
    s.crossing_bias = ini.get_double("sim.crossing_bias", s.crossing_bias);
    s.seed = static_cast<std::uint64_t>(ini.get_long("sim.seed", 1));
    s.motion = c.motion;
    return c;
}

inline AppConfig load_config(const std::string& path) {
    return config_from_ini(IniFile::load(path));
}

/// Emit a config carrying every default.
inline void write_default_config(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    const AppConfig c;
    out << "[motion]\n"
        << "sigma_v = " << c.motion.sigma_v << "\n"
        << "sigma_theta1 = " << c.motion.sigma_theta1 << "\n"
        << "sigma_theta2 = " << c.motion.sigma_theta2 << "\n"
        << "mix_weight1 = " << c.motion.mix_weight1 << "\n"
        << "attenuation_d = " << c.motion.attenuation_d << "\n"
        << "seed = " << c.seed << "\n\n"
        << "[appearance]\n"
        << "sigma_delta = " << c.appearance.sigma_delta << "\n"
        << "mean_update_rate = " << c.appearance.mean_update_rate << "\n"
        << "cumulative_means = " << (c.appearance.cumulative_means ? 1 : 0) << "\n\n"
        << "[filter]\n"
        << "n_particles = " << c.filter.n_particles << "\n"
        << "gating_radius = " << c.filter.gating_radius << "  # 0 = 3*sigma_v + predicted L\n"
        << "resample_threshold = " << c.filter.resample_threshold << "\n"
        << "error_deviation = " << c.filter.error_deviation << "  # 0 = 2*mean_a\n"
        << "max_coast = " << c.filter.max_coast << "\n"
        << "uniform_weights = " << (c.filter.uniform_weights ? 1 : 0) << "\n"
        << "constant_velocity = " << (c.filter.constant_velocity ? 1 : 0) << "\n\n"
        << "[linking]\n"
        << "max_enumerable = " << c.linking.max_enumerable << "\n\n"
        << "[detection]\n"
        << "min_blob_area = " << c.detection.min_blob_area << "\n"
        << "threshold = " << c.detection.threshold << "\n\n"
        << "[sim]\n"
        << "n_fish = " << c.sim.n_fish << "\n"
        << "width = " << c.sim.width << "\n"
        << "height = " << c.sim.height << "\n"
        << "n_frames = " << c.sim.n_frames << "\n"
        << "cruise_speed = " << c.sim.cruise_speed << "\n"
        << "speed_smoothing = " << c.sim.speed_smoothing << "\n"
        << "body_length = " << c.sim.body_length << "\n"
        << "body_width = " << c.sim.body_width << "\n"
        << "bend_amplitude = " << c.sim.bend_amplitude << "\n"
        << "bend_gain = " << c.sim.bend_gain << "\n"
        << "crossing_bias = " << c.sim.crossing_bias << "\n"
        << "seed = " << c.sim.seed << "\n";
}

} // namespace ztrack
