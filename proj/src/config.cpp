#include "asid/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "asid/errors.hpp"

namespace asid {

const char* share_mode_name(ShareMode m) {
    switch (m) {
        case ShareMode::InterGroup: return "InterGroup";
        case ShareMode::IntraGroup: return "IntraGroup";
        case ShareMode::None: return "None";
    }
    return "?";
}

ShareMode parse_share_mode(const std::string& s) {
    std::string low;
    for (char c : s) low.push_back(static_cast<char>(std::tolower(c)));
    if (low == "intergroup" || low == "inter") return ShareMode::InterGroup;
    if (low == "intragroup" || low == "intra") return ShareMode::IntraGroup;
    if (low == "none") return ShareMode::None;
    throw ConfigError("share_mode must be InterGroup, IntraGroup or None, got '" + s + "'");
}

void validate(const ModelConfig& cfg) {
    if (cfg.blocks < 1) throw ConfigError("blocks must be >= 1");
    if (cfg.channels < 1) throw ConfigError("channels must be >= 1");
    if (cfg.units < 1) throw ConfigError("units must be >= 1");
    if (cfg.refined_width < 0) throw ConfigError("refined_width must be >= 0");
    if (cfg.meso < 1) throw ConfigError("meso must be >= 1");
    if (cfg.global < 1) throw ConfigError("global must be >= 1");
    if (cfg.scale < 2 || cfg.scale > 4)
        throw ConfigError("scale must be 2, 3 or 4, got " + std::to_string(cfg.scale));
    if (cfg.ffn_ratio <= 0.0) throw ConfigError("ffn_ratio must be > 0");
    if (cfg.se_ratio < 1) throw ConfigError("se_ratio must be >= 1");
    if (cfg.qk_ratio <= 0.0) throw ConfigError("qk_ratio must be > 0");
    if (cfg.variant != "asid" && cfg.variant != "baseline")
        throw ConfigError("variant must be 'asid' or 'baseline', got '" + cfg.variant + "'");
    if (cfg.refined_width > 0) {
        // every unit must keep more than r channels so the split stays legal
        for (int i = 0; i < cfg.units; ++i) {
            int width = cfg.channels - i * cfg.refined_width;
            if (width <= cfg.refined_width)
                throw ConfigError("unit " + std::to_string(i + 1) + " width " +
                                  std::to_string(width) + " must exceed refined_width " +
                                  std::to_string(cfg.refined_width));
        }
    }
}

std::vector<int> unit_widths(const ModelConfig& cfg) {
    std::vector<int> w(cfg.units);
    for (int i = 0; i < cfg.units; ++i)
        w[i] = cfg.channels - i * (cfg.refined_width > 0 ? cfg.refined_width : 0);
    return w;
}

int qk_dim(const ModelConfig& cfg, int width) {
    return std::max(1, static_cast<int>(std::lround(cfg.qk_ratio * width)));
}

int ffn_hidden(const ModelConfig& cfg, int width) {
    return std::max(1, static_cast<int>(std::lround(cfg.ffn_ratio * width)));
}

int se_bottleneck(const ModelConfig& cfg, int width) {
    return std::max(1, width / cfg.se_ratio);
}

int esa_width(int channels) {
    return std::max(1, static_cast<int>(std::lround(0.5 * channels)));
}

bool sam_is_producer(const ModelConfig& cfg, int block, int depth) {
    switch (cfg.share_mode) {
        case ShareMode::InterGroup: return block == 1;
        case ShareMode::IntraGroup: return depth == 1;
        case ShareMode::None: return true;
    }
    return true;
}

std::pair<int, int> sam_share_source(const ModelConfig& cfg, int block, int depth) {
    switch (cfg.share_mode) {
        case ShareMode::InterGroup: return {1, depth};
        case ShareMode::IntraGroup: return {block, 1};
        case ShareMode::None: break;
    }
    throw ContractError("share source requested with share_mode=None");
}

int pad_multiple(const ModelConfig& cfg) {
    return std::lcm(cfg.meso, cfg.global);
}

namespace {

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key + " expects an integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key + " expects a number, got '" + v + "'");
    }
}

void apply_key(ModelConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "blocks") cfg.blocks = parse_int(key, value);
    else if (key == "channels") cfg.channels = parse_int(key, value);
    else if (key == "refined_width") cfg.refined_width = parse_int(key, value);
    else if (key == "units") cfg.units = parse_int(key, value);
    else if (key == "meso") cfg.meso = parse_int(key, value);
    else if (key == "global") cfg.global = parse_int(key, value);
    else if (key == "scale") cfg.scale = parse_int(key, value);
    else if (key == "share_mode") cfg.share_mode = parse_share_mode(value);
    else if (key == "ffn_ratio") cfg.ffn_ratio = parse_double(key, value);
    else if (key == "se_ratio") cfg.se_ratio = parse_int(key, value);
    else if (key == "qk_ratio") cfg.qk_ratio = parse_double(key, value);
    else if (key == "variant") cfg.variant = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

ModelConfig config_from_updates(
    const std::vector<std::pair<std::string, std::string>>& kv) {
    ModelConfig cfg;
    // variant preset first, explicit keys second
    for (const auto& [k, v] : kv)
        if (k == "variant") cfg.variant = v;
    if (cfg.variant == "baseline") {
        cfg.channels = 52;
        cfg.units = 1;
        cfg.refined_width = 0;
        cfg.share_mode = ShareMode::None;
    }
    for (const auto& [k, v] : kv)
        if (k != "variant") apply_key(cfg, k, v);
    validate(cfg);
    return cfg;
}

std::vector<std::pair<std::string, std::string>> parse_config_pairs(
    const std::string& text) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              " is not key=value: '" + line + "'");
        kv.emplace_back(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return kv;
}

ModelConfig parse_config_text(const std::string& text) {
    return config_from_updates(parse_config_pairs(text));
}

ModelConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const ModelConfig& cfg) {
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return std::string(buf);
    };
    std::ostringstream os;
    os << "blocks=" << cfg.blocks << '\n'
       << "channels=" << cfg.channels << '\n'
       << "refined_width=" << cfg.refined_width << '\n'
       << "units=" << cfg.units << '\n'
       << "meso=" << cfg.meso << '\n'
       << "global=" << cfg.global << '\n'
       << "scale=" << cfg.scale << '\n'
       << "share_mode=" << share_mode_name(cfg.share_mode) << '\n'
       << "ffn_ratio=" << num(cfg.ffn_ratio) << '\n'
       << "se_ratio=" << cfg.se_ratio << '\n'
       << "qk_ratio=" << num(cfg.qk_ratio) << '\n'
       << "variant=" << cfg.variant << '\n';
    return os.str();
}

} // namespace asid
