#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "nudge/errors.hpp"
#include "nudge/sim_harness.hpp"

namespace nudge::sim {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

struct Setter {
    std::function<void(SimConfig&, const std::string&, int)> apply;
};

double parse_number(const std::string& value, const std::string& key, int line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("config key '" + key + "': not a number: '" + value + "'", line);
    }
}

bool parse_bool(const std::string& value, const std::string& key, int line) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ParseError("config key '" + key + "': not a boolean: '" + value + "'", line);
}

std::string parse_string(const std::string& value, const std::string& key, int line) {
    if (value.size() < 2 || value.front() != '"' || value.back() != '"') {
        throw ParseError("config key '" + key + "': expected a quoted string", line);
    }
    return value.substr(1, value.size() - 2);
}

std::map<std::string, Setter> make_setters() {
    std::map<std::string, Setter> s;
    const auto num = [](double SimConfig::* field) {
        return Setter{[field](SimConfig& c, const std::string& v, int line) {
            c.*field = parse_number(v, "", line);
        }};
    };
    const auto integer = [](int SimConfig::* field) {
        return Setter{[field](SimConfig& c, const std::string& v, int line) {
            c.*field = int(parse_number(v, "", line));
        }};
    };
    s["seed"] = Setter{[](SimConfig& c, const std::string& v, int line) {
        c.seed = std::uint64_t(parse_number(v, "seed", line));
    }};
    s["n_repos"] = integer(&SimConfig::n_repos);
    s["n_prs"] = integer(&SimConfig::n_prs);
    s["n_training_prs"] = integer(&SimConfig::n_training_prs);
    s["horizon_days"] = num(&SimConfig::horizon_days);
    s["spawn_span_days"] = num(&SimConfig::spawn_span_days);
    s["scan_interval_hours"] = num(&SimConfig::scan_interval_hours);
    s["quiet_hours"] = num(&SimConfig::quiet_hours);
    s["buffer_hours"] = num(&SimConfig::buffer_hours);
    s["p_none"] = num(&SimConfig::p_none);
    s["p_lt"] = num(&SimConfig::p_lt);
    s["p_full"] = num(&SimConfig::p_full);
    s["target_mean_lifetime_hours"] = num(&SimConfig::target_mean_lifetime_hours);
    s["lifetime_sigma_log"] = num(&SimConfig::lifetime_sigma_log);
    s["min_lifetime_hours"] = num(&SimConfig::min_lifetime_hours);
    s["max_lifetime_hours"] = num(&SimConfig::max_lifetime_hours);
    s["max_review_rounds"] = integer(&SimConfig::max_review_rounds);
    s["author_pool"] = integer(&SimConfig::author_pool);
    s["reviewer_pool"] = integer(&SimConfig::reviewer_pool);
    s["p_abandon"] = num(&SimConfig::p_abandon);
    s["p_bot_comment"] = num(&SimConfig::p_bot_comment);
    s["backend"] = Setter{[](SimConfig& c, const std::string& v, int line) {
        c.backend = backend_from_string(parse_string(v, "backend", line));
    }};
    s["trial_start"] = Setter{[](SimConfig& c, const std::string& v, int line) {
        c.trial_start = parse_string(v, "trial_start", line);
    }};

    const auto profile_num = [](AgentProfile SimConfig::* profile,
                                double AgentProfile::* field) {
        return Setter{[profile, field](SimConfig& c, const std::string& v, int line) {
            (c.*profile).*field = parse_number(v, "", line);
        }};
    };
    for (const auto& [section, member] :
         std::map<std::string, AgentProfile SimConfig::*>{
             {"authors", &SimConfig::authors}, {"reviewers", &SimConfig::reviewers}}) {
        s[section + ".mean_response_hours"] =
            profile_num(member, &AgentProfile::mean_response_hours);
        s[section + ".sigma_log"] = profile_num(member, &AgentProfile::sigma_log);
        s[section + ".nudge_response_factor"] =
            profile_num(member, &AgentProfile::nudge_response_factor);
        AgentProfile SimConfig::* m = member;
        s[section + ".weekend_inactive"] =
            Setter{[m](SimConfig& c, const std::string& v, int line) {
                (c.*m).weekend_inactive = parse_bool(v, "weekend_inactive", line);
            }};
    }
    return s;
}

}  // namespace

SimConfig load_sim_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open config file: " + path.string());

    static const std::map<std::string, Setter> setters = make_setters();
    SimConfig config;
    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(strip_comment(line));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') throw ParseError("unterminated [section]", line_no);
            section = trim(text.substr(1, text.size() - 2));
            continue;
        }
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected key = value: '" + text + "'", line_no);
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        const std::string full_key = section.empty() ? key : section + "." + key;
        auto it = setters.find(full_key);
        if (it == setters.end()) {
            throw ConfigInvalid("unknown config key '" + full_key + "' (line " +
                                std::to_string(line_no) + ")");
        }
        it->second.apply(config, value, line_no);
    }
    validate(config);
    return config;
}

void validate(const SimConfig& config) {
    const auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigInvalid(std::string(name) + " must be positive");
        }
    };
    if (config.n_repos < 1) throw ConfigInvalid("n_repos must be >= 1");
    if (config.n_prs < 0) throw ConfigInvalid("n_prs must be >= 0");
    if (config.n_training_prs < 0) throw ConfigInvalid("n_training_prs must be >= 0");
    positive(config.horizon_days, "horizon_days");
    positive(config.spawn_span_days, "spawn_span_days");
    positive(config.scan_interval_hours, "scan_interval_hours");
    positive(config.quiet_hours, "quiet_hours");
    positive(config.buffer_hours, "buffer_hours");
    positive(config.target_mean_lifetime_hours, "target_mean_lifetime_hours");
    positive(config.lifetime_sigma_log, "lifetime_sigma_log");
    positive(config.min_lifetime_hours, "min_lifetime_hours");
    positive(config.max_lifetime_hours, "max_lifetime_hours");
    if (config.min_lifetime_hours >= config.max_lifetime_hours) {
        throw ConfigInvalid("min_lifetime_hours must be below max_lifetime_hours");
    }
    if (config.max_review_rounds < 1) throw ConfigInvalid("max_review_rounds must be >= 1");
    if (config.author_pool < 1 || config.reviewer_pool < 3) {
        throw ConfigInvalid("author_pool must be >= 1 and reviewer_pool >= 3");
    }
    for (double p : {config.p_none, config.p_lt, config.p_full, config.p_abandon,
                     config.p_bot_comment}) {
        if (p < 0.0 || p > 1.0) throw ConfigInvalid("probabilities must be in [0, 1]");
    }
    if (std::abs(config.p_none + config.p_lt + config.p_full - 1.0) > 1e-9) {
        throw ConfigInvalid("arm probabilities must sum to 1");
    }
    for (const AgentProfile& profile : {config.authors, config.reviewers}) {
        positive(profile.mean_response_hours, "mean_response_hours");
        positive(profile.sigma_log, "sigma_log");
        if (!(profile.nudge_response_factor > 0.0) ||
            profile.nudge_response_factor > 1.0) {
            throw ConfigInvalid("nudge_response_factor must be in (0, 1]");
        }
    }
    parse_rfc3339(config.trial_start);  // must be a valid instant
}

}  // namespace nudge::sim
