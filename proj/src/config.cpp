#include "bdsde/config.hpp"

#include "bdsde/error.hpp"
#include "bdsde/hash.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace bdsde {

namespace {

std::string summarize(const std::vector<ConfigIssue>& issues) {
    std::ostringstream os;
    os << issues.size() << " config error(s)";
    for (const auto& i : issues) {
        os << "\n  line " << i.line << ": " << i.message;
    }
    return os.str();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::optional<double> to_double(const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

std::optional<long long> to_int(const std::string& s) {
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

std::optional<std::uint64_t> to_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

struct Entry {
    std::string value;
    std::size_t line = 0;
};

using Section = std::map<std::string, Entry>;

// Card fields addressable as card.<name>.
const std::vector<std::pair<std::string, double AssumptionCard::*>>& card_fields() {
    static const std::vector<std::pair<std::string, double AssumptionCard::*>> fields{
        {"C_f", &AssumptionCard::C_f},       {"C_g", &AssumptionCard::C_g},
        {"alpha_g", &AssumptionCard::alpha_g}, {"C_0", &AssumptionCard::C_0},
        {"C_1", &AssumptionCard::C_1},       {"eps_1", &AssumptionCard::eps_1},
        {"delta_R", &AssumptionCard::delta_R}, {"C_R", &AssumptionCard::C_R},
        {"R_0", &AssumptionCard::R_0},       {"eps", &AssumptionCard::eps},
        {"beta", &AssumptionCard::beta},     {"c_1", &AssumptionCard::c_1},
        {"c_2", &AssumptionCard::c_2},       {"gamma", &AssumptionCard::gamma},
    };
    return fields;
}

const std::map<std::string, std::vector<std::string>>& known_keys() {
    static const std::map<std::string, std::vector<std::string>> keys = [] {
        std::map<std::string, std::vector<std::string>> k{
            {"grid", {"T", "N"}},
            {"paths", {"M_W", "M_B", "seed"}},
            {"problem",
             {"preset", "driver", "lambda", "mu", "loading", "terminal", "terminal_param", "x",
              "t_index"}},
            {"scheme", {"degree", "lower_quantile", "upper_quantile"}},
            {"verify",
             {"checks", "pass_fraction", "max_violation_fraction", "min_slope", "min_r_squared",
              "shift", "x_lo", "x_hi", "x_points", "far_xs", "eps0", "moment_beta"}},
            {"output", {"directory"}},
        };
        for (const auto& [name, field] : card_fields()) {
            k["problem"].push_back("card." + name);
        }
        return k;
    }();
    return keys;
}

} // namespace

ConfigParseError::ConfigParseError(std::vector<ConfigIssue> issues)
    : std::invalid_argument(summarize(issues)), issues_(std::move(issues)) {}

const char* check_name(Check c) {
    switch (c) {
    case Check::Solve: return "solve";
    case Check::Comparison: return "comparison";
    case Check::Monotonicity: return "monotonicity";
    case Check::Sandwich: return "sandwich";
    case Check::Holder: return "holder";
    case Check::NegativeMoment: return "negative_moment";
    case Check::ForwardMoment: return "forward_moment";
    case Check::Field: return "field";
    }
    return "?";
}

const std::vector<Check>& all_checks() {
    static const std::vector<Check> checks{Check::Solve,          Check::Comparison,
                                           Check::Monotonicity,   Check::Sandwich,
                                           Check::Holder,         Check::NegativeMoment,
                                           Check::ForwardMoment,  Check::Field};
    return checks;
}

ExperimentConfig parse_config(const std::string& text) {
    std::vector<ConfigIssue> issues;
    std::map<std::string, Section> sections;
    std::string current;
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                issues.push_back({line_no, "malformed section header"});
                continue;
            }
            current = trim(line.substr(1, line.size() - 2));
            if (known_keys().count(current) == 0) {
                issues.push_back({line_no, "unknown section [" + current + "]"});
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            issues.push_back({line_no, "expected key = value"});
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (current.empty()) {
            issues.push_back({line_no, "key '" + key + "' outside any section"});
            continue;
        }
        const auto known = known_keys().find(current);
        if (known == known_keys().end()) {
            continue; // already reported with the section header
        }
        if (std::find(known->second.begin(), known->second.end(), key) == known->second.end()) {
            issues.push_back({line_no, "unknown key '" + key + "' in [" + current + "]"});
            continue;
        }
        Section& sec = sections[current];
        const auto prev = sec.find(key);
        if (prev != sec.end()) {
            issues.push_back({line_no, "duplicate key '" + key + "' in [" + current +
                                           "] at lines " + std::to_string(prev->second.line) +
                                           " and " + std::to_string(line_no)});
            continue;
        }
        sec[key] = {value, line_no};
    }

    ExperimentConfig cfg;
    auto get = [&](const std::string& s, const std::string& k) -> const Entry* {
        const auto si = sections.find(s);
        if (si == sections.end()) {
            return nullptr;
        }
        const auto ki = si->second.find(k);
        return ki == si->second.end() ? nullptr : &ki->second;
    };
    auto bad_type = [&](const Entry& e, const std::string& k, const char* type) {
        issues.push_back({e.line, "'" + k + "' expects " + type + ", got '" + e.value + "'"});
    };
    auto read_double = [&](const std::string& s, const std::string& k, double& out) -> const Entry* {
        const Entry* e = get(s, k);
        if (e != nullptr) {
            if (const auto v = to_double(e->value)) {
                out = *v;
            } else {
                bad_type(*e, k, "a number");
                return nullptr;
            }
        }
        return e;
    };
    auto read_int = [&](const std::string& s, const std::string& k, long long& out) -> const Entry* {
        const Entry* e = get(s, k);
        if (e != nullptr) {
            if (const auto v = to_int(e->value)) {
                out = *v;
            } else {
                bad_type(*e, k, "an integer");
                return nullptr;
            }
        }
        return e;
    };
    auto read_count = [&](const std::string& s, const std::string& k, std::size_t& out,
                          long long min, const std::string& msg) {
        long long v = static_cast<long long>(out);
        if (const Entry* e = read_int(s, k, v)) {
            if (v < min) {
                issues.push_back({e->line, msg});
            } else {
                out = static_cast<std::size_t>(v);
            }
        }
    };

    // [grid]
    if (const Entry* e = read_double("grid", "T", cfg.T); e != nullptr && !(cfg.T > 0.0)) {
        issues.push_back({e->line, "horizon must be > 0"});
    }
    if (const Entry* e = read_int("grid", "N", cfg.N); e != nullptr && cfg.N < 1) {
        issues.push_back({e->line, "step_count must be >= 1"});
    }
    // [paths]
    read_count("paths", "M_W", cfg.M_W, 2, "M_W must be >= 2");
    read_count("paths", "M_B", cfg.M_B, 1, "M_B must be >= 1");
    if (const Entry* e = get("paths", "seed")) {
        if (const auto v = to_u64(e->value)) {
            cfg.seed = *v;
        } else {
            bad_type(*e, "seed", "an unsigned 64-bit integer");
        }
    }
    // [problem]
    std::size_t preset_line = 0;
    if (const Entry* e = get("problem", "preset")) {
        cfg.preset = e->value;
        preset_line = e->line;
    }
    const auto& catalog = builtin_catalog();
    const auto preset_it = catalog.find(cfg.preset);
    if (preset_it == catalog.end()) {
        std::string names;
        for (const auto& [name, p] : catalog) {
            names += (names.empty() ? "" : ", ") + name;
        }
        issues.push_back({preset_line, "unknown preset '" + cfg.preset + "' (known: " + names + ")"});
    } else {
        cfg.card = preset_it->second.card;
    }
    if (const Entry* e = get("problem", "driver")) {
        if (e->value != "zero" && e->value != "arctan" && e->value != "linear") {
            issues.push_back({e->line, "driver must be zero, arctan or linear"});
        } else {
            cfg.driver = e->value;
        }
    }
    read_double("problem", "lambda", cfg.lambda);
    read_double("problem", "mu", cfg.mu);
    if (double v = 0.0; read_double("problem", "loading", v) != nullptr) {
        cfg.loading = v;
    }
    if (const Entry* e = get("problem", "terminal")) {
        static const std::vector<std::string> names{"identity", "cubic", "shift", "constant"};
        if (std::find(names.begin(), names.end(), e->value) == names.end()) {
            issues.push_back({e->line, "terminal must be identity, cubic, shift or constant"});
        } else if (preset_it != catalog.end() && preset_it->second.forward) {
            issues.push_back({e->line, "terminal override needs a preset without forward leg"});
        } else {
            cfg.terminal = e->value;
        }
    }
    read_double("problem", "terminal_param", cfg.terminal_param);
    read_double("problem", "x", cfg.x);
    {
        long long t = 0;
        if (const Entry* e = read_int("problem", "t_index", t)) {
            if (t < 0 || t > cfg.N) {
                issues.push_back({e->line, "t_index must lie in [0, N]"});
            } else {
                cfg.t_index = static_cast<std::size_t>(t);
            }
        }
    }
    std::size_t card_line = preset_line;
    for (const auto& [name, field] : card_fields()) {
        if (const Entry* e = read_double("problem", "card." + name, cfg.card.*field)) {
            card_line = std::max(card_line, e->line);
        }
    }
    for (const auto& msg : cfg.card.validate()) {
        issues.push_back({card_line, "card: " + msg});
    }
    // [scheme]
    {
        long long d = cfg.basis.degree;
        if (const Entry* e = read_int("scheme", "degree", d)) {
            if (d < 0 || d > 8) {
                issues.push_back({e->line, "degree must lie in [0, 8]"});
            } else {
                cfg.basis.degree = static_cast<int>(d);
            }
        }
        const Entry* lo = read_double("scheme", "lower_quantile", cfg.basis.lower_quantile);
        const Entry* hi = read_double("scheme", "upper_quantile", cfg.basis.upper_quantile);
        if (!(cfg.basis.lower_quantile >= 0.0 && cfg.basis.lower_quantile < cfg.basis.upper_quantile &&
              cfg.basis.upper_quantile <= 1.0)) {
            const std::size_t l = hi != nullptr ? hi->line : lo != nullptr ? lo->line : 0;
            issues.push_back({l, "quantiles must satisfy 0 <= lower < upper <= 1"});
        }
    }
    // [verify]
    if (const Entry* e = get("verify", "checks")) {
        cfg.checks.clear();
        for (const auto& item : split_list(e->value)) {
            if (item == "all") {
                cfg.checks = all_checks();
                break;
            }
            const auto it = std::find_if(all_checks().begin(), all_checks().end(),
                                         [&](Check c) { return item == check_name(c); });
            if (it == all_checks().end()) {
                issues.push_back({e->line, "unknown check '" + item + "'"});
            } else if (std::find(cfg.checks.begin(), cfg.checks.end(), *it) == cfg.checks.end()) {
                cfg.checks.push_back(*it);
            }
        }
        if (cfg.checks.empty()) {
            issues.push_back({e->line, "no checks requested"});
        }
    }
    for (const auto& [key, field] :
         std::vector<std::pair<std::string, double ExperimentConfig::*>>{
             {"pass_fraction", &ExperimentConfig::pass_fraction},
             {"max_violation_fraction", &ExperimentConfig::max_violation_fraction}}) {
        if (const Entry* e = read_double("verify", key, cfg.*field);
            e != nullptr && !(cfg.*field >= 0.0 && cfg.*field <= 1.0)) {
            issues.push_back({e->line, key + " must lie in [0, 1]"});
        }
    }
    read_double("verify", "min_slope", cfg.min_slope);
    read_double("verify", "min_r_squared", cfg.min_r_squared);
    if (const Entry* e = read_double("verify", "shift", cfg.shift); e != nullptr && !(cfg.shift > 0.0)) {
        issues.push_back({e->line, "shift must be > 0"});
    }
    read_double("verify", "x_lo", cfg.x_lo);
    if (const Entry* e = read_double("verify", "x_hi", cfg.x_hi); !(cfg.x_lo < cfg.x_hi)) {
        issues.push_back({e != nullptr ? e->line : 0, "x_lo must be < x_hi"});
    }
    read_count("verify", "x_points", cfg.x_points, 2, "x_points must be >= 2");
    if (const Entry* e = get("verify", "far_xs")) {
        for (const auto& item : split_list(e->value)) {
            if (const auto v = to_double(item)) {
                cfg.far_xs.push_back(*v);
            } else {
                bad_type(*e, "far_xs", "a list of numbers");
            }
        }
    }
    {
        double v = 0.0;
        if (const Entry* e = read_double("verify", "eps0", v)) {
            if (!(v > 0.0 && v < cfg.card.eps)) {
                issues.push_back({e->line, "eps0 must lie in (0, card.eps)"});
            } else {
                cfg.eps0 = v;
            }
        }
    }
    if (const Entry* e = read_double("verify", "moment_beta", cfg.moment_beta);
        e != nullptr && !(cfg.moment_beta < 0.0)) {
        issues.push_back({e->line, "moment_beta must be < 0"});
    }
    // [output]
    if (const Entry* e = get("output", "directory")) {
        if (e->value.empty()) {
            issues.push_back({e->line, "directory must not be empty"});
        }
        cfg.directory = e->value;
    }

    if (!issues.empty()) {
        std::stable_sort(issues.begin(), issues.end(),
                         [](const ConfigIssue& a, const ConfigIssue& b) { return a.line < b.line; });
        throw ConfigParseError(std::move(issues));
    }
    return cfg;
}

Preset ExperimentConfig::resolved_problem() const {
    Preset p = lookup_preset(preset);
    if (driver) {
        if (*driver == "zero") {
            p.driver = zero_driver();
        } else if (*driver == "arctan") {
            p.driver = arctan_driver();
        } else {
            p.driver = linear_driver(lambda, mu);
        }
    }
    if (loading) {
        p.loading = *loading == 0.0 ? zero_loading() : constant_loading(*loading);
    }
    if (terminal) {
        if (*terminal == "identity") {
            p.terminal = identity_terminal();
        } else if (*terminal == "cubic") {
            p.terminal = cubic_terminal();
        } else if (*terminal == "shift") {
            p.terminal = shift_terminal(terminal_param);
        } else {
            p.terminal = constant_terminal(terminal_param);
        }
    }
    p.card = card;
    return p;
}

std::string ExperimentConfig::echo() const {
    std::ostringstream os;
    os << "[grid]\nT = " << fmt17(T) << "\nN = " << N << "\n";
    os << "[paths]\nM_W = " << M_W << "\nM_B = " << M_B << "\nseed = " << seed << "\n";
    os << "[problem]\npreset = " << preset << "\n";
    if (driver) {
        os << "driver = " << *driver << "\n";
    }
    os << "lambda = " << fmt17(lambda) << "\nmu = " << fmt17(mu) << "\n";
    if (loading) {
        os << "loading = " << fmt17(*loading) << "\n";
    }
    if (terminal) {
        os << "terminal = " << *terminal << "\n";
    }
    os << "terminal_param = " << fmt17(terminal_param) << "\nx = " << fmt17(x)
       << "\nt_index = " << t_index << "\n";
    for (const auto& [name, field] : card_fields()) {
        os << "card." << name << " = " << fmt17(card.*field) << "\n";
    }
    os << "[scheme]\ndegree = " << basis.degree << "\nlower_quantile = "
       << fmt17(basis.lower_quantile) << "\nupper_quantile = " << fmt17(basis.upper_quantile)
       << "\n";
    os << "[verify]\nchecks = ";
    for (std::size_t i = 0; i < checks.size(); ++i) {
        os << (i ? "," : "") << check_name(checks[i]);
    }
    os << "\npass_fraction = " << fmt17(pass_fraction)
       << "\nmax_violation_fraction = " << fmt17(max_violation_fraction)
       << "\nmin_slope = " << fmt17(min_slope) << "\nmin_r_squared = " << fmt17(min_r_squared)
       << "\nshift = " << fmt17(shift) << "\nx_lo = " << fmt17(x_lo) << "\nx_hi = " << fmt17(x_hi)
       << "\nx_points = " << x_points << "\n";
    if (!far_xs.empty()) {
        os << "far_xs = ";
        for (std::size_t i = 0; i < far_xs.size(); ++i) {
            os << (i ? "," : "") << fmt17(far_xs[i]);
        }
        os << "\n";
    }
    if (eps0) {
        os << "eps0 = " << fmt17(*eps0) << "\n";
    }
    os << "moment_beta = " << fmt17(moment_beta) << "\n";
    os << "[output]\ndirectory = " << directory << "\n";
    return os.str();
}

std::string ExperimentConfig::hash() const {
    // The output location does not change any result.
    const std::string text = echo();
    return hex64(fnv1a(std::string_view(text).substr(0, text.find("[output]"))));
}

} // namespace bdsde
