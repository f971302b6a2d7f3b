// SPDX-License-Identifier: MIT
#include "riskstop/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "riskstop/errors.hpp"

namespace riskstop {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail_at(int line, const std::string& what) {
    throw ValidationError("config line " + std::to_string(line) + ": " + what);
}

// Cuts a trailing # comment, leaving quoted strings intact.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
        else if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

nlohmann::json parse_scalar(const std::string& raw, int line) {
    const std::string tok = trim(raw);
    if (tok.empty()) fail_at(line, "empty value");
    if (tok.front() == '"') {
        if (tok.size() < 2 || tok.back() != '"')
            fail_at(line, "unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
            if (tok[i] == '\\' && i + 2 < tok.size() &&
                (tok[i + 1] == '"' || tok[i + 1] == '\\'))
                out += tok[++i];
            else
                out += tok[i];
        }
        return out;
    }
    if (tok == "true") return true;
    if (tok == "false") return false;

    const bool integral =
        tok.find_first_not_of("+-0123456789") == std::string::npos;
    const char* begin = tok.c_str();
    char* end = nullptr;
    if (integral) {
        errno = 0;
        const long long v = std::strtoll(begin, &end, 10);
        if (end == begin + tok.size() && errno == 0) return v;
        if (tok.front() != '-') {
            errno = 0;
            const unsigned long long u = std::strtoull(begin, &end, 10);
            if (end == begin + tok.size() && errno == 0) return u;
        }
        fail_at(line, "integer out of range: " + tok);
    }
    errno = 0;
    const double d = std::strtod(begin, &end);
    if (end != begin + tok.size() || errno == ERANGE)
        fail_at(line, "not a value: " + tok);
    return d;
}

nlohmann::json parse_value(const std::string& raw, int line) {
    const std::string tok = trim(raw);
    if (tok.empty()) fail_at(line, "missing value");
    if (tok.front() != '[') return parse_scalar(tok, line);
    if (tok.back() != ']') fail_at(line, "unterminated array");

    nlohmann::json arr = nlohmann::json::array();
    std::string body = tok.substr(1, tok.size() - 2);
    std::string item;
    bool quoted = false;
    for (std::size_t i = 0; i <= body.size(); ++i) {
        const bool at_end = i == body.size();
        const char c = at_end ? ',' : body[i];
        if (c == '"' && (i == 0 || body[i - 1] != '\\')) quoted = !quoted;
        if (c == ',' && !quoted) {
            const std::string t = trim(item);
            if (!t.empty()) arr.push_back(parse_scalar(t, line));
            item.clear();
        } else {
            item += c;
        }
    }
    if (quoted) fail_at(line, "unterminated string in array");
    return arr;
}

}  // namespace

nlohmann::json parse_config_text(const std::string& text) {
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (c == '{') {
            try {
                return nlohmann::json::parse(text);
            } catch (const nlohmann::json::exception& e) {
                throw ValidationError(std::string("config: ") + e.what());
            }
        }
        break;
    }

    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(strip_comment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail_at(line, "unterminated section header");
            const std::string path = trim(s.substr(1, s.size() - 2));
            if (path.empty()) fail_at(line, "empty section name");
            table = &root;
            std::stringstream parts(path);
            std::string part;
            while (std::getline(parts, part, '.')) {
                part = trim(part);
                if (part.empty()) fail_at(line, "empty section component");
                nlohmann::json& slot = (*table)[part];
                if (slot.is_null()) slot = nlohmann::json::object();
                if (!slot.is_object())
                    fail_at(line, "section '" + part + "' collides with a key");
                table = &slot;
            }
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail_at(line, "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty() ||
            key.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ"
                                  "abcdefghijklmnopqrstuvwxyz0123456789_-") !=
                std::string::npos)
            fail_at(line, "bad key '" + key + "'");
        if (table->contains(key)) fail_at(line, "duplicate key '" + key + "'");
        (*table)[key] = parse_value(s.substr(eq + 1), line);
    }
    return root;
}

nlohmann::json parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

namespace {

void check_keys(const nlohmann::json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return item.key() == k;
            }) == allowed.end())
            throw ValidationError("config: unknown key '" + section + "." +
                                  item.key() + "'");
    }
}

template <typename T>
void assign(const nlohmann::json& obj, const char* key, T& out,
            const std::string& section) {
    if (!obj.contains(key)) return;
    try {
        out = obj[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("config: bad value for '" + section + "." + key +
                              "'");
    }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object())
        throw ValidationError("config: top level must be a table");
    check_keys(doc, "", {"market", "run", "search"});

    RunConfig cfg;
    if (doc.contains("market")) {
        const auto& m = doc["market"];
        check_keys(m, "market",
                   {"s0", "r", "delta", "sigma", "assets", "strike", "maturity",
                    "steps", "dates"});
        assign(m, "s0", cfg.market.s0, "market");
        assign(m, "r", cfg.market.r, "market");
        assign(m, "delta", cfg.market.delta, "market");
        assign(m, "sigma", cfg.market.sigma, "market");
        assign(m, "assets", cfg.market.d, "market");
        assign(m, "strike", cfg.payoff.strike, "market");
        if (m.contains("dates")) {
            if (m.contains("maturity") || m.contains("steps"))
                throw ValidationError(
                    "config: give either market.dates or maturity/steps");
            cfg.grid.dates.clear();
            assign(m, "dates", cfg.grid.dates, "market");
        } else {
            double maturity = cfg.grid.maturity();
            int steps = cfg.grid.steps();
            assign(m, "maturity", maturity, "market");
            assign(m, "steps", steps, "market");
            if (steps < 0)
                throw ValidationError("config: market.steps must be >= 0");
            cfg.grid = steps == 0 ? ExerciseGrid{{0.0}}
                                  : ExerciseGrid::equidistant(maturity, steps);
        }
    }
    if (doc.contains("run")) {
        const auto& r = doc["run"];
        check_keys(r, "run",
                   {"risks", "n_training", "n_testing", "n_inner", "seed",
                    "format", "grid_points", "basis_degree"});
        if (r.contains("risks")) {
            std::vector<std::string> labels;
            assign(r, "risks", labels, "run");
            for (const auto& label : labels) cfg.risks.push_back(parse_risk(label));
        }
        assign(r, "n_training", cfg.n_training, "run");
        assign(r, "n_testing", cfg.n_testing, "run");
        assign(r, "n_inner", cfg.n_inner, "run");
        assign(r, "seed", cfg.seed, "run");
        assign(r, "format", cfg.format, "run");
        assign(r, "grid_points", cfg.grid_points, "run");
        assign(r, "basis_degree", cfg.basis_degree, "run");
    }
    if (doc.contains("search")) {
        const auto& s = doc["search"];
        check_keys(s, "search",
                   {"x_tolerance", "bracket_expansion_factor", "max_iterations",
                    "cap_at_zero"});
        assign(s, "x_tolerance", cfg.search.x_tolerance, "search");
        assign(s, "bracket_expansion_factor",
               cfg.search.bracket_expansion_factor, "search");
        assign(s, "max_iterations", cfg.search.max_iterations, "search");
        assign(s, "cap_at_zero", cfg.search.upper_cap_at_zero, "search");
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    market.validate();
    grid.validate();
    payoff.validate();
    search.validate();
    for (const auto& r : risks) r.validate();
    if (n_training < 2 || n_testing < 2)
        throw ValidationError("config: path counts must be >= 2");
    if (n_inner < 1) throw ValidationError("config: n_inner must be >= 1");
    if (grid_points < 4)
        throw ValidationError("config: grid_points must be >= 4");
    if (basis_degree < 0)
        throw ValidationError("config: basis_degree must be >= 0");
    if (format != "csv" && format != "json")
        throw ValidationError("config: format must be csv or json, not '" +
                              format + "'");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json doc;
    doc["market"] = {{"s0", market.s0},     {"r", market.r},
                     {"delta", market.delta}, {"sigma", market.sigma},
                     {"assets", market.d},  {"strike", payoff.strike},
                     {"dates", grid.dates}};
    std::vector<std::string> labels;
    for (const auto& r : risks) labels.push_back(r.label());
    doc["run"] = {{"risks", labels},
                  {"n_training", n_training},
                  {"n_testing", n_testing},
                  {"n_inner", n_inner},
                  {"seed", seed},
                  {"format", format},
                  {"grid_points", grid_points},
                  {"basis_degree", basis_degree}};
    doc["search"] = {{"x_tolerance", search.x_tolerance},
                     {"bracket_expansion_factor", search.bracket_expansion_factor},
                     {"max_iterations", search.max_iterations},
                     {"cap_at_zero", search.upper_cap_at_zero}};
    return doc;
}

}  // namespace riskstop
