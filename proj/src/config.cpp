#include "pavsim/config.hpp"

#include "pavsim/csv.hpp"
#include "pavsim/erlang.hpp"
#include "pavsim/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>

namespace pavsim {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_integer(std::string_view text) {
    text = trim(text);
    Int value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw ValidationError("expected an integer, got '" + std::string(text) + "'");
    }
    return value;
}

bool parse_bool(std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ValidationError("expected true or false, got '" + std::string(text) + "'");
}

std::vector<double> parse_list(std::string_view text) {
    std::vector<double> out;
    text = trim(text);
    if (text.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        out.push_back(parse_double(text.substr(start, comma - start), "list entry"));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string format_list(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

struct Key {
    std::string name;
    std::function<void(ScenarioConfig&, std::string_view)> set;
    std::function<std::string(const ScenarioConfig&)> get;
};

template <typename Field>
Key real_key(std::string name, Field field) {
    return {name,
            [field, name](ScenarioConfig& c, std::string_view v) { field(c) = parse_double(v, name); },
            [field](const ScenarioConfig& c) { return format_double(field(c)); }};
}

template <typename Int, typename Field>
Key int_key(std::string name, Field field) {
    return {name, [field](ScenarioConfig& c, std::string_view v) { field(c) = parse_integer<Int>(v); },
            [field](const ScenarioConfig& c) { return std::to_string(field(c)); }};
}

template <typename Field>
Key bool_key(std::string name, Field field) {
    return {name, [field](ScenarioConfig& c, std::string_view v) { field(c) = parse_bool(v); },
            [field](const ScenarioConfig& c) { return field(c) ? "true" : "false"; }};
}

Key optional_key(std::string name, std::optional<double> ScenarioConfig::*member) {
    return {name,
            [member, name](ScenarioConfig& c, std::string_view v) {
                const auto t = trim(v);
                if (t == "auto") {
                    c.*member = std::nullopt;
                } else {
                    c.*member = parse_double(t, name);
                }
            },
            [member](const ScenarioConfig& c) { return c.*member ? format_double(*(c.*member)) : std::string("auto"); }};
}

#define PAVSIM_FIELD(expr) [](auto& c) -> auto& { return expr; }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> k;
        k.push_back({"label", [](ScenarioConfig& c, std::string_view v) { c.label = std::string(trim(v)); },
                     [](const ScenarioConfig& c) { return c.label; }});
        k.push_back(real_key("lambda1", PAVSIM_FIELD(c.model.lambda1)));
        k.push_back(real_key("lambda2", PAVSIM_FIELD(c.model.lambda2)));
        k.push_back(real_key("lambda3", PAVSIM_FIELD(c.model.lambda3)));
        k.push_back(real_key("lambda4", PAVSIM_FIELD(c.model.lambda4)));
        k.push_back(real_key("gamma", PAVSIM_FIELD(c.model.gamma)));
        k.push_back(int_key<int>("k", PAVSIM_FIELD(c.model.k)));
        k.push_back(real_key("t_lock_h", PAVSIM_FIELD(c.model.t_lock_h)));
        k.push_back(real_key("t_lock_a", PAVSIM_FIELD(c.model.t_lock_a)));
        k.push_back(optional_key("lambda_ha_bar", &ScenarioConfig::lambda_ha_bar));
        k.push_back(optional_key("lambda_ah_bar", &ScenarioConfig::lambda_ah_bar));
        k.push_back(real_key("tau_a0", PAVSIM_FIELD(c.headway.tau_a0)));
        k.push_back(real_key("tau_h0", PAVSIM_FIELD(c.headway.tau_h0)));
        k.push_back(real_key("l_a0", PAVSIM_FIELD(c.headway.l_a0)));
        k.push_back(real_key("l_h0", PAVSIM_FIELD(c.headway.l_h0)));
        k.push_back(real_key("sigmoid_steepness", PAVSIM_FIELD(c.headway.sigmoid_steepness)));
        k.push_back(real_key("sigmoid_midpoint", PAVSIM_FIELD(c.headway.sigmoid_midpoint)));
        k.push_back(real_key("frac_h0", PAVSIM_FIELD(c.frac_h0)));
        k.push_back(real_key("frac_a0", PAVSIM_FIELD(c.frac_a0)));
        k.push_back(real_key("step_h", PAVSIM_FIELD(c.integration.step_h)));
        k.push_back(real_key("horizon_t", PAVSIM_FIELD(c.integration.horizon_t)));
        k.push_back(bool_key("renormalize", PAVSIM_FIELD(c.integration.renormalize)));
        k.push_back(int_key<int>("record_stride", PAVSIM_FIELD(c.integration.record_stride)));
        k.push_back(real_key("v", PAVSIM_FIELD(c.v)));
        k.push_back(int_key<std::uint64_t>("seed", PAVSIM_FIELD(c.seed)));
        k.push_back(int_key<int>("threads", PAVSIM_FIELD(c.threads)));
        k.push_back(real_key("equilibrium_tol", PAVSIM_FIELD(c.equilibrium_tol)));
        k.push_back(int_key<int>("equilibrium_max_iter", PAVSIM_FIELD(c.equilibrium_max_iter)));
        k.push_back(int_key<int>("multistart_starts", PAVSIM_FIELD(c.multistart_starts)));
        k.push_back(real_key("convergence_threshold", PAVSIM_FIELD(c.convergence_threshold)));
        k.push_back(real_key("sweep_horizon", PAVSIM_FIELD(c.sweep_horizon)));
        k.push_back(int_key<int>("sweep_points", PAVSIM_FIELD(c.sweep_points)));
        k.push_back(int_key<int>("rate_grid_points", PAVSIM_FIELD(c.rate_grid_points)));
        k.push_back({"rate_grid_gammas", [](ScenarioConfig& c, std::string_view v) { c.rate_grid_gammas = parse_list(v); },
                     [](const ScenarioConfig& c) { return format_list(c.rate_grid_gammas); }});
        k.push_back(int_key<int>("scan_k", PAVSIM_FIELD(c.scan_k)));
        k.push_back(real_key("scan_step", PAVSIM_FIELD(c.scan_step)));
        k.push_back(bool_key("scan_tie", PAVSIM_FIELD(c.scan_tie)));
        k.push_back(int_key<int>("scan_hurwitz_samples", PAVSIM_FIELD(c.scan_hurwitz_samples)));
        k.push_back(real_key("scan_eps", PAVSIM_FIELD(c.scan_eps)));
        k.push_back(int_key<int>("scan_max_iter", PAVSIM_FIELD(c.scan_max_iter)));
        k.push_back(real_key("erlang_threshold", PAVSIM_FIELD(c.erlang_threshold)));
        k.push_back(int_key<int>("erlang_k_max", PAVSIM_FIELD(c.erlang_k_max)));
        k.push_back(int_key<std::size_t>("oracle_n", PAVSIM_FIELD(c.oracle_n)));
        k.push_back(real_key("oracle_dt", PAVSIM_FIELD(c.oracle_dt)));
        k.push_back(real_key("oracle_horizon", PAVSIM_FIELD(c.oracle_horizon)));
        k.push_back({"oracle_mode", [](ScenarioConfig& c, std::string_view v) { c.oracle_mode = parse_lockout_mode(trim(v)); },
                     [](const ScenarioConfig& c) { return std::string(to_string(c.oracle_mode)); }});
        k.push_back(bool_key("oracle_compare_modes", PAVSIM_FIELD(c.oracle_compare_modes)));
        k.push_back({"speed_profile", [](ScenarioConfig& c, std::string_view v) { c.speed_profile = std::string(trim(v)); },
                     [](const ScenarioConfig& c) { return c.speed_profile; }});
        return k;
    }();
    return table;
}

#undef PAVSIM_FIELD

const Key* find_key(std::string_view name) {
    for (const auto& k : keys()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

} // namespace

void ScenarioConfig::validate() const {
    model.validate();
    headway.validate();
    require(std::isfinite(frac_h0) && frac_h0 >= 0.0 && frac_h0 <= 1.0, "frac_h0 must lie in [0, 1]");
    require(std::isfinite(frac_a0) && frac_a0 >= 0.0 && frac_a0 <= 1.0, "frac_a0 must lie in [0, 1]");
    require(std::abs(frac_h0 + frac_a0 - 1.0) <= kSimplexTolerance, "frac_h0 + frac_a0 must equal 1");
    integration.validate(model);
    require(std::isfinite(v) && v > 0.0, "v must be positive");
    require(threads >= 1, "threads must be >= 1");
    require(equilibrium_tol > 0.0, "equilibrium_tol must be positive");
    require(equilibrium_max_iter >= 1, "equilibrium_max_iter must be >= 1");
    require(multistart_starts >= 0, "multistart_starts must be >= 0");
    require(convergence_threshold > 0.0, "convergence_threshold must be positive");
    require(std::isfinite(sweep_horizon) && sweep_horizon > 0.0, "sweep_horizon must be positive");
    require(sweep_points >= 2, "sweep_points must be >= 2");
    require(rate_grid_points >= 1, "rate_grid_points must be >= 1");
    require(!rate_grid_gammas.empty(), "rate_grid_gammas must not be empty");
    for (double g : rate_grid_gammas) require(g >= 0.0 && g <= 1.0, "rate_grid_gammas entries must lie in [0, 1]");
    require(scan_k >= 1 && scan_k <= kAnalysisMaxStages, "scan_k must lie in 1..32");
    require(scan_step > 0.0 && scan_step <= 1.0, "scan_step must lie in (0, 1]");
    require(scan_hurwitz_samples >= 1, "scan_hurwitz_samples must be >= 1");
    require(scan_eps > 0.0, "scan_eps must be positive");
    require(scan_max_iter >= 1, "scan_max_iter must be >= 1");
    require(erlang_threshold > 0.0, "erlang_threshold must be positive");
    require(erlang_k_max >= 1 && erlang_k_max <= kMaxErlangStages, "erlang_k_max must lie in 1..100000");
    require(oracle_n >= kOracleMinParticles, "oracle_n must be >= 1000");
    require(oracle_dt > 0.0 && oracle_horizon >= oracle_dt, "oracle_dt must be positive and <= oracle_horizon");
    PairedScenario::from_config(*this).validate();
}

ScenarioConfig parse_config(std::istream& is, std::string_view source_name, ScenarioConfig base) {
    std::string line;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    while (std::getline(is, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const std::string where = std::string(source_name) + ":" + std::to_string(line_no) + ": ";
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) throw ValidationError(where + "expected key = value");
        const std::string key(trim(view.substr(0, eq)));
        const auto value = trim(view.substr(eq + 1));
        const Key* entry = find_key(key);
        if (!entry) throw ValidationError(where + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ValidationError(where + "duplicate key '" + key + "'");
        try {
            entry->set(base, value);
        } catch (const ValidationError& e) {
            throw ValidationError(where + key + ": " + e.what());
        }
    }
    return base;
}

ScenarioConfig load_config(const std::string& path, ScenarioConfig base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    return parse_config(in, path, std::move(base));
}

std::string serialize_config(const ScenarioConfig& cfg) {
    std::ostringstream os;
    for (const auto& k : keys()) os << k.name << " = " << k.get(cfg) << '\n';
    return os.str();
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : keys()) out.push_back(k.name);
    return out;
}

namespace {

struct Preset {
    const char* name;
    double l1, l2, l3, l4;
};

// Downward regime averages (0.1, 0.5); upward regime averages (0.5, 0.1).
constexpr Preset kPresets[] = {
    {"down-baseline", 0.1, 0.5, 0.1, 0.5},
    {"down-cascade", 0.05, 0.9, 0.15, 0.1},
    {"down-asymmetric", 0.18, 0.1, 0.02, 0.9},
    {"down-near-independent", 0.12, 0.55, 0.08, 0.45},
    {"down-near-independent-reversed", 0.08, 0.45, 0.12, 0.55},
    {"up-baseline", 0.5, 0.1, 0.5, 0.1},
    {"up-cascade", 0.1, 0.15, 0.9, 0.05},
    {"up-asymmetric", 0.9, 0.05, 0.1, 0.15},
    {"up-near-independent", 0.55, 0.12, 0.45, 0.08},
    {"up-near-independent-reversed", 0.45, 0.08, 0.55, 0.12},
};

} // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> out{"default"};
    for (const auto& p : kPresets) out.emplace_back(p.name);
    return out;
}

ScenarioConfig preset_config(std::string_view name) {
    ScenarioConfig cfg;
    if (name == "default") return cfg;
    for (const auto& p : kPresets) {
        if (name == p.name) {
            cfg.label = p.name;
            cfg.model.lambda1 = p.l1;
            cfg.model.lambda2 = p.l2;
            cfg.model.lambda3 = p.l3;
            cfg.model.lambda4 = p.l4;
            return cfg;
        }
    }
    throw ValidationError("unknown preset '" + std::string(name) + "'");
}

PairedScenario PairedScenario::from_rates(const ModelParams& params) {
    return {params.lambda1,
            params.lambda2,
            params.lambda3,
            params.lambda4,
            0.5 * (params.lambda1 + params.lambda3),
            0.5 * (params.lambda2 + params.lambda4)};
}

PairedScenario PairedScenario::from_config(const ScenarioConfig& cfg) {
    auto p = from_rates(cfg.model);
    if (cfg.lambda_ha_bar) p.lambda_ha_bar = *cfg.lambda_ha_bar;
    if (cfg.lambda_ah_bar) p.lambda_ah_bar = *cfg.lambda_ah_bar;
    return p;
}

void PairedScenario::validate() const {
    if (std::abs(0.5 * (lambda1 + lambda3) - lambda_ha_bar) > kPairingTolerance) {
        throw ValidationError("pairing violated: (lambda1 + lambda3) / 2 = " + format_double(0.5 * (lambda1 + lambda3)) +
                              " but lambda_ha_bar = " + format_double(lambda_ha_bar));
    }
    if (std::abs(0.5 * (lambda2 + lambda4) - lambda_ah_bar) > kPairingTolerance) {
        throw ValidationError("pairing violated: (lambda2 + lambda4) / 2 = " + format_double(0.5 * (lambda2 + lambda4)) +
                              " but lambda_ah_bar = " + format_double(lambda_ah_bar));
    }
}

ModelParams PairedScenario::leader_dependent(const ModelParams& base) const {
    ModelParams p = base;
    p.lambda1 = lambda1;
    p.lambda2 = lambda2;
    p.lambda3 = lambda3;
    p.lambda4 = lambda4;
    return p;
}

ModelParams PairedScenario::baseline(const ModelParams& base) const {
    ModelParams p = base;
    p.lambda1 = p.lambda3 = lambda_ha_bar;
    p.lambda2 = p.lambda4 = lambda_ah_bar;
    return p;
}

} // namespace pavsim
