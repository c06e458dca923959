#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "levyms/io.hpp"

#ifndef LEVYMS_VERSION
#define LEVYMS_VERSION "0.1.0"
#endif

namespace levyms {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_real(const std::string& key, const std::string& value, int line) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' expects a finite real, got '" + value + "'",
                          key, line);
    }
    return v;
}

long to_integer(const std::string& key, const std::string& value, int line) {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(value.c_str(), &end, 10);
    if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE) {
        throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' expects an integer, got '" + value + "'",
                          key, line);
    }
    return v;
}

std::uint64_t to_seed(const std::string& key, const std::string& value, int line) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (value.empty() || value[0] == '-' || end != value.c_str() + value.size() || errno == ERANGE) {
        throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' expects an unsigned integer", key, line);
    }
    return v;
}

struct Field {
    std::string section;
    std::function<void(ExperimentConfig&, const std::string&, int)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field real_field(const char* section, const char* key, T ExperimentConfig::*member) {
    return {section,
            [key, member](ExperimentConfig& c, const std::string& v, int line) { c.*member = to_real(key, v, line); },
            [member](const ExperimentConfig& c) { return format_real(c.*member); }};
}

template <typename T>
Field integer_field(const char* section, const char* key, T ExperimentConfig::*member) {
    return {section,
            [key, member](ExperimentConfig& c, const std::string& v, int line) {
                c.*member = static_cast<T>(to_integer(key, v, line));
            },
            [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

// Ordered key table; serialization follows this order.
const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        {"name",
         {"system", [](ExperimentConfig& c, const std::string& v, int) { c.system = v; },
          [](const ExperimentConfig& c) { return c.system; }}},
        {"alpha1", real_field("system", "alpha1", &ExperimentConfig::alpha1)},
        {"alpha2", real_field("system", "alpha2", &ExperimentConfig::alpha2)},
        {"sigma1", real_field("system", "sigma1", &ExperimentConfig::sigma1)},
        {"sigma2", real_field("system", "sigma2", &ExperimentConfig::sigma2)},
        {"epsilon", real_field("system", "epsilon", &ExperimentConfig::epsilon)},
        {"x0", real_field("system", "x0", &ExperimentConfig::x0)},
        {"y0", real_field("system", "y0", &ExperimentConfig::y0)},
        {"macro_dt", real_field("schedule", "macro_dt", &ExperimentConfig::macro_dt)},
        {"micro_dt", real_field("schedule", "micro_dt", &ExperimentConfig::micro_dt)},
        {"M", integer_field("schedule", "M", &ExperimentConfig::micro_count)},
        {"T", real_field("schedule", "T", &ExperimentConfig::horizon)},
        {"burn_in", integer_field("schedule", "burn_in", &ExperimentConfig::burn_in)},
        {"restart",
         {"schedule",
          [](ExperimentConfig& c, const std::string& v, int line) {
              if (v == "warm") {
                  c.restart = RestartPolicy::Warm;
              } else if (v == "cold") {
                  c.restart = RestartPolicy::Cold;
              } else {
                  throw ConfigError("line " + std::to_string(line) + ": restart must be 'warm' or 'cold'", "restart", line);
              }
          },
          [](const ExperimentConfig& c) { return std::string(c.restart == RestartPolicy::Warm ? "warm" : "cold"); }}},
        {"p", real_field("experiment", "p", &ExperimentConfig::p)},
        {"K", integer_field("experiment", "K", &ExperimentConfig::paths)},
        {"l_max", integer_field("experiment", "l_max", &ExperimentConfig::l_max)},
        {"master_seed",
         {"experiment",
          [](ExperimentConfig& c, const std::string& v, int line) { c.master_seed = to_seed("master_seed", v, line); },
          [](const ExperimentConfig& c) { return std::to_string(c.master_seed); }}},
        {"full_dt", real_field("experiment", "full_dt", &ExperimentConfig::full_dt)},
        {"micro_budget", integer_field("experiment", "micro_budget", &ExperimentConfig::micro_budget)},
        {"n_paths", integer_field("experiment", "n_paths", &ExperimentConfig::n_paths)},
        {"drift",
         {"experiment",
          [](ExperimentConfig& c, const std::string& v, int line) {
              if (v == "quadrature") {
                  c.drift = DriftMode::Quadrature;
              } else if (v == "empirical") {
                  c.drift = DriftMode::Empirical;
              } else {
                  throw ConfigError("line " + std::to_string(line) + ": drift must be 'quadrature' or 'empirical'", "drift",
                                    line);
              }
          },
          [](const ExperimentConfig& c) {
              return std::string(c.drift == DriftMode::Quadrature ? "quadrature" : "empirical");
          }}},
        {"estimator_samples", integer_field("experiment", "estimator_samples", &ExperimentConfig::estimator_samples)},
        {"estimator_dt", real_field("experiment", "estimator_dt", &ExperimentConfig::estimator_dt)},
        {"estimator_burn_in", integer_field("experiment", "estimator_burn_in", &ExperimentConfig::estimator_burn_in)},
        {"weak_function",
         {"experiment", [](ExperimentConfig& c, const std::string& v, int) { c.weak_function = v; },
          [](const ExperimentConfig& c) { return c.weak_function; }}},
        {"weak_coupling",
         {"experiment",
          [](ExperimentConfig& c, const std::string& v, int line) {
              if (v == "independent") {
                  c.weak_coupling = NoiseCoupling::Independent;
              } else if (v == "shared") {
                  c.weak_coupling = NoiseCoupling::Shared;
              } else {
                  throw ConfigError("line " + std::to_string(line) + ": weak_coupling must be 'independent' or 'shared'",
                                    "weak_coupling", line);
              }
          },
          [](const ExperimentConfig& c) {
              return std::string(c.weak_coupling == NoiseCoupling::Shared ? "shared" : "independent");
          }}},
        {"dir",
         {"output", [](ExperimentConfig& c, const std::string& v, int) { c.output_dir = v; },
          [](const ExperimentConfig& c) { return c.output_dir; }}},
    };
    return table;
}

const Field* find_field(const std::string& key) {
    for (const auto& [name, field] : fields()) {
        if (name == key) return &field;
    }
    return nullptr;
}

}  // namespace

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string version_string() { return LEVYMS_VERSION; }

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why, key, 0); };
    if (!DriftRegistry<double>::contains(system)) fail("name", "unknown system '" + system + "'");
    if (!(alpha1 > 0 && alpha1 <= 2)) fail("alpha1", "must lie in (0, 2]");
    if (!(alpha2 > 0 && alpha2 <= 2)) fail("alpha2", "must lie in (0, 2]");
    if (!(sigma1 >= 0)) fail("sigma1", "must be >= 0");
    if (!(sigma2 >= 0)) fail("sigma2", "must be >= 0");
    if (!(epsilon > 0)) fail("epsilon", "must be > 0");
    if (!(macro_dt > 0)) fail("macro_dt", "must be > 0");
    if (!(micro_dt > 0 && micro_dt <= macro_dt)) fail("micro_dt", "must satisfy 0 < micro_dt <= macro_dt");
    if (micro_count < 1) fail("M", "must be >= 1");
    if (!(horizon >= macro_dt)) fail("T", "must be >= macro_dt");
    if (burn_in < 0 || burn_in >= micro_count) fail("burn_in", "must satisfy 0 <= burn_in < M");
    if (!(p > 1 && p < std::min(alpha1, alpha2)) && !(std::min(alpha1, alpha2) == 2 && p > 1 && p <= 2)) {
        fail("p", "must lie in (1, min(alpha1, alpha2))");
    }
    if (paths < 1) fail("K", "must be >= 1");
    if (l_max < 1) fail("l_max", "must be >= 1");
    if (!(full_dt > 0 && full_dt <= horizon)) fail("full_dt", "must satisfy 0 < full_dt <= T");
    if (micro_budget < 1) fail("micro_budget", "must be >= 1");
    if (n_paths < 1 || n_paths > paths) fail("n_paths", "must satisfy 1 <= n_paths <= K");
    if (estimator_samples < 2) fail("estimator_samples", "must be >= 2");
    if (!(estimator_dt > 0)) fail("estimator_dt", "must be > 0");
    if (estimator_burn_in < 0) fail("estimator_burn_in", "must be >= 0");
    if (weak_function != "all") {
        bool known = false;
        for (const auto& f : WeakTestSuite::defaults().functions) known = known || f.name == weak_function;
        if (!known) fail("weak_function", "must be 'all', 'cos', 'gauss' or 'lorentz'");
    }
    if (drift == DriftMode::Quadrature && (system != "paper_example" || sigma2 != 1)) {
        fail("drift", "quadrature drift needs system paper_example with sigma2 = 1; use 'empirical'");
    }
    if (output_dir.empty()) fail("dir", "must not be empty");
}

SlowFastSystem<double> ExperimentConfig::make_system() const {
    return DriftRegistry<double>::make(system, {alpha1, alpha2, sigma1, sigma2, epsilon});
}

PimSchedule<double> ExperimentConfig::make_schedule() const {
    PimSchedule<double> s;
    s.macro_dt = macro_dt;
    s.micro_dt = micro_dt;
    s.micro_count = micro_count;
    s.horizon = horizon;
    s.burn_in = burn_in;
    s.restart = restart;
    s.validate();
    return s;
}

EffectiveDrift<double> ExperimentConfig::make_drift() const {
    if (drift == DriftMode::Quadrature) return EffectiveDrift<double>::quadrature_example(alpha2);
    EmpiricalDriftConfig<double> cfg;
    cfg.samples = estimator_samples;
    cfg.micro_dt = estimator_dt;
    cfg.burn_in = estimator_burn_in;
    cfg.grid_nodes = 121;
    auto d = EffectiveDrift<double>::empirical(cfg);
    d.prepare(make_system(), RngStream(master_seed, 0).child(StreamRole::Estimator));
    return d;
}

EnsembleOptions ExperimentConfig::make_options(int threads) const {
    EnsembleOptions o;
    o.seed = master_seed;
    o.threads = threads;
    o.x0 = Eigen::VectorXd::Constant(1, x0);
    o.y0 = Eigen::VectorXd::Constant(1, y0);
    return o;
}

ExperimentConfig parse_config(const std::string& text) {
    static const std::set<std::string> sections = {"system", "schedule", "experiment", "output"};
    ExperimentConfig config;
    std::set<std::string> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (content.empty()) continue;
        if (content.front() == '[') {
            if (content.back() != ']') throw ConfigError("line " + std::to_string(line) + ": malformed section header", "", line);
            section = trim(content.substr(1, content.size() - 2));
            if (!sections.count(section)) {
                throw ConfigError("line " + std::to_string(line) + ": unknown section [" + section + "]", section, line);
            }
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'", content, line);
        }
        const std::string key = trim(content.substr(0, eq));
        const std::string value = trim(content.substr(eq + 1));
        const Field* field = find_field(key);
        if (!field) throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'", key, line);
        if (field->section != section) {
            throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' belongs in [" + field->section + "]",
                              key, line);
        }
        if (!seen.insert(key).second) {
            throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'", key, line);
        }
        field->set(config, value, line);
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string(), "", 0);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& config) {
    std::ostringstream out;
    std::string section;
    for (const auto& [key, field] : fields()) {
        if (field.section != section) {
            if (!section.empty()) out << '\n';
            section = field.section;
            out << '[' << section << "]\n";
        }
        out << key << " = " << field.get(config) << '\n';
    }
    return out.str();
}

void write_manifest(const std::filesystem::path& file, const ExperimentConfig& config, const std::string& subcommand,
                    const std::map<std::string, std::string>& extra) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write manifest " + file.string());
    out << "# levyms manifest\n";
    out << "# version = " << version_string() << '\n';
    out << "# subcommand = " << subcommand << '\n';
    out << "# master_seed = " << config.master_seed << '\n';
    for (const auto& [k, v] : extra) out << "# " << k << " = " << v << '\n';
    out << '\n' << serialize_config(config);
    if (!out) throw std::runtime_error("failed writing manifest " + file.string());
}

}  // namespace levyms
