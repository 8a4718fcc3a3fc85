#include "collapse/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace collapse {

namespace {

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

struct Location {
    std::size_t line = 0;
    std::size_t column = 0;
};

[[noreturn]] void fail(Location at, const std::string& message) {
    throw ConfigError("line " + std::to_string(at.line) + ", column " + std::to_string(at.column) + ": " + message);
}

enum class ValueKind { Integer, Real, Bool, String, List };

const char* kind_name(ValueKind k) {
    switch (k) {
    case ValueKind::Integer: return "integer";
    case ValueKind::Real: return "number";
    case ValueKind::Bool: return "boolean";
    case ValueKind::String: return "string";
    case ValueKind::List: return "list";
    }
    return "value";
}

struct Value {
    ValueKind kind = ValueKind::Integer;
    std::string text; // numbers keep their literal; strings are unescaped
    bool flag = false;
    std::vector<Value> items;
    Location at;
};

class LineParser {
public:
    LineParser(const std::string& line, std::size_t line_no) : s_(line), line_(line_no) {}

    Location here() const { return {line_, pos_ + 1}; }
    bool done() {
        skip_space();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }
    char peek() {
        skip_space();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }
    void expect(char c) {
        if (peek() != c) fail(here(), std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string identifier() {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        if (start == pos_) fail(here(), "expected a name");
        return s_.substr(start, pos_ - start);
    }

    Value value() {
        skip_space();
        Value v;
        v.at = here();
        if (pos_ >= s_.size()) fail(here(), "missing value");
        const char c = s_[pos_];
        if (c == '"') {
            v.kind = ValueKind::String;
            v.text = quoted();
        } else if (c == '[') {
            v.kind = ValueKind::List;
            ++pos_;
            if (peek() == ']') {
                ++pos_;
                return v;
            }
            while (true) {
                v.items.push_back(value());
                if (v.items.back().kind == ValueKind::List) fail(v.items.back().at, "nested lists are not supported");
                const char n = peek();
                ++pos_;
                if (n == ']') break;
                if (n != ',') fail({line_, pos_}, "expected ',' or ']'");
            }
        } else if (s_.compare(pos_, 4, "true") == 0 && !word_char(pos_ + 4)) {
            v.kind = ValueKind::Bool;
            v.flag = true;
            pos_ += 4;
        } else if (s_.compare(pos_, 5, "false") == 0 && !word_char(pos_ + 5)) {
            v.kind = ValueKind::Bool;
            pos_ += 5;
        } else {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                        s_[pos_] == '-' || s_[pos_] == '+'))
                ++pos_;
            v.text = s_.substr(start, pos_ - start);
            if (v.text.empty()) fail(v.at, std::string("unexpected character '") + c + "'");
            double d = 0.0;
            long long i = 0;
            const char* b = v.text.data();
            const char* e = b + v.text.size();
            if (auto r = std::from_chars(b, e, i); r.ec == std::errc{} && r.ptr == e) {
                v.kind = ValueKind::Integer;
            } else if (auto r2 = std::from_chars(b, e, d); r2.ec == std::errc{} && r2.ptr == e) {
                v.kind = ValueKind::Real;
            } else {
                fail(v.at, "cannot parse value '" + v.text + "'");
            }
        }
        return v;
    }

private:
    bool word_char(std::size_t i) const {
        return i < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i])) || s_[i] == '_');
    }
    void skip_space() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
    }
    std::string quoted() {
        const Location open = here();
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                const char n = s_[pos_++];
                switch (n) {
                case 'n': c = '\n'; break;
                case 't': c = '\t'; break;
                case '"': c = '"'; break;
                case '\\': c = '\\'; break;
                default: fail({line_, pos_}, std::string("unknown escape '\\") + n + "'");
                }
            }
            out += c;
        }
        if (pos_ >= s_.size()) fail(open, "unterminated string");
        ++pos_;
        return out;
    }

    const std::string& s_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Typed conversion
// ---------------------------------------------------------------------------

void require(const Value& v, std::initializer_list<ValueKind> kinds, const std::string& key) {
    for (ValueKind k : kinds)
        if (v.kind == k) return;
    fail(v.at, "key '" + key + "' expects a " + kind_name(*kinds.begin()) + ", got a " + kind_name(v.kind));
}

std::uint64_t as_u64(const Value& v, const std::string& key) {
    require(v, {ValueKind::Integer}, key);
    std::uint64_t out = 0;
    const char* e = v.text.data() + v.text.size();
    if (auto r = std::from_chars(v.text.data(), e, out); r.ec != std::errc{} || r.ptr != e)
        fail(v.at, "key '" + key + "' expects a non-negative integer");
    return out;
}

std::size_t as_count(const Value& v, const std::string& key) { return static_cast<std::size_t>(as_u64(v, key)); }

double as_real(const Value& v, const std::string& key) {
    require(v, {ValueKind::Real, ValueKind::Integer}, key);
    double out = 0.0;
    std::from_chars(v.text.data(), v.text.data() + v.text.size(), out);
    return out;
}

bool as_bool(const Value& v, const std::string& key) {
    require(v, {ValueKind::Bool}, key);
    return v.flag;
}

std::string as_string(const Value& v, const std::string& key) {
    require(v, {ValueKind::String}, key);
    return v.text;
}

std::vector<std::size_t> as_dims(const Value& v, const std::string& key) {
    require(v, {ValueKind::List}, key);
    std::vector<std::size_t> out;
    for (const auto& item : v.items) out.push_back(as_count(item, key));
    return out;
}

std::vector<std::uint64_t> as_seeds(const Value& v, const std::string& key) {
    require(v, {ValueKind::List}, key);
    std::vector<std::uint64_t> out;
    for (const auto& item : v.items) out.push_back(as_u64(item, key));
    return out;
}

std::vector<MetricName> as_metrics(const Value& v, const std::string& key) {
    require(v, {ValueKind::List}, key);
    std::vector<MetricName> out;
    for (const auto& item : v.items) {
        try {
            const MetricName m = parse_metric_name(as_string(item, key));
            if (std::find(out.begin(), out.end(), m) != out.end()) fail(item.at, "metric listed twice");
            out.push_back(m);
        } catch (const ConfigError& e) {
            if (std::string(e.what()).rfind("line ", 0) == 0) throw;
            fail(item.at, e.what());
        }
    }
    return out;
}

Experiment as_experiment(const Value& v) {
    std::string s = as_string(v, "experiment");
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "bootstrap") return Experiment::Bootstrap;
    if (s == "gerjoint") return Experiment::GerJoint;
    if (s == "gerseparate") return Experiment::GerSeparate;
    if (s == "metricsonly") return Experiment::MetricsOnly;
    fail(v.at, "unknown experiment '" + v.text + "' (expected Bootstrap, GerJoint, GerSeparate or MetricsOnly)");
}

// ---------------------------------------------------------------------------
// Key tables
// ---------------------------------------------------------------------------

using Setter = std::function<void(ExperimentConfig&, const Value&)>;
using KeyTable = std::map<std::string, Setter>;

#define COUNT(field) [](ExperimentConfig& c, const Value& v) { c.field = as_count(v, #field); }

const std::map<std::string, KeyTable>& sections() {
    static const std::map<std::string, KeyTable> table = {
        {"",
         {
             {"experiment", [](ExperimentConfig& c, const Value& v) { c.experiment = as_experiment(v); }},
             {"output_dir", [](ExperimentConfig& c, const Value& v) { c.output_dir = as_string(v, "output_dir"); }},
             {"plot", [](ExperimentConfig& c, const Value& v) { c.plot = as_bool(v, "plot"); }},
             {"seed_sweep", [](ExperimentConfig& c, const Value& v) { c.seed_sweep = as_seeds(v, "seed_sweep"); }},
         }},
        {"bootstrap",
         {
             {"real_sample_count", COUNT(real_sample_count)},
             {"synthetic_sample_count", COUNT(synthetic_sample_count)},
             {"task_count", COUNT(task_count)},
             {"reinitialize_weights",
              [](ExperimentConfig& c, const Value& v) { c.reinitialize_weights = as_bool(v, "reinitialize_weights"); }},
             {"conditional", [](ExperimentConfig& c, const Value& v) { c.conditional = as_bool(v, "conditional"); }},
             {"metrics", [](ExperimentConfig& c, const Value& v) { c.bootstrap_metrics = as_metrics(v, "metrics"); }},
             {"eval_reference_count", COUNT(eval_reference_count)},
             {"eval_sample_count", COUNT(eval_sample_count)},
             {"seed", [](ExperimentConfig& c, const Value& v) { c.seed = as_u64(v, "seed"); }},
         }},
        {"wgan",
         {
             {"z_dim", COUNT(wgan.z_dim)},
             {"gen_dims", [](ExperimentConfig& c, const Value& v) { c.wgan.gen_dims = as_dims(v, "gen_dims"); }},
             {"critic_dims",
              [](ExperimentConfig& c, const Value& v) { c.wgan.critic_dims = as_dims(v, "critic_dims"); }},
             {"clip_value", [](ExperimentConfig& c, const Value& v) { c.wgan.clip_value = as_real(v, "clip_value"); }},
             {"critic_steps_per_gen_step", COUNT(wgan.critic_steps_per_gen_step)},
             {"learning_rate",
              [](ExperimentConfig& c, const Value& v) { c.wgan.learning_rate = as_real(v, "learning_rate"); }},
             {"rmsprop_decay",
              [](ExperimentConfig& c, const Value& v) { c.wgan.rmsprop_decay = as_real(v, "rmsprop_decay"); }},
             {"rmsprop_epsilon",
              [](ExperimentConfig& c, const Value& v) { c.wgan.rmsprop_epsilon = as_real(v, "rmsprop_epsilon"); }},
             {"batch_size", COUNT(wgan.batch_size)},
             {"total_gen_steps", COUNT(wgan.total_gen_steps)},
         }},
        {"conditional",
         {
             {"class_embed_dim", COUNT(class_embed_dim)},
             {"freeze_embedding",
              [](ExperimentConfig& c, const Value& v) { c.freeze_embedding = as_bool(v, "freeze_embedding"); }},
         }},
        {"classifier",
         {
             {"encoder_dims",
              [](ExperimentConfig& c, const Value& v) { c.classifier.encoder_dims = as_dims(v, "encoder_dims"); }},
             {"class_count", COUNT(classifier.class_count)},
             {"learning_rate",
              [](ExperimentConfig& c, const Value& v) { c.classifier.learning_rate = as_real(v, "learning_rate"); }},
             {"momentum", [](ExperimentConfig& c, const Value& v) { c.classifier.momentum = as_real(v, "momentum"); }},
             {"batch_size", COUNT(classifier.batch_size)},
             {"epochs", COUNT(classifier.epochs)},
         }},
        {"otdd",
         {
             {"epsilon", [](ExperimentConfig& c, const Value& v) { c.otdd.epsilon = as_real(v, "epsilon"); }},
             {"relative_epsilon",
              [](ExperimentConfig& c, const Value& v) { c.otdd.relative_epsilon = as_real(v, "relative_epsilon"); }},
             {"subsample", COUNT(otdd.subsample)},
             {"max_iters", COUNT(otdd.max_iters)},
         }},
        {"ger",
         {
             {"task_count", COUNT(ger.task_count)},
             {"classes_per_task", COUNT(ger.classes_per_task)},
             {"samples_per_task", COUNT(ger.samples_per_task)},
             {"validation_per_task", COUNT(ger.validation_per_task)},
             {"replay", [](ExperimentConfig& c, const Value& v) { c.ger.replay = as_bool(v, "replay"); }},
             {"replay_fraction",
              [](ExperimentConfig& c, const Value& v) { c.ger.replay_fraction = as_real(v, "replay_fraction"); }},
             {"replay_sample_count", COUNT(ger.replay_sample_count)},
             {"synthetic_sample_count", COUNT(ger.synthetic_sample_count)},
             {"metrics", [](ExperimentConfig& c, const Value& v) { c.ger.metrics = as_metrics(v, "metrics"); }},
             {"seed", [](ExperimentConfig& c, const Value& v) { c.ger.seed = as_u64(v, "seed"); }},
         }},
        {"metrics_only",
         {
             {"a", [](ExperimentConfig& c, const Value& v) { c.metrics_only.a = as_string(v, "a"); }},
             {"b", [](ExperimentConfig& c, const Value& v) { c.metrics_only.b = as_string(v, "b"); }},
             {"metrics", [](ExperimentConfig& c, const Value& v) { c.metrics_only.metrics = as_metrics(v, "metrics"); }},
             {"seed", [](ExperimentConfig& c, const Value& v) { c.metrics_only.seed = as_u64(v, "seed"); }},
         }},
    };
    return table;
}

#undef COUNT

bool section_applies(const std::string& section, Experiment e) {
    if (section == "bootstrap") return e == Experiment::Bootstrap;
    if (section == "ger") return e == Experiment::GerJoint || e == Experiment::GerSeparate;
    if (section == "metrics_only") return e == Experiment::MetricsOnly;
    if (section == "wgan" || section == "conditional") return e != Experiment::MetricsOnly;
    return true;
}

void check_constraints(const ExperimentConfig& c) {
    if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
    switch (c.experiment) {
    case Experiment::Bootstrap:
        to_bootstrap_config(c, c.output_dir).validate();
        break;
    case Experiment::GerJoint:
    case Experiment::GerSeparate: {
        const GerSettings& g = c.ger;
        const std::size_t k = default_gmm().component_count();
        if (g.task_count < 1 || g.classes_per_task < 1 || g.task_count * g.classes_per_task > k)
            throw ConfigError("ger: task_count x classes_per_task must be between 1 and " + std::to_string(k));
        if (g.samples_per_task < 2 || g.validation_per_task < 1)
            throw ConfigError("ger: samples_per_task >= 2 and validation_per_task >= 1 required");
        if (!(g.replay_fraction >= 0.0 && g.replay_fraction < 1.0))
            throw ConfigError("ger: replay_fraction must be in [0, 1)");
        if (g.replay_sample_count < 1 || g.synthetic_sample_count < 3)
            throw ConfigError("ger: replay_sample_count >= 1 and synthetic_sample_count >= 3 required");
        for (MetricName m : g.metrics)
            if (m == MetricName::MLE_BIAS || m == MetricName::MLE_VARIANCE)
                throw ConfigError("ger: " + to_string(m) + " is bootstrap-only");
        conditional_model(c).validate();
        if (c.classifier.class_count != k) throw ConfigError("classifier: class_count must be " + std::to_string(k));
        c.classifier.validate();
        break;
    }
    case Experiment::MetricsOnly:
        if (c.metrics_only.a.empty() || c.metrics_only.b.empty())
            throw ConfigError("metrics_only: both 'a' and 'b' dataset paths are required");
        if (c.metrics_only.metrics.empty()) throw ConfigError("metrics_only: metrics must not be empty");
        c.classifier.validate();
        break;
    }
    if (c.otdd.epsilon && !(*c.otdd.epsilon > 0.0)) throw ConfigError("otdd: epsilon must be > 0");
    if (!(c.otdd.relative_epsilon > 0.0)) throw ConfigError("otdd: relative_epsilon must be > 0");
    if (c.otdd.subsample < 1 || c.otdd.max_iters < 1) throw ConfigError("otdd: subsample and max_iters must be >= 1");
}

// ---------------------------------------------------------------------------
// Echo
// ---------------------------------------------------------------------------

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out + '"';
}

template <class T>
std::string list(const std::vector<T>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
    return out + "]";
}

std::string metric_list(const std::vector<MetricName>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + quote(to_string(v[i]));
    return out + "]";
}

const char* boolean(bool b) { return b ? "true" : "false"; }

} // namespace

std::string to_string(Experiment e) {
    switch (e) {
    case Experiment::Bootstrap: return "Bootstrap";
    case Experiment::GerJoint: return "GerJoint";
    case Experiment::GerSeparate: return "GerSeparate";
    case Experiment::MetricsOnly: return "MetricsOnly";
    }
    return "Bootstrap";
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    const auto& table = sections();
    std::string section;
    std::set<std::string> seen_sections;
    std::set<std::string> seen_keys;
    std::vector<std::pair<std::string, Location>> used_sections;
    bool have_experiment = false;

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        LineParser p(line, line_no);
        if (p.done()) continue;
        if (p.peek() == '[') {
            const Location at = p.here();
            p.expect('[');
            section = p.identifier();
            p.expect(']');
            if (!p.done()) fail(p.here(), "unexpected text after section header");
            if (!table.count(section)) fail(at, "unknown section [" + section + "]");
            if (!seen_sections.insert(section).second) fail(at, "duplicate section [" + section + "]");
            used_sections.emplace_back(section, at);
            continue;
        }
        const Location key_at = p.here();
        const std::string key = p.identifier();
        p.expect('=');
        const Value v = p.value();
        if (!p.done()) fail(p.here(), "unexpected text after value");

        const KeyTable& keys = table.at(section);
        const auto it = keys.find(key);
        if (it == keys.end())
            fail(key_at, "unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
        if (!seen_keys.insert(section + "." + key).second) fail(key_at, "duplicate key '" + key + "'");
        it->second(cfg, v);
        if (section.empty() && key == "experiment") have_experiment = true;
    }
    if (!have_experiment) throw ConfigError("missing required key 'experiment'");
    for (const auto& [name, at] : used_sections)
        if (!section_applies(name, cfg.experiment))
            fail(at, "section [" + name + "] does not apply to experiment " + to_string(cfg.experiment));
    check_constraints(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string echo_config(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "experiment = " << quote(to_string(c.experiment)) << '\n'
      << "output_dir = " << quote(c.output_dir) << '\n'
      << "plot = " << boolean(c.plot) << '\n'
      << "seed_sweep = " << list(c.seed_sweep) << '\n';

    if (c.experiment == Experiment::Bootstrap) {
        o << "\n[bootstrap]\n"
          << "real_sample_count = " << c.real_sample_count << '\n'
          << "synthetic_sample_count = " << c.synthetic_sample_count << '\n'
          << "task_count = " << c.task_count << '\n'
          << "reinitialize_weights = " << boolean(c.reinitialize_weights) << '\n'
          << "conditional = " << boolean(c.conditional) << '\n'
          << "metrics = " << metric_list(c.bootstrap_metrics) << '\n'
          << "eval_reference_count = " << c.eval_reference_count << '\n'
          << "eval_sample_count = " << c.eval_sample_count << '\n'
          << "seed = " << c.seed << '\n';
    }
    if (c.experiment == Experiment::GerJoint || c.experiment == Experiment::GerSeparate) {
        const GerSettings& g = c.ger;
        o << "\n[ger]\n"
          << "task_count = " << g.task_count << '\n'
          << "classes_per_task = " << g.classes_per_task << '\n'
          << "samples_per_task = " << g.samples_per_task << '\n'
          << "validation_per_task = " << g.validation_per_task << '\n'
          << "replay = " << boolean(g.replay) << '\n'
          << "replay_fraction = " << format_double(g.replay_fraction) << '\n'
          << "replay_sample_count = " << g.replay_sample_count << '\n'
          << "synthetic_sample_count = " << g.synthetic_sample_count << '\n'
          << "metrics = " << metric_list(g.metrics) << '\n'
          << "seed = " << g.seed << '\n';
    }
    if (c.experiment == Experiment::MetricsOnly) {
        o << "\n[metrics_only]\n"
          << "a = " << quote(c.metrics_only.a) << '\n'
          << "b = " << quote(c.metrics_only.b) << '\n'
          << "metrics = " << metric_list(c.metrics_only.metrics) << '\n'
          << "seed = " << c.metrics_only.seed << '\n';
    }
    if (c.experiment != Experiment::MetricsOnly) {
        const WganConfig& w = c.wgan;
        o << "\n[wgan]\n"
          << "z_dim = " << w.z_dim << '\n'
          << "gen_dims = " << list(w.gen_dims) << '\n'
          << "critic_dims = " << list(w.critic_dims) << '\n'
          << "clip_value = " << format_double(w.clip_value) << '\n'
          << "critic_steps_per_gen_step = " << w.critic_steps_per_gen_step << '\n'
          << "learning_rate = " << format_double(w.learning_rate) << '\n'
          << "rmsprop_decay = " << format_double(w.rmsprop_decay) << '\n'
          << "rmsprop_epsilon = " << format_double(w.rmsprop_epsilon) << '\n'
          << "batch_size = " << w.batch_size << '\n'
          << "total_gen_steps = " << w.total_gen_steps << '\n';
        o << "\n[conditional]\n"
          << "class_embed_dim = " << c.class_embed_dim << '\n'
          << "freeze_embedding = " << boolean(c.freeze_embedding) << '\n';
    }
    const ClassifierConfig& k = c.classifier;
    o << "\n[classifier]\n"
      << "encoder_dims = " << list(k.encoder_dims) << '\n'
      << "class_count = " << k.class_count << '\n'
      << "learning_rate = " << format_double(k.learning_rate) << '\n'
      << "momentum = " << format_double(k.momentum) << '\n'
      << "batch_size = " << k.batch_size << '\n'
      << "epochs = " << k.epochs << '\n';
    o << "\n[otdd]\n";
    if (c.otdd.epsilon) o << "epsilon = " << format_double(*c.otdd.epsilon) << '\n';
    o << "relative_epsilon = " << format_double(c.otdd.relative_epsilon) << '\n'
      << "subsample = " << c.otdd.subsample << '\n'
      << "max_iters = " << c.otdd.max_iters << '\n';
    return o.str();
}

ConditionalWganConfig conditional_model(const ExperimentConfig& cfg) {
    ConditionalWganConfig m;
    m.wgan = cfg.wgan;
    m.class_count = default_gmm().component_count();
    m.class_embed_dim = cfg.class_embed_dim;
    m.freeze_embedding = cfg.freeze_embedding;
    return m;
}

BootstrapConfig to_bootstrap_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    BootstrapConfig b;
    b.real_sample_count = cfg.real_sample_count;
    b.synthetic_sample_count = cfg.synthetic_sample_count;
    b.task_count = cfg.task_count;
    b.reinitialize_weights = cfg.reinitialize_weights;
    if (cfg.conditional)
        b.model = conditional_model(cfg);
    else
        b.model = cfg.wgan;
    b.metrics = cfg.bootstrap_metrics;
    b.eval_reference_count = cfg.eval_reference_count;
    b.eval_sample_count = cfg.eval_sample_count;
    b.classifier = cfg.classifier;
    b.otdd = cfg.otdd;
    b.seed = cfg.seed;
    b.output_dir = out_dir;
    return b;
}

GerConfig to_ger_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const GerSettings& g = cfg.ger;
    const GmmSpec spec = default_gmm();
    GerConfig out;
    out.stream = stream_from_gmm(spec, g.task_count, g.classes_per_task, g.samples_per_task, derive_seed(g.seed, {1}));
    out.validation =
        stream_from_gmm(spec, g.task_count, g.classes_per_task, g.validation_per_task, derive_seed(g.seed, {2})).tasks;
    out.regime = cfg.experiment == Experiment::GerJoint ? GerRegime::Joint : GerRegime::Separate;
    out.wgan = conditional_model(cfg);
    out.classifier = cfg.classifier;
    out.replay = g.replay;
    out.replay_fraction = g.replay_fraction;
    out.replay_sample_count = g.replay_sample_count;
    out.synthetic_sample_count = g.synthetic_sample_count;
    out.metrics = g.metrics;
    out.otdd = cfg.otdd;
    out.seed = g.seed;
    out.output_dir = out_dir;
    return out;
}

} // namespace collapse
