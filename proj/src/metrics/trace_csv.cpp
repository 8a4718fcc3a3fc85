#include "collapse/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <istream>
#include <ostream>
#include <tuple>

#include <json.hpp>

namespace collapse {

namespace {

constexpr std::array<std::pair<MetricName, const char*>, 7> kNames{{
    {MetricName::FD, "FD"},
    {MetricName::FID, "FID"},
    {MetricName::CFID, "CFID"},
    {MetricName::OTDD, "OTDD"},
    {MetricName::MLE_BIAS, "MLE_BIAS"},
    {MetricName::MLE_VARIANCE, "MLE_VARIANCE"},
    {MetricName::CLS_ACCURACY, "CLS_ACCURACY"},
}};

std::string metadata_json(const std::map<std::string, std::string>& md) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : md) j[k] = v;
    return j.dump();
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

// One RFC 4180 record; quoted fields may not span lines here.
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back() += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted) throw IoError("metrics csv line " + std::to_string(line_no) + ": unterminated quote");
    return fields;
}

} // namespace

std::string to_string(MetricName name) {
    for (const auto& [n, s] : kNames)
        if (n == name) return s;
    throw ContractError("unknown metric enum value");
}

MetricName parse_metric_name(const std::string& text) {
    std::string upper = text;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    for (const auto& [n, s] : kNames)
        if (upper == s) return n;
    throw ConfigError("unknown metric '" + text + "'");
}

std::vector<MetricName> all_metric_names() {
    std::vector<MetricName> out;
    for (const auto& [n, s] : kNames) out.push_back(n);
    return out;
}

void write_metric_rows(std::ostream& out, std::vector<MetricValue> rows) {
    struct Keyed {
        std::size_t task;
        std::string name;
        std::string meta;
        double value;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(rows.size());
    for (const auto& r : rows) keyed.push_back({r.task_index, to_string(r.name), metadata_json(r.metadata), r.value});
    std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        return std::tie(a.task, a.name, a.meta) < std::tie(b.task, b.name, b.meta);
    });
    out << "task,metric,value,metadata_json\n";
    for (const auto& k : keyed) out << k.task << ',' << k.name << ',' << format_double(k.value) << ',' << quote(k.meta) << '\n';
    if (!out) throw IoError("failed writing metrics csv");
}

std::vector<MetricValue> read_metric_rows(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "task,metric,value,metadata_json")
        throw IoError("metrics csv: missing or unexpected header");
    std::vector<MetricValue> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_record(line, line_no);
        if (f.size() != 4) throw IoError("metrics csv line " + std::to_string(line_no) + ": expected 4 fields");
        MetricValue m;
        const auto task_end = f[0].data() + f[0].size();
        if (auto [p, ec] = std::from_chars(f[0].data(), task_end, m.task_index); ec != std::errc{} || p != task_end)
            throw IoError("metrics csv line " + std::to_string(line_no) + ": bad task index");
        try {
            m.name = parse_metric_name(f[1]);
        } catch (const ConfigError& e) {
            throw IoError("metrics csv line " + std::to_string(line_no) + ": " + e.what());
        }
        const auto val_end = f[2].data() + f[2].size();
        if (auto [p, ec] = std::from_chars(f[2].data(), val_end, m.value); ec != std::errc{} || p != val_end)
            throw IoError("metrics csv line " + std::to_string(line_no) + ": bad value");
        try {
            const auto j = nlohmann::json::parse(f[3]);
            for (const auto& [k, v] : j.items()) m.metadata[k] = v.get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw IoError("metrics csv line " + std::to_string(line_no) + ": bad metadata: " + e.what());
        }
        rows.push_back(std::move(m));
    }
    return rows;
}

} // namespace collapse
