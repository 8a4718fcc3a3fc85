#include "collapse/distributions.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace collapse {

Dataset Dataset::unlabeled(Matrix points) {
    Dataset d;
    d.points = std::move(points);
    d.validate();
    return d;
}

Dataset Dataset::labeled(Matrix points, std::vector<int> labels, std::size_t class_count) {
    Dataset d;
    d.points = std::move(points);
    d.labels = std::move(labels);
    d.class_count = class_count;
    d.validate();
    return d;
}

void Dataset::validate() const {
    if (points.rows() == 0) throw ContractError("Dataset: must hold at least one point");
    if (points.cols() == 0) throw ContractError("Dataset: zero-dimensional points");
    if (labels.has_value() != class_count.has_value())
        throw ContractError("Dataset: labels and class_count must be set together");
    if (!labels) return;
    if (*class_count < 1) throw ContractError("Dataset: class_count must be >= 1");
    if (labels->size() != points.rows())
        throw ContractError("Dataset: " + std::to_string(labels->size()) + " labels for " +
                            std::to_string(points.rows()) + " points");
    for (int y : *labels)
        if (y < 0 || static_cast<std::size_t>(y) >= *class_count)
            throw ContractError("Dataset: label " + std::to_string(y) + " outside [0, " +
                                std::to_string(*class_count) + ")");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.points = Matrix(indices.size(), dim());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = points.row(indices[i]);
        std::copy(src.begin(), src.end(), out.points.row(i).begin());
    }
    if (labels) {
        std::vector<int> l(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) l[i] = (*labels)[indices[i]];
        out.labels = std::move(l);
        out.class_count = class_count;
    }
    return out;
}

Dataset Dataset::filter_classes(std::span<const int> classes) const {
    if (!labels) throw ContractError("Dataset::filter_classes: dataset is unlabeled");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < size(); ++i)
        if (std::find(classes.begin(), classes.end(), (*labels)[i]) != classes.end()) keep.push_back(i);
    return subset(keep);
}

std::vector<std::size_t> Dataset::class_counts() const {
    if (!labels) throw ContractError("Dataset::class_counts: dataset is unlabeled");
    std::vector<std::size_t> counts(*class_count, 0);
    for (int y : *labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.dim() != b.dim()) throw DimensionError("concat: dimension mismatch");
    if (a.is_labeled() != b.is_labeled()) throw ContractError("concat: cannot mix labeled and unlabeled data");
    std::vector<double> data(a.points.values().begin(), a.points.values().end());
    data.insert(data.end(), b.points.values().begin(), b.points.values().end());
    Dataset out;
    out.points = Matrix(a.size() + b.size(), a.dim(), std::move(data));
    if (a.labels) {
        std::vector<int> l = *a.labels;
        l.insert(l.end(), b.labels->begin(), b.labels->end());
        out.labels = std::move(l);
        out.class_count = std::max(*a.class_count, *b.class_count);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (ec != std::errc{}) throw IoError("format_double: conversion failed");
    return std::string(buf, end);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
    out << "label\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.points.row(i)) out << format_double(v) << ',';
        out << (data.labels ? (*data.labels)[i] : -1) << '\n';
    }
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    write_dataset_csv(f, data);
    if (!f) throw IoError("write failed: " + path);
}

namespace {

double parse_double(std::string_view field, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw IoError("dataset csv line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
    return v;
}

std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace

Dataset read_dataset_csv(std::istream& in, std::optional<std::size_t> class_count) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("dataset csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_commas(line);
    if (header.size() < 2 || header.back() != "label") throw IoError("dataset csv: header must end with 'label'");
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j)
        if (header[j] != "x" + std::to_string(j)) throw IoError("dataset csv: unexpected column '" +
                                                               std::string(header[j]) + "'");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() != d + 1)
            throw IoError("dataset csv line " + std::to_string(line_no) + ": expected " + std::to_string(d + 1) +
                          " fields");
        for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(fields[j], line_no));
        int y = 0;
        auto [ptr, ec] = std::from_chars(fields[d].data(), fields[d].data() + fields[d].size(), y);
        if (ec != std::errc{} || ptr != fields[d].data() + fields[d].size())
            throw IoError("dataset csv line " + std::to_string(line_no) + ": bad label");
        labels.push_back(y);
    }
    if (labels.empty()) throw IoError("dataset csv: no rows");

    const std::size_t n = labels.size();
    Matrix points(n, d, std::move(values));
    const bool any_labeled = std::any_of(labels.begin(), labels.end(), [](int y) { return y >= 0; });
    if (!any_labeled) return Dataset::unlabeled(std::move(points));
    if (std::any_of(labels.begin(), labels.end(), [](int y) { return y < 0; }))
        throw IoError("dataset csv: mixes labeled and unlabeled rows");
    const std::size_t k = class_count.value_or(static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1);
    return Dataset::labeled(std::move(points), std::move(labels), k);
}

Dataset read_dataset_csv(const std::string& path, std::optional<std::size_t> class_count) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    return read_dataset_csv(f, class_count);
}

} // namespace collapse
