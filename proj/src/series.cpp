#include "coca/series.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace coca {

void TimeSeriesObject::validate() const {
    require(values.cols() >= 1, "object '" + id + "': channel count must be >= 1");
    require(static_cast<int>(labels.size()) == length(),
            "object '" + id + "': labels.length != values.length");
    require(train_end > 0 && train_end < length(),
            "object '" + id + "': train_end must satisfy 0 < train_end < length");
    for (std::uint8_t l : labels)
        require(l == 0 || l == 1, "object '" + id + "': labels must be 0 or 1");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

TimeSeriesObject load_csv(const std::string& path, const CsvSchema& schema) {
    require(!schema.value_columns.empty(), "schema must name at least one value column");

    std::ifstream in(path);
    ensure(in.good(), "cannot open '" + path + "'");

    std::string line;
    ensure(static_cast<bool>(std::getline(in, line)), "'" + path + "': empty file");
    const std::vector<std::string> header = split_csv_line(strip_cr(line));

    auto column_index = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };

    std::vector<int> value_idx;
    for (const std::string& name : schema.value_columns) {
        const int idx = column_index(name);
        ensure(idx >= 0, "'" + path + "': value column '" + name + "' not found in header");
        value_idx.push_back(idx);
    }
    const int label_idx = schema.label_column.empty() ? -1 : column_index(schema.label_column);

    std::vector<std::vector<double>> rows;
    std::vector<std::uint8_t> labels;
    int line_no = 1;  // header was line 1
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        ensure(fields.size() == header.size(),
               "'" + path + "': line " + std::to_string(line_no) + " has " +
                   std::to_string(fields.size()) + " columns, header has " +
                   std::to_string(header.size()));
        std::vector<double> row;
        row.reserve(value_idx.size());
        for (int idx : value_idx) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(fields[static_cast<std::size_t>(idx)], &pos);
                ensure(pos == fields[static_cast<std::size_t>(idx)].size(), "trailing junk");
                row.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error("'" + path + "': parse error at line " +
                                         std::to_string(line_no) + ", column '" +
                                         header[static_cast<std::size_t>(idx)] +
                                         "': not a number");
            }
        }
        if (label_idx >= 0) {
            const std::string& cell = fields[static_cast<std::size_t>(label_idx)];
            ensure(cell == "0" || cell == "1",
                   "'" + path + "': parse error at line " + std::to_string(line_no) +
                       ": label must be exactly \"0\" or \"1\", got \"" + cell + "\"");
            labels.push_back(cell == "1" ? 1 : 0);
        }
        rows.push_back(std::move(row));
    }
    ensure(!rows.empty(), "'" + path + "': no data rows");

    TimeSeriesObject ts;
    ts.id = path;
    const int n = static_cast<int>(rows.size());
    const int d = static_cast<int>(value_idx.size());
    ts.values.resize(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) ts.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (label_idx >= 0) {
        ts.labels = std::move(labels);
    } else {
        ts.labels.assign(static_cast<std::size_t>(n), 0);
        ts.labels_absent = true;
    }
    ts.train_end = schema.train_end >= 0
                       ? schema.train_end
                       : static_cast<int>(schema.train_fraction * n);
    ts.validate();
    return ts;
}

void save_csv(const std::string& path, const TimeSeriesObject& ts) {
    std::ofstream out(path);
    ensure(out.good(), "cannot write '" + path + "'");
    out.precision(17);
    for (int j = 0; j < ts.channels(); ++j) out << "v" << (j + 1) << ",";
    out << "label\n";
    for (int t = 0; t < ts.length(); ++t) {
        for (int j = 0; j < ts.channels(); ++j) out << ts.values(t, j) << ",";
        out << static_cast<int>(ts.labels[static_cast<std::size_t>(t)]) << "\n";
    }
    ensure(out.good(), "write failed for '" + path + "'");
}

NormStats fit_normalizer(const TimeSeriesObject& ts) {
    require(ts.train_end >= 2, "fit_normalizer: train_end must be >= 2");
    const auto train = ts.values.topRows(ts.train_end);
    NormStats stats;
    stats.mean = train.colwise().mean();
    const int d = ts.channels();
    stats.std.resize(d);
    for (int j = 0; j < d; ++j) {
        const double var = (train.col(j).array() - stats.mean(j)).square().mean();
        double sd = std::sqrt(var);
        if (sd < 1e-8) sd = 1.0;  // degenerate-channel guard
        stats.std(j) = sd;
    }
    return stats;
}

TimeSeriesObject normalize(const TimeSeriesObject& ts, const NormStats& stats) {
    require(stats.mean.size() == ts.channels() && stats.std.size() == ts.channels(),
            "normalize: stats dimensionality does not match channel count");
    TimeSeriesObject out = ts;
    out.values = (ts.values.rowwise() - stats.mean.transpose()).array().rowwise() /
                 stats.std.transpose().array();
    return out;
}

WindowBatch make_windows(const TimeSeriesObject& ts, int window_length, Split split) {
    require(window_length >= 2, "make_windows: window length must be >= 2");
    ts.validate();
    const int begin = split == Split::Train ? 0 : ts.train_end;
    const int end = split == Split::Train ? ts.train_end : ts.length();
    const int span = end - begin;
    require(span >= window_length,
            "make_windows: " + std::string(split == Split::Train ? "train" : "test") +
                " split of object '" + ts.id + "' has " + std::to_string(span) +
                " points, fewer than one window of " + std::to_string(window_length));

    const int n = span / window_length;
    const int d = ts.channels();
    WindowBatch batch;
    batch.object_id = ts.id;
    batch.window_length = window_length;
    batch.values.resize(d, n * window_length);
    batch.window_labels.resize(static_cast<std::size_t>(n));
    batch.spans.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int s = begin + i * window_length;
        batch.spans[static_cast<std::size_t>(i)] = {s, s + window_length};
        std::uint8_t lab = 0;
        for (int t = 0; t < window_length; ++t) {
            lab |= ts.labels[static_cast<std::size_t>(s + t)];
            batch.values.col(i * window_length + t) = ts.values.row(s + t).transpose();
        }
        batch.window_labels[static_cast<std::size_t>(i)] = lab;
    }
    return batch;
}

Labels covered_labels(const TimeSeriesObject& ts, const WindowBatch& batch) {
    require(!batch.spans.empty(), "covered_labels: empty batch");
    const int begin = batch.spans.front().start;
    const int end = batch.spans.back().end;
    Labels out(static_cast<std::size_t>(end - begin));
    for (int t = begin; t < end; ++t) out[static_cast<std::size_t>(t - begin)] = ts.labels[static_cast<std::size_t>(t)];
    return out;
}

}  // namespace coca
