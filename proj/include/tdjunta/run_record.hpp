#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tdj {

/// Time series of metrics keyed by the number of fresh samples consumed.
///
/// Every row carries one value per column; `samples` must increase strictly.
class RunRecord {
public:
    RunRecord() = default;
    explicit RunRecord(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    const std::vector<std::string>& columns() const noexcept { return columns_; }
    std::size_t column_index(const std::string& name) const;

    /// Throws std::invalid_argument on a width mismatch or non-increasing samples.
    void append(std::uint64_t samples, std::vector<double> values);

    struct Row {
        std::uint64_t samples = 0;
        std::vector<double> values;
        friend bool operator==(const Row&, const Row&) = default;
    };
    const std::vector<Row>& rows() const noexcept { return rows_; }
    bool empty() const noexcept { return rows_.empty(); }
    const Row& back() const { return rows_.back(); }
    double last(const std::string& column) const;

    /// Free-form `key: value` lines written as `#` comments above the header.
    std::vector<std::string> comments;

    /// CSV: comment lines, `samples,<columns...>`, one row per logging event.
    void write_csv(std::ostream& out) const;
    static RunRecord read_csv(std::istream& in);

    friend bool operator==(const RunRecord&, const RunRecord&) = default;

private:
    std::vector<std::string> columns_;
    std::vector<Row> rows_;
};

/// Default logging interval: max(1, total / 500).
std::uint64_t default_log_interval(std::uint64_t total_samples);

}  // namespace tdj
