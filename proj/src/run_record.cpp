#include "tdjunta/run_record.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tdjunta/format.hpp"

namespace tdj {

std::size_t RunRecord::column_index(const std::string& name) const {
    const auto it = std::find(columns_.begin(), columns_.end(), name);
    if (it == columns_.end()) throw std::out_of_range("RunRecord: no column '" + name + "'");
    return static_cast<std::size_t>(it - columns_.begin());
}

void RunRecord::append(std::uint64_t samples, std::vector<double> values) {
    if (values.size() != columns_.size()) throw std::invalid_argument("RunRecord::append: width mismatch");
    if (!rows_.empty() && samples <= rows_.back().samples) {
        throw std::invalid_argument("RunRecord::append: samples must increase strictly");
    }
    rows_.push_back({samples, std::move(values)});
}

double RunRecord::last(const std::string& column) const {
    if (rows_.empty()) throw std::out_of_range("RunRecord::last: no rows");
    return rows_.back().values[column_index(column)];
}

void RunRecord::write_csv(std::ostream& out) const {
    for (const auto& c : comments) out << "# " << c << "\n";
    out << "samples";
    for (const auto& c : columns_) out << ',' << c;
    out << "\n";
    for (const auto& row : rows_) {
        out << row.samples;
        for (double v : row.values) out << ',' << format_double(v);
        out << "\n";
    }
}

RunRecord RunRecord::read_csv(std::istream& in) {
    RunRecord rec;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            rec.comments.push_back(line.substr(2));
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.empty()) continue;
        if (!header) {
            if (cells.front() != "samples") throw std::runtime_error("RunRecord::read_csv: missing header");
            rec.columns_.assign(cells.begin() + 1, cells.end());
            header = true;
            continue;
        }
        std::vector<double> values;
        for (std::size_t i = 1; i < cells.size(); ++i) values.push_back(parse_double(cells[i]));
        rec.append(std::stoull(cells.front()), std::move(values));
    }
    if (!header) throw std::runtime_error("RunRecord::read_csv: empty input");
    return rec;
}

std::uint64_t default_log_interval(std::uint64_t total_samples) {
    return std::max<std::uint64_t>(1, total_samples / 500);
}

}  // namespace tdj
