#include "iwkrr/csv.hpp"

#include "iwkrr/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace iwkrr {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, const std::string& source, std::size_t row, std::size_t col) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    if (!cell.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw InputError(source + ": row " + std::to_string(row) + ", column " + std::to_string(col) +
                         ": '" + cell + "' is not a finite number");
    }
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<double>> parse_table(const std::string& text, const std::string& source,
                                             std::vector<std::string>& header) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    header.clear();
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (header.empty()) {
            if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
                cells.front() = trim(cells.front().substr(3));
            header = std::move(cells);
            continue;
        }
        if (cells.size() != header.size()) {
            throw InputError(source + ": row " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(header.size()));
        }
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) row[c] = parse_cell(cells[c], source, lineno, c + 1);
        rows.push_back(std::move(row));
    }
    if (header.empty()) throw InputError(source + ": missing header row");
    return rows;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

SampleSet parse_samples_csv(const std::string& text, bool require_target, const std::string& source) {
    std::vector<std::string> header;
    const auto rows = parse_table(text, source, header);
    const bool has_y = header.back() == "y";
    if (require_target && !has_y) throw InputError(source + ": expected a target column named 'y'");
    const std::size_t d = header.size() - (has_y ? 1 : 0);
    if (d == 0) throw InputError(source + ": no feature columns");
    if (rows.empty()) throw InputError(source + ": no data rows");

    SampleSet s;
    s.X.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
    if (has_y) s.y = Vector(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < d; ++k) s.X(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
        if (has_y) (*s.y)[static_cast<Index>(i)] = rows[i][d];
    }
    return s;
}

SampleSet read_samples_csv(const std::filesystem::path& path, bool require_target) {
    return parse_samples_csv(read_file(path), require_target, path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples) {
    std::string text;
    for (Index k = 0; k < samples.dim(); ++k) text += (k ? ",x" : "x") + std::to_string(k + 1);
    if (samples.labeled()) text += ",y";
    text += '\n';
    for (Index i = 0; i < samples.size(); ++i) {
        for (Index k = 0; k < samples.dim(); ++k) {
            if (k) text += ',';
            text += format_double(samples.X(i, k));
        }
        if (samples.labeled()) text += ',' + format_double((*samples.y)[i]);
        text += '\n';
    }
    write_text_file(path, text);
}

Vector read_weights_csv(const std::filesystem::path& path) {
    std::vector<std::string> header;
    const auto rows = parse_table(read_file(path), path.string(), header);
    std::size_t col = header.size();
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == "w") col = c;
    if (col == header.size()) throw InputError(path.string() + ": expected a weight column named 'w'");
    Vector w(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        w[static_cast<Index>(i)] = rows[i][col];
        if (rows[i][col] < 0.0)
            throw InputError(path.string() + ": row " + std::to_string(i + 2) + ": negative weight");
    }
    return w;
}

void write_weights_csv(const std::filesystem::path& path, VectorRef w) {
    std::string text = "w\n";
    for (Index i = 0; i < w.size(); ++i) text += format_double(w[i]) + '\n';
    write_text_file(path, text);
}

} // namespace iwkrr
