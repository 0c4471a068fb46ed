#include "cmi/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cmi/error.hpp"

namespace cmi {

Dataset::Dataset(Dimensions dims, Eigen::MatrixXd samples) : dims_(dims), samples_(std::move(samples)) {
    if (dims_.dx == 0 || dims_.dy == 0 || dims_.dz == 0)
        throw InputError("dataset dimensions must be positive");
    if (static_cast<std::size_t>(samples_.rows()) != dims_.total())
        throw InputError("dataset matrix has " + std::to_string(samples_.rows()) + " rows, expected " +
                         std::to_string(dims_.total()));
    if (!samples_.allFinite()) throw InputError("dataset contains non-finite values");
}

Dataset Dataset::with_size(Dimensions dims, std::size_t n) {
    Dataset d;
    d.dims_ = dims;
    d.samples_.resize(static_cast<Eigen::Index>(dims.total()), static_cast<Eigen::Index>(n));
    return d;
}

void Dataset::set(std::size_t i, std::span<const double> x, std::span<const double> y, std::span<const double> z) {
    if (x.size() != dims_.dx || y.size() != dims_.dy || z.size() != dims_.dz)
        throw InputError("triple dimensions do not match dataset");
    double* col = samples_.col(static_cast<Eigen::Index>(i)).data();
    std::copy(x.begin(), x.end(), col);
    std::copy(y.begin(), y.end(), col + dims_.dx);
    std::copy(z.begin(), z.end(), col + dims_.dx + dims_.dy);
}

std::span<const double> Dataset::part(std::size_t i, std::size_t offset, std::size_t len) const {
    return {samples_.col(static_cast<Eigen::Index>(i)).data() + offset, len};
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out = with_size(dims_, indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (indices[j] >= size()) throw InputError("subset index out of range");
        out.samples_.col(static_cast<Eigen::Index>(j)) = samples_.col(static_cast<Eigen::Index>(indices[j]));
    }
    return out;
}

namespace {

void append_number(std::string& line, double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    line.append(buf, end);
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

// Parses "<prefix>_<index>" and checks the index is the next expected one.
bool column_matches(const std::string& name, char prefix, std::size_t expected) {
    if (name.size() < 3 || name[0] != prefix || name[1] != '_') return false;
    std::size_t idx = 0;
    auto [p, ec] = std::from_chars(name.data() + 2, name.data() + name.size(), idx);
    return ec == std::errc{} && p == name.data() + name.size() && idx == expected;
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& data) {
    const auto& d = data.dims();
    std::string line;
    auto header = [&](char prefix, std::size_t count) {
        for (std::size_t j = 0; j < count; ++j) {
            if (!line.empty()) line += ',';
            line += prefix;
            line += '_';
            line += std::to_string(j);
        }
    };
    header('x', d.dx);
    header('y', d.dy);
    header('z', d.dz);
    out << line << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        line.clear();
        auto f = data.features(i);
        for (std::size_t j = 0; j < f.size(); ++j) {
            if (j) line += ',';
            append_number(line, f[j]);
        }
        out << line << '\n';
    }
}

void write_csv_file(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    write_csv(out, data);
}

Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("CSV is empty");
    const auto names = split_line(line);

    Dimensions dims{0, 0, 0};
    std::size_t col = 0;
    for (auto [prefix, count] : {std::pair{'x', &dims.dx}, std::pair{'y', &dims.dy}, std::pair{'z', &dims.dz}}) {
        while (col < names.size() && column_matches(names[col], prefix, *count)) {
            ++*count;
            ++col;
        }
    }
    if (col != names.size() || dims.dx == 0 || dims.dy == 0 || dims.dz == 0)
        throw InputError("CSV header must be x_0..x_{dx-1},y_0..y_{dy-1},z_0..z_{dz-1}; got '" + line + "'");

    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != dims.total())
            throw InputError("CSV row " + std::to_string(rows + 1) + " has " + std::to_string(cells.size()) +
                             " cells, expected " + std::to_string(dims.total()));
        for (const auto& cell : cells) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || p != cell.data() + cell.size() || !std::isfinite(v))
                throw InputError("CSV row " + std::to_string(rows + 1) + ": bad value '" + cell + "'");
            values.push_back(v);
        }
        ++rows;
    }
    Eigen::MatrixXd m = Eigen::Map<Eigen::MatrixXd>(values.data(), static_cast<Eigen::Index>(dims.total()),
                                                    static_cast<Eigen::Index>(rows));
    return Dataset(dims, std::move(m));
}

Dataset read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_csv(in);
}

}  // namespace cmi
