#include "nlgranger/series.hpp"

#include "nlgranger/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace nlgranger {

namespace {

constexpr double kConstantTol = 1e-12;

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& field, std::size_t line_no) {
    if (field.empty())
        throw Error(ErrorCode::ParseError, "missing value on line " + std::to_string(line_no));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
        throw Error(ErrorCode::ParseError,
                    "bad value '" + field + "' on line " + std::to_string(line_no));
    return v;
}

} // namespace

MultivariateSeries::MultivariateSeries(Matrix v, std::vector<std::string> n)
    : values(std::move(v)), names(std::move(n)) {
    validate();
}

MultivariateSeries::MultivariateSeries(Matrix v) : values(std::move(v)) {
    names.reserve(static_cast<std::size_t>(values.cols()));
    for (Index j = 0; j < values.cols(); ++j) names.push_back("y" + std::to_string(j + 1));
    validate();
}

void MultivariateSeries::validate() const {
    if (values.rows() < 1 || values.cols() < 1)
        throw Error(ErrorCode::BadRange, "series must have at least one row and one column");
    if (static_cast<Index>(names.size()) != values.cols())
        throw Error(ErrorCode::DimensionMismatch, "names/columns count differ");
    if (!values.allFinite()) throw Error(ErrorCode::BadRange, "series contains non-finite values");
}

MultivariateSeries MultivariateSeries::slice(Index begin, Index count) const {
    if (begin < 0 || count < 1 || begin + count > length())
        throw Error(ErrorCode::BadRange, "slice out of bounds");
    return MultivariateSeries(values.middleRows(begin, count), names);
}

Matrix SupervisedSet::partition(Index j) const {
    const auto& cols = partition_map.at(static_cast<std::size_t>(j));
    Matrix out(inputs.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = inputs.col(cols[k]);
    return out;
}

SupervisedSet SupervisedSet::select_rows(const std::vector<Index>& rows) const {
    SupervisedSet out;
    out.lag = lag;
    out.partition_map = partition_map;
    out.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
    out.outputs.resize(static_cast<Index>(rows.size()), outputs.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.inputs.row(static_cast<Index>(r)) = inputs.row(rows[r]);
        out.outputs.row(static_cast<Index>(r)) = outputs.row(rows[r]);
    }
    return out;
}

NormStats standardize_fit(const MultivariateSeries& series, Index train_len) {
    if (train_len < 2 || train_len > series.length())
        throw Error(ErrorCode::BadRange, "train_len must lie in [2, n_total]");
    const auto window = series.values.topRows(train_len);
    NormStats stats;
    stats.mean = window.colwise().mean().transpose();
    stats.std.resize(series.dim());
    for (Index j = 0; j < series.dim(); ++j) {
        const double ss = (window.col(j).array() - stats.mean(j)).square().sum();
        stats.std(j) = std::sqrt(ss / static_cast<double>(train_len - 1));
        if (stats.std(j) < kConstantTol)
            throw Error(ErrorCode::ConstantSeries, "series '" + series.names[static_cast<std::size_t>(j)] +
                                                       "' is constant over the training window");
    }
    return stats;
}

Matrix standardize_apply(const Matrix& values, const NormStats& stats, Direction direction) {
    if (values.cols() != stats.mean.size() || values.cols() != stats.std.size())
        throw Error(ErrorCode::DimensionMismatch, "column count does not match normalization stats");
    Matrix out(values.rows(), values.cols());
    for (Index j = 0; j < values.cols(); ++j) {
        if (direction == Direction::Forward)
            out.col(j) = (values.col(j).array() - stats.mean(j)) / stats.std(j);
        else
            out.col(j) = values.col(j).array() * stats.std(j) + stats.mean(j);
    }
    return out;
}

MultivariateSeries standardize_apply(const MultivariateSeries& series, const NormStats& stats,
                                     Direction direction) {
    return MultivariateSeries(standardize_apply(series.values, stats, direction), series.names);
}

std::vector<std::vector<Index>> make_partition_map(Index m, int lag) {
    std::vector<std::vector<Index>> map(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j)
        for (int k = 0; k < lag; ++k) map[static_cast<std::size_t>(j)].push_back(j * lag + k);
    return map;
}

Matrix embed_inputs(const Matrix& values, int lag, Index first_target, Index count) {
    if (lag < 1) throw Error(ErrorCode::BadRange, "lag must be positive");
    if (first_target < lag || first_target + count > values.rows() + 1)
        throw Error(ErrorCode::SeriesTooShort, "not enough history for the requested targets");
    const Index m = values.cols();
    Matrix inputs(count, m * lag);
    for (Index t = 0; t < count; ++t)
        for (Index j = 0; j < m; ++j)
            for (int k = 0; k < lag; ++k)
                inputs(t, j * lag + k) = values(first_target + t - 1 - k, j);
    return inputs;
}

SupervisedSet lag_embed(const MultivariateSeries& series, int lag) {
    if (lag < 1) throw Error(ErrorCode::BadRange, "lag must be positive");
    if (series.length() <= lag)
        throw Error(ErrorCode::SeriesTooShort, "series length must exceed the lag");
    const Index n = series.length() - lag;
    SupervisedSet set;
    set.lag = lag;
    set.inputs = embed_inputs(series.values, lag, lag, n);
    set.outputs = series.values.bottomRows(n);
    set.partition_map = make_partition_map(series.dim(), lag);
    return set;
}

MultivariateSeries read_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> names;
    while (names.empty() && std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        names = split_commas(line);
    }
    if (names.empty()) throw Error(ErrorCode::ParseError, "empty CSV");
    std::vector<double> flat;
    Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_commas(line);
        if (fields.size() != names.size())
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + " has " +
                                                   std::to_string(fields.size()) + " fields, expected " +
                                                   std::to_string(names.size()));
        for (const auto& f : fields) flat.push_back(parse_number(f, line_no));
        ++rows;
    }
    if (rows == 0) throw Error(ErrorCode::ParseError, "CSV has a header but no data rows");
    const auto m = static_cast<Index>(names.size());
    Matrix values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), rows, m);
    return MultivariateSeries(std::move(values), std::move(names));
}

MultivariateSeries read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    return read_csv(in);
}

void write_csv(std::ostream& out, const MultivariateSeries& series) {
    for (std::size_t j = 0; j < series.names.size(); ++j) out << (j ? "," : "") << series.names[j];
    out << '\n' << std::setprecision(17);
    for (Index t = 0; t < series.length(); ++t) {
        for (Index j = 0; j < series.dim(); ++j) out << (j ? "," : "") << series.values(t, j);
        out << '\n';
    }
}

void write_csv(const std::string& path, const MultivariateSeries& series) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    write_csv(out, series);
}

} // namespace nlgranger
