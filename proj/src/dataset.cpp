#include "isle/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace isle {

Dataset::Dataset(RowMatrix features, Eigen::VectorXd response,
                 std::vector<std::string> feature_names, std::string response_name)
    : features_(std::move(features)),
      response_(std::move(response)),
      feature_names_(std::move(feature_names)),
      response_name_(std::move(response_name)) {
    if (features_.rows() != response_.size()) {
        throw std::invalid_argument("Dataset: response length " + std::to_string(response_.size()) +
                                    " does not match row count " +
                                    std::to_string(features_.rows()));
    }
    if (features_.cols() < 1) throw std::invalid_argument("Dataset: need at least one feature");
    if (features_.rows() < 2) throw std::invalid_argument("Dataset: need at least two rows");
    if (feature_names_.empty()) {
        for (Eigen::Index j = 0; j < features_.cols(); ++j) {
            feature_names_.push_back("x" + std::to_string(j));
        }
    }
    if (feature_names_.size() != n_features()) {
        throw std::invalid_argument("Dataset: feature name count does not match column count");
    }
    if (!features_.allFinite() || !response_.allFinite()) {
        throw std::invalid_argument("Dataset: all values must be finite");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    RowMatrix x(static_cast<Eigen::Index>(rows.size()), features_.cols());
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= n_rows()) throw std::out_of_range("Dataset::subset: row index out of range");
        x.row(static_cast<Eigen::Index>(i)) = features_.row(static_cast<Eigen::Index>(rows[i]));
        y(static_cast<Eigen::Index>(i)) = response_(static_cast<Eigen::Index>(rows[i]));
    }
    return Dataset(std::move(x), std::move(y), feature_names_, response_name_);
}

Dataset Dataset::with_response(Eigen::VectorXd response) const {
    return Dataset(features_, std::move(response), feature_names_, response_name_);
}

Eigen::VectorXd Dataset::response_at(std::span<const std::size_t> rows) const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = response_(static_cast<Eigen::Index>(rows[i]));
    return y;
}

IndexList all_rows(std::size_t n) {
    IndexList rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

namespace {

// One CSV record; quoted fields may contain commas, doubled quotes and newlines.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            ++line_no;
            break;
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (!any) return false;
    if (in_quotes) throw DataError("unterminated quoted field near line " + std::to_string(line_no));
    fields.push_back(std::move(field));
    return true;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

bool parse_real(std::string_view text, double& out) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

bool is_blank(const std::vector<std::string>& fields) {
    return fields.size() == 1 && trim(fields.front()).empty();
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& target_column, bool header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    if (in.peek() == 0xEF) {
        char bom[3];
        in.read(bom, 3);
        if (!(bom[0] == '\xEF' && bom[1] == '\xBB' && bom[2] == '\xBF')) in.seekg(0);
    }

    std::vector<std::string> fields;
    std::vector<std::string> names;
    std::size_t line_no = 1;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> row_lines;

    if (header) {
        if (!read_record(in, fields, line_no)) throw DataError("'" + path.string() + "' is empty");
        for (auto& f : fields) names.emplace_back(trim(f));
    }
    while (true) {
        const std::size_t record_line = line_no;
        if (!read_record(in, fields, line_no)) break;
        if (is_blank(fields)) continue;
        if (names.empty()) {
            for (std::size_t j = 0; j < fields.size(); ++j) names.push_back("c" + std::to_string(j));
        }
        if (fields.size() != names.size()) {
            throw DataError("line " + std::to_string(record_line) + ": expected " +
                            std::to_string(names.size()) + " fields, found " +
                            std::to_string(fields.size()));
        }
        std::vector<double> values(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (!parse_real(fields[j], values[j])) {
                throw DataError("row " + std::to_string(rows.size() + 1) + " (line " +
                                std::to_string(record_line) + "), column '" + names[j] +
                                "': cannot parse '" + fields[j] + "' as a finite real");
            }
        }
        rows.push_back(std::move(values));
        row_lines.push_back(record_line);
    }

    auto target = std::find(names.begin(), names.end(), target_column);
    if (target == names.end() && !header) {
        std::size_t idx = 0;
        auto [ptr, ec] = std::from_chars(target_column.data(),
                                         target_column.data() + target_column.size(), idx);
        if (ec == std::errc() && ptr == target_column.data() + target_column.size() &&
            idx < names.size()) {
            target = names.begin() + static_cast<std::ptrdiff_t>(idx);
        }
    }
    if (target == names.end()) {
        throw DataError("target column '" + target_column + "' not found in '" + path.string() + "'");
    }
    if (names.size() < 2) throw DataError("'" + path.string() + "' has no feature columns");
    if (rows.size() < 2) {
        throw DataError("'" + path.string() + "' has " + std::to_string(rows.size()) +
                        " data rows; at least 2 are required");
    }

    const std::size_t target_idx = static_cast<std::size_t>(target - names.begin());
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(names.size() - 1);
    RowMatrix x(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& values = rows[static_cast<std::size_t>(i)];
        Eigen::Index col = 0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (j == target_idx) {
                y(i) = values[j];
            } else {
                x(i, col++) = values[j];
            }
        }
    }
    std::vector<std::string> feature_names;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (j != target_idx) feature_names.push_back(names[j]);
    }
    return Dataset(std::move(x), std::move(y), std::move(feature_names), names[target_idx]);
}

namespace {

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

void save_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << std::setprecision(17);
    for (const auto& name : data.feature_names()) out << quote_if_needed(name) << ',';
    out << quote_if_needed(data.response_name()) << '\n';
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t j = 0; j < data.n_features(); ++j) out << data.feature(i, j) << ',';
        out << data.response(i) << '\n';
    }
}

SplitIndices shuffle_split(std::size_t n, double test_fraction, Rng& rng) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("shuffle_split: test_fraction must lie in (0, 1)");
    }
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    if (n < 2 || n_test < 1 || n - n_test < 2) {
        throw std::invalid_argument("shuffle_split: n=" + std::to_string(n) + " with test_fraction " +
                                    std::to_string(test_fraction) + " gives a degenerate split");
    }
    auto perm = rng.permutation(n);
    SplitIndices split;
    split.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

std::vector<SplitIndices> kfold_indices(std::size_t n, std::size_t k, Rng& rng) {
    if (k < 2 || k > n) {
        throw std::invalid_argument("kfold_indices: k=" + std::to_string(k) + " outside [2, " +
                                    std::to_string(n) + "]");
    }
    const auto perm = rng.permutation(n);
    std::vector<std::size_t> fold_of(n);
    std::vector<SplitIndices> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i) fold_of[perm[pos++]] = f;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < k; ++f) {
            (fold_of[i] == f ? folds[f].test : folds[f].train).push_back(i);
        }
    }
    return folds;
}

ThreeWaySizes three_way_sizes(std::size_t n) {
    const std::size_t n1 = (n + 1) / 2;
    const std::size_t n2 = (n - n1 + 1) / 2;
    return {n1, n2, n - n1 - n2};
}

ThreeWaySplit three_way_split(std::size_t n, Rng& rng) {
    const auto sizes = three_way_sizes(n);
    if (sizes.n1 < 2 || sizes.n2 < 2 || sizes.n3 < 2) {
        throw std::invalid_argument("three_way_split: n=" + std::to_string(n) +
                                    " cannot give every part at least 2 elements");
    }
    const auto perm = rng.permutation(n);
    const auto b = perm.begin();
    const auto c1 = static_cast<std::ptrdiff_t>(sizes.n1);
    const auto c2 = static_cast<std::ptrdiff_t>(sizes.n1 + sizes.n2);
    return {IndexList(b, b + c1), IndexList(b + c1, b + c2), IndexList(b + c2, perm.end())};
}

IndexList take(std::span<const std::size_t> rows, std::span<const std::size_t> positions) {
    IndexList out;
    out.reserve(positions.size());
    for (auto p : positions) out.push_back(rows[p]);
    return out;
}

}  // namespace isle
