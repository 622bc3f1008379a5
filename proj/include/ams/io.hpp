#ifndef AMS_IO_HPP
#define AMS_IO_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ams/autoencoder.hpp"
#include "ams/dataset.hpp"
#include "ams/errors.hpp"
#include "ams/matrix.hpp"
#include "ams/projection.hpp"
#include "ams/prototypes.hpp"

namespace ams {

namespace detail {

inline std::string quoted_path(const std::filesystem::path &path) {
    return "\"" + path.string() + "\"";
}

inline std::ofstream open_output(const std::filesystem::path &path,
                                 std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, mode);
    if (!out) {
        throw ingestion_error("cannot write " + quoted_path(path));
    }
    return out;
}

inline std::ifstream open_input(const std::filesystem::path &path,
                                std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) {
        throw ingestion_error("cannot open " + quoted_path(path));
    }
    return in;
}

template <typename T> void put_le(std::ostream &out, T value) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream &in, const std::filesystem::path &path) {
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), bytes.size())) {
        throw ingestion_error("truncated file " + quoted_path(path));
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    return std::bit_cast<T>(bytes);
}

inline void put_magic(std::ostream &out, std::string_view magic) {
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream &in, std::string_view magic,
                         const std::filesystem::path &path,
                         std::string_view kind) {
    std::array<char, 4> got{};
    if (!in.read(got.data(), got.size()) ||
        std::string_view(got.data(), got.size()) != magic) {
        throw ingestion_error(std::string(kind) + " file " +
                              quoted_path(path) + " does not start with the " +
                              std::string(magic) + " magic bytes");
    }
}

/// %.17g rendering, enough digits to round-trip any double exactly.
inline std::string format_double(double value) {
    std::array<char, 40> buf{};
    const int len = std::snprintf(buf.data(), buf.size(), "%.17g", value);
    return std::string(buf.data(), static_cast<std::size_t>(len));
}

inline std::string_view trim(std::string_view text) {
    const auto *ws = " \t\r\n";
    const auto begin = text.find_first_not_of(ws);
    if (begin == std::string_view::npos) {
        return {};
    }
    const auto end = text.find_last_not_of(ws);
    return text.substr(begin, end - begin + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

inline double parse_double(std::string_view token,
                           const std::filesystem::path &path,
                           std::size_t line_no) {
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw ingestion_error("unparsable numeric value \"" +
                              std::string(token) + "\" at line " +
                              std::to_string(line_no) + " of " +
                              quoted_path(path));
    }
    return value;
}

inline std::int64_t parse_int(std::string_view token,
                              const std::filesystem::path &path,
                              std::size_t line_no) {
    std::int64_t value = 0;
    const auto [ptr, ec] =
        std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw ingestion_error("unparsable integer \"" + std::string(token) +
                              "\" at line " + std::to_string(line_no) +
                              " of " + quoted_path(path));
    }
    return value;
}

inline void require_finite(const Matrix &m, const std::filesystem::path &path) {
    if (!m.all_finite()) {
        throw numerical_error("non-finite value in " + quoted_path(path));
    }
}

} // namespace detail

inline constexpr std::string_view k_matrix_magic = "AMSM";
inline constexpr std::string_view k_checkpoint_magic = "AMSF";
inline constexpr std::uint32_t k_checkpoint_version = 1;

/** Writes a dense matrix in the AMSM binary layout: the magic bytes, row and
 * column counts as little-endian u32, then row-major IEEE f64 values. */
inline void write_matrix_binary(const std::filesystem::path &path,
                                const Matrix &m) {
    auto out = detail::open_output(path, std::ios::binary);
    detail::put_magic(out, k_matrix_magic);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    for (std::size_t i = 0; i < m.size(); ++i) {
        detail::put_le<double>(out, m.data()[i]);
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

inline Matrix read_matrix_binary(const std::filesystem::path &path) {
    auto in = detail::open_input(path, std::ios::binary);
    detail::expect_magic(in, k_matrix_magic, path, "matrix");
    const auto rows = detail::get_le<std::uint32_t>(in, path);
    const auto cols = detail::get_le<std::uint32_t>(in, path);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.data()[i] = detail::get_le<double>(in, path);
    }
    char extra = 0;
    if (in.read(&extra, 1)) {
        throw ingestion_error("trailing bytes after the " +
                              std::to_string(rows) + "x" +
                              std::to_string(cols) + " payload of " +
                              detail::quoted_path(path));
    }
    detail::require_finite(m, path);
    return m;
}

/** Writes a matrix as headered CSV. Values are rendered with %.17g so a
 * read-back reproduces every double bit-exactly. */
inline void write_matrix_csv(const std::filesystem::path &path, const Matrix &m,
                             const std::string &column_prefix = "c") {
    auto out = detail::open_output(path);
    for (std::size_t c = 0; c < m.cols(); ++c) {
        out << (c == 0 ? "" : ",") << column_prefix << c;
    }
    out << "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out << (c == 0 ? "" : ",") << detail::format_double(row[c]);
        }
        out << "\n";
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

inline Matrix read_matrix_csv(const std::filesystem::path &path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) {
        throw ingestion_error("empty CSV file " + detail::quoted_path(path));
    }
    const std::size_t cols = detail::split_fields(line).size();
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (fields.size() != cols) {
            throw ingestion_error("line " + std::to_string(line_no) + " of " +
                                  detail::quoted_path(path) + " has " +
                                  std::to_string(fields.size()) +
                                  " fields, header promises " +
                                  std::to_string(cols));
        }
        for (const auto field : fields) {
            values.push_back(detail::parse_double(field, path, line_no));
        }
        ++rows;
    }
    Matrix m(rows, cols, std::move(values));
    detail::require_finite(m, path);
    return m;
}

/** Reads a feature/matrix file, detecting the AMSM binary layout by its
 * magic bytes and falling back to CSV otherwise. */
inline Matrix read_matrix_auto(const std::filesystem::path &path) {
    {
        auto in = detail::open_input(path, std::ios::binary);
        std::array<char, 4> head{};
        in.read(head.data(), head.size());
        if (in.gcount() == 4 &&
            std::string_view(head.data(), 4) == k_matrix_magic) {
            in.close();
            return read_matrix_binary(path);
        }
    }
    return read_matrix_csv(path);
}

/** Writes class labels, one integer per line. */
inline void write_labels(const std::filesystem::path &path,
                         std::span<const ClassId> labels) {
    auto out = detail::open_output(path);
    for (const ClassId label : labels) {
        out << label << "\n";
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

inline std::vector<ClassId> read_labels(const std::filesystem::path &path) {
    auto in = detail::open_input(path);
    std::vector<ClassId> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto token = detail::trim(line);
        if (token.empty()) {
            continue;
        }
        labels.push_back(detail::parse_int(token, path, line_no));
    }
    if (labels.empty()) {
        throw ingestion_error("no labels in " + detail::quoted_path(path));
    }
    return labels;
}

/** Writes per-class rows keyed by a leading class_id column. */
inline void write_class_matrix_csv(const std::filesystem::path &path,
                                   std::span<const ClassId> ids,
                                   const Matrix &values,
                                   const std::string &column_prefix = "p_") {
    if (ids.size() != values.rows()) {
        throw dimension_error("class matrix: " + std::to_string(ids.size()) +
                              " ids against " + std::to_string(values.rows()) +
                              " rows");
    }
    auto out = detail::open_output(path);
    out << "class_id";
    for (std::size_t c = 0; c < values.cols(); ++c) {
        out << "," << column_prefix << c;
    }
    out << "\n";
    for (std::size_t r = 0; r < values.rows(); ++r) {
        out << ids[r];
        const auto row = values.row(r);
        for (std::size_t c = 0; c < values.cols(); ++c) {
            out << "," << detail::format_double(row[c]);
        }
        out << "\n";
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

inline std::pair<std::vector<ClassId>, Matrix>
read_class_matrix_csv(const std::filesystem::path &path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) {
        throw ingestion_error("empty CSV file " + detail::quoted_path(path));
    }
    const auto header = detail::split_fields(line);
    if (header.empty() || header[0] != "class_id") {
        throw ingestion_error("first column of " + detail::quoted_path(path) +
                              " must be class_id");
    }
    const std::size_t cols = header.size() - 1;
    std::vector<ClassId> ids;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (fields.size() != cols + 1) {
            throw ingestion_error("line " + std::to_string(line_no) + " of " +
                                  detail::quoted_path(path) + " has " +
                                  std::to_string(fields.size()) +
                                  " fields, header promises " +
                                  std::to_string(cols + 1));
        }
        ids.push_back(detail::parse_int(fields[0], path, line_no));
        for (std::size_t c = 1; c < fields.size(); ++c) {
            values.push_back(detail::parse_double(fields[c], path, line_no));
        }
    }
    Matrix m(ids.size(), cols, std::move(values));
    detail::require_finite(m, path);
    return {std::move(ids), std::move(m)};
}

/** Writes a prototype table with the header
 * class_id,p_0..p_{n-1},e_0..e_{k-1}. */
inline void write_prototype_table(const std::filesystem::path &path,
                                  const PrototypeTable &table) {
    table.validate();
    auto out = detail::open_output(path);
    out << "class_id";
    for (std::size_t c = 0; c < table.predefined_dim(); ++c) {
        out << ",p_" << c;
    }
    for (std::size_t c = 0; c < table.expanded_dim(); ++c) {
        out << ",e_" << c;
    }
    out << "\n";
    for (std::size_t j = 0; j < table.num_classes(); ++j) {
        out << table.class_ids[j];
        const auto p = table.predefined.row(j);
        for (std::size_t c = 0; c < p.size(); ++c) {
            out << "," << detail::format_double(p[c]);
        }
        const auto e = table.expanded.row(j);
        for (std::size_t c = 0; c < e.size(); ++c) {
            out << "," << detail::format_double(e[c]);
        }
        out << "\n";
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

inline PrototypeTable read_prototype_table(const std::filesystem::path &path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) {
        throw ingestion_error("empty CSV file " + detail::quoted_path(path));
    }
    const auto header = detail::split_fields(line);
    std::size_t n = 0;
    std::size_t k = 0;
    bool ok = !header.empty() && header[0] == "class_id";
    std::size_t pos = 1;
    while (ok && pos < header.size() &&
           header[pos] == "p_" + std::to_string(n)) {
        ++n;
        ++pos;
    }
    while (ok && pos < header.size() &&
           header[pos] == "e_" + std::to_string(k)) {
        ++k;
        ++pos;
    }
    if (!ok || pos != header.size() || n + k == 0) {
        throw ingestion_error("header of " + detail::quoted_path(path) +
                              " is not class_id,p_0..,e_0..");
    }

    PrototypeTable table;
    std::vector<double> pvals;
    std::vector<double> evals;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (fields.size() != 1 + n + k) {
            throw ingestion_error("line " + std::to_string(line_no) + " of " +
                                  detail::quoted_path(path) + " has " +
                                  std::to_string(fields.size()) +
                                  " fields, header promises " +
                                  std::to_string(1 + n + k));
        }
        table.class_ids.push_back(detail::parse_int(fields[0], path, line_no));
        for (std::size_t c = 0; c < n; ++c) {
            pvals.push_back(detail::parse_double(fields[1 + c], path, line_no));
        }
        for (std::size_t c = 0; c < k; ++c) {
            evals.push_back(
                detail::parse_double(fields[1 + n + c], path, line_no));
        }
    }
    table.predefined = Matrix(table.class_ids.size(), n, std::move(pvals));
    table.expanded = Matrix(table.class_ids.size(), k, std::move(evals));
    detail::require_finite(table.predefined, path);
    detail::require_finite(table.expanded, path);
    table.validate();
    return table;
}

/** Serializes trained autoencoder parameters: the AMSF magic, a format
 * version, the layer dimension list as little-endian u32, then per layer the
 * row-major weight matrix followed by the bias vector as f64. */
inline void write_checkpoint(const std::filesystem::path &path,
                             const AutoencoderModel &model) {
    auto out = detail::open_output(path, std::ios::binary);
    detail::put_magic(out, k_checkpoint_magic);
    detail::put_le<std::uint32_t>(out, k_checkpoint_version);
    detail::put_le<std::uint32_t>(
        out, static_cast<std::uint32_t>(model.layer_dims.size()));
    for (const std::size_t dim : model.layer_dims) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
    }
    for (std::size_t t = 0; t < model.num_layers(); ++t) {
        const Matrix &w = model.weights[t];
        for (std::size_t i = 0; i < w.size(); ++i) {
            detail::put_le<double>(out, w.data()[i]);
        }
        for (const double b : model.biases[t]) {
            detail::put_le<double>(out, b);
        }
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

inline AutoencoderModel read_checkpoint(const std::filesystem::path &path) {
    auto in = detail::open_input(path, std::ios::binary);
    detail::expect_magic(in, k_checkpoint_magic, path, "checkpoint");
    const auto version = detail::get_le<std::uint32_t>(in, path);
    if (version != k_checkpoint_version) {
        throw ingestion_error("unsupported checkpoint version " +
                              std::to_string(version) + " in " +
                              detail::quoted_path(path));
    }
    const auto num_dims = detail::get_le<std::uint32_t>(in, path);
    if (num_dims < 2) {
        throw ingestion_error("checkpoint " + detail::quoted_path(path) +
                              " declares fewer than two layer dimensions");
    }
    AutoencoderModel model;
    model.layer_dims.resize(num_dims);
    for (auto &dim : model.layer_dims) {
        dim = detail::get_le<std::uint32_t>(in, path);
        if (dim == 0) {
            throw ingestion_error("zero layer width in checkpoint " +
                                  detail::quoted_path(path));
        }
    }
    for (std::size_t t = 0; t + 1 < model.layer_dims.size(); ++t) {
        Matrix w(model.layer_dims[t + 1], model.layer_dims[t]);
        for (std::size_t i = 0; i < w.size(); ++i) {
            w.data()[i] = detail::get_le<double>(in, path);
        }
        detail::require_finite(w, path);
        Vector b(model.layer_dims[t + 1]);
        for (auto &value : b) {
            value = detail::get_le<double>(in, path);
            if (!std::isfinite(value)) {
                throw numerical_error("non-finite value in " +
                                      detail::quoted_path(path));
            }
        }
        model.weights.push_back(std::move(w));
        model.biases.push_back(std::move(b));
    }
    char extra = 0;
    if (in.read(&extra, 1)) {
        throw ingestion_error("trailing bytes after the parameter payload "
                              "of " + detail::quoted_path(path));
    }
    return model;
}

/** Flat key=value configuration. '#' starts a comment; blank lines are
 * skipped; later occurrences of a key override earlier ones. */
inline std::map<std::string, std::string>
read_config_file(const std::filesystem::path &path) {
    auto in = detail::open_input(path);
    std::map<std::string, std::string> config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        const auto content = detail::trim(line);
        if (content.empty()) {
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string_view::npos) {
            throw ingestion_error("line " + std::to_string(line_no) + " of " +
                                  detail::quoted_path(path) +
                                  " is not a key=value pair");
        }
        const auto key = detail::trim(content.substr(0, eq));
        const auto value = detail::trim(content.substr(eq + 1));
        if (key.empty()) {
            throw ingestion_error("empty key at line " +
                                  std::to_string(line_no) + " of " +
                                  detail::quoted_path(path));
        }
        config[std::string(key)] = std::string(value);
    }
    return config;
}

inline void
write_config_file(const std::filesystem::path &path,
                  const std::map<std::string, std::string> &config) {
    auto out = detail::open_output(path);
    for (const auto &[key, value] : config) {
        out << key << "=" << value << "\n";
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

/** Loads feature rows, labels, and per-class pre-defined prototypes into a
 * validated Dataset. The feature file may be AMSM binary or CSV. */
inline Dataset load_dataset(const std::filesystem::path &features_path,
                            const std::filesystem::path &labels_path,
                            const std::filesystem::path &prototypes_path,
                            std::size_t min_classes = 2) {
    Dataset data;
    data.features = read_matrix_auto(features_path);
    data.labels = read_labels(labels_path);
    auto [ids, protos] = read_class_matrix_csv(prototypes_path);

    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&ids](std::size_t a, std::size_t b) {
        return ids[a] < ids[b];
    });
    data.class_ids.resize(ids.size());
    data.prototypes = Matrix(protos.rows(), protos.cols());
    for (std::size_t j = 0; j < order.size(); ++j) {
        data.class_ids[j] = ids[order[j]];
        const auto src = protos.row(order[j]);
        std::copy(src.begin(), src.end(), data.prototypes.row(j).begin());
    }
    data.validate(min_classes);
    return data;
}

/** Writes a dataset back to disk in the formats load_dataset reads.
 * Features go to the binary matrix format when binary_features is set,
 * headered CSV otherwise. */
inline void save_dataset(const Dataset &data,
                         const std::filesystem::path &features_path,
                         const std::filesystem::path &labels_path,
                         const std::filesystem::path &prototypes_path,
                         bool binary_features = true) {
    if (binary_features) {
        write_matrix_binary(features_path, data.features);
    } else {
        write_matrix_csv(features_path, data.features);
    }
    write_labels(labels_path, data.labels);
    write_class_matrix_csv(prototypes_path, data.class_ids, data.prototypes);
}

/** Writes the epoch/loss series produced by training. */
inline void write_training_log(const std::filesystem::path &path,
                               const TrainingReport &report) {
    auto out = detail::open_output(path);
    out << "epoch,total_loss,reconstruction_loss,alignment_loss\n";
    for (std::size_t e = 0; e < report.total_loss.size(); ++e) {
        out << e << "," << detail::format_double(report.total_loss[e]) << ","
            << detail::format_double(report.reconstruction_loss[e]) << ","
            << detail::format_double(report.alignment_loss[e]) << "\n";
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

/** Writes the Hit@k series, one row per k. */
inline void write_hits_csv(const std::filesystem::path &path,
                           const EvaluationReport &report) {
    auto out = detail::open_output(path);
    out << "k,hit_at_k\n";
    for (std::size_t k = 0; k < report.hit_at.size(); ++k) {
        out << (k + 1) << "," << detail::format_double(report.hit_at[k])
            << "\n";
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

/** Writes the top-1 confusion matrix with class ids on both axes. */
inline void write_confusion_csv(const std::filesystem::path &path,
                                const EvaluationReport &report) {
    auto out = detail::open_output(path);
    out << "true_class";
    for (const ClassId id : report.class_ids) {
        out << ",pred_" << id;
    }
    out << "\n";
    for (std::size_t r = 0; r < report.confusion.rows(); ++r) {
        out << report.class_ids[r];
        const auto row = report.confusion.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << "," << detail::format_double(row[c]);
        }
        out << "\n";
    }
    if (!out) {
        throw ingestion_error("write failed for " + detail::quoted_path(path));
    }
}

} // namespace ams

#endif // AMS_IO_HPP
