#include "scenevec/vector_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "scenevec/errors.hpp"

namespace scenevec {

namespace {

constexpr std::uint32_t kVectorMagic = 0x53564556;  // "VEVS" on disk
constexpr std::uint32_t kVectorVersion = 1;

void check_shape(const LabeledVectors& vectors) {
    if (static_cast<Eigen::Index>(vectors.labels.size()) != vectors.vectors.rows()) {
        throw DataError("label count does not match vector rows");
    }
}

}  // namespace

void save_vectors_text(std::ostream& out, const LabeledVectors& vectors) {
    check_shape(vectors);
    char buffer[64];
    for (std::size_t r = 0; r < vectors.labels.size(); ++r) {
        out << vectors.labels[r];
        for (Eigen::Index c = 0; c < vectors.vectors.cols(); ++c) {
            std::snprintf(buffer, sizeof(buffer), " %.17g", vectors.vectors(r, c));
            out << buffer;
        }
        out << '\n';
    }
}

LabeledVectors load_vectors_text(std::istream& in) {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    Eigen::Index dim = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string label;
        fields >> label;
        std::vector<double> row;
        double value;
        while (fields >> value) row.push_back(value);
        if (!fields.eof()) {
            throw DataError("vector line " + std::to_string(line_no) + ": unparsable value");
        }
        if (row.empty()) {
            throw DataError("vector line " + std::to_string(line_no) + ": no values");
        }
        if (dim < 0) {
            dim = static_cast<Eigen::Index>(row.size());
        } else if (static_cast<Eigen::Index>(row.size()) != dim) {
            throw DataError("vector line " + std::to_string(line_no) + ": expected " +
                            std::to_string(dim) + " values, got " + std::to_string(row.size()));
        }
        labels.push_back(std::move(label));
        rows.push_back(std::move(row));
    }

    LabeledVectors vectors;
    vectors.vectors.resize(static_cast<Eigen::Index>(rows.size()), dim < 0 ? 0 : dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (Eigen::Index c = 0; c < vectors.vectors.cols(); ++c) {
            vectors.vectors(static_cast<Eigen::Index>(r), c) = rows[r][c];
        }
    }
    vectors.labels = std::move(labels);
    return vectors;
}

void save_vectors_binary(std::ostream& out, const LabeledVectors& vectors) {
    check_shape(vectors);
    auto write_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    write_u32(kVectorMagic);
    write_u32(kVectorVersion);
    write_u32(static_cast<std::uint32_t>(vectors.vectors.rows()));
    write_u32(static_cast<std::uint32_t>(vectors.vectors.cols()));
    for (std::size_t r = 0; r < vectors.labels.size(); ++r) {
        write_u32(static_cast<std::uint32_t>(vectors.labels[r].size()));
        out.write(vectors.labels[r].data(), static_cast<std::streamsize>(vectors.labels[r].size()));
        for (Eigen::Index c = 0; c < vectors.vectors.cols(); ++c) {
            const double v = vectors.vectors(static_cast<Eigen::Index>(r), c);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
    }
}

LabeledVectors load_vectors_binary(std::istream& in, const std::string& name) {
    auto read_u32 = [&](std::uint32_t& v) {
        in.read(reinterpret_cast<char*>(&v), 4);
        if (!in) throw DataError("vector file " + name + ": truncated");
    };
    std::uint32_t magic = 0, version = 0, rows = 0, cols = 0;
    read_u32(magic);
    if (magic != kVectorMagic) throw DataError("vector file " + name + ": bad magic");
    read_u32(version);
    if (version != kVectorVersion) throw DataError("vector file " + name + ": unsupported version");
    read_u32(rows);
    read_u32(cols);

    LabeledVectors vectors;
    vectors.labels.resize(rows);
    vectors.vectors.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        std::uint32_t len = 0;
        read_u32(len);
        vectors.labels[r].resize(len);
        in.read(vectors.labels[r].data(), len);
        if (!in) throw DataError("vector file " + name + ": truncated");
        for (std::uint32_t c = 0; c < cols; ++c) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof(double));
            if (!in) throw DataError("vector file " + name + ": truncated");
            vectors.vectors(r, c) = v;
        }
    }
    return vectors;
}

LabeledVectors load_vectors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vector file: " + path.string());
    std::uint32_t magic = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.clear();
    in.seekg(0);
    if (in && magic == kVectorMagic) return load_vectors_binary(in, path.string());
    return load_vectors_text(in);
}

}  // namespace scenevec
