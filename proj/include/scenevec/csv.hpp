#pragma once

#include <istream>
#include <string>
#include <vector>

namespace scenevec::csv {

/// Splits one CSV line into fields. Handles double-quoted fields with
/// embedded commas and "" escapes; does not handle embedded newlines.
std::vector<std::string> split_line(const std::string& line);

/// Header-bearing CSV reader over an input stream.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {
        std::string line;
        if (read_line(line)) {
            header_ = split_line(line);
        }
    }

    const std::vector<std::string>& header() const { return header_; }

    /// Index of a named header column, -1 if absent.
    int column(const std::string& name) const {
        for (std::size_t c = 0; c < header_.size(); ++c) {
            if (header_[c] == name) return static_cast<int>(c);
        }
        return -1;
    }

    /// Reads the next data row. Returns false at end of input.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        if (!read_line(line)) return false;
        fields = split_line(line);
        return true;
    }

    /// 1-based line number of the row most recently returned (header is line 1).
    std::size_t line_number() const { return line_; }

private:
    bool read_line(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    }

    std::istream& in_;
    std::vector<std::string> header_;
    std::size_t line_ = 0;
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

}  // namespace scenevec::csv
