#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace scenevec {

struct LabeledVectors {
    std::vector<std::string> labels;
    Eigen::MatrixXd vectors;  // one row per label
};

/// Text format: one `label v1 v2 ... vd` line per label, values printed
/// with enough digits to round-trip doubles exactly.
void save_vectors_text(std::ostream& out, const LabeledVectors& vectors);
LabeledVectors load_vectors_text(std::istream& in);

/// Binary format: magic, version, V, d header, then length-prefixed
/// labels each followed by d little-endian doubles.
void save_vectors_binary(std::ostream& out, const LabeledVectors& vectors);
LabeledVectors load_vectors_binary(std::istream& in, const std::string& name = "<stream>");

/// Reads either format, sniffing the binary magic.
LabeledVectors load_vectors(const std::filesystem::path& path);

}  // namespace scenevec
