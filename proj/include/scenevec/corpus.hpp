#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace scenevec {

/// One labeled bounding box. Coordinates are fractions of the image
/// extent in [0,1] with x_min <= x_max and y_min <= y_max.
struct BoxAnnotation {
    std::string image_id;
    std::string label;
    double x_min = 0;
    double x_max = 0;
    double y_min = 0;
    double y_max = 0;
};

struct BoxCenter {
    double cx = 0;
    double cy = 0;
};

/// Midpoint of the box extents.
inline BoxCenter box_center(const BoxAnnotation& b) {
    return {(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0};
}

/// Ordered label-id sequence for one image after the center scan.
struct SceneSentence {
    std::string image_id;
    std::vector<int> tokens;
};

enum class ScanAxis { Horizontal, Vertical };

/// Bidirectional label<->id map with per-label counts. Ids are dense
/// 0..V-1, assigned by descending count, ties by lexicographic label.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Filters to labels with count >= min_count and assigns ids.
    static Vocabulary build(const std::unordered_map<std::string, std::int64_t>& counts,
                            std::int64_t min_count);

    int size() const { return static_cast<int>(labels_.size()); }
    std::int64_t min_count() const { return min_count_; }

    /// Id for a label, -1 if not retained.
    int id_of(std::string_view label) const;
    const std::string& label(int id) const { return labels_.at(id); }
    std::int64_t count(int id) const { return counts_.at(id); }
    const std::vector<std::string>& labels() const { return labels_; }

    /// One `label<TAB>count` line per id, in id order.
    void save(std::ostream& out) const;
    static Vocabulary load(std::istream& in, std::int64_t min_count = 1);

private:
    std::vector<std::string> labels_;
    std::vector<std::int64_t> counts_;
    std::unordered_map<std::string, int> ids_;
    std::int64_t min_count_ = 1;
};

/// Names of the six annotation columns. Defaults follow the Open Images
/// V4 box files.
struct ColumnMap {
    std::string image_id = "ImageID";
    std::string label = "LabelName";
    std::string x_min = "XMin";
    std::string x_max = "XMax";
    std::string y_min = "YMin";
    std::string y_max = "YMax";
};

struct RowError {
    std::size_t line = 0;
    std::string message;
};

struct AnnotationBatch {
    std::vector<BoxAnnotation> boxes;  // accepted rows, in file order
    std::vector<RowError> errors;      // rejected rows with line numbers
};

/// Parses a header-bearing annotation CSV. Rows with unparsable or
/// out-of-range coordinates land in `errors` rather than being dropped
/// silently. Throws ConfigError when a mapped column is missing.
AnnotationBatch parse_annotations(std::istream& in, const ColumnMap& columns = {});

/// Loads a two-column `label,name` mapping (Open Images class
/// descriptions). Spaces inside names become underscores so names
/// survive the space-separated vector text format.
std::unordered_map<std::string, std::string> load_label_names(std::istream& in);

/// Rewrites box labels through the name map; labels without an entry
/// are kept as-is.
void apply_label_names(std::vector<BoxAnnotation>& boxes,
                       const std::unordered_map<std::string, std::string>& names);

/// Groups boxes by image_id, preserving first-appearance order of images.
std::vector<std::pair<std::string, std::vector<BoxAnnotation>>>
group_by_image(const std::vector<BoxAnnotation>& boxes);

/// Orders one image's boxes along the scan axis and maps labels to ids.
/// Horizontal sorts by (cx, cy, id), Vertical by (cy, cx, id); labels
/// absent from the vocabulary are omitted. The result may be empty.
SceneSentence scan_image(const std::string& image_id,
                         const std::vector<BoxAnnotation>& boxes,
                         ScanAxis axis,
                         const Vocabulary& vocab);

Vocabulary build_vocabulary(const std::vector<BoxAnnotation>& boxes, std::int64_t min_count);
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& sentences,
                            std::int64_t min_count);

/// One image per line: `image_id<TAB>id id id ...`. Images whose
/// sentence is empty are not written.
void save_sentences(std::ostream& out, const std::vector<SceneSentence>& sentences);
std::vector<SceneSentence> load_sentences(std::istream& in);

}  // namespace scenevec
