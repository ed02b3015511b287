#include "scenevec/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "scenevec/csv.hpp"
#include "scenevec/errors.hpp"

namespace scenevec {

Vocabulary Vocabulary::build(const std::unordered_map<std::string, std::int64_t>& counts,
                             std::int64_t min_count) {
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    std::vector<std::pair<std::string, std::int64_t>> kept;
    kept.reserve(counts.size());
    for (const auto& [label, count] : counts) {
        if (count >= min_count) kept.emplace_back(label, count);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.min_count_ = min_count;
    vocab.labels_.reserve(kept.size());
    vocab.counts_.reserve(kept.size());
    for (auto& [label, count] : kept) {
        vocab.ids_.emplace(label, static_cast<int>(vocab.labels_.size()));
        vocab.labels_.push_back(std::move(label));
        vocab.counts_.push_back(count);
    }
    return vocab;
}

int Vocabulary::id_of(std::string_view label) const {
    auto it = ids_.find(std::string(label));
    return it == ids_.end() ? -1 : it->second;
}

void Vocabulary::save(std::ostream& out) const {
    for (int id = 0; id < size(); ++id) {
        out << labels_[id] << '\t' << counts_[id] << '\n';
    }
}

Vocabulary Vocabulary::load(std::istream& in, std::int64_t min_count) {
    Vocabulary vocab;
    vocab.min_count_ = min_count;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("vocabulary line " + std::to_string(line_no) + ": missing tab separator");
        }
        std::string label = line.substr(0, tab);
        std::int64_t count = 0;
        const char* first = line.data() + tab + 1;
        const char* last = line.data() + line.size();
        auto [ptr, ec] = std::from_chars(first, last, count);
        if (ec != std::errc() || ptr != last) {
            throw DataError("vocabulary line " + std::to_string(line_no) + ": bad count");
        }
        vocab.ids_.emplace(label, static_cast<int>(vocab.labels_.size()));
        vocab.labels_.push_back(std::move(label));
        vocab.counts_.push_back(count);
    }
    return vocab;
}

namespace {

bool parse_fraction(const std::string& text, double& value) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
}

}  // namespace

AnnotationBatch parse_annotations(std::istream& in, const ColumnMap& columns) {
    csv::Reader reader(in);
    if (reader.header().empty()) {
        // An entirely empty file parses to an empty batch.
        return {};
    }

    const std::string* names[6] = {&columns.image_id, &columns.label, &columns.x_min,
                                   &columns.x_max,    &columns.y_min, &columns.y_max};
    int cols[6];
    for (int c = 0; c < 6; ++c) {
        cols[c] = reader.column(*names[c]);
        if (cols[c] < 0) throw ConfigError("annotation CSV has no column named '" + *names[c] + "'");
    }
    const std::size_t needed =
        1 + static_cast<std::size_t>(*std::max_element(std::begin(cols), std::end(cols)));

    AnnotationBatch batch;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        const std::size_t line = reader.line_number();
        if (fields.size() < needed) {
            batch.errors.push_back({line, "too few fields"});
            continue;
        }
        BoxAnnotation box;
        box.image_id = fields[cols[0]];
        box.label = fields[cols[1]];
        double* coords[4] = {&box.x_min, &box.x_max, &box.y_min, &box.y_max};
        bool ok = true;
        for (int c = 0; c < 4; ++c) {
            const std::string& text = fields[cols[2 + c]];
            if (!parse_fraction(text, *coords[c])) {
                batch.errors.push_back({line, "unparsable coordinate '" + text + "'"});
                ok = false;
                break;
            }
            if (*coords[c] < 0.0 || *coords[c] > 1.0) {
                batch.errors.push_back({line, "coordinate " + text + " outside [0,1]"});
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        if (box.x_min > box.x_max) {
            batch.errors.push_back({line, "inverted x extent"});
            continue;
        }
        if (box.y_min > box.y_max) {
            batch.errors.push_back({line, "inverted y extent"});
            continue;
        }
        batch.boxes.push_back(std::move(box));
    }
    return batch;
}

std::unordered_map<std::string, std::string> load_label_names(std::istream& in) {
    std::unordered_map<std::string, std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = csv::split_line(line);
        if (fields.size() < 2) continue;
        std::string name = fields[1];
        std::replace(name.begin(), name.end(), ' ', '_');
        names[fields[0]] = std::move(name);
    }
    return names;
}

void apply_label_names(std::vector<BoxAnnotation>& boxes,
                       const std::unordered_map<std::string, std::string>& names) {
    for (auto& box : boxes) {
        auto it = names.find(box.label);
        if (it != names.end()) box.label = it->second;
    }
}

std::vector<std::pair<std::string, std::vector<BoxAnnotation>>>
group_by_image(const std::vector<BoxAnnotation>& boxes) {
    std::vector<std::pair<std::string, std::vector<BoxAnnotation>>> groups;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& box : boxes) {
        auto [it, inserted] = index.emplace(box.image_id, groups.size());
        if (inserted) groups.push_back({box.image_id, {}});
        groups[it->second].second.push_back(box);
    }
    return groups;
}

SceneSentence scan_image(const std::string& image_id,
                         const std::vector<BoxAnnotation>& boxes,
                         ScanAxis axis,
                         const Vocabulary& vocab) {
    struct Entry {
        double primary;
        double secondary;
        int id;
    };
    std::vector<Entry> entries;
    entries.reserve(boxes.size());
    for (const auto& box : boxes) {
        int id = vocab.id_of(box.label);
        if (id < 0) continue;
        BoxCenter c = box_center(box);
        if (axis == ScanAxis::Horizontal) {
            entries.push_back({c.cx, c.cy, id});
        } else {
            entries.push_back({c.cy, c.cx, id});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.primary != b.primary) return a.primary < b.primary;
        if (a.secondary != b.secondary) return a.secondary < b.secondary;
        return a.id < b.id;
    });

    SceneSentence sentence;
    sentence.image_id = image_id;
    sentence.tokens.reserve(entries.size());
    for (const auto& e : entries) sentence.tokens.push_back(e.id);
    return sentence;
}

Vocabulary build_vocabulary(const std::vector<BoxAnnotation>& boxes, std::int64_t min_count) {
    std::unordered_map<std::string, std::int64_t> counts;
    for (const auto& box : boxes) ++counts[box.label];
    return Vocabulary::build(counts, min_count);
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& sentences,
                            std::int64_t min_count) {
    std::unordered_map<std::string, std::int64_t> counts;
    for (const auto& sentence : sentences) {
        for (const auto& label : sentence) ++counts[label];
    }
    return Vocabulary::build(counts, min_count);
}

void save_sentences(std::ostream& out, const std::vector<SceneSentence>& sentences) {
    for (const auto& sentence : sentences) {
        if (sentence.tokens.empty()) continue;
        out << sentence.image_id << '\t';
        for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
            if (t) out << ' ';
            out << sentence.tokens[t];
        }
        out << '\n';
    }
}

std::vector<SceneSentence> load_sentences(std::istream& in) {
    std::vector<SceneSentence> sentences;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("sentence line " + std::to_string(line_no) + ": missing tab separator");
        }
        SceneSentence sentence;
        sentence.image_id = line.substr(0, tab);
        std::istringstream tokens(line.substr(tab + 1));
        int id;
        while (tokens >> id) {
            if (id < 0) throw DataError("sentence line " + std::to_string(line_no) + ": negative id");
            sentence.tokens.push_back(id);
        }
        sentences.push_back(std::move(sentence));
    }
    return sentences;
}

}  // namespace scenevec
