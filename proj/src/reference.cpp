#include "surgseg/reference.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "surgseg/errors.hpp"
#include "surgseg/mask.hpp"

namespace surgseg {

namespace {

// FNV-1a of data/reference_table.csv; regenerate when the transcription
// legitimately changes.
constexpr std::uint64_t kReferenceChecksum = 0x0a9b10528575a7adULL;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

std::optional<double> parse_optional(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

}  // namespace

ReferenceTable ReferenceTable::load(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw IoError("cannot open reference table: " + csv_path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();

    const std::uint64_t checksum = fnv1a(content.data(), content.size());
    if (checksum != kReferenceChecksum) {
        throw IntegrityError("reference table checksum mismatch for " + csv_path.string() +
                             ": got " + digest_hex(checksum) + ", expected " +
                             digest_hex(kReferenceChecksum));
    }

    ReferenceTable table;
    std::istringstream lines(content);
    std::string line;
    bool header = true;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 6) {
            throw ParseError("reference table line " + std::to_string(line_no) +
                             " has " + std::to_string(fields.size()) + " fields, expected 6");
        }
        ReferenceScore score;
        score.table = fields[0];
        score.miou = parse_optional(fields[3]);
        score.mdice = parse_optional(fields[4]);
        score.map = parse_optional(fields[5]);
        table.scores_[{fields[1], fields[2]}] = score;
    }
    return table;
}

std::optional<ReferenceTable> ReferenceTable::load_default() {
    std::filesystem::path path;
    if (const char* env = std::getenv("SURGSEG_REFERENCE_TABLE")) {
        path = env;
    } else {
#ifdef SURGSEG_DATA_DIR
        path = std::filesystem::path(SURGSEG_DATA_DIR) / "reference_table.csv";
#endif
    }
    if (path.empty() || !std::filesystem::exists(path)) return std::nullopt;
    return load(path);
}

std::optional<ReferenceScore> ReferenceTable::lookup(const std::string& dataset,
                                                     const std::string& method) const {
    auto it = scores_.find({dataset, method});
    if (it != scores_.end()) return it->second;
    // The published tables label the no-reinit random-point row "SAM2-1Point".
    if (method == "SAM2-1Point-Random") return lookup(dataset, "SAM2-1Point");
    return std::nullopt;
}

}  // namespace surgseg
