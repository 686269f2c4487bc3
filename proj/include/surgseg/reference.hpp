#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace surgseg {

struct ReferenceScore {
    std::optional<double> miou;
    std::optional<double> mdice;
    std::optional<double> map;
    std::string table;
};

/// Published scores keyed by (dataset, method), transcribed verbatim and
/// checksummed at load time so silent edits fail loudly.
class ReferenceTable {
public:
    /// Loads and verifies the vendored transcription file. Throws
    /// IntegrityError when the checksum does not match.
    static ReferenceTable load(const std::filesystem::path& csv_path);
    /// SURGSEG_REFERENCE_TABLE env override, else the build-time data dir.
    static std::optional<ReferenceTable> load_default();

    std::optional<ReferenceScore> lookup(const std::string& dataset,
                                         const std::string& method) const;
    std::size_t size() const { return scores_.size(); }

private:
    std::map<std::pair<std::string, std::string>, ReferenceScore> scores_;
};

}  // namespace surgseg
