#pragma once

// Small file and formatting helpers shared by the experiment runners. All
// floating-point output goes through g17() so that result files are
// bit-identical across runs and worker counts.

#include <cstdint>
#include <string>
#include <vector>

namespace brw {

// %.17g: enough digits to round-trip a double exactly.
std::string g17(double x);

void ensure_dir(const std::string& path);             // throws IoError
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);  // throws IoError
bool file_exists(const std::string& path);

// One CSV table built in memory: header once, then rows of preformatted
// cells. Quotes any cell containing a comma, quote, or newline.
struct CsvTable {
    std::string buf;
    std::size_t cols = 0;

    explicit CsvTable(const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    void save(const std::string& path) const;
};

// FNV-1a over a string, rendered as 16 hex digits; used for config digests.
std::string hex_digest(const std::string& content);

} // namespace brw
