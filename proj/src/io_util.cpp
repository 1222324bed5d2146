#include "brw/io_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "brw/errors.hpp"
#include "brw/rng.hpp"

namespace brw {

std::string g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(content.data(), std::streamsize(content.size()));
    if (!out) throw IoError("short write to " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path);
    return ss.str();
}

bool file_exists(const std::string& path) {
    std::error_code ec;
    return std::filesystem::exists(path, ec);
}

static std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvTable::CsvTable(const std::vector<std::string>& header) : cols(header.size()) {
    if (header.empty()) throw MalformedInput("CsvTable: empty header");
    row(header);
}

void CsvTable::row(const std::vector<std::string>& cells) {
    if (cells.size() != cols)
        throw MalformedInput("CsvTable: row width " + std::to_string(cells.size()) +
                             " != header width " + std::to_string(cols));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buf += ',';
        buf += csv_escape(cells[i]);
    }
    buf += '\n';
}

void CsvTable::save(const std::string& path) const { write_text_file(path, buf); }

std::string hex_digest(const std::string& content) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(content)));
    return buf;
}

} // namespace brw
