#ifndef WATTSERVE_CSVIO_HPP
#define WATTSERVE_CSVIO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wattserve/rng.hpp"
#include "wattserve/types.hpp"

namespace wattserve {

// Fixed formatting so reruns produce byte-identical files.
inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                                      bool skip_header = false) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path().empty()
                                            ? std::filesystem::path(".")
                                            : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::uint64_t hash_file(const std::filesystem::path& path) {
    return fnv1a64(read_text_file(path));
}

}  // namespace wattserve

#endif
