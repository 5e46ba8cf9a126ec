#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "rampflow/common.hpp"

namespace rampflow {

inline bool has_gz_extension(const std::string& path) {
    return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

// Line reader over a plain or gzip-compressed file, chosen by extension.
class LineReader {
public:
    explicit LineReader(const std::string& path) : path_(path) {
        if (has_gz_extension(path)) {
            gz_ = gzopen(path.c_str(), "rb");
            if (!gz_) throw Error("cannot open " + path);
        } else {
            file_.open(path);
            if (!file_) throw Error("cannot open " + path);
        }
    }
    ~LineReader() {
        if (gz_) gzclose(gz_);
    }
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    bool next(std::string& line) {
        if (gz_) {
            line.clear();
            char buf[4096];
            bool got = false;
            while (gzgets(gz_, buf, sizeof(buf))) {
                got = true;
                line += buf;
                if (!line.empty() && line.back() == '\n') break;
            }
            if (!got) return false;
            strip_eol(line);
            return true;
        }
        if (!std::getline(file_, line)) return false;
        strip_eol(line);
        return true;
    }

private:
    static void strip_eol(std::string& line) {
        while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    }
    std::string path_;
    std::ifstream file_;
    gzFile gz_ = nullptr;
};

class LineWriter {
public:
    explicit LineWriter(const std::string& path) {
        if (has_gz_extension(path)) {
            gz_ = gzopen(path.c_str(), "wb");
            if (!gz_) throw Error("cannot open " + path + " for writing");
        } else {
            file_.open(path, std::ios::trunc);
            if (!file_) throw Error("cannot open " + path + " for writing");
        }
    }
    ~LineWriter() { close(); }
    LineWriter(const LineWriter&) = delete;
    LineWriter& operator=(const LineWriter&) = delete;

    void write(std::string_view line) {
        if (gz_) {
            if (gzwrite(gz_, line.data(), static_cast<unsigned>(line.size())) == 0 && !line.empty())
                throw Error("gzip write failed");
            gzputc(gz_, '\n');
        } else {
            file_ << line << '\n';
        }
    }

    void close() {
        if (gz_) {
            gzclose(gz_);
            gz_ = nullptr;
        }
        if (file_.is_open()) file_.close();
    }

private:
    std::ofstream file_;
    gzFile gz_ = nullptr;
};

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

inline std::string join_csv_row(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out;
}

inline double parse_double_field(const std::string& s, std::size_t line_no, const char* what) {
    double v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(std::string("bad ") + what + " value '" + s + "'", line_no);
    return v;
}

inline long long parse_int_field(const std::string& s, std::size_t line_no, const char* what) {
    long long v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(std::string("bad ") + what + " value '" + s + "'", line_no);
    return v;
}

}  // namespace rampflow
