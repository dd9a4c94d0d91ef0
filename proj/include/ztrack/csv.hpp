#pragma once

#include "ztrack/simulator.hpp"
#include "ztrack/types.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ztrack {

// All CSVs: comma separation, header row, '.' decimal point, LF line endings.
// Floats are written with fixed precision so identical runs produce identical
// bytes.

namespace csv_detail {

inline std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string join_ints(const std::vector<int>& v, char sep = ';') {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(sep);
        out += std::to_string(v[i]);
    }
    return out;
}

} // namespace csv_detail

/// Generic CSV table: header + string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_csv: cannot open " + path);
    CsvTable t;
    std::string line;
    if (std::getline(f, line)) t.header = csv_detail::split(line);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        t.rows.push_back(csv_detail::split(line));
    }
    return t;
}

class TrajectoryCsvWriter {
public:
    explicit TrajectoryCsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path);
        out_ << "frame,target_id,x,y,a,b,delta,weight_max,interacting,lost\n";
    }
    void write(const StepReport& r) {
        using csv_detail::fmt;
        out_ << r.frame << ',' << r.target_id << ',' << fmt(r.x) << ',' << fmt(r.y) << ','
             << fmt(r.a) << ',' << fmt(r.b) << ',' << fmt(r.delta) << ',' << fmt(r.weight_max)
             << ',' << (r.interacting ? 1 : 0) << ',' << (r.lost ? 1 : 0) << '\n';
    }

private:
    std::ofstream out_;
};

class ErrorCsvWriter {
public:
    explicit ErrorCsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path);
        out_ << "frame,target_id,predicted_x,predicted_y,observed_x,observed_y,deviation\n";
    }
    void write(const ErrorRecord& r) {
        using csv_detail::fmt;
        out_ << r.frame << ',' << r.target_id << ',' << fmt(r.predicted_x) << ','
             << fmt(r.predicted_y) << ',' << fmt(r.observed_x) << ',' << fmt(r.observed_y) << ','
             << fmt(r.deviation) << '\n';
    }

private:
    std::ofstream out_;
};

class EventCsvWriter {
public:
    explicit EventCsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path);
        out_ << "frame,group_targets,blob_ids,chosen_permutation,all_scores,fallback_flag\n";
    }
    void write(const LinkingEvent& e) {
        out_ << e.frame << ',' << csv_detail::join_ints(e.group_targets) << ','
             << csv_detail::join_ints(e.blob_ids) << ',';
        for (std::size_t i = 0; i < e.chosen.size(); ++i) {
            if (i) out_ << ';';
            out_ << e.chosen[i].first << ':' << e.chosen[i].second;
        }
        out_ << ',';
        for (std::size_t i = 0; i < e.all_scores.size(); ++i) {
            if (i) out_ << ';';
            out_ << csv_detail::fmt(e.all_scores[i], 6);
        }
        out_ << ',' << (e.fallback ? 1 : 0) << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_ground_truth_csv(const GroundTruth& truth, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "frame,fish_id,x,y,heading,bent_flag,merged_with\n";
    for (std::size_t t = 0; t < truth.frames.size(); ++t) {
        for (std::size_t i = 0; i < truth.frames[t].size(); ++i) {
            const auto& f = truth.frames[t][i];
            out << t << ',' << i << ',' << csv_detail::fmt(f.x) << ',' << csv_detail::fmt(f.y)
                << ',' << csv_detail::fmt(f.heading) << ',' << (f.bent ? 1 : 0) << ','
                << csv_detail::join_ints(f.merged_with) << '\n';
        }
    }
}

/// Positions per id from a trajectory-style CSV. Accepts both tracker output
/// (target_id) and ground-truth (fish_id) schemas; rows must be frame-ordered
/// within each id.
inline std::map<int, std::vector<Vec2>> read_positions_by_id(const std::string& path) {
    CsvTable t = read_csv(path);
    int id_col = t.column("target_id");
    if (id_col < 0) id_col = t.column("fish_id");
    const int x_col = t.column("x");
    const int y_col = t.column("y");
    if (id_col < 0 || x_col < 0 || y_col < 0) {
        throw std::runtime_error("trajectory CSV needs target_id/fish_id, x, y columns: " + path);
    }
    std::map<int, std::vector<Vec2>> out;
    for (const auto& row : t.rows) {
        const int id = std::stoi(row[static_cast<std::size_t>(id_col)]);
        out[id].push_back({std::stod(row[static_cast<std::size_t>(x_col)]),
                           std::stod(row[static_cast<std::size_t>(y_col)])});
    }
    return out;
}

} // namespace ztrack
