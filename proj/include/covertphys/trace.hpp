#ifndef COVERTPHYS_TRACE_HPP
#define COVERTPHYS_TRACE_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "covertphys/common.hpp"

namespace covertphys {

/// Uniform per-step record of a scenario run. The column set is fixed by the
/// scenario that produced the trace; the first column is always time.
struct Trace {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void check_invariants() const {
        if (columns.empty() || columns.front() != "t_s")
            throw ConfigError("trace: first column must be t_s");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != columns.size())
                throw ConfigError("trace: row " + std::to_string(i) + " has " +
                                  std::to_string(rows[i].size()) + " cells, expected " +
                                  std::to_string(columns.size()));
            if (i > 0 && rows[i][0] <= rows[i - 1][0])
                throw ConfigError("trace: time not strictly increasing at row " +
                                  std::to_string(i));
        }
    }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw ConfigError("trace: no column named '" + name + "'");
    }

    std::vector<double> column(const std::string& name) const {
        auto idx = column_index(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[idx]);
        return out;
    }

    /// 9 significant digits: stable regression baselines at display precision.
    void write_csv(std::ostream& os) const {
        check_invariants();
        for (std::size_t i = 0; i < columns.size(); ++i)
            os << (i ? "," : "") << columns[i];
        os << "\n";
        char buf[32];
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.9g", r[i]);
                os << (i ? "," : "") << buf;
            }
            os << "\n";
        }
    }

    void write_csv_file(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw ConfigError("trace: cannot open '" + path + "' for writing");
        write_csv(f);
    }

    static Trace read_csv(std::istream& is) {
        Trace t;
        std::string line;
        if (!std::getline(is, line)) throw ConfigError("trace csv: empty file");
        std::stringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) t.columns.push_back(cell);
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::vector<double> row;
            std::stringstream ss(line);
            while (std::getline(ss, cell, ',')) {
                try {
                    row.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    throw ConfigError("trace csv: bad cell '" + cell + "'");
                }
            }
            t.rows.push_back(std::move(row));
        }
        t.check_invariants();
        return t;
    }

    static Trace read_csv_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("trace: cannot open '" + path + "'");
        return read_csv(f);
    }
};

}  // namespace covertphys

#endif
