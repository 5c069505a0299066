#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "endlab/error.hpp"

namespace endlab {

/// Pointwise quotient band of a numeric series against an envelope.
struct RatioBand {
    std::string quantity;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    double spread = 1.0;
    std::size_t grid_size = 0;
};

inline RatioBand ratio_fit(std::span<const double> numeric, std::span<const double> envelope,
                           const std::string& quantity = "") {
    if (numeric.size() != envelope.size())
        throw Error(Errc::length_mismatch, std::to_string(numeric.size()) + " vs " + std::to_string(envelope.size()));
    require(!numeric.empty(), Errc::length_mismatch, "empty series");
    RatioBand b;
    b.quantity = quantity;
    b.grid_size = numeric.size();
    b.min_ratio = INFINITY;
    b.max_ratio = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        if (!(numeric[i] > 0.0) || !(envelope[i] > 0.0) || !std::isfinite(numeric[i]) || !std::isfinite(envelope[i]))
            throw Error(Errc::nonpositive, "entry " + std::to_string(i) + " of " + (quantity.empty() ? "series" : quantity));
        const double q = numeric[i] / envelope[i];
        b.min_ratio = std::min(b.min_ratio, q);
        b.max_ratio = std::max(b.max_ratio, q);
    }
    b.spread = b.max_ratio / b.min_ratio;
    return b;
}

/// 17 significant digits: round-trips every double.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Decimal text of exp(u) that stays finite past the double range.
inline std::string format_from_log(double u) {
    if (u < 700.0) return format_double(std::exp(u));
    const double l10 = u / std::log(10.0);
    double e = std::floor(l10);
    const double mant = std::pow(10.0, l10 - e);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.16f", mant);
    // Rounding to 16 decimals can carry into a second integer digit.
    if (buf[1] != '.') {
        std::snprintf(buf, sizeof buf, "%.16f", mant / 10.0);
        e += 1.0;
    }
    char out[80];
    std::snprintf(out, sizeof out, "%se+%.0f", buf, e);
    return out;
}

/// Column-oriented CSV: first column `t` or `r`, then `<quantity>:<id>`.
class CsvTable {
public:
    CsvTable(std::string axis, std::vector<double> axis_values) : axis_(std::move(axis)) {
        require(axis_ == "t" || axis_ == "r", Errc::invalid_argument, "first CSV column must be t or r");
        for (double x : axis_values) axis_text_.push_back(format_double(x));
    }
    /// Axis given as log values, written through format_from_log.
    static CsvTable from_log_axis(std::string axis, std::span<const double> log_values) {
        CsvTable t(std::move(axis), {});
        for (double u : log_values) t.axis_text_.push_back(format_from_log(u));
        return t;
    }

    void add(const std::string& quantity, const std::string& id, std::span<const double> values) {
        require(values.size() == axis_text_.size(), Errc::length_mismatch, "column " + quantity + ":" + id);
        std::vector<std::string> col;
        for (double v : values) col.push_back(format_double(v));
        headers_.push_back(quantity + ":" + id);
        columns_.push_back(std::move(col));
    }

    std::string str() const {
        std::ostringstream os;
        os << axis_;
        for (const auto& h : headers_) os << ',' << h;
        os << '\n';
        for (std::size_t i = 0; i < axis_text_.size(); ++i) {
            os << axis_text_[i];
            for (const auto& c : columns_) os << ',' << c[i];
            os << '\n';
        }
        return os.str();
    }

    void write(const std::filesystem::path& path) const {
        std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path);
        if (!out) throw Error(Errc::config_invalid, "output.dir: cannot write " + path.string());
        out << str();
    }

private:
    std::string axis_;
    std::vector<std::string> axis_text_;
    std::vector<std::string> headers_;
    std::vector<std::vector<std::string>> columns_;
};

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
    std::vector<long double> axis;  // first column in extended range; schedule radii exceed double

    const std::vector<double>& column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return columns[i];
        }
        throw Error(Errc::invalid_argument, "no column named " + name);
    }
};

inline CsvData read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::invalid_argument, "cannot read " + path.string());
    CsvData d;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    require(static_cast<bool>(std::getline(in, line)), Errc::invalid_argument, path.string() + ": empty file");
    d.header = split(line);
    d.columns.resize(d.header.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const auto cells = split(line);
        require(cells.size() == d.header.size(), Errc::length_mismatch,
                path.string() + ": row " + std::to_string(row) + " has the wrong number of cells");
        for (std::size_t i = 0; i < cells.size(); ++i) d.columns[i].push_back(std::strtod(cells[i].c_str(), nullptr));
        d.axis.push_back(std::strtold(cells[0].c_str(), nullptr));
    }
    return d;
}

/// Schema check: axis name, `<quantity>:<id>` headers, strictly increasing
/// axis, and values that are finite and nonnegative. Returns "" when valid.
inline std::string check_csv_schema(const CsvData& d) {
    if (d.header.empty() || (d.header[0] != "t" && d.header[0] != "r")) return "first column must be t or r";
    for (std::size_t i = 1; i < d.header.size(); ++i) {
        const auto& h = d.header[i];
        const auto colon = h.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == h.size()) return "bad header '" + h + "'";
    }
    const auto& axis = d.axis;
    for (std::size_t i = 0; i < axis.size(); ++i) {
        if (!std::isfinite(axis[i])) return "axis value out of range at row " + std::to_string(i + 2);
        if (i && !(axis[i] > axis[i - 1])) return "axis not strictly increasing at row " + std::to_string(i + 2);
    }
    for (std::size_t c = 1; c < d.columns.size(); ++c) {
        for (double v : d.columns[c]) {
            if (!std::isfinite(v) || v < 0.0) return "column " + d.header[c] + " has a negative or non-finite value";
        }
    }
    return "";
}

struct BandResult {
    std::string name;
    RatioBand band;
    double max_spread = 0.0;
    bool pass = false;
};

struct CheckResult {
    std::string name;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool pass = false;
};

/// Measured band reported without pass/fail.
struct Record {
    std::string name;
    RatioBand band;
};

struct Summary {
    std::string scenario;
    std::vector<std::string> tasks;
    std::vector<BandResult> bands;
    std::vector<CheckResult> checks;
    std::vector<Record> records;
    std::vector<std::string> files;
    std::map<std::string, std::string> config;

    bool passed() const {
        for (const auto& b : bands) {
            if (!b.pass) return false;
        }
        for (const auto& c : checks) {
            if (!c.pass) return false;
        }
        return true;
    }

    void add_band(const std::string& name, const RatioBand& b, double max_spread) {
        bands.push_back({name, b, max_spread, b.spread <= max_spread});
    }
    void add_check(const std::string& name, double value, double lo, double hi) {
        checks.push_back({name, value, lo, hi, value >= lo && value <= hi});
    }

    nlohmann::json to_json() const {
        using nlohmann::json;
        auto band_json = [](const RatioBand& b) {
            return json{{"quantity", b.quantity},   {"min_ratio", b.min_ratio}, {"max_ratio", b.max_ratio},
                        {"spread", b.spread},       {"grid_size", b.grid_size}};
        };
        json j;
        j["scenario"] = scenario;
        j["tasks"] = tasks;
        j["passed"] = passed();
        j["files"] = files;
        j["config"] = config;
        j["bands"] = json::array();
        for (const auto& b : bands) {
            auto e = band_json(b.band);
            e["name"] = b.name;
            e["max_spread"] = b.max_spread;
            e["pass"] = b.pass;
            j["bands"].push_back(e);
        }
        j["checks"] = json::array();
        for (const auto& c : checks) {
            j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"lo", c.lo}, {"hi", c.hi}, {"pass", c.pass}});
        }
        j["records"] = json::array();
        for (const auto& r : records) {
            auto e = band_json(r.band);
            e["name"] = r.name;
            j["records"].push_back(e);
        }
        return j;
    }

    /// One line per band, check and record.
    std::string text() const {
        std::ostringstream os;
        char buf[256];
        for (const auto& b : bands) {
            std::snprintf(buf, sizeof buf, "%s band %-24s spread %10.4g (max %g) range [%.4g, %.4g] n=%zu %s\n",
                          scenario.c_str(), b.name.c_str(), b.band.spread, b.max_spread, b.band.min_ratio,
                          b.band.max_ratio, b.band.grid_size, b.pass ? "PASS" : "FAIL");
            os << buf;
        }
        for (const auto& c : checks) {
            std::snprintf(buf, sizeof buf, "%s check %-23s value %10.4g in [%g, %g] %s\n", scenario.c_str(),
                          c.name.c_str(), c.value, c.lo, c.hi, c.pass ? "PASS" : "FAIL");
            os << buf;
        }
        for (const auto& r : records) {
            std::snprintf(buf, sizeof buf, "%s record %-22s spread %10.4g range [%.4g, %.4g] n=%zu\n",
                          scenario.c_str(), r.name.c_str(), r.band.spread, r.band.min_ratio, r.band.max_ratio,
                          r.band.grid_size);
            os << buf;
        }
        return os.str();
    }
};

}  // namespace endlab
