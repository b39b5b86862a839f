#include "corrwatch/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace corrwatch {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    if (!lines.empty() && lines.front().rfind("\xEF\xBB\xBF", 0) == 0)
        lines.front().erase(0, 3);  // UTF-8 BOM
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

}  // namespace

Matrix read_stream_csv(const std::string& path, std::vector<std::string>* names) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw Error("'" + path + "' has no data rows");
    if (names) names->clear();

    std::vector<std::vector<double>> rows;
    std::size_t ncols = 0;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::size_t physical = li + 1;
        if (trim(lines[li]).empty())
            throw ParseError("empty row " + std::to_string(physical) + " in '" + path + "'",
                             physical, 1);
        auto cells = split(lines[li], ',');
        if (li == 0) {
            // header detection: a first row with any non-numeric cell names the columns
            std::vector<double> vals(cells.size());
            bool all_numeric = true;
            for (std::size_t c = 0; c < cells.size(); ++c)
                if (!parse_double(cells[c], vals[c])) {
                    all_numeric = false;
                    break;
                }
            ncols = cells.size();
            if (all_numeric) {
                rows.push_back(std::move(vals));
            } else if (names) {
                for (auto& c : cells) names->push_back(trim(c));
            }
            continue;
        }
        if (cells.size() != ncols)
            throw ParseError("row " + std::to_string(physical) + " has " +
                                 std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(ncols),
                             physical, std::min(cells.size(), ncols) + 1);
        std::vector<double> vals(ncols);
        for (std::size_t c = 0; c < ncols; ++c)
            if (!parse_double(cells[c], vals[c]))
                throw ParseError("malformed cell at row " + std::to_string(physical) + " col " +
                                     std::to_string(c + 1),
                                 physical, c + 1);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw Error("'" + path + "' has a header but no data rows");
    if (ncols < 2) throw DimensionError("stream needs at least 2 columns");

    Matrix out(static_cast<long>(ncols), static_cast<long>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t i = 0; i < ncols; ++i) out(static_cast<long>(i), static_cast<long>(t)) = rows[t][i];
    return out;
}

void write_stream_csv(const std::string& path, const Matrix& columns_are_time,
                      const std::vector<std::string>& names) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    const long p = columns_are_time.rows(), T = columns_are_time.cols();
    if (!names.empty()) {
        if (static_cast<long>(names.size()) != p)
            throw DimensionError("header has " + std::to_string(names.size()) +
                                 " names for " + std::to_string(p) + " columns");
        for (long i = 0; i < p; ++i) out << (i ? "," : "") << names[i];
        out << '\n';
    }
    for (long t = 0; t < T; ++t) {
        for (long i = 0; i < p; ++i) out << (i ? "," : "") << fmt(columns_are_time(i, t));
        out << '\n';
    }
}

void write_report(const std::string& path, const RunReport& report) {
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        if (report.rows[i].t <= report.rows[i - 1].t)
            throw Error("report rows must be strictly increasing in t");
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "t,statistic,threshold,alarmed,argmax_candidate\n";
    for (const auto& r : report.rows)
        out << r.t << ',' << fmt(r.statistic) << ',' << fmt(r.threshold) << ','
            << (r.alarmed ? 1 : 0) << ',' << r.argmax_candidate << '\n';
    out << "# first_alarm=" << report.first_alarm << '\n';
    for (const auto& [k, v] : report.config) out << "# " << k << '=' << v << '\n';
}

RunReport read_report(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || trim(lines[0]) != "t,statistic,threshold,alarmed,argmax_candidate")
        throw ParseError("'" + path + "' is not a run report", 1, 1);
    RunReport rep;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t physical = li + 1;
        const std::string& line = lines[li];
        if (!line.empty() && line[0] == '#') {
            std::string body = trim(line.substr(1));
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                throw ParseError("summary line without '=' at row " + std::to_string(physical),
                                 physical, 1);
            const std::string key = trim(body.substr(0, eq)), val = trim(body.substr(eq + 1));
            if (key == "first_alarm")
                rep.first_alarm = std::stol(val);
            else
                rep.config.emplace_back(key, val);
            continue;
        }
        auto cells = split(line, ',');
        if (cells.size() != 5)
            throw ParseError("report row " + std::to_string(physical) + " has " +
                                 std::to_string(cells.size()) + " cells, expected 5",
                             physical, std::min<std::size_t>(cells.size(), 5) + 1);
        ReportRow r;
        double v;
        if (!parse_double(cells[0], v))
            throw ParseError("malformed cell at row " + std::to_string(physical) + " col 1",
                             physical, 1);
        r.t = static_cast<long>(v);
        if (!parse_double(cells[1], r.statistic))
            throw ParseError("malformed cell at row " + std::to_string(physical) + " col 2",
                             physical, 2);
        if (!parse_double(cells[2], r.threshold))
            throw ParseError("malformed cell at row " + std::to_string(physical) + " col 3",
                             physical, 3);
        if (!parse_double(cells[3], v) || (v != 0 && v != 1))
            throw ParseError("malformed cell at row " + std::to_string(physical) + " col 4",
                             physical, 4);
        r.alarmed = v == 1;
        if (!parse_double(cells[4], v))
            throw ParseError("malformed cell at row " + std::to_string(physical) + " col 5",
                             physical, 5);
        r.argmax_candidate = static_cast<long>(v);
        rep.rows.push_back(r);
    }
    return rep;
}

namespace {

constexpr const char* kCalibrationTag = "format=corrwatch-calibration-v1";

void put(std::ostream& out, const std::string& key, const std::string& val) {
    out << key << '=' << val << '\n';
}

void put_diag(std::ostream& out, const std::string& prefix, const CalibrationDiagnostics& d) {
    put(out, prefix + "rule", d.rule);
    put(out, prefix + "crossing_rate", fmt(d.crossing_rate));
    put(out, prefix + "pooled_count", std::to_string(d.pooled_count));
    put(out, prefix + "burn_in", std::to_string(d.burn_in));
    put(out, prefix + "per_trial_length", std::to_string(d.per_trial_length));
    put(out, prefix + "level", fmt(d.level));
    put(out, prefix + "used_tail_fit", d.used_tail_fit ? "1" : "0");
    put(out, prefix + "tail_mu", fmt(d.tail_mu));
    put(out, prefix + "tail_sigma", fmt(d.tail_sigma));
    put(out, prefix + "extrapolation_flagged", d.extrapolation_flagged ? "1" : "0");
}

}  // namespace

void write_calibration(const std::string& path, const CalibrationFile& f) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << kCalibrationTag << '\n';
    put(out, "kind", to_string(f.config.kind));
    put(out, "variant", to_string(f.config.variant));
    put(out, "estimator", to_string(f.config.estimator));
    put(out, "enhancement", to_string(f.config.enhancement));
    put(out, "p", std::to_string(f.p));
    put(out, "w", std::to_string(f.config.w));
    put(out, "H", std::to_string(f.config.H));
    put(out, "lag", std::to_string(f.config.lag));
    put(out, "q", std::to_string(f.q));
    put(out, "M", std::to_string(f.M));
    put(out, "seed", std::to_string(f.seed));
    put(out, "gamma", fmt(f.gamma));
    put(out, "method", to_string(f.method));
    if (f.config.kind == StatKind::Combined) {
        put(out, "threshold_sum", fmt(f.config.threshold_sum));
        put(out, "threshold_max", fmt(f.config.threshold_max));
    } else {
        put(out, "threshold", fmt(f.config.threshold_for(f.config.kind)));
    }
    put_diag(out, "", f.diagnostics);
    if (f.has_secondary) put_diag(out, "max_", f.diagnostics_max);
}

namespace {

class KvReader {
public:
    explicit KvReader(const std::string& path) {
        const auto lines = read_lines(path);
        if (lines.empty() || trim(lines[0]) != kCalibrationTag)
            throw ParseError("'" + path + "' is not a calibration file (missing format tag)", 1,
                             1);
        for (std::size_t li = 1; li < lines.size(); ++li) {
            const std::string& line = lines[li];
            if (trim(line).empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError("line " + std::to_string(li + 1) + " is not key=value", li + 1,
                                 1);
            pairs_.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    std::string str(const std::string& key) const {
        const std::string* v = find(key);
        if (!v) throw Error("calibration file is missing key '" + key + "'");
        return *v;
    }

    double num(const std::string& key) const {
        double v;
        if (!parse_double(str(key), v))
            throw Error("calibration key '" + key + "' is not numeric");
        return v;
    }

private:
    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : pairs_)
            if (k == key) return &v;
        return nullptr;
    }
    std::vector<std::pair<std::string, std::string>> pairs_;
};

CalibrationDiagnostics read_diag(const KvReader& kv, const std::string& prefix) {
    CalibrationDiagnostics d;
    d.rule = kv.str(prefix + "rule");
    d.crossing_rate = kv.num(prefix + "crossing_rate");
    d.pooled_count = static_cast<long>(kv.num(prefix + "pooled_count"));
    d.burn_in = static_cast<int>(kv.num(prefix + "burn_in"));
    d.per_trial_length = static_cast<long>(kv.num(prefix + "per_trial_length"));
    d.level = kv.num(prefix + "level");
    d.used_tail_fit = kv.num(prefix + "used_tail_fit") != 0;
    d.tail_mu = kv.num(prefix + "tail_mu");
    d.tail_sigma = kv.num(prefix + "tail_sigma");
    d.extrapolation_flagged = kv.num(prefix + "extrapolation_flagged") != 0;
    return d;
}

}  // namespace

CalibrationFile read_calibration(const std::string& path) {
    KvReader kv(path);
    CalibrationFile f;
    f.config.kind = stat_kind_from_string(kv.str("kind"));
    f.config.variant = variant_from_string(kv.str("variant"));
    f.config.estimator = estimator_mode_from_string(kv.str("estimator"));
    f.config.enhancement = enhancement_from_string(kv.str("enhancement"));
    f.p = static_cast<int>(kv.num("p"));
    f.config.w = static_cast<int>(kv.num("w"));
    f.config.H = static_cast<int>(kv.num("H"));
    f.config.lag = static_cast<int>(kv.num("lag"));
    f.q = static_cast<long>(kv.num("q"));
    f.M = static_cast<long>(kv.num("M"));
    f.seed = static_cast<std::uint64_t>(kv.num("seed"));
    f.gamma = kv.num("gamma");
    f.method = calibration_method_from_string(kv.str("method"));
    if (f.config.kind == StatKind::Combined) {
        f.config.threshold_sum = kv.num("threshold_sum");
        f.config.threshold_max = kv.num("threshold_max");
    } else if (f.config.kind == StatKind::Sum) {
        f.config.threshold_sum = kv.num("threshold");
    } else {
        f.config.threshold_max = kv.num("threshold");
    }
    f.diagnostics = read_diag(kv, "");
    f.has_secondary = kv.has("max_rule");
    if (f.has_secondary) f.diagnostics_max = read_diag(kv, "max_");
    return f;
}

void write_experiment_csv(const std::string& path, const ExperimentResult& result) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "seed,stopping_time,censored\n";
    for (std::size_t i = 0; i < result.stopping_times.size(); ++i)
        out << result.seeds[i] << ',' << result.stopping_times[i] << ','
            << (result.censored[i] ? 1 : 0) << '\n';
    out << "# metric=" << (result.metric == Metric::Arl ? "arl" : "edd") << '\n';
    out << "# mean=" << fmt(result.mean) << '\n';
    out << "# std_error=" << fmt(result.std_error) << '\n';
    out << "# replications=" << result.replications << '\n';
    out << "# n_censored=" << result.n_censored << '\n';
}

}  // namespace corrwatch
