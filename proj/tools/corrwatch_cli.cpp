// corrwatch command-line driver: calibrate / detect / simulate / arl-theory.
//
// Every command takes a single --seed; calibration trials, replications and
// synthetic-column draws use sub-seeds derived from it by splitmix64 steps
// (derive_seed(master, purpose_id)). Identical invocations produce identical
// files.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "corrwatch/corrwatch.hpp"

namespace cw = corrwatch;

namespace {

// command-line mistakes that CLI11 cannot catch itself (conflicting flags,
// unknown enum values); mapped to exit code 1
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// unreadable/unwritable input files; mapped to exit code 2
struct FileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

cw::Matrix load_csv(const std::string& path, std::vector<std::string>* names = nullptr) {
    try {
        return cw::read_stream_csv(path, names);
    } catch (const cw::ParseError&) {
        throw;
    } catch (const cw::Error& e) {
        throw FileError(e.what());
    }
}

cw::CalibrationFile load_calibration(const std::string& path) {
    try {
        return cw::read_calibration(path);
    } catch (const cw::ParseError&) {
        throw;
    } catch (const cw::Error& e) {
        throw FileError(e.what());
    }
}

template <class F>
auto parsed(F&& f, const std::string& s) {
    try {
        return f(s);
    } catch (const cw::Error& e) {
        throw UsageError(e.what());
    }
}

std::string fmtd(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

// ---- shared flag block -----------------------------------------------------

struct StatFlags {
    std::string kind = "sum";
    std::string variant = "wl";
    std::string enhancement = "none";
    std::string estimator = "centered";
    int w = 20, H = 100, lag = 1;
    double noise_margin = 0;

    void attach(CLI::App* cmd, bool with_margin = true) {
        cmd->add_option("--kind", kind, "Statistic kind: sum|max|combined")
            ->capture_default_str();
        cmd->add_option("--variant", variant, "Window policy: wl|st|full")
            ->capture_default_str();
        cmd->add_option("--enhancement", enhancement,
                        "Window augmentation: none|smote|knockoff (wl only)")
            ->capture_default_str();
        cmd->add_option("--estimator", estimator, "Correlation estimator: centered|known-mean")
            ->capture_default_str();
        cmd->add_option("-w,--window", w, "Sliding window size w")->capture_default_str();
        cmd->add_option("-H,--reference-size", H, "Reference sample count H (weights use H)")
            ->capture_default_str();
        cmd->add_option("--lag", lag, "Evaluate every lag-th step after t = w")
            ->capture_default_str();
        if (with_margin)
            cmd->add_option("--noise-margin", noise_margin,
                            "Extra crossing excess required before alarming")
                ->capture_default_str();
    }

    cw::DetectorConfig config() const {
        cw::DetectorConfig cfg;
        cfg.kind = parsed(cw::stat_kind_from_string, kind);
        cfg.variant = parsed(cw::variant_from_string, variant);
        cfg.enhancement = parsed(cw::enhancement_from_string, enhancement);
        cfg.estimator = parsed(cw::estimator_mode_from_string, estimator);
        cfg.w = w;
        cfg.H = H;
        cfg.lag = lag;
        cfg.noise_margin = noise_margin;
        if (cfg.enhancement != cw::Enhancement::None && cfg.variant != cw::Variant::WindowLimited)
            throw UsageError("--enhancement requires --variant wl");
        return cfg;
    }
};

// replicate Detector::is_evaluation_step for report filtering
bool evaluation_step(const cw::DetectorConfig& cfg, long t) {
    if (cfg.lag == 1) return cfg.variant == cw::Variant::Shewhart ? t >= cfg.w + 1 : t >= 3;
    return t >= cfg.w + cfg.lag && (t - cfg.w) % cfg.lag == 0;
}

// ---- calibrate --------------------------------------------------------------

struct CalibrateCmd {
    std::string input, out;
    StatFlags stat;
    double gamma = 0;
    int q = 1000;
    long M = 0;  // 0 = all rows after the reference block
    std::uint64_t seed = 12345;

    void attach(CLI::App& app) {
        auto* cmd = app.add_subcommand(
            "calibrate", "Sign-flip threshold selection from a pre-change CSV");
        cmd->add_option("--input", input,
                        "CSV with the reference block (first H+1 rows) followed by "
                        "pre-change rows used for the sign-flip trials")
            ->required();
        cmd->add_option("--out", out, "Calibration file to write")->required();
        stat.attach(cmd, /*with_margin=*/false);
        cmd->add_option("--gamma", gamma, "Target average run length")->required();
        cmd->add_option("-q,--trials", q, "Number of sign-flip trials")->capture_default_str();
        cmd->add_option("-M,--flip-length", M,
                        "Pre-change rows per trial (default: all rows after the reference)")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "Master RNG seed")->capture_default_str();
        cmd->callback([this] { run(); });
    }

    void run() const {
        if (gamma < 2) throw UsageError("--gamma must be at least 2");
        if (q < 1) throw UsageError("--trials must be positive");
        cw::DetectorConfig cfg = stat.config();
        if (cfg.variant == cw::Variant::Full)
            throw UsageError("calibrate needs a window-limited or Shewhart variant");

        const cw::Matrix data = load_csv(input);
        const int p = static_cast<int>(data.rows());
        cfg.validate(p);
        if (data.cols() < cfg.H + 1)
            throw cw::InsufficientDataError(
                "input has " + std::to_string(data.cols()) + " rows; the reference block needs H+1 = " +
                std::to_string(cfg.H + 1));
        const cw::Matrix ref_block = data.leftCols(cfg.H + 1);
        long avail = data.cols() - (cfg.H + 1);
        long m = M > 0 ? M : avail;
        if (m > avail)
            throw cw::InsufficientDataError("requested M=" + std::to_string(m) + " flip rows, only " +
                                            std::to_string(avail) + " present after the reference");
        if (m < cfg.w + 2)
            throw cw::InsufficientDataError(
                "flip data too short: need more than w+1 = " + std::to_string(cfg.w + 1) +
                " rows after the reference block");
        const cw::Matrix flip = data.middleCols(cfg.H + 1, m);

        const cw::ReferenceModel ref = cw::build_reference(ref_block, cfg.estimator);

        cw::CalibrationFile file;
        file.p = p;
        file.q = q;
        file.M = m;
        file.gamma = gamma;
        file.seed = seed;
        file.config = cfg;

        if (cfg.kind == cw::StatKind::Combined) {
            cw::DetectorConfig cs = cfg, cm = cfg;
            cs.kind = cw::StatKind::Sum;
            cm.kind = cw::StatKind::Max;
            std::vector<cw::SignFlipTrial> ts, tm;
            if (cfg.enhancement == cw::Enhancement::None) {
                std::mt19937_64 rng(cw::derive_seed(seed, 1));
                auto both = cw::signflip_sequences_multi(flip, ref, {cs, cm}, q, rng);
                ts = std::move(both[0]);
                tm = std::move(both[1]);
            } else {
                // identical seeding gives identical flips and synthetic draws
                std::mt19937_64 r1(cw::derive_seed(seed, 1)), r2(cw::derive_seed(seed, 1));
                ts = cw::signflip_sequences(flip, ref, cs, q, r1);
                tm = cw::signflip_sequences(flip, ref, cm, q, r2);
            }
            auto rs = cw::threshold_from_sequences(ts, gamma, cfg.w);
            auto rm = cw::threshold_from_sequences(tm, gamma, cfg.w);
            file.config.threshold_sum = rs.threshold;
            file.config.threshold_max = rm.threshold;
            file.method = rs.method;
            file.diagnostics = rs.diagnostics;
            file.diagnostics_max = rm.diagnostics;
            file.has_secondary = true;
            echo("sum", rs);
            echo("max", rm);
        } else {
            std::mt19937_64 rng(cw::derive_seed(seed, 1));
            auto trials = cw::signflip_sequences(flip, ref, cfg, q, rng);
            auto res = cw::threshold_from_sequences(trials, gamma, cfg.w);
            if (cfg.kind == cw::StatKind::Max)
                file.config.threshold_max = res.threshold;
            else
                file.config.threshold_sum = res.threshold;
            file.method = res.method;
            file.diagnostics = res.diagnostics;
            echo(stat.kind.c_str(), res);
        }
        cw::write_calibration(out, file);
        std::printf("wrote %s\n", out.c_str());
    }

    static void echo(const char* label, const cw::CalibrationResult& r) {
        const auto& d = r.diagnostics;
        std::printf("%s: threshold %.6g at gamma %.6g (%s, rule %s)\n", label, r.threshold,
                    r.gamma, cw::to_string(r.method).c_str(), d.rule.c_str());
        std::printf("  pooled %ld values/trial after burn-in %d, crossing rate %.3g\n",
                    d.per_trial_length, d.burn_in, d.crossing_rate);
        if (d.used_tail_fit)
            std::printf("  tail extrapolation used (mu %.6g, sigma %.6g)%s\n", d.tail_mu,
                        d.tail_sigma, d.extrapolation_flagged ? " [flagged: far beyond data]" : "");
    }
};

// ---- detect ------------------------------------------------------------------

struct DetectCmd {
    std::string stream_path, reference_path, calibration_path, out;
    std::string subsets_path, grid, block;
    int stride = 1;
    bool keep_going = false;
    StatFlags stat;
    std::vector<double> threshold_sum_opt, threshold_max_opt;
    std::uint64_t seed = 12345;
    CLI::App* cmd = nullptr;

    void attach(CLI::App& app) {
        cmd = app.add_subcommand("detect", "Run the detector over a stream CSV");
        cmd->add_option("--stream", stream_path, "CSV of observations, rows = time")->required();
        cmd->add_option("--reference", reference_path, "CSV with the H+1 reference rows")
            ->required();
        cmd->add_option("--calibration", calibration_path,
                        "Calibration file (supplies config and thresholds)");
        cmd->add_option("--out", out, "Report CSV to write")->required();
        stat.attach(cmd);
        cmd->add_option("--threshold-sum", threshold_sum_opt,
                        "Override the sum-statistic threshold b1")
            ->expected(1);
        cmd->add_option("--threshold-max", threshold_max_opt,
                        "Override the max-statistic threshold b2")
            ->expected(1);
        cmd->add_option("--subsets", subsets_path,
                        "Subset-scan file: one subset per line, 1-based column indices");
        cmd->add_option("--grid", grid, "Subset-scan grid ROWSxCOLS (variables numbered row-major)");
        cmd->add_option("--block", block, "Block RxC slid over the grid");
        cmd->add_option("--stride", stride, "Block stride (1 = sliding, block size = tiling)")
            ->capture_default_str();
        cmd->add_flag("--continue", keep_going, "Keep reporting after the first alarm");
        cmd->add_option("--seed", seed, "Master RNG seed (synthetic augmentation draws)")
            ->capture_default_str();
        cmd->callback([this] { run(); });
    }

    void run() const {
        std::optional<cw::CalibrationFile> calib;
        if (!calibration_path.empty()) calib = load_calibration(calibration_path);

        // calibration file supplies defaults; explicit flags win
        cw::DetectorConfig cfg = calib ? calib->config : cw::DetectorConfig{};
        if (!calib || cmd->count("--kind")) cfg.kind = parsed(cw::stat_kind_from_string, stat.kind);
        if (!calib || cmd->count("--variant"))
            cfg.variant = parsed(cw::variant_from_string, stat.variant);
        if (!calib || cmd->count("--enhancement"))
            cfg.enhancement = parsed(cw::enhancement_from_string, stat.enhancement);
        if (!calib || cmd->count("--estimator"))
            cfg.estimator = parsed(cw::estimator_mode_from_string, stat.estimator);
        if (!calib || cmd->count("--window")) cfg.w = stat.w;
        if (!calib || cmd->count("--reference-size")) cfg.H = stat.H;
        if (!calib || cmd->count("--lag")) cfg.lag = stat.lag;
        cfg.noise_margin = stat.noise_margin;
        if (cfg.enhancement != cw::Enhancement::None && cfg.variant != cw::Variant::WindowLimited)
            throw UsageError("--enhancement requires --variant wl");
        if (!threshold_sum_opt.empty()) cfg.threshold_sum = threshold_sum_opt[0];
        if (!threshold_max_opt.empty()) cfg.threshold_max = threshold_max_opt[0];

        const bool scan = !subsets_path.empty() || !grid.empty();
        if (scan) {
            if (!subsets_path.empty() && !grid.empty())
                throw UsageError("give either --subsets or --grid, not both");
            if (cfg.enhancement != cw::Enhancement::None)
                throw UsageError("subset scan does not take --enhancement");
            if (cmd->count("--variant") && cfg.variant != cw::Variant::Shewhart)
                throw UsageError("subset scan is a Shewhart-window statistic (--variant st)");
            cfg.kind = cw::StatKind::Sum;
            cfg.variant = cw::Variant::Shewhart;
        }
        const bool need_max = cfg.kind != cw::StatKind::Sum;  // max or combined
        const bool need_sum = cfg.kind != cw::StatKind::Max;
        if ((need_sum && cfg.threshold_sum <= 0) || (need_max && cfg.threshold_max <= 0))
            throw UsageError("no threshold: give --calibration or --threshold-sum/--threshold-max");

        const cw::Matrix ref_block = load_csv(reference_path);
        const int p = static_cast<int>(ref_block.rows());
        const bool h_pinned = calib || cmd->count("--reference-size");
        if (h_pinned) {
            if (ref_block.cols() != cfg.H + 1)
                throw cw::DimensionError("reference file has " + std::to_string(ref_block.cols()) +
                                         " rows, configuration expects H+1 = " +
                                         std::to_string(cfg.H + 1));
        } else {
            cfg.H = static_cast<int>(ref_block.cols()) - 1;
        }
        if (calib && calib->p != p)
            throw cw::DimensionError("calibration was computed for p=" + std::to_string(calib->p) +
                                     ", reference has p=" + std::to_string(p));
        cfg.validate(p);
        const cw::ReferenceModel ref = cw::build_reference(ref_block, cfg.estimator);

        const cw::Matrix stream = load_csv(stream_path);
        if (stream.rows() != p)
            throw cw::DimensionError("stream has p=" + std::to_string(stream.rows()) +
                                     " columns, reference has p=" + std::to_string(p));

        cw::RunReport report;
        echo_config(report, cfg, p);
        if (scan)
            run_scan(report, ref, cfg, stream, p);
        else
            run_detector(report, ref, cfg, stream);
        cw::write_report(out, report);
        if (report.first_alarm >= 0)
            std::printf("first alarm at t = %ld\n", report.first_alarm);
        else
            std::printf("no alarm in %ld steps\n", static_cast<long>(stream.cols()));
        std::printf("wrote %s\n", out.c_str());
    }

    void run_detector(cw::RunReport& report, const cw::ReferenceModel& ref,
                      const cw::DetectorConfig& cfg, const cw::Matrix& stream) const {
        cw::Detector det(ref, cfg, cw::derive_seed(seed, 2));
        for (long t = 1; t <= stream.cols(); ++t) {
            auto st = det.step(stream.col(t - 1));
            if (!evaluation_step(cfg, t)) continue;
            double bar = cfg.kind == cw::StatKind::Combined ? 1.0 : cfg.threshold_for(cfg.kind);
            report.rows.push_back({t, st.statistic, bar, st.alarmed, st.argmax_candidate});
            if (st.alarmed && report.first_alarm < 0) report.first_alarm = t;
            if (st.alarmed && !keep_going) break;
        }
    }

    void run_scan(cw::RunReport& report, const cw::ReferenceModel& ref,
                  const cw::DetectorConfig& cfg, const cw::Matrix& stream, int p) const {
        cw::SubsetSpec spec = load_subsets(p);
        spec.validate(p);
        report.config.emplace_back("subsets", std::to_string(spec.subsets.size()));
        cw::Matrix window(p, cfg.w + 1);
        for (long t = 1; t <= stream.cols(); ++t) {
            if (t > cfg.w + 1) window.leftCols(cfg.w) = window.rightCols(cfg.w).eval();
            window.col(std::min<long>(t, cfg.w + 1) - 1) = stream.col(t - 1);
            if (t < cfg.w + 1 || !evaluation_step(cfg, t)) continue;
            auto res = cw::subset_scan(ref, window, spec, cfg.estimator);
            bool alarmed = res.value >= cfg.threshold_sum + cfg.noise_margin;
            // argmax column carries the 1-based winning subset
            report.rows.push_back({t, res.value, cfg.threshold_sum, alarmed,
                                   static_cast<long>(res.winning_index) + 1});
            if (alarmed && report.first_alarm < 0) report.first_alarm = t;
            if (alarmed && !keep_going) break;
        }
    }

    cw::SubsetSpec load_subsets(int p) const {
        cw::SubsetSpec spec;
        if (!subsets_path.empty()) {
            std::ifstream in(subsets_path);
            if (!in) throw FileError("cannot read '" + subsets_path + "'");
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                std::istringstream ls(line);
                std::vector<int> subset;
                long idx;
                while (ls >> idx) {
                    if (idx < 1 || idx > p)
                        throw cw::ParseError("subset index " + std::to_string(idx) +
                                                 " outside 1.." + std::to_string(p),
                                             lineno, subset.size() + 1);
                    subset.push_back(static_cast<int>(idx) - 1);
                }
                if (!ls.eof())
                    throw cw::ParseError("non-numeric subset entry", lineno, subset.size() + 1);
                if (!subset.empty()) spec.subsets.push_back(std::move(subset));
            }
            return spec;
        }
        int gr, gc, br, bc;
        parse_dims(grid, gr, gc, "--grid");
        parse_dims(block, br, bc, "--block");
        if (br > gr || bc > gc) throw UsageError("--block does not fit inside --grid");
        if (stride < 1) throw UsageError("--stride must be positive");
        if (static_cast<long>(gr) * gc != p)
            throw cw::DimensionError("--grid " + grid + " has " + std::to_string(gr * gc) +
                                     " nodes, data has p=" + std::to_string(p));
        for (int a = 0; a + br <= gr; a += stride)
            for (int b = 0; b + bc <= gc; b += stride) {
                std::vector<int> subset;
                subset.reserve(static_cast<std::size_t>(br) * bc);
                for (int i = a; i < a + br; ++i)
                    for (int j = b; j < b + bc; ++j) subset.push_back(i * gc + j);
                spec.subsets.push_back(std::move(subset));
            }
        return spec;
    }

    static void parse_dims(const std::string& s, int& rows, int& cols, const char* flag) {
        if (s.empty()) throw UsageError(std::string(flag) + " is required for grid subsets");
        auto x = s.find('x');
        if (x == std::string::npos) x = s.find('X');
        try {
            if (x == std::string::npos) throw std::invalid_argument("no separator");
            rows = std::stoi(s.substr(0, x));
            cols = std::stoi(s.substr(x + 1));
        } catch (const std::exception&) {
            throw UsageError(std::string(flag) + " wants ROWSxCOLS, got '" + s + "'");
        }
        if (rows < 1 || cols < 1) throw UsageError(std::string(flag) + " dimensions must be positive");
    }

    void echo_config(cw::RunReport& report, const cw::DetectorConfig& cfg, int p) const {
        auto& c = report.config;
        c.emplace_back("stream", stream_path);
        c.emplace_back("reference", reference_path);
        if (!calibration_path.empty()) c.emplace_back("calibration", calibration_path);
        c.emplace_back("p", std::to_string(p));
        c.emplace_back("kind", cw::to_string(cfg.kind));
        c.emplace_back("variant", cw::to_string(cfg.variant));
        c.emplace_back("enhancement", cw::to_string(cfg.enhancement));
        c.emplace_back("estimator", cw::to_string(cfg.estimator));
        c.emplace_back("w", std::to_string(cfg.w));
        c.emplace_back("H", std::to_string(cfg.H));
        c.emplace_back("lag", std::to_string(cfg.lag));
        if (cfg.kind != cw::StatKind::Max) c.emplace_back("threshold_sum", fmtd(cfg.threshold_sum));
        if (cfg.kind != cw::StatKind::Sum) c.emplace_back("threshold_max", fmtd(cfg.threshold_max));
        if (cfg.noise_margin > 0) c.emplace_back("noise_margin", fmtd(cfg.noise_margin));
        c.emplace_back("seed", std::to_string(seed));
        c.emplace_back("stop_at_first_alarm", keep_going ? "0" : "1");
    }
};

// ---- simulate ----------------------------------------------------------------

struct MethodSpec {
    std::string token;       // echoed in the output
    bool cusum = false;
    cw::DetectorConfig cfg;  // ignored for cusum
};

struct SimulateCmd {
    int case_id = 1, p = 50;
    double r = 0.5;
    bool student_t = false;
    std::vector<double> gammas;
    std::vector<std::string> methods{"wl-sum"};
    std::string metric = "edd";
    std::string calibration = "sim";
    std::string moments = "auto";
    int q = 1000;
    long M = 1000;
    int replications = 1000;
    long max_steps = 0;  // 0 = 20 * gamma
    int mc_windows = 20000;
    StatFlags stat;  // w/H/lag/estimator defaults shared by every method
    std::string out;
    std::uint64_t seed = 12345;

    void attach(CLI::App& app) {
        auto* cmd = app.add_subcommand(
            "simulate", "Monte Carlo ARL/EDD table for one scenario, one row per (gamma, method)");
        cmd->add_option("--case", case_id, "Benchmark case 1-4")->capture_default_str();
        cmd->add_option("--p", p, "Dimension")->capture_default_str();
        cmd->add_option("--r", r, "Post-change off-diagonal level")->capture_default_str();
        cmd->add_flag("--student-t", student_t, "t5 innovations instead of Gaussian");
        cmd->add_option("--gamma", gammas, "Target ARL values (comma separated)")
            ->required()
            ->delimiter(',');
        cmd->add_option("--method", methods,
                        "Methods: wl-sum|st-sum|wl-max|st-max|combined|cusum, with optional "
                        "+smote / +knockoff on wl kinds (repeatable)")
            ->delimiter(',')
            ->capture_default_str();
        cmd->add_option("--metric", metric, "edd|arl|both")->capture_default_str();
        cmd->add_option("--calibration", calibration,
                        "sim (sign-flip trials) or theory (run-length inversion)")
            ->capture_default_str();
        cmd->add_option("--moments", moments,
                        "Moments for theory calibration: auto|analytic|mc")
            ->capture_default_str();
        cmd->add_option("-q,--trials", q, "Sign-flip trials per method")->capture_default_str();
        cmd->add_option("-M,--flip-length", M, "Pre-change stream length per trial")
            ->capture_default_str();
        cmd->add_option("--replications", replications, "Monte Carlo replications per row")
            ->capture_default_str();
        cmd->add_option("--max-steps", max_steps, "Censoring horizon (default 20*gamma)")
            ->capture_default_str();
        cmd->add_option("--mc-windows", mc_windows, "Windows for Monte Carlo moments")
            ->capture_default_str();
        stat.attach(cmd, /*with_margin=*/false);
        // --kind/--variant/--enhancement are covered by --method tokens here
        cmd->get_option("--kind")->group("");
        cmd->get_option("--variant")->group("");
        cmd->get_option("--enhancement")->group("");
        cmd->add_option("--out", out, "Output CSV")->required();
        cmd->add_option("--seed", seed, "Master RNG seed")->capture_default_str();
        cmd->callback([this] { run(); });
    }

    MethodSpec parse_method(const std::string& tok) const {
        MethodSpec m;
        m.token = tok;
        if (tok == "cusum") {
            m.cusum = true;
            return m;
        }
        std::string base = tok, enh;
        if (auto plus = tok.find('+'); plus != std::string::npos) {
            base = tok.substr(0, plus);
            enh = tok.substr(plus + 1);
        }
        cw::DetectorConfig cfg;
        cfg.w = stat.w;
        cfg.H = stat.H;
        cfg.lag = stat.lag;
        cfg.estimator = parsed(cw::estimator_mode_from_string, stat.estimator);
        if (base == "wl-sum" || base == "st-sum" || base == "full-sum")
            cfg.kind = cw::StatKind::Sum;
        else if (base == "wl-max" || base == "st-max" || base == "full-max")
            cfg.kind = cw::StatKind::Max;
        else if (base == "combined")
            cfg.kind = cw::StatKind::Combined;
        else
            throw UsageError("unknown method '" + tok + "'");
        cfg.variant = base.rfind("st-", 0) == 0  ? cw::Variant::Shewhart
                      : base.rfind("full-", 0) == 0 ? cw::Variant::Full
                                                    : cw::Variant::WindowLimited;
        if (!enh.empty()) {
            cfg.enhancement = parsed(cw::enhancement_from_string, enh);
            if (cfg.variant != cw::Variant::WindowLimited)
                throw UsageError("enhancement suffix needs a wl method: '" + tok + "'");
        }
        if (cfg.variant == cw::Variant::Full)
            throw UsageError("full-window variants are not calibratable here; use wl or st");
        m.cfg = cfg;
        return m;
    }

    void run() const {
        if (metric != "edd" && metric != "arl" && metric != "both")
            throw UsageError("--metric wants edd|arl|both");
        if (calibration != "sim" && calibration != "theory")
            throw UsageError("--calibration wants sim|theory");
        if (moments != "auto" && moments != "analytic" && moments != "mc")
            throw UsageError("--moments wants auto|analytic|mc");
        if (replications < 1) throw UsageError("--replications must be positive");
        for (double g : gammas)
            if (g < 2) throw UsageError("--gamma values must be at least 2");

        auto spec = cw::ScenarioSpec::make(case_id, p, r, student_t);
        if (calibration == "theory" && student_t)
            throw UsageError("theory calibration assumes Gaussian pre-change data; use sim");

        std::vector<MethodSpec> specs;
        specs.reserve(methods.size());
        for (const auto& tok : methods) specs.push_back(parse_method(tok));

        std::FILE* f = std::fopen(out.c_str(), "w");
        if (!f) throw cw::Error("cannot write '" + out + "'");
        std::fprintf(f, "# scenario: case %d, p=%d, r=%g, %s\n", case_id, p, r,
                     student_t ? "student-t(5)" : "gaussian");
        std::fprintf(f, "# calibration: %s, q=%d, M=%ld, replications=%d, seed=%" PRIu64 "\n",
                     calibration.c_str(), q, M, replications, seed);
        std::fprintf(f,
                     "gamma,method,threshold_sum,threshold_max,edd,edd_se,edd_censored,"
                     "arl,arl_se,arl_censored,replications\n");

        for (std::size_t mi = 0; mi < specs.size(); ++mi) {
            const auto& m = specs[mi];
            // trials are reused across gammas; runs share seeds across methods
            std::vector<cw::SignFlipTrial> trials, trials_max;
            if (calibration == "sim") {
                std::uint64_t cal_seed = cw::derive_seed(seed, 100 + mi);
                if (m.cusum) {
                    trials = cw::cusum_trial_sequences(spec, q, M, cal_seed);
                } else if (m.cfg.kind == cw::StatKind::Combined) {
                    cw::DetectorConfig cs = m.cfg, cm = m.cfg;
                    cs.kind = cw::StatKind::Sum;
                    cm.kind = cw::StatKind::Max;
                    auto both = cw::fresh_trial_sequences_multi(spec, {cs, cm}, q, M, cal_seed);
                    trials = std::move(both[0]);
                    trials_max = std::move(both[1]);
                } else {
                    trials = cw::fresh_trial_sequences(spec, m.cfg, q, M, cal_seed);
                }
            }
            for (double gamma : gammas) {
                double b1 = 0, b2 = 0;
                if (calibration == "sim") {
                    b1 = cw::threshold_from_sequences(trials, gamma, m.cusum ? stat.w : m.cfg.w)
                             .threshold;
                    if (!trials_max.empty())
                        b2 = cw::threshold_from_sequences(trials_max, gamma, m.cfg.w).threshold;
                } else {
                    b1 = theory_threshold(m, gamma);
                }
                emit_row(f, spec, m, gamma, b1, b2);
            }
        }
        std::fclose(f);
        std::printf("wrote %s\n", out.c_str());
    }

    double theory_threshold(const MethodSpec& m, double gamma) const {
        if (m.cusum)
            throw UsageError("cusum has no run-length inversion here; use --calibration sim");
        if (m.cfg.kind == cw::StatKind::Combined)
            throw UsageError("combined thresholds come from sign-flip trials; use --calibration sim");
        auto spec = cw::ScenarioSpec::make(case_id, p, r, false);
        bool homogeneous = spec.R0.isIdentity(0.0);
        std::string mode = moments;
        if (mode == "auto") mode = (m.cfg.kind == cw::StatKind::Sum && homogeneous) ? "analytic" : "mc";
        cw::Moments mom;
        if (mode == "analytic") {
            if (m.cfg.kind != cw::StatKind::Sum)
                throw UsageError("analytic moments cover sum statistics only; use --moments mc");
            if (!homogeneous)
                throw UsageError("analytic moments need an identity pre-change correlation; use --moments mc");
            mom = cw::prechange_moments_analytic(m.cfg.kind, m.cfg.variant,
                                                 cw::MomentSpec::gaussian(0, 0), p, m.cfg.w,
                                                 m.cfg.H, m.cfg.estimator);
        } else {
            mom = cw::prechange_moments_mc(m.cfg.kind, m.cfg.variant, spec.R0, m.cfg.w, m.cfg.H,
                                           m.cfg.estimator, mc_windows, cw::derive_seed(seed, 55));
        }
        return cw::threshold_from_arl(gamma, mom, m.cfg.w);
    }

    void emit_row(std::FILE* f, const cw::ScenarioSpec& spec, const MethodSpec& m, double gamma,
                  double b1, double b2) const {
        long horizon = max_steps > 0 ? max_steps : static_cast<long>(20 * gamma);
        cw::MonitorFactory factory;
        if (m.cusum) {
            factory = cw::cusum_factory(spec, b1);
        } else {
            cw::DetectorConfig cfg = m.cfg;
            cfg.threshold_sum = b1;
            if (cfg.kind == cw::StatKind::Combined)
                cfg.threshold_max = b2;
            else if (cfg.kind == cw::StatKind::Max)
                cfg.threshold_sum = 0, cfg.threshold_max = b1;
            factory = cw::detector_factory(spec, cfg);
        }
        std::string edd_cols = ",,", arl_cols = ",,";
        char buf[128];
        if (metric != "arl") {
            auto e = cw::run_edd(factory, spec, replications, horizon, cw::derive_seed(seed, 7));
            std::snprintf(buf, sizeof buf, "%.6g,%.4g,%d", e.mean, e.std_error, e.n_censored);
            edd_cols = buf;
        }
        if (metric != "edd") {
            auto a = cw::run_arl(factory, spec, replications, horizon, cw::derive_seed(seed, 8));
            std::snprintf(buf, sizeof buf, "%.6g,%.4g,%d", a.mean, a.std_error, a.n_censored);
            arl_cols = buf;
        }
        std::fprintf(f, "%.10g,%s,%.10g,%s,%s,%s,%d\n", gamma, m.token.c_str(), b1,
                     b2 > 0 ? fmtd(b2).c_str() : "", edd_cols.c_str(), arl_cols.c_str(),
                     replications);
    }
};

// ---- arl-theory ----------------------------------------------------------------

struct ArlTheoryCmd {
    int p = 50;
    StatFlags stat;
    double rho0 = 0;
    std::string moments = "analytic";
    std::string reference_path;
    int mc_windows = 20000;
    std::vector<double> gamma_opt, b_opt;
    std::uint64_t seed = 12345;
    CLI::App* cmd = nullptr;

    void attach(CLI::App& app) {
        cmd = app.add_subcommand(
            "arl-theory", "Run-length approximation: gamma -> threshold b, or b -> gamma");
        cmd->add_option("--p", p, "Dimension")->capture_default_str();
        stat.attach(cmd, /*with_margin=*/false);
        cmd->get_option("--enhancement")->group("");
        cmd->get_option("--lag")->group("");
        cmd->add_option("--rho0", rho0, "Pre-change equicorrelation level")->capture_default_str();
        cmd->add_option("--moments", moments, "analytic|mc")->capture_default_str();
        cmd->add_option("--reference", reference_path,
                        "Reference CSV; its sample correlation replaces the equicorrelation "
                        "model for mc moments");
        cmd->add_option("--mc-windows", mc_windows, "Windows for Monte Carlo moments")
            ->capture_default_str();
        cmd->add_option("--gamma", gamma_opt, "Target ARL (prints the threshold)")->expected(1);
        cmd->add_option("--b", b_opt, "Threshold (prints the approximate ARL)")->expected(1);
        cmd->add_option("--seed", seed, "Master RNG seed (mc moments)")->capture_default_str();
        cmd->callback([this] { run(); });
    }

    void run() const {
        if (gamma_opt.empty() == b_opt.empty())
            throw UsageError("give exactly one of --gamma or --b");
        cw::DetectorConfig cfg = stat.config();
        if (cfg.kind == cw::StatKind::Combined)
            throw UsageError("combined statistics have no single-threshold inversion");
        if (cfg.variant == cw::Variant::Full)
            throw UsageError("the approximation covers wl and st variants");

        cw::Moments mom;
        if (moments == "analytic") {
            if (cfg.kind != cw::StatKind::Sum)
                throw UsageError("analytic moments cover sum statistics only; use --moments mc");
            if (!reference_path.empty())
                throw UsageError("--reference implies data-driven moments; use --moments mc");
            cfg.validate(p);
            mom = cw::prechange_moments_analytic(cfg.kind, cfg.variant,
                                                 cw::MomentSpec::gaussian(rho0, rho0), p, cfg.w,
                                                 cfg.H, cfg.estimator);
        } else if (moments == "mc") {
            cw::Matrix R0;
            if (!reference_path.empty()) {
                const cw::Matrix block = load_csv(reference_path);
                const int file_p = static_cast<int>(block.rows());
                if (file_p < 2) throw cw::DimensionError("reference needs p >= 2");
                if (cmd->count("--p") && p != file_p)
                    throw cw::DimensionError("--p " + std::to_string(p) + " vs reference p=" +
                                             std::to_string(file_p));
                cfg.validate(file_p);
                R0 = cw::sample_correlation(block, cfg.estimator).entries;
            } else {
                cfg.validate(p);
                R0 = cw::Matrix::Constant(p, p, rho0);
                R0.diagonal().setOnes();
            }
            mom = cw::prechange_moments_mc(cfg.kind, cfg.variant, R0, cfg.w, cfg.H, cfg.estimator,
                                           mc_windows, cw::derive_seed(seed, 55));
        } else {
            throw UsageError("--moments wants analytic|mc");
        }
        std::printf("moments: mu = %.10g, sigma_d = %.10g (%s)\n", mom.mu, mom.sigma_d,
                    moments.c_str());

        if (!gamma_opt.empty()) {
            double gamma = gamma_opt[0];
            if (gamma < 2) throw UsageError("--gamma must be at least 2");
            double b = cw::threshold_from_arl(gamma, mom, cfg.w);
            double back = cw::arl_approx(cw::ArlApproxInput::make(b, mom.mu, mom.sigma_d, cfg.w));
            std::printf("gamma = %.10g -> b = %.10g\n", gamma, b);
            std::printf("round trip: ARL(b) = %.10g (relative residual %.3g)\n", back,
                        std::abs(back - gamma) / gamma);
        } else {
            double b = b_opt[0];
            double gamma = cw::arl_approx(cw::ArlApproxInput::make(b, mom.mu, mom.sigma_d, cfg.w));
            double back = cw::threshold_from_arl(gamma, mom, cfg.w);
            std::printf("b = %.10g -> gamma = %.10g\n", b, gamma);
            std::printf("round trip: b(gamma) = %.10g (relative residual %.3g)\n", back,
                        std::abs(back - b) / b);
        }
    }

};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming change detection for correlation structure"};
    app.require_subcommand(1);

    CalibrateCmd calibrate;
    DetectCmd detect;
    SimulateCmd simulate;
    ArlTheoryCmd arl_theory;
    calibrate.attach(app);
    detect.attach(app);
    simulate.attach(app);
    arl_theory.attach(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const FileError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const cw::ParseError& e) {
        std::fprintf(stderr, "data error at row %zu, column %zu: %s\n", e.row, e.col, e.what());
        return 2;
    } catch (const cw::DimensionError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const cw::InsufficientDataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const cw::DegenerateWindowError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const cw::NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const cw::Error& e) {
        // configuration-level complaints from the library (validate() and friends)
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
    return 0;
}
