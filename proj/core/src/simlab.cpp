#include "corrwatch/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace corrwatch {

namespace {

void check_psd(const Matrix& R, const std::string& name) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(R, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-10)
        throw Error(name + " is not positive semidefinite (lambda_min = " +
                    std::to_string(es.eigenvalues()(0)) + ")");
}

void fill_block(Matrix& R, int size, double rho) {
    for (int j = 0; j < size; ++j)
        for (int i = 0; i < size; ++i)
            if (i != j) R(i, j) = rho;
}

}  // namespace

std::pair<Matrix, Matrix> case_matrices(int case_id, int p, double r) {
    if (p < 4) throw Error("cases need p >= 4");
    Matrix R0 = Matrix::Identity(p, p), R1 = Matrix::Identity(p, p);
    const int half = p / 2;
    switch (case_id) {
        case 1: {
            if (r <= -1.0 / (p - 1) + 1e-9)
                throw Error("Case 1 needs r > -1/(p-1) = " + std::to_string(-1.0 / (p - 1)) +
                            " to stay positive semidefinite");
            fill_block(R1, p, r);
            break;
        }
        case 2:
            fill_block(R1, half, r);
            break;
        case 3: {
            const int k = static_cast<int>(std::floor(std::pow(p, 0.3)));
            fill_block(R0, k, -0.3);
            fill_block(R1, k, 0.9);
            break;
        }
        case 4: {
            fill_block(R0, half, 0.3);
            const int tail = p - half;
            for (int j = half; j < p; ++j)
                for (int i = half; i < p; ++i)
                    if (i != j) R1(i, j) = 0.5;
            (void)tail;
            break;
        }
        default:
            throw Error("case_id must be 1..4");
    }
    check_psd(R0, "R0");
    check_psd(R1, "R1");
    return {R0, R1};
}

double dense_level(int case_id, int p) {
    const double denom = static_cast<double>(p) * (p - 1);
    const int half = p / 2;
    switch (case_id) {
        case 1:
            return 1.0;
        case 2:
            return half * static_cast<double>(half - 1) / denom;
        case 3: {
            const int k = static_cast<int>(std::floor(std::pow(p, 0.3)));
            return k * static_cast<double>(k - 1) / denom;
        }
        case 4: {
            const int tail = p - half;
            return (half * static_cast<double>(half - 1) +
                    tail * static_cast<double>(tail - 1)) /
                   denom;
        }
        default:
            throw Error("case_id must be 1..4");
    }
}

ScenarioSpec ScenarioSpec::make(int case_id, int p, double r, bool student_t) {
    ScenarioSpec s;
    s.case_id = case_id;
    s.p = p;
    s.r = r;
    s.student_t = student_t;
    auto [R0, R1] = case_matrices(case_id, p, r);
    s.R0 = std::move(R0);
    s.R1 = std::move(R1);
    return s;
}

ScenarioSpec ScenarioSpec::custom(Matrix R0, Matrix R1, bool student_t) {
    const int p = static_cast<int>(R0.rows());
    if (R0.cols() != p || R1.rows() != p || R1.cols() != p)
        throw DimensionError("R0 and R1 must be square with equal dimensions");
    for (const Matrix* R : {&R0, &R1}) {
        if ((*R - R->transpose()).cwiseAbs().maxCoeff() > 1e-8)
            throw Error("correlation matrices must be symmetric");
        if ((R->diagonal().array() - 1.0).abs().maxCoeff() > 1e-8)
            throw Error("correlation matrices must have unit diagonal");
    }
    check_psd(R0, "R0");
    check_psd(R1, "R1");
    ScenarioSpec s;
    s.case_id = 0;
    s.p = p;
    s.student_t = student_t;
    s.R0 = std::move(R0);
    s.R1 = std::move(R1);
    return s;
}

namespace {

Matrix chol_factor(const Matrix& R, bool student_t) {
    Eigen::LLT<Matrix> llt(R);
    if (llt.info() != Eigen::Success)
        throw NumericError("correlation matrix factorization failed (not positive definite)");
    Matrix L = llt.matrixL();
    // t5 convention: scale so the mixture covariance equals R, not the scale matrix
    if (student_t) L *= std::sqrt(3.0 / 5.0);
    return L;
}

}  // namespace

StreamGen::StreamGen(const ScenarioSpec& spec, long nu, std::uint64_t seed)
    : nu_(nu), student_t_(spec.student_t), p_(spec.p), rng_(seed) {
    if (nu < 1) throw Error("change point nu must be >= 1");
    if (spec.p < 1 || spec.R0.rows() != spec.p || spec.R1.rows() != spec.p)
        throw DimensionError("scenario matrices do not match p");
    L0_ = chol_factor(spec.R0, student_t_);
    L1_ = chol_factor(spec.R1, student_t_);
}

Vector StreamGen::next() {
    ++t_;
    Vector z(p_);
    for (int i = 0; i < p_; ++i) z(i) = gauss_(rng_);
    Vector x = (t_ < nu_ ? L0_ : L1_) * z;
    if (student_t_) x /= std::sqrt(chi2_(rng_) / 5.0);
    return x;
}

Matrix gen_stream(const ScenarioSpec& spec, long nu, long length, std::uint64_t seed) {
    if (length < 1) throw Error("stream length must be >= 1");
    StreamGen gen(spec, nu, seed);
    Matrix out(spec.p, length);
    for (long t = 0; t < length; ++t) out.col(t) = gen.next();
    return out;
}

CusumOracle::CusumOracle(const Matrix& R0, const Matrix& R1, double b) : b_(b) {
    const int p = static_cast<int>(R0.rows());
    if (R0.cols() != p || R1.rows() != p || R1.cols() != p)
        throw DimensionError("R0 and R1 must be square with equal dimensions");
    Eigen::LLT<Matrix> llt0(R0), llt1(R1);
    if (llt0.info() != Eigen::Success || llt1.info() != Eigen::Success)
        throw NumericError("CUSUM oracle needs positive definite R0 and R1");
    const Matrix I = Matrix::Identity(p, p);
    const Matrix R0inv = llt0.solve(I), R1inv = llt1.solve(I);
    A_ = R0inv - R1inv;
    double logdet0 = 0, logdet1 = 0;
    for (int i = 0; i < p; ++i) {
        logdet0 += 2.0 * std::log(Matrix(llt0.matrixL())(i, i));
        logdet1 += 2.0 * std::log(Matrix(llt1.matrixL())(i, i));
    }
    log_det_ratio_ = logdet0 - logdet1;
    kl01_ = 0.5 * ((R1inv * R0).trace() - p + logdet1 - logdet0);
    kl10_ = 0.5 * ((R0inv * R1).trace() - p + logdet0 - logdet1);
}

double CusumOracle::loglik_ratio(const Vector& x) const {
    if (x.size() != A_.rows()) throw DimensionError("observation dimension mismatch");
    return 0.5 * log_det_ratio_ + 0.5 * x.dot(A_ * x);
}

std::pair<double, bool> CusumOracle::step(const Vector& x) {
    W_ = std::max(W_, 0.0) + loglik_ratio(x);
    return {W_, W_ >= b_};
}

namespace {

class DetectorMonitor : public StreamMonitor {
public:
    explicit DetectorMonitor(Detector det) : det_(std::move(det)) {}
    bool step(const Vector& x) override { return det_.step(x).alarmed; }

private:
    Detector det_;
};

class CusumMonitor : public StreamMonitor {
public:
    explicit CusumMonitor(CusumOracle oracle) : oracle_(std::move(oracle)) {}
    bool step(const Vector& x) override { return oracle_.step(x).second; }

private:
    CusumOracle oracle_;
};

ExperimentResult run_metric(Metric metric, const MonitorFactory& factory,
                            const ScenarioSpec& spec, long nu, int replications,
                            long max_steps, std::uint64_t seed) {
    if (replications < 1) throw Error("replications must be >= 1");
    if (max_steps < 1) throw Error("max_steps must be >= 1");
    ExperimentResult res;
    res.metric = metric;
    res.replications = replications;
    res.stopping_times.reserve(replications);
    for (int i = 0; i < replications; ++i) {
        const std::uint64_t rep_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        auto monitor = factory(derive_seed(rep_seed, 1));
        StreamGen gen(spec, nu, derive_seed(rep_seed, 2));
        long stop = max_steps;
        bool cens = true;
        for (long t = 1; t <= max_steps; ++t) {
            if (monitor->step(gen.next())) {
                stop = t;
                cens = false;
                break;
            }
        }
        res.seeds.push_back(rep_seed);
        res.stopping_times.push_back(stop);
        res.censored.push_back(cens ? 1 : 0);
        if (cens) ++res.n_censored;
    }
    if (res.n_censored == res.replications)
        throw Error("all replications censored at max_steps = " + std::to_string(max_steps));
    double mean = 0, m2 = 0;
    long n = 0;
    for (long st : res.stopping_times) {
        ++n;
        const double d = st - mean;
        mean += d / n;
        m2 += d * (st - mean);
    }
    res.mean = mean;
    res.std_error = n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0;
    return res;
}

}  // namespace

ExperimentResult run_arl(const MonitorFactory& factory, const ScenarioSpec& pre,
                         int replications, long max_steps, std::uint64_t seed) {
    return run_metric(Metric::Arl, factory, pre, max_steps + 1, replications, max_steps, seed);
}

ExperimentResult run_edd(const MonitorFactory& factory, const ScenarioSpec& spec,
                         int replications, long max_steps, std::uint64_t seed) {
    return run_metric(Metric::Edd, factory, spec, 1, replications, max_steps, seed);
}

ReferenceModel reference_from_scenario(const ScenarioSpec& pre, int H, EstimatorMode mode,
                                       std::uint64_t seed) {
    return build_reference(gen_stream(pre, H + 2, H + 1, seed), mode);
}

MonitorFactory detector_factory(const ScenarioSpec& pre, const DetectorConfig& cfg) {
    cfg.validate(pre.p);
    return [pre, cfg](std::uint64_t seed) -> std::unique_ptr<StreamMonitor> {
        ReferenceModel ref =
            reference_from_scenario(pre, cfg.H, cfg.estimator, derive_seed(seed, 1));
        return std::make_unique<DetectorMonitor>(
            Detector(std::move(ref), cfg, derive_seed(seed, 2)));
    };
}

MonitorFactory cusum_factory(const ScenarioSpec& spec, double b) {
    CusumOracle oracle(spec.R0, spec.R1, b);
    return [oracle](std::uint64_t) -> std::unique_ptr<StreamMonitor> {
        return std::make_unique<CusumMonitor>(oracle);
    };
}

std::vector<SignFlipTrial> fresh_trial_sequences(const ScenarioSpec& pre,
                                                 const DetectorConfig& cfg, int q, long M,
                                                 std::uint64_t seed) {
    if (q < 1) throw Error("q must be >= 1");
    std::vector<SignFlipTrial> out;
    out.reserve(q);
    for (int l = 0; l < q; ++l) {
        const std::uint64_t ts = derive_seed(seed, static_cast<std::uint64_t>(l));
        ReferenceModel ref =
            reference_from_scenario(pre, cfg.H, cfg.estimator, derive_seed(ts, 1));
        Matrix stream = gen_stream(pre, M + 1, M, derive_seed(ts, 2));
        std::mt19937_64 rng(derive_seed(ts, 3));
        auto trials = signflip_sequences(stream, ref, cfg, 1, rng);
        trials[0].trial_index = l + 1;
        out.push_back(std::move(trials[0]));
    }
    return out;
}

std::vector<std::vector<SignFlipTrial>> fresh_trial_sequences_multi(
    const ScenarioSpec& pre, const std::vector<DetectorConfig>& cfgs, int q, long M,
    std::uint64_t seed) {
    if (cfgs.empty()) throw Error("no configurations given");
    if (q < 1) throw Error("q must be >= 1");
    std::vector<std::vector<SignFlipTrial>> out(cfgs.size());
    for (auto& v : out) v.reserve(q);
    for (int l = 0; l < q; ++l) {
        const std::uint64_t ts = derive_seed(seed, static_cast<std::uint64_t>(l));
        ReferenceModel ref = reference_from_scenario(pre, cfgs.front().H,
                                                     cfgs.front().estimator,
                                                     derive_seed(ts, 1));
        Matrix stream = gen_stream(pre, M + 1, M, derive_seed(ts, 2));
        std::mt19937_64 rng(derive_seed(ts, 3));
        auto trials = signflip_sequences_multi(stream, ref, cfgs, 1, rng);
        for (std::size_t c = 0; c < cfgs.size(); ++c) {
            trials[c][0].trial_index = l + 1;
            out[c].push_back(std::move(trials[c][0]));
        }
    }
    return out;
}

std::vector<SignFlipTrial> cusum_trial_sequences(const ScenarioSpec& pre, int q, long M,
                                                 std::uint64_t seed) {
    if (q < 1) throw Error("q must be >= 1");
    if (M < 2) throw InsufficientDataError("need at least 2 samples per trial");
    std::vector<SignFlipTrial> out(q);
    for (int l = 0; l < q; ++l) {
        const std::uint64_t ts = derive_seed(seed, static_cast<std::uint64_t>(l));
        Matrix stream = gen_stream(pre, M + 1, M, derive_seed(ts, 2));
        CusumOracle oracle(pre.R0, pre.R1, std::numeric_limits<double>::infinity());
        out[l].trial_index = l + 1;
        out[l].statistic_sequence.reserve(M - 1);
        for (long t = 0; t < M; ++t) {
            const double W = oracle.step(stream.col(t)).first;
            if (t >= 1) out[l].statistic_sequence.push_back(std::max(W, 0.0));
        }
    }
    return out;
}

}  // namespace corrwatch
