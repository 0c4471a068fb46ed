#include "cmi/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>

#include "cmi/error.hpp"
#include "cmi/estimators.hpp"
#include "cmi/knn_sampler.hpp"
#include "cmi/parallel.hpp"
#include "cmi/random.hpp"

namespace cmi::experiments {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum SeedLabel : std::uint64_t { kSweepData = 101, kSweepCell, kBiasData, kBiasRep, kBiasEval };

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, end};
}

void note(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

template <typename T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("spec key '" + key + "' has the wrong type");
    }
}

void reject_unknown(const json& section, const std::set<std::string>& known, const std::string& where) {
    if (!section.is_object()) throw ConfigError("spec section '" + where + "' must be an object");
    for (const auto& [key, value] : section.items())
        if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in spec section '" + where + "'");
}

template <typename T>
bool sorted_ascending(const std::vector<T>& v) {
    return std::is_sorted(v.begin(), v.end());
}

double sigma2_sq_from_std(double sigma2) {
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw ConfigError("sigma2 must be finite and non-negative");
    return sigma2 * sigma2;
}

EstimatorConfig with_k(EstimatorConfig c, std::size_t k, std::size_t n) {
    c.k = k;
    if (c.b == 0) c.b = auto_batch_size(c, n);
    return c;
}

std::vector<std::string> config_comment(const ExperimentSpec& spec) {
    return {"# config: " + to_json(spec).dump()};
}

}  // namespace

const char* to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::sweep_sigma2: return "sweep_sigma2";
        case ExperimentKind::bias_boxplot: return "bias_boxplot";
        case ExperimentKind::single_estimate: return "single_estimate";
    }
    return "?";
}

ExperimentSpec default_spec(ExperimentKind kind) {
    ExperimentSpec s;
    s.kind = kind;
    s.estimator.b = 0;
    switch (kind) {
        case ExperimentKind::single_estimate: break;
        case ExperimentKind::sweep_sigma2:
            for (int i = 0; i <= 10; ++i) s.sigma2_values.push_back(i);
            s.k_values = {5, 20, 40};
            break;
        case ExperimentKind::bias_boxplot:
            // Multiples of k = 40, roughly geometric.
            s.b_prime_values = {40, 120, 400, 1200, 4000};
            s.repetitions = 50;
            break;
    }
    return s;
}

ExperimentSpec apply_json(ExperimentSpec s, const json& j) {
    reject_unknown(j, {"channel", "estimator", "sweep", "bias", "output", "bits", "data"}, "top level");
    if (j.contains("channel")) {
        const auto& c = j["channel"];
        reject_unknown(c, {"P", "sigma1_sq", "sigma2", "n", "seed"}, "channel");
        if (c.contains("P")) s.channel.P = get_as<double>(c["P"], "P");
        if (c.contains("sigma1_sq")) s.channel.sigma1_sq = get_as<double>(c["sigma1_sq"], "sigma1_sq");
        if (c.contains("sigma2")) s.channel.sigma2_sq = sigma2_sq_from_std(get_as<double>(c["sigma2"], "sigma2"));
        if (c.contains("n")) s.channel.n = get_as<std::size_t>(c["n"], "n");
        if (c.contains("seed")) s.channel.seed = get_as<std::uint64_t>(c["seed"], "seed");
    }
    if (j.contains("estimator")) {
        const auto& e = j["estimator"];
        reject_unknown(e,
                       {"k", "b", "trials", "epochs", "lr", "minibatch_size", "train_fraction", "master_seed",
                        "estimator", "hidden", "include_anchor", "resplit_per_trial", "workers"},
                       "estimator");
        auto& c = s.estimator;
        if (e.contains("k")) c.k = get_as<std::size_t>(e["k"], "k");
        if (e.contains("b")) c.b = e["b"] == "auto" ? 0 : get_as<std::size_t>(e["b"], "b");
        if (e.contains("trials")) c.trials = get_as<std::size_t>(e["trials"], "trials");
        if (e.contains("epochs")) c.epochs = get_as<std::size_t>(e["epochs"], "epochs");
        if (e.contains("lr")) c.lr = get_as<double>(e["lr"], "lr");
        if (e.contains("minibatch_size")) c.minibatch_size = get_as<std::size_t>(e["minibatch_size"], "minibatch_size");
        if (e.contains("train_fraction")) c.train_fraction = get_as<double>(e["train_fraction"], "train_fraction");
        if (e.contains("master_seed")) c.master_seed = get_as<std::uint64_t>(e["master_seed"], "master_seed");
        if (e.contains("estimator")) c.estimator_kind = estimator_kind_from_string(get_as<std::string>(e["estimator"], "estimator"));
        if (e.contains("hidden")) c.hidden = get_as<std::vector<std::size_t>>(e["hidden"], "hidden");
        if (e.contains("include_anchor")) c.include_anchor = get_as<bool>(e["include_anchor"], "include_anchor");
        if (e.contains("resplit_per_trial")) c.resplit_per_trial = get_as<bool>(e["resplit_per_trial"], "resplit_per_trial");
        if (e.contains("workers")) c.workers = get_as<std::size_t>(e["workers"], "workers");
    }
    if (j.contains("sweep")) {
        const auto& w = j["sweep"];
        reject_unknown(w, {"sigma2", "k_values"}, "sweep");
        if (w.contains("sigma2")) s.sigma2_values = get_as<std::vector<double>>(w["sigma2"], "sigma2");
        if (w.contains("k_values")) s.k_values = get_as<std::vector<std::size_t>>(w["k_values"], "k_values");
    }
    if (j.contains("bias")) {
        const auto& b = j["bias"];
        reject_unknown(b, {"b_prime", "repetitions"}, "bias");
        if (b.contains("b_prime")) s.b_prime_values = get_as<std::vector<std::size_t>>(b["b_prime"], "b_prime");
        if (b.contains("repetitions")) s.repetitions = get_as<std::size_t>(b["repetitions"], "repetitions");
    }
    if (j.contains("output")) s.output_path = get_as<std::string>(j["output"], "output");
    if (j.contains("bits")) s.bits = get_as<bool>(j["bits"], "bits");
    if (j.contains("data")) s.data_path = get_as<std::string>(j["data"], "data");
    return s;
}

ExperimentSpec load_spec_file(ExperimentSpec base, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open spec file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("spec file '" + path + "' is not valid JSON: " + e.what());
    }
    return apply_json(std::move(base), j);
}

json to_json(const ExperimentSpec& s) {
    json j;
    j["kind"] = to_string(s.kind);
    j["channel"] = {{"P", s.channel.P},
                    {"sigma1_sq", s.channel.sigma1_sq},
                    {"sigma2_sq", s.channel.sigma2_sq},
                    {"n", s.channel.n},
                    {"seed", s.channel.seed}};
    auto est = cmi::to_json(s.estimator);
    if (s.estimator.b == 0) est["b"] = "auto";
    j["estimator"] = std::move(est);
    switch (s.kind) {
        case ExperimentKind::sweep_sigma2:
            j["sweep"] = {{"sigma2", s.sigma2_values}, {"k_values", s.k_values}};
            break;
        case ExperimentKind::bias_boxplot:
            j["bias"] = {{"b_prime", s.b_prime_values}, {"repetitions", s.repetitions}};
            break;
        case ExperimentKind::single_estimate:
            if (s.data_path) j["data"] = *s.data_path;
            break;
    }
    j["bits"] = s.bits;
    return j;
}

std::size_t auto_batch_size(const EstimatorConfig& c, std::size_t n) {
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * c.train_fraction));
    const std::size_t fit = std::min(n_train, n - n_train);
    if (c.k == 0) throw ConfigError("k must be >= 1");
    const std::size_t b = fit / c.k * c.k;
    if (b == 0)
        throw ConfigError("no batch size that is a multiple of k=" + std::to_string(c.k) + " fits a split of " +
                          std::to_string(fit) + " samples");
    return b;
}

void validate(const ExperimentSpec& s) {
    if (!s.data_path || s.kind != ExperimentKind::single_estimate) channels::validate(s.channel);
    validate(with_k(s.estimator, s.estimator.k, s.channel.n));
    const std::size_t n = s.channel.n;
    switch (s.kind) {
        case ExperimentKind::single_estimate:
            if (!s.data_path) validate_against(with_k(s.estimator, s.estimator.k, n), n);
            break;
        case ExperimentKind::sweep_sigma2:
            if (s.sigma2_values.empty() || !sorted_ascending(s.sigma2_values))
                throw ConfigError("sweep needs a non-empty ascending list of sigma2 values");
            for (double v : s.sigma2_values) sigma2_sq_from_std(v);
            if (s.k_values.empty() || !sorted_ascending(s.k_values))
                throw ConfigError("sweep needs a non-empty ascending list of k values");
            for (auto k : s.k_values) validate_against(with_k(s.estimator, k, n), n);
            break;
        case ExperimentKind::bias_boxplot: {
            if (s.repetitions < 1) throw ConfigError("repetitions must be >= 1");
            if (s.b_prime_values.empty() || !sorted_ascending(s.b_prime_values))
                throw ConfigError("bias experiment needs a non-empty ascending list of b' values");
            const auto c = with_k(s.estimator, s.estimator.k, n);
            validate_against(c, n);
            for (auto bp : s.b_prime_values) {
                auto eval = c;
                eval.b = bp;
                try {
                    validate_against(eval, n);
                } catch (const ConfigError& e) {
                    throw ConfigError("evaluation batch b'=" + std::to_string(bp) + ": " + e.what());
                }
            }
            break;
        }
    }
}

EstimateReport run_single(const ExperimentSpec& spec, const Logger& log) {
    if (spec.kind != ExperimentKind::single_estimate) throw ConfigError("run_single needs a single_estimate spec");
    validate(spec);
    Dataset data;
    std::optional<double> truth;
    if (spec.data_path) {
        note(log, "reading " + *spec.data_path);
        data = read_csv_file(*spec.data_path);
    } else {
        data = channels::sample_dwtc(spec.channel);
        truth = channels::analytic_cmi(spec.channel);
    }
    const auto config = with_k(spec.estimator, spec.estimator.k, data.size());
    validate_against(config, data.size());
    note(log, "running " + std::to_string(config.trials) + " trials on " + std::to_string(data.size()) + " samples");
    auto report = run_algorithm1(data, config);
    report.ground_truth = truth;
    return report;
}

std::vector<SweepRow> run_sweep_sigma2(const ExperimentSpec& spec, const Logger& log) {
    if (spec.kind != ExperimentKind::sweep_sigma2) throw ConfigError("run_sweep_sigma2 needs a sweep_sigma2 spec");
    validate(spec);
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < spec.sigma2_values.size(); ++i) {
        auto channel = spec.channel;
        channel.sigma2_sq = sigma2_sq_from_std(spec.sigma2_values[i]);
        channel.seed = derive_seed(spec.channel.seed, {kSweepData, i});
        const Dataset data = channels::sample_dwtc(channel);
        const double truth = channels::analytic_cmi(channel);
        for (std::size_t kk = 0; kk < spec.k_values.size(); ++kk) {
            auto config = with_k(spec.estimator, spec.k_values[kk], data.size());
            config.master_seed = derive_seed(spec.estimator.master_seed, {kSweepCell, i, kk});
            note(log, "sigma2=" + fmt(spec.sigma2_values[i]) + " k=" + std::to_string(config.k));
            const auto report = run_algorithm1(data, config);
            SweepRow row;
            row.sigma2 = spec.sigma2_values[i];
            row.k = config.k;
            row.b = config.b;
            row.mean = report.mean;
            row.stddev = report.sample_variance ? std::sqrt(*report.sample_variance) : kNaN;
            row.truth = truth;
            row.successful_trials = report.successful_trials();
            row.failed_trials = report.failed_trials.size();
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<BiasRow> run_bias_experiment(const ExperimentSpec& spec, const Logger& log) {
    if (spec.kind != ExperimentKind::bias_boxplot) throw ConfigError("run_bias_experiment needs a bias_boxplot spec");
    validate(spec);
    const auto config = with_k(spec.estimator, spec.estimator.k, spec.channel.n);
    const double truth = channels::analytic_cmi(spec.channel);
    const std::size_t G = spec.b_prime_values.size();
    std::vector<std::vector<BiasRow>> per_rep(spec.repetitions);

    parallel_for(spec.repetitions, config.workers, [&](std::size_t r) {
        auto channel = spec.channel;
        channel.seed = derive_seed(spec.channel.seed, {kBiasData, r});
        const Dataset data = channels::sample_dwtc(channel);
        auto rep_config = config;
        rep_config.master_seed = derive_seed(config.master_seed, {kBiasRep, r});
        const auto [train_set, test_set] = split_dataset(data, rep_config.train_fraction, split_seed(rep_config.master_seed));

        std::vector<double> dv_sum(G, 0.0), nwj_sum(G, 0.0);
        std::size_t ok = 0, failed = 0;
        for (std::size_t t = 0; t < rep_config.trials; ++t) {
            const auto seeds = trial_seeds(rep_config.master_seed, t);
            try {
                const auto trained = train_trial_classifier(train_set, rep_config, seeds);
                std::vector<double> dv(G), nwj(G);
                for (std::size_t g = 0; g < G; ++g) {
                    const auto test = make_batch_pair(test_set, spec.b_prime_values[g], rep_config.k,
                                                      derive_seed(seeds.test_batch, {kBiasEval, g}),
                                                      {rep_config.include_anchor});
                    const auto omega = evaluate_omegas(trained.net, test);
                    dv[g] = estimate_dv_from_omega(omega.joint, omega.prod);
                    nwj[g] = estimate_nwj(omega.joint, omega.prod);
                }
                for (std::size_t g = 0; g < G; ++g) {
                    dv_sum[g] += dv[g];
                    nwj_sum[g] += nwj[g];
                }
                ++ok;
            } catch (const NumericalError& e) {
                ++failed;
                note(log, "repetition " + std::to_string(r) + " trial " + std::to_string(t) + " failed: " + e.what());
            }
        }
        auto& rows = per_rep[r];
        for (std::size_t g = 0; g < G; ++g)
            for (auto kind : {EstimatorKind::dv, EstimatorKind::nwj}) {
                BiasRow row;
                row.repetition = r;
                row.estimator = kind;
                row.b_prime = spec.b_prime_values[g];
                const double sum = kind == EstimatorKind::dv ? dv_sum[g] : nwj_sum[g];
                row.estimate = ok ? sum / static_cast<double>(ok) : kNaN;
                row.truth = truth;
                row.successful_trials = ok;
                row.failed_trials = failed;
                rows.push_back(row);
            }
        note(log, "repetition " + std::to_string(r + 1) + "/" + std::to_string(spec.repetitions) + " done");
    });

    std::vector<BiasRow> rows;
    for (auto& rep : per_rep) rows.insert(rows.end(), rep.begin(), rep.end());
    return rows;
}

void write_sweep_csv(std::ostream& out, const ExperimentSpec& spec, const std::vector<SweepRow>& rows,
                     const std::string& timestamp) {
    out << "# generated: " << timestamp << '\n';
    for (const auto& line : config_comment(spec)) out << line << '\n';
    out << "# columns: sigma2 = eavesdropper noise std dev; k = neighbours; b = batch size; "
           "mean_nats/std_nats = Monte Carlo mean and sample std of the estimate; truth_nats = closed-form CMI; "
           "abs_err_nats = |mean - truth|; failed_trials > 0 flags the cell"
        << (spec.bits ? "; *_bits = same quantities in bits" : "") << '\n';
    out << "sigma2,k,b,mean_nats,std_nats,truth_nats,abs_err_nats,successful_trials,failed_trials";
    if (spec.bits) out << ",mean_bits,std_bits,truth_bits";
    out << '\n';
    for (const auto& r : rows) {
        out << fmt(r.sigma2) << ',' << r.k << ',' << r.b << ',' << fmt(r.mean) << ',' << fmt(r.stddev) << ','
            << fmt(r.truth) << ',' << fmt(std::abs(r.mean - r.truth)) << ',' << r.successful_trials << ','
            << r.failed_trials;
        if (spec.bits)
            out << ',' << fmt(r.mean * kNatsToBits) << ',' << fmt(r.stddev * kNatsToBits) << ','
                << fmt(r.truth * kNatsToBits);
        out << '\n';
    }
}

void write_bias_csv(std::ostream& out, const ExperimentSpec& spec, const std::vector<BiasRow>& rows,
                    const std::string& timestamp) {
    out << "# generated: " << timestamp << '\n';
    for (const auto& line : config_comment(spec)) out << line << '\n';
    out << "# columns: repetition = dataset index; estimator = dv|nwj; b_prime = evaluation batch size; "
           "estimate_nats = average over the repetition's trials; truth_nats = closed-form CMI"
        << (spec.bits ? "; *_bits = same quantities in bits" : "") << '\n';
    out << "repetition,estimator,b_prime,estimate_nats,truth_nats,successful_trials,failed_trials";
    if (spec.bits) out << ",estimate_bits,truth_bits";
    out << '\n';
    for (const auto& r : rows) {
        out << r.repetition << ',' << cmi::to_string(r.estimator) << ',' << r.b_prime << ',' << fmt(r.estimate)
            << ',' << fmt(r.truth) << ',' << r.successful_trials << ',' << r.failed_trials;
        if (spec.bits) out << ',' << fmt(r.estimate * kNatsToBits) << ',' << fmt(r.truth * kNatsToBits);
        out << '\n';
    }
}

json report_json(const ExperimentSpec& spec, const EstimateReport& report) {
    json j = cmi::to_json(report);
    j["spec"] = to_json(spec);
    if (spec.bits) {
        j["mean_bits"] = report.mean * kNatsToBits;
        if (report.ground_truth) j["ground_truth_bits"] = *report.ground_truth * kNatsToBits;
    }
    return j;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace cmi::experiments
