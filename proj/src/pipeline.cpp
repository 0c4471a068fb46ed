#include "cmi/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "cmi/error.hpp"
#include "cmi/estimators.hpp"
#include "cmi/knn_sampler.hpp"
#include "cmi/parallel.hpp"
#include "cmi/random.hpp"

namespace cmi {

namespace {

enum SeedLabel : std::uint64_t { kSplit = 1, kTrial, kTrainBatch, kInit, kShuffle, kTestBatch, kResplit };

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t train_size(const EstimatorConfig& c, std::size_t n) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * c.train_fraction));
}

}  // namespace

const char* to_string(EstimatorKind kind) { return kind == EstimatorKind::nwj ? "nwj" : "dv"; }

EstimatorKind estimator_kind_from_string(const std::string& s) {
    if (s == "nwj") return EstimatorKind::nwj;
    if (s == "dv") return EstimatorKind::dv;
    throw ConfigError("estimator must be 'nwj' or 'dv', got '" + s + "'");
}

void validate(const EstimatorConfig& c) {
    if (c.k < 1) throw ConfigError("k must be >= 1");
    if (c.b < 1) throw ConfigError("batch size b must be >= 1");
    if (c.b % c.k != 0)
        throw ConfigError("k=" + std::to_string(c.k) + " must divide the batch size b=" + std::to_string(c.b) +
                          "; choose b as a multiple of k");
    if (c.trials < 1) throw ConfigError("trial count T must be >= 1");
    if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(c.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (c.minibatch_size != 0 && (c.minibatch_size < 2 || c.minibatch_size % 2 != 0))
        throw ConfigError("minibatch size must be 0 (full batch) or even and >= 2");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    for (auto h : c.hidden)
        if (h < 1) throw ConfigError("hidden layer widths must be >= 1");
}

void validate_against(const EstimatorConfig& c, std::size_t n) {
    validate(c);
    const std::size_t n_train = train_size(c, n);
    const std::size_t smallest = std::min(n_train, n - n_train);
    const std::string sizes = " (n=" + std::to_string(n) + " splits into " + std::to_string(n_train) + " train / " +
                              std::to_string(n - n_train) + " test)";
    if (c.b > smallest)
        throw ConfigError("batch size b=" + std::to_string(c.b) + " exceeds the smaller split" + sizes);
    if (smallest < 2 * c.k)
        throw ConfigError("each split needs at least 2k=" + std::to_string(2 * c.k) + " samples" + sizes);
    if (!c.include_anchor && c.k + 1 > smallest) throw ConfigError("k+1 neighbours do not fit in a split" + sizes);
}

void summarize(EstimateReport& r) {
    double sum = 0.0;
    std::size_t count = 0;
    for (double v : r.per_trial)
        if (!std::isnan(v)) {
            sum += v;
            ++count;
        }
    r.mean = count ? sum / static_cast<double>(count) : kNaN;
    r.sample_variance.reset();
    if (count >= 2) {
        double ss = 0.0;
        for (double v : r.per_trial)
            if (!std::isnan(v)) ss += (v - r.mean) * (v - r.mean);
        r.sample_variance = ss / static_cast<double>(count - 1);
    }
}

nlohmann::json to_json(const EstimatorConfig& c) {
    return {{"k", c.k},
            {"b", c.b},
            {"trials", c.trials},
            {"epochs", c.epochs},
            {"lr", c.lr},
            {"minibatch_size", c.minibatch_size},
            {"train_fraction", c.train_fraction},
            {"master_seed", c.master_seed},
            {"estimator", to_string(c.estimator_kind)},
            {"hidden", c.hidden},
            {"include_anchor", c.include_anchor},
            {"resplit_per_trial", c.resplit_per_trial},
            {"workers", c.workers},
            {"rng_stream_version", kRngStreamVersion}};
}

nlohmann::json to_json(const EstimateReport& r) {
    nlohmann::json j;
    j["config"] = to_json(r.config);
    j["units"] = "nats";
    j["per_trial"] = r.per_trial;
    j["per_trial_nwj"] = r.per_trial_nwj;
    j["per_trial_dv"] = r.per_trial_dv;
    j["mean"] = r.mean;
    j["sample_variance"] = r.sample_variance ? nlohmann::json(*r.sample_variance) : nlohmann::json(nullptr);
    j["ground_truth"] = r.ground_truth ? nlohmann::json(*r.ground_truth) : nlohmann::json(nullptr);
    j["failed_trials"] = r.failed_trials;
    j["failure_messages"] = r.failure_messages;
    j["trial_seconds"] = r.trial_seconds;
    return j;
}

TrialSeeds trial_seeds(std::uint64_t master_seed, std::size_t trial) {
    const auto base = derive_seed(master_seed, {kTrial, trial});
    return {derive_seed(base, {kTrainBatch}), derive_seed(base, {kInit}), derive_seed(base, {kShuffle}),
            derive_seed(base, {kTestBatch}), derive_seed(base, {kResplit})};
}

std::uint64_t split_seed(std::uint64_t master_seed) { return derive_seed(master_seed, {kSplit}); }

nn::TrainingResult train_trial_classifier(const Dataset& train_set, const EstimatorConfig& config,
                                          const TrialSeeds& seeds) {
    const ProdBatchOptions prod_opts{config.include_anchor};
    const BatchPair train = make_batch_pair(train_set, config.b, config.k, seeds.train_batch, prod_opts);
    const auto specs = nn::classifier_layers(train_set.dims().total(), config.hidden);
    nn::TrainingOptions opts;
    opts.epochs = config.epochs;
    opts.lr = config.lr;
    opts.minibatch_size = config.minibatch_size;
    opts.seed = seeds.shuffle;
    return nn::train_classifier(nn::init_network(specs, seeds.init), train, opts);
}

OmegaPair evaluate_omegas(const nn::ClassifierNet& net, const BatchPair& batch) {
    const Eigen::VectorXd wj = nn::forward_batch(net, batch.joint.matrix());
    const Eigen::VectorXd wp = nn::forward_batch(net, batch.prod.matrix());
    return {{wj.begin(), wj.end()}, {wp.begin(), wp.end()}};
}

EstimateReport run_algorithm1(const Dataset& data, const EstimatorConfig& config) {
    validate_against(config, data.size());
    const auto [train_set, test_set] = split_dataset(data, config.train_fraction, split_seed(config.master_seed));

    const std::size_t T = config.trials;
    EstimateReport report;
    report.config = config;
    report.per_trial.assign(T, kNaN);
    report.per_trial_nwj.assign(T, kNaN);
    report.per_trial_dv.assign(T, kNaN);
    report.trial_seconds.assign(T, 0.0);
    std::vector<std::string> errors(T);

    parallel_for(T, config.workers, [&](std::size_t t) {
        const auto start = std::chrono::steady_clock::now();
        const auto seeds = trial_seeds(config.master_seed, t);
        try {
            std::optional<std::pair<Dataset, Dataset>> resplit;
            if (config.resplit_per_trial) resplit = split_dataset(data, config.train_fraction, seeds.split);
            const Dataset& tr = resplit ? resplit->first : train_set;
            const Dataset& te = resplit ? resplit->second : test_set;

            const auto trained = train_trial_classifier(tr, config, seeds);
            const BatchPair test = make_batch_pair(te, config.b, config.k, seeds.test_batch, {config.include_anchor});
            const auto omega = evaluate_omegas(trained.net, test);
            report.per_trial_nwj[t] = estimate_nwj(omega.joint, omega.prod);
            report.per_trial_dv[t] = estimate_dv_from_omega(omega.joint, omega.prod);
            report.per_trial[t] =
                config.estimator_kind == EstimatorKind::nwj ? report.per_trial_nwj[t] : report.per_trial_dv[t];
        } catch (const NumericalError& e) {
            errors[t] = e.what();
        }
        report.trial_seconds[t] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });

    for (std::size_t t = 0; t < T; ++t)
        if (!errors[t].empty()) {
            report.failed_trials.push_back(t);
            report.failure_messages.push_back("trial " + std::to_string(t) + ": " + errors[t]);
        }
    summarize(report);
    return report;
}

}  // namespace cmi
