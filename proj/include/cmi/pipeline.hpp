#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "cmi/batch.hpp"
#include "cmi/dataset.hpp"
#include "cmi/nn.hpp"

namespace cmi {

enum class EstimatorKind { nwj, dv };

const char* to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& s);

struct EstimatorConfig {
    std::size_t k = 40;
    std::size_t b = 10000;
    std::size_t trials = 20;
    std::size_t epochs = 300;
    double lr = 2e-3;
    std::size_t minibatch_size = 0;  // 0 = full batch
    double train_fraction = 0.5;
    std::uint64_t master_seed = 0;
    EstimatorKind estimator_kind = EstimatorKind::nwj;
    std::vector<std::size_t> hidden{64, 64};
    bool include_anchor = true;
    bool resplit_per_trial = false;
    std::size_t workers = 1;
};

// Checks the config on its own (k | b, T >= 1, ...). Throws ConfigError.
void validate(const EstimatorConfig& config);

// Additionally checks the config fits a dataset of n triples once split.
void validate_against(const EstimatorConfig& config, std::size_t n);

struct EstimateReport {
    EstimatorConfig config;
    std::vector<double> per_trial;      // configured estimator; NaN for failed trials
    std::vector<double> per_trial_nwj;  // both estimators on the same omega values
    std::vector<double> per_trial_dv;
    std::vector<double> trial_seconds;
    std::vector<std::size_t> failed_trials;
    std::vector<std::string> failure_messages;
    double mean = 0.0;                           // over successful trials
    std::optional<double> sample_variance;       // unbiased; needs >= 2 successes
    std::optional<double> ground_truth;

    bool flagged() const noexcept { return !failed_trials.empty(); }
    std::size_t successful_trials() const noexcept { return per_trial.size() - failed_trials.size(); }
};

// Sets mean and sample_variance from per_trial, skipping failed slots.
void summarize(EstimateReport& report);

nlohmann::json to_json(const EstimateReport& report);
nlohmann::json to_json(const EstimatorConfig& config);

// Seeds used by trial t of a run with the given master seed.
struct TrialSeeds {
    std::uint64_t train_batch;
    std::uint64_t init;
    std::uint64_t shuffle;
    std::uint64_t test_batch;
    std::uint64_t split;  // only used with resplit_per_trial
};
TrialSeeds trial_seeds(std::uint64_t master_seed, std::size_t trial);
std::uint64_t split_seed(std::uint64_t master_seed);

// Fresh classifier trained on a batch pair drawn from `train_set`.
nn::TrainingResult train_trial_classifier(const Dataset& train_set, const EstimatorConfig& config,
                                          const TrialSeeds& seeds);

struct OmegaPair {
    std::vector<double> joint;
    std::vector<double> prod;
};
OmegaPair evaluate_omegas(const nn::ClassifierNet& net, const BatchPair& batch);

// Split once, then per trial: draw train batches, train a fresh classifier,
// draw test batches and evaluate both estimators on the shared test-batch
// omega values. Trials run on config.workers threads; results are joined in
// trial order. A trial that raises NumericalError is recorded as failed and
// excluded from the mean.
EstimateReport run_algorithm1(const Dataset& data, const EstimatorConfig& config);

}  // namespace cmi
