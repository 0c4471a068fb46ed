#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cmi/channels.hpp"
#include "cmi/pipeline.hpp"

namespace cmi::experiments {

enum class ExperimentKind { sweep_sigma2, bias_boxplot, single_estimate };

const char* to_string(ExperimentKind kind);

// One declarative description of a run. `estimator.b == 0` means "as large
// as the splits allow", resolved per k to a multiple of k.
struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::single_estimate;
    channels::DwtcParams channel;
    EstimatorConfig estimator;
    std::vector<double> sigma2_values;            // sweep: noise standard deviations
    std::vector<std::size_t> k_values;            // sweep
    std::vector<std::size_t> b_prime_values;      // bias: evaluation batch sizes
    std::size_t repetitions = 50;                 // bias
    std::string output_path;
    bool bits = false;
    std::optional<std::string> data_path;         // single: CSV instead of simulating
};

// Paper-scale defaults for each experiment kind.
ExperimentSpec default_spec(ExperimentKind kind);

// Overlays a JSON spec file onto `base`. Throws ConfigError on unknown keys
// or mistyped values.
ExperimentSpec apply_json(ExperimentSpec base, const nlohmann::json& j);
ExperimentSpec load_spec_file(ExperimentSpec base, const std::string& path);

// Fully resolved configuration, every default explicit.
nlohmann::json to_json(const ExperimentSpec& spec);

// Checks everything that can be checked before any compute.
void validate(const ExperimentSpec& spec);

// Largest multiple of k that fits both splits of n samples.
std::size_t auto_batch_size(const EstimatorConfig& config, std::size_t n);

using Logger = std::function<void(const std::string&)>;

EstimateReport run_single(const ExperimentSpec& spec, const Logger& log = {});

struct SweepRow {
    double sigma2 = 0.0;
    std::size_t k = 0;
    std::size_t b = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample std over trials; NaN with < 2 successes
    double truth = 0.0;
    std::size_t successful_trials = 0;
    std::size_t failed_trials = 0;
};

// One row per (sigma2, k), sigma2-major, with a fresh dataset per sigma2.
std::vector<SweepRow> run_sweep_sigma2(const ExperimentSpec& spec, const Logger& log = {});

struct BiasRow {
    std::size_t repetition = 0;
    EstimatorKind estimator = EstimatorKind::nwj;
    std::size_t b_prime = 0;
    double estimate = 0.0;  // average over the successful trials of the repetition
    double truth = 0.0;
    std::size_t successful_trials = 0;
    std::size_t failed_trials = 0;
};

// Rows ordered by repetition, then b', then estimator (dv before nwj).
std::vector<BiasRow> run_bias_experiment(const ExperimentSpec& spec, const Logger& log = {});

// CSV writers. The first line is "# generated: <timestamp>" and is the only
// line that varies between identical runs.
void write_sweep_csv(std::ostream& out, const ExperimentSpec& spec, const std::vector<SweepRow>& rows,
                     const std::string& timestamp);
void write_bias_csv(std::ostream& out, const ExperimentSpec& spec, const std::vector<BiasRow>& rows,
                    const std::string& timestamp);

// Report JSON with the resolved experiment spec attached.
nlohmann::json report_json(const ExperimentSpec& spec, const EstimateReport& report);

std::string utc_timestamp();

inline constexpr double kNatsToBits = 1.4426950408889634;  // 1 / ln 2

}  // namespace cmi::experiments
