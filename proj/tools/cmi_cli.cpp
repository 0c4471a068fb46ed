// Command-line front end: dataset generation, closed-form oracle, single
// estimates and the sigma2 / Monte Carlo bias experiments.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cmi/channels.hpp"
#include "cmi/dataset.hpp"
#include "cmi/error.hpp"
#include "cmi/experiments.hpp"
#include "cmi/parallel.hpp"

namespace {

using namespace cmi;
using experiments::ExperimentKind;
using experiments::ExperimentSpec;

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kInputError = 3, kFailedCell = 4 };

struct ChannelFlags {
    std::optional<double> P, sigma1_sq, sigma2;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;

    void add(CLI::App& app) {
        app.add_option("--P", P, "Input power (variance of X)");
        app.add_option("--sigma1-sq", sigma1_sq, "Main channel noise variance");
        app.add_option("--sigma2", sigma2, "Eavesdropper degradation noise standard deviation");
        app.add_option("--n", n, "Number of samples");
        app.add_option("--data-seed", seed, "Seed for channel simulation");
    }
    void apply(channels::DwtcParams& p) const {
        if (P) p.P = *P;
        if (sigma1_sq) p.sigma1_sq = *sigma1_sq;
        if (sigma2) p.sigma2_sq = *sigma2 * *sigma2;
        if (n) p.n = *n;
        if (seed) p.seed = *seed;
    }
};

struct EstimatorFlags {
    std::optional<std::size_t> k, b, trials, epochs, minibatch, workers;
    std::optional<double> lr, train_fraction;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> kind;
    std::optional<std::vector<std::size_t>> hidden;
    bool exclude_anchor = false;
    bool resplit = false;

    void add(CLI::App& app, bool with_k = true) {
        if (with_k) app.add_option("--k", k, "Nearest neighbours per anchor");
        app.add_option("--b", b, "Batch size (0 = largest multiple of k that fits a split)");
        app.add_option("--trials", trials, "Monte Carlo trials T");
        app.add_option("--epochs", epochs, "Training epochs per trial");
        app.add_option("--lr", lr, "Adam learning rate");
        app.add_option("--minibatch", minibatch, "Minibatch size (0 = full batch; otherwise even, half per class)");
        app.add_option("--train-fraction", train_fraction, "Fraction of samples in the training split");
        app.add_option("--seed", seed, "Master seed for splits, batches and initialisation");
        app.add_option("--estimator", kind, "nwj or dv")->check(CLI::IsMember({"nwj", "dv"}));
        app.add_option("--hidden", hidden, "Hidden layer widths")->delimiter(',');
        app.add_flag("--exclude-anchor", exclude_anchor, "Drop the anchor itself from its neighbour set");
        app.add_flag("--resplit-per-trial", resplit, "Draw a new train/test split in every trial");
        app.add_option("--workers", workers, "Worker threads");
    }
    void apply(EstimatorConfig& c) const {
        if (k) c.k = *k;
        if (b) c.b = *b;
        if (trials) c.trials = *trials;
        if (epochs) c.epochs = *epochs;
        if (lr) c.lr = *lr;
        if (minibatch) c.minibatch_size = *minibatch;
        if (train_fraction) c.train_fraction = *train_fraction;
        if (seed) c.master_seed = *seed;
        if (kind) c.estimator_kind = estimator_kind_from_string(*kind);
        if (hidden) c.hidden = *hidden;
        if (exclude_anchor) c.include_anchor = false;
        if (resplit) c.resplit_per_trial = true;
        if (workers) c.workers = *workers;
    }
};

struct CommonFlags {
    std::optional<std::string> config;
    std::string output;
    bool bits = false;
    bool quiet = false;

    void add(CLI::App& app) {
        app.add_option("--config", config, "JSON experiment spec; flags override its values");
        app.add_option("-o,--output", output, "Output file (default: standard output)");
        app.add_flag("--bits", bits, "Also report values in bits");
        app.add_flag("-q,--quiet", quiet, "Suppress progress on standard error");
    }
};

ExperimentSpec resolve(ExperimentKind kind, const CommonFlags& common, const ChannelFlags& ch, const EstimatorFlags& est) {
    auto spec = experiments::default_spec(kind);
    spec.estimator.workers = default_workers();
    if (common.config) spec = experiments::load_spec_file(std::move(spec), *common.config);
    ch.apply(spec.channel);
    est.apply(spec.estimator);
    if (!common.output.empty()) spec.output_path = common.output;
    if (common.bits) spec.bits = true;
    return spec;
}

experiments::Logger logger(bool quiet) {
    if (quiet) return {};
    return [](const std::string& msg) { std::cerr << "[cmi] " << msg << std::endl; };
}

// Writes through a temporary string so a failed run never leaves a partial file.
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional mutual information estimation with a neural density-ratio classifier"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Simulate the Gaussian degraded wiretap channel and write CSV");
    ChannelFlags gen_ch;
    gen_ch.add(*gen);
    std::string gen_out;
    gen->add_option("-o,--output", gen_out, "CSV path (default: standard output)");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Closed-form I(X;Y|Z) for the Gaussian degraded wiretap channel");
    double o_P = 100.0, o_s1 = 1.0;
    std::vector<double> o_sigma2{5.0};
    bool o_bits = false;
    oracle->add_option("--P", o_P, "Input power")->capture_default_str();
    oracle->add_option("--sigma1-sq", o_s1, "Main channel noise variance")->capture_default_str();
    oracle->add_option("--sigma2", o_sigma2, "Eavesdropper noise standard deviation(s)")->delimiter(',')->capture_default_str();
    oracle->add_flag("--bits", o_bits, "Add a bits column");

    // estimate
    auto* est = app.add_subcommand("estimate", "Run the Monte Carlo estimator once and write a JSON report");
    CommonFlags est_common;
    ChannelFlags est_ch;
    EstimatorFlags est_flags;
    std::optional<std::string> est_data;
    est_common.add(*est);
    est_ch.add(*est);
    est_flags.add(*est);
    est->add_option("--data", est_data, "Estimate from this CSV instead of simulating the channel");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Estimated CMI versus sigma2 for several k (CSV)");
    CommonFlags sw_common;
    ChannelFlags sw_ch;
    EstimatorFlags sw_flags;
    std::optional<std::vector<double>> sw_sigma2;
    std::optional<std::vector<std::size_t>> sw_k;
    sw_common.add(*sweep);
    sw_ch.add(*sweep);
    sw_flags.add(*sweep, false);
    sweep->add_option("--sigma2-grid", sw_sigma2, "Ascending sigma2 values")->delimiter(',');
    sweep->add_option("--k-values", sw_k, "Ascending k values")->delimiter(',');

    // bias
    auto* bias = app.add_subcommand("bias", "DV versus NWJ Monte Carlo averages across evaluation batch sizes (CSV)");
    CommonFlags bi_common;
    ChannelFlags bi_ch;
    EstimatorFlags bi_flags;
    std::optional<std::vector<std::size_t>> bi_grid;
    std::optional<std::size_t> bi_reps;
    bi_common.add(*bias);
    bi_ch.add(*bias);
    bi_flags.add(*bias);
    bias->add_option("--b-prime-grid", bi_grid, "Ascending evaluation batch sizes (multiples of k)")->delimiter(',');
    bias->add_option("--repetitions", bi_reps, "Datasets to repeat the experiment on");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            channels::DwtcParams p;
            gen_ch.apply(p);
            std::ostringstream out;
            write_csv(out, channels::sample_dwtc(p));
            emit(gen_out, out.str());
            return kOk;
        }
        if (*oracle) {
            std::ostringstream out;
            out << "sigma2,truth_nats" << (o_bits ? ",truth_bits" : "") << '\n';
            out.precision(17);
            for (double s : o_sigma2) {
                if (!(s >= 0.0)) throw ConfigError("sigma2 must be non-negative");
                const double v = channels::analytic_cmi(o_P, o_s1, s * s);
                out << s << ',' << v;
                if (o_bits) out << ',' << v * experiments::kNatsToBits;
                out << '\n';
            }
            std::cout << out.str();
            return kOk;
        }
        if (*est) {
            auto spec = resolve(ExperimentKind::single_estimate, est_common, est_ch, est_flags);
            if (est_data) spec.data_path = est_data;
            const auto report = experiments::run_single(spec, logger(est_common.quiet));
            const std::string text = experiments::report_json(spec, report).dump(2) + "\n";
            emit(spec.output_path, text);

            std::ostringstream summary;
            summary.precision(6);
            summary << "estimate_nats=" << report.mean;
            if (report.ground_truth)
                summary << " truth_nats=" << *report.ground_truth
                        << " abs_error_nats=" << std::abs(report.mean - *report.ground_truth);
            if (spec.bits) {
                summary << " estimate_bits=" << report.mean * experiments::kNatsToBits;
                if (report.ground_truth) summary << " truth_bits=" << *report.ground_truth * experiments::kNatsToBits;
            }
            if (report.flagged()) summary << " failed_trials=" << report.failed_trials.size();
            // Keep stdout pure JSON when the report itself goes there.
            (spec.output_path.empty() || spec.output_path == "-" ? std::cerr : std::cout) << summary.str() << '\n';
            return report.successful_trials() == 0 ? kFailedCell : kOk;
        }
        if (*sweep) {
            auto spec = resolve(ExperimentKind::sweep_sigma2, sw_common, sw_ch, sw_flags);
            if (sw_sigma2) spec.sigma2_values = *sw_sigma2;
            if (sw_k) spec.k_values = *sw_k;
            const auto rows = experiments::run_sweep_sigma2(spec, logger(sw_common.quiet));
            std::ostringstream out;
            experiments::write_sweep_csv(out, spec, rows, experiments::utc_timestamp());
            emit(spec.output_path, out.str());
            for (const auto& r : rows)
                if (r.successful_trials == 0) return kFailedCell;
            return kOk;
        }
        if (*bias) {
            auto spec = resolve(ExperimentKind::bias_boxplot, bi_common, bi_ch, bi_flags);
            if (bi_grid) spec.b_prime_values = *bi_grid;
            if (bi_reps) spec.repetitions = *bi_reps;
            const auto rows = experiments::run_bias_experiment(spec, logger(bi_common.quiet));
            std::ostringstream out;
            experiments::write_bias_csv(out, spec, rows, experiments::utc_timestamp());
            emit(spec.output_path, out.str());
            for (const auto& r : rows)
                if (r.successful_trials == 0) return kFailedCell;
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
