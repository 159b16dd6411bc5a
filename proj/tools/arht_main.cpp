// Command-line front end: train a variational encoder, score test sets
// against a training profile, simulate the null distribution of the adaptive
// statistic, and emit density curves for external plotting.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arht/bnn.hpp"
#include "arht/checkpoint.hpp"
#include "arht/data.hpp"
#include "arht/detector.hpp"
#include "arht/errors.hpp"
#include "arht/eval.hpp"
#include "arht/report_io.hpp"
#include "arht/simulate.hpp"
#include "arht/stats.hpp"

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kProfileStream = 0x70726F66ULL;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainOptions {
    std::string synthetic;
    std::string images, labels;
    arht::Index p = 128;
    std::int64_t n_train = 500;
    double mu_value = 0.5;
    double variance = 9.0;
    int hidden = 64;
    std::string activation = "relu";
    double prior_std = 1.0;
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-2;
    double kl_weight = 1.0;
    double weight_decay = 1e-5;
    std::uint64_t seed = 42;
    std::string out_dir = ".";
};

struct DetectOptions {
    std::string checkpoint;
    std::string synthetic;
    std::string train_images, test_images, test_ood_images;
    arht::Index p = 128;
    std::int64_t n_train = 500;
    std::int64_t n_test_in = 500;
    std::int64_t n_test_ood = 500;
    double mu_value = 0.5;
    double variance = 9.0;
    int s = 5;
    int n2 = 300;
    double lambda0 = 0.01;
    double alpha = 0.05;
    int threads = 0;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir = ".";
};

struct SimulateOptions {
    arht::Index p = 100;
    std::int64_t n1 = 150;
    std::int64_t n2 = 150;
    double lambda0 = 0.01;
    std::int64_t replicates = 2000;
    std::uint64_t seed = 42;
    int threads = 0;
    std::string out_dir = ".";
};

struct DensityOptions {
    std::vector<std::string> pairs{"10,20", "1000,2000"};
    double grid_max = 8.0;
    double grid_step = 0.002;
    std::string report;
    int bins = 50;
    std::string out_dir = ".";
};

std::string out_path(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    return (fs::path(dir) / name).string();
}

// Expands `--config FILE` (key=value lines, # comments) into explicit options
// injected right after the subcommand token. Later command-line occurrences
// win because every option takes its last value, which gives the precedence
// flags > config file > defaults.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        }
    }
    if (path.empty()) {
        return args;
    }
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open config file: " + path);
    }
    std::vector<std::string> expanded;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        const auto eq = line.find('=', first);
        if (eq == std::string::npos) {
            throw UsageError("config line is not key=value: " + line);
        }
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string()
                                          : s.substr(b, e - b + 1);
        };
        const std::string key = strip(line.substr(first, eq - first));
        const std::string value = strip(line.substr(eq + 1));
        if (key.empty()) {
            throw UsageError("config line has an empty key: " + line);
        }
        expanded.push_back("--" + key);
        expanded.push_back(value);
    }
    // Inject after the subcommand name so user flags come later.
    std::vector<std::string> out;
    std::size_t i = 0;
    if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
        out.push_back(args[0]);
        i = 1;
    }
    out.insert(out.end(), expanded.begin(), expanded.end());
    out.insert(out.end(), args.begin() + static_cast<long>(i), args.end());
    return out;
}

int run_train(const TrainOptions& opt) {
    arht::Matrix inputs;
    arht::Vector targets;
    arht::bnn::Task task;
    std::vector<arht::Index> dims;

    if (opt.synthetic == "table8") {
        arht::data::SyntheticSpec spec;
        spec.dim = opt.p;
        spec.mu_value = opt.mu_value;
        spec.variance = opt.variance;
        spec.n_train = opt.n_train;
        spec.seed = opt.seed;
        auto [train, test] = arht::data::gen_table8(spec);
        inputs = std::move(train.inputs);
        targets = std::move(train.targets);
        task = arht::bnn::Task::RegressionNorm;
        dims = {opt.p, opt.hidden, 1};
    } else if (!opt.images.empty() && !opt.labels.empty()) {
        arht::data::LabeledVectors data =
            arht::data::load_idx_pair(opt.images, opt.labels);
        inputs = std::move(data.inputs);
        targets = std::move(data.targets);
        task = arht::bnn::Task::Classification;
        const auto k = static_cast<arht::Index>(targets.maxCoeff()) + 1;
        dims = {inputs.cols(), opt.hidden, k};
    } else {
        throw UsageError(
            "train needs either --synthetic table8 or both --images and "
            "--labels");
    }

    arht::Rng init_rng = arht::Rng::stream(opt.seed, 0x696E6974ULL);
    arht::bnn::VariationalNet net = arht::bnn::make_net(
        dims, arht::bnn::activation_from_name(opt.activation), opt.prior_std,
        init_rng);

    arht::bnn::TrainConfig config;
    config.epochs = opt.epochs;
    config.batch_size = opt.batch_size;
    config.learning_rate = opt.learning_rate;
    config.kl_weight = opt.kl_weight;
    config.weight_decay = opt.weight_decay;
    config.seed = opt.seed;
    config.task = task;
    std::vector<arht::bnn::ElboParts> trace =
        arht::bnn::train(net, inputs, targets, config);

    const std::string ckpt = out_path(opt.out_dir, "checkpoint.bin");
    arht::bnn::save_checkpoint(net, opt.seed, ckpt);
    const std::string loss_csv = out_path(opt.out_dir, "loss_trace.csv");
    arht::report::write_loss_csv(trace, loss_csv);
    std::cout << "trained " << net.parameter_count() << " parameters, "
              << trace.size() << " epochs; loss " << trace.front().loss
              << " -> " << trace.back().loss << "\n";
    std::cout << "wrote " << ckpt << " and " << loss_csv << "\n";
    return 0;
}

int run_detect(const DetectOptions& opt) {
    if (!fs::exists(opt.checkpoint)) {
        throw arht::CheckpointError("checkpoint not found: " + opt.checkpoint);
    }
    arht::bnn::Checkpoint ckpt = arht::bnn::load_checkpoint(opt.checkpoint);
    const std::uint64_t seed = opt.seed_given ? opt.seed : ckpt.train_seed;

    arht::Matrix train_inputs;
    arht::Matrix test_inputs;
    std::vector<int> labels;

    if (opt.synthetic == "table8") {
        arht::data::SyntheticSpec spec;
        spec.dim = opt.p;
        spec.mu_value = opt.mu_value;
        spec.variance = opt.variance;
        spec.n_train = opt.n_train;
        spec.n_test_in = opt.n_test_in;
        spec.n_test_ood = opt.n_test_ood;
        spec.seed = seed;
        auto [train, test] = arht::data::gen_table8(spec);
        train_inputs = std::move(train.inputs);
        test_inputs = std::move(test.inputs);
        labels = std::move(test.ood_flags);
    } else if (!opt.train_images.empty() && !opt.test_images.empty()) {
        train_inputs = arht::data::read_idx(opt.train_images).inputs;
        test_inputs = arht::data::read_idx(opt.test_images).inputs;
        labels.assign(test_inputs.rows(), 0);
        if (!opt.test_ood_images.empty()) {
            arht::Matrix ood = arht::data::read_idx(opt.test_ood_images).inputs;
            if (ood.cols() != test_inputs.cols()) {
                throw arht::DimensionMismatch(
                    "OOD images have a different flattened size");
            }
            arht::Matrix merged(test_inputs.rows() + ood.rows(),
                                test_inputs.cols());
            merged.topRows(test_inputs.rows()) = test_inputs;
            merged.bottomRows(ood.rows()) = ood;
            test_inputs = std::move(merged);
            labels.insert(labels.end(), ood.rows(), 1);
        } else {
            labels.clear();  // no ground truth
        }
    } else {
        throw UsageError(
            "detect needs either --synthetic table8 or --train-images and "
            "--test-images");
    }

    if (train_inputs.cols() != ckpt.net.input_dim()) {
        throw arht::DimensionMismatch(
            "checkpoint expects input dimension " +
            std::to_string(ckpt.net.input_dim()) + ", data has " +
            std::to_string(train_inputs.cols()));
    }

    arht::Rng profile_rng = arht::Rng::stream(seed, kProfileStream);
    arht::detector::InDistributionProfile profile = arht::detector::build_profile(
        ckpt.net, train_inputs, opt.s, profile_rng, opt.checkpoint);
    std::cout << "profile: " << profile.summary.count << " embeddings of dim "
              << profile.embed_dim << "\n";

    arht::detector::DetectConfig config;
    config.n2 = opt.n2;
    config.lambda0 = opt.lambda0;
    config.alpha = opt.alpha;
    config.seed = seed;
    config.threads = opt.threads;
    arht::detector::DetectionReport report =
        arht::detector::detect(profile, ckpt.net, test_inputs, labels, config);

    std::map<std::string, double> metrics;
    if (!labels.empty()) {
        arht::eval::ScoredLabels scored;
        for (const auto& point : report.points) {
            if (point.ok) {
                scored.scores.push_back(point.arht.statistic);
                scored.labels.push_back(point.label);
            }
        }
        metrics["auroc"] = arht::eval::auroc(scored);
        metrics["aupr"] = arht::eval::aupr(scored);
    }

    const std::string report_csv = out_path(opt.out_dir, "report.csv");
    arht::report::write_report_csv(report, report_csv);
    const std::string summary_json = out_path(opt.out_dir, "summary.json");
    arht::report::write_summary_json(report, metrics, summary_json);

    std::int64_t rejections = 0;
    for (const auto& point : report.points) {
        rejections += point.rejected;
    }
    std::cout << "m=" << report.m << " k_hat=" << report.k_hat
              << " threshold=" << report.threshold_used
              << " rejections=" << rejections << "\n";
    for (const auto& [name, value] : metrics) {
        std::cout << name << "=" << value << "\n";
    }
    std::cout << "wrote " << report_csv << " and " << summary_json << "\n";
    return 0;
}

int run_simulate(const SimulateOptions& opt) {
    arht::simulate::NullSimConfig config;
    config.p = opt.p;
    config.n1 = opt.n1;
    config.n2 = opt.n2;
    config.lambda0 = opt.lambda0;
    config.replicates = opt.replicates;
    config.seed = opt.seed;
    config.threads = opt.threads;
    arht::simulate::NullSimResult result = arht::simulate::run(config);

    const std::string csv = out_path(opt.out_dir, "null_arht.csv");
    arht::report::write_null_csv(result, csv);
    const std::string json = out_path(opt.out_dir, "null_summary.json");
    arht::report::write_null_summary_json(result, json);
    std::cout << "replicates=" << result.statistics.size()
              << " mean=" << result.mean << " sd=" << result.sd
              << " tail@1.645=" << result.tail_1645
              << " tail@1.96=" << result.tail_196 << "\n";
    std::cout << "wrote " << csv << " and " << json << "\n";
    return 0;
}

int run_densities(const DensityOptions& opt) {
    struct FPair {
        long p, n;
    };
    std::vector<FPair> pairs;
    for (const std::string& raw : opt.pairs) {
        const auto comma = raw.find(',');
        if (comma == std::string::npos) {
            throw UsageError("--pair expects \"p,n\", got: " + raw);
        }
        FPair fp{};
        try {
            fp.p = std::stol(raw.substr(0, comma));
            fp.n = std::stol(raw.substr(comma + 1));
        } catch (const std::exception&) {
            throw UsageError("--pair expects integers \"p,n\", got: " + raw);
        }
        if (fp.p <= 0 || fp.n <= fp.p) {
            throw UsageError("--pair needs n > p > 0, got p=" +
                             std::to_string(fp.p) +
                             " n=" + std::to_string(fp.n));
        }
        pairs.push_back(fp);
    }
    if (!(opt.grid_step > 0.0) || !(opt.grid_max > 0.0)) {
        throw UsageError("--grid-step and --grid-max must be positive");
    }

    const std::string csv = out_path(opt.out_dir, "densities.csv");
    std::ofstream out(csv, std::ios::trunc);
    if (!out) {
        throw arht::Error("cannot open for writing: " + csv);
    }
    out << "x,normal";
    for (const FPair& fp : pairs) {
        out << ",f_p" << fp.p << "_n" << fp.n;
    }
    out << "\n";
    const auto half = static_cast<long>(opt.grid_max / opt.grid_step);
    for (long i = -half; i <= half; ++i) {
        const double x = static_cast<double>(i) * opt.grid_step;
        out << arht::report::format_double(x) << ','
            << arht::report::format_double(arht::stats::normal_pdf(x));
        for (const FPair& fp : pairs) {
            const double d1 = static_cast<double>(fp.p);
            const double d2 = static_cast<double>(fp.n - fp.p);
            out << ',' << arht::report::format_double(
                              arht::stats::f_pdf(x, d1, d2));
        }
        out << '\n';
    }
    std::cout << "wrote " << csv << " (" << (2 * half + 1) << " grid rows)\n";

    if (!opt.report.empty()) {
        // Histogram of the report's statistic column split by ood flag.
        std::ifstream in(opt.report);
        if (!in) {
            throw arht::Error("cannot open report: " + opt.report);
        }
        std::string line;
        std::getline(in, line);  // header
        std::vector<double> stat_in, stat_ood;
        while (std::getline(in, line)) {
            std::vector<std::string> cells;
            std::size_t start = 0;
            while (true) {
                const auto comma = line.find(',', start);
                cells.push_back(line.substr(
                    start, comma == std::string::npos ? comma : comma - start));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            if (cells.size() < 7 || cells[4].empty()) continue;
            const double stat = std::stod(cells[4]);
            (cells[1] == "1" ? stat_ood : stat_in).push_back(stat);
        }
        double lo = 0.0, hi = 0.0;
        bool first = true;
        for (const auto* v : {&stat_in, &stat_ood}) {
            for (double s : *v) {
                lo = first ? s : std::min(lo, s);
                hi = first ? s : std::max(hi, s);
                first = false;
            }
        }
        if (first || opt.bins <= 0) {
            throw arht::Error("report has no usable statistic rows");
        }
        const double width = (hi - lo) / opt.bins > 0 ? (hi - lo) / opt.bins : 1.0;
        std::vector<std::int64_t> count_in(opt.bins, 0), count_ood(opt.bins, 0);
        auto bucket = [&](double s) {
            auto b = static_cast<long>((s - lo) / width);
            return std::min<long>(std::max<long>(b, 0), opt.bins - 1);
        };
        for (double s : stat_in) ++count_in[bucket(s)];
        for (double s : stat_ood) ++count_ood[bucket(s)];
        const std::string hist_csv = out_path(opt.out_dir, "arht_hist.csv");
        std::ofstream hout(hist_csv, std::ios::trunc);
        hout << "bin_lo,bin_hi,count_in,count_ood\n";
        for (int b = 0; b < opt.bins; ++b) {
            hout << arht::report::format_double(lo + b * width) << ','
                 << arht::report::format_double(lo + (b + 1) * width) << ','
                 << count_in[b] << ',' << count_ood[b] << '\n';
        }
        std::cout << "wrote " << hist_csv << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-dimensional two-sample testing for OOD detection"};
    app.require_subcommand(1);
    // Later occurrences win; config-file expansion relies on this.
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::string config_path;  // recorded; expansion happens pre-parse

    TrainOptions train_opt;
    CLI::App* train = app.add_subcommand("train", "Train the encoder");
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--synthetic", train_opt.synthetic,
                      "Synthetic dataset name (table8)")
        ->check(CLI::IsMember({"table8"}));
    train->add_option("--images", train_opt.images, "IDX image file");
    train->add_option("--labels", train_opt.labels, "IDX label file");
    train->add_option("--p", train_opt.p, "Synthetic input dimension");
    train->add_option("--n-train", train_opt.n_train, "Synthetic train count");
    train->add_option("--mu", train_opt.mu_value, "Synthetic mean coordinate");
    train->add_option("--variance", train_opt.variance, "Synthetic variance");
    train->add_option("--hidden", train_opt.hidden, "Hidden width");
    train->add_option("--activation", train_opt.activation, "Activation")
        ->check(CLI::IsMember({"relu", "tanh", "identity"}));
    train->add_option("--prior-std", train_opt.prior_std, "Prior std");
    train->add_option("--epochs", train_opt.epochs, "Training epochs");
    train->add_option("--batch-size", train_opt.batch_size, "Batch size");
    train->add_option("--learning-rate", train_opt.learning_rate,
                      "Learning rate");
    train->add_option("--kl-weight", train_opt.kl_weight,
                      "Scale on the per-epoch KL term");
    train->add_option("--weight-decay", train_opt.weight_decay,
                      "Weight decay on posterior means");
    train->add_option("--seed", train_opt.seed, "Seed");
    train->add_option("--out-dir", train_opt.out_dir, "Output directory");

    DetectOptions detect_opt;
    CLI::App* detect = app.add_subcommand("detect", "Score a test set");
    detect->add_option("--config", config_path, "key=value config file");
    detect->add_option("--checkpoint", detect_opt.checkpoint, "Checkpoint file")
        ->required();
    detect->add_option("--synthetic", detect_opt.synthetic,
                       "Synthetic dataset name (table8)")
        ->check(CLI::IsMember({"table8"}));
    detect->add_option("--train-images", detect_opt.train_images,
                       "IDX images defining the in-distribution profile");
    detect->add_option("--test-images", detect_opt.test_images,
                       "IDX images to score");
    detect->add_option("--test-ood-images", detect_opt.test_ood_images,
                       "IDX images appended as known-OOD rows");
    detect->add_option("--p", detect_opt.p, "Synthetic input dimension");
    detect->add_option("--n-train", detect_opt.n_train, "Synthetic train count");
    detect->add_option("--n-test-in", detect_opt.n_test_in,
                       "Synthetic in-distribution test count");
    detect->add_option("--n-test-ood", detect_opt.n_test_ood,
                       "Synthetic OOD test count");
    detect->add_option("--mu", detect_opt.mu_value, "Synthetic mean coordinate");
    detect->add_option("--variance", detect_opt.variance, "Synthetic variance");
    detect->add_option("--s", detect_opt.s, "Posterior draws per training point");
    detect->add_option("--n2", detect_opt.n2, "Posterior draws per test point");
    detect->add_option("--lambda0", detect_opt.lambda0, "Regularizer grid base");
    detect->add_option("--alpha", detect_opt.alpha, "FDR level");
    detect->add_option("--threads", detect_opt.threads,
                       "Worker threads (1 = serial)");
    detect->add_option("--seed", detect_opt.seed,
                       "Seed (default: the checkpoint's training seed)");
    detect->add_option("--out-dir", detect_opt.out_dir, "Output directory");

    SimulateOptions sim_opt;
    CLI::App* sim = app.add_subcommand("simulate-null",
                                       "Monte-Carlo null distribution");
    sim->add_option("--config", config_path, "key=value config file");
    sim->add_option("--p", sim_opt.p, "Dimension");
    sim->add_option("--n1", sim_opt.n1, "Group-1 count");
    sim->add_option("--n2", sim_opt.n2, "Group-2 count");
    sim->add_option("--lambda0", sim_opt.lambda0, "Regularizer grid base");
    sim->add_option("--replicates", sim_opt.replicates, "Replicates");
    sim->add_option("--seed", sim_opt.seed, "Seed");
    sim->add_option("--threads", sim_opt.threads, "Worker threads (1 = serial)");
    sim->add_option("--out-dir", sim_opt.out_dir, "Output directory");

    DensityOptions den_opt;
    CLI::App* den = app.add_subcommand(
        "densities", "Emit N(0,1) and F(p, n-p) density curves");
    den->add_option("--config", config_path, "key=value config file");
    den->add_option("--pair", den_opt.pairs,
                    "Comma-separated \"p,n\" pair (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    den->add_option("--grid-max", den_opt.grid_max, "Grid half-width");
    den->add_option("--grid-step", den_opt.grid_step, "Grid step");
    den->add_option("--report", den_opt.report,
                    "Optional report.csv to histogram by ood flag");
    den->add_option("--bins", den_opt.bins, "Histogram bins");
    den->add_option("--out-dir", den_opt.out_dir, "Output directory");

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*train) {
            return run_train(train_opt);
        }
        if (*detect) {
            detect_opt.seed_given = detect->count("--seed") > 0;
            return run_detect(detect_opt);
        }
        if (*sim) {
            return run_simulate(sim_opt);
        }
        if (*den) {
            return run_densities(den_opt);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
