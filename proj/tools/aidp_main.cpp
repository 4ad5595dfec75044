// aidp: train, attack, purify, and evaluate models from the command line.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 I/O or file-format
// error.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "aidp/config.hpp"
#include "aidp/purifier.hpp"

namespace {

using namespace aidp;

constexpr const char* kUsage = R"(usage: aidp <subcommand> [--config FILE] [--key=value ...]

subcommands:
  train-classifier   natural training; writes out.model and out.log
  train-madry        adversarial training (PGD batches); writes out.model
  train-purifier     discriminator training over a frozen in.classifier
  attack             generate an adversarial batch file from in.classifier
  evaluate           robust-accuracy report for in.classifier [+ in.disc]
  sweep              evaluate over --axis KEY --values V1,V2,...
  report             pretty-print in.report; optional out.csv projection

Flags are config keys: --seed=7 --attack.epsilon=8/255 --workers=4 ...
Run "aidp keys" to list every key.
)";

struct CliArgs {
    std::string subcommand;
    std::optional<std::string> config_path;
    std::vector<std::pair<std::string, std::string>> flags;
    std::optional<std::string> axis;
    std::optional<std::string> values;
};

CliArgs parse_args(int argc, char** argv) {
    CliArgs args;
    if (argc < 2) throw ConfigError("missing subcommand");
    args.subcommand = argv[1];
    for (int i = 2; i < argc; ++i) {
        std::string arg = argv[i];
        auto take_value = [&](const std::string& name) {
            std::size_t eq = arg.find('=');
            if (eq != std::string::npos) return arg.substr(eq + 1);
            if (i + 1 >= argc) throw ConfigError(name + " needs a value");
            return std::string(argv[++i]);
        };
        if (arg.rfind("--config", 0) == 0 && (arg.size() == 8 || arg[8] == '=')) {
            args.config_path = take_value("--config");
        } else if (arg.rfind("--axis", 0) == 0 && (arg.size() == 6 || arg[6] == '=')) {
            args.axis = take_value("--axis");
        } else if (arg.rfind("--values", 0) == 0 && (arg.size() == 8 || arg[8] == '=')) {
            args.values = take_value("--values");
        } else {
            if (arg.rfind("--", 0) == 0) arg = arg.substr(2);
            std::size_t eq = arg.find('=');
            if (eq == std::string::npos)
                throw ConfigError("expected --key=value, got '" + std::string(argv[i]) + "'");
            args.flags.emplace_back(arg.substr(0, eq), arg.substr(eq + 1));
        }
    }
    return args;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Splits {
    Dataset train;
    Dataset test;
};

Splits load_dataset(const RunConfig& cfg) {
    Splits s;
    if (cfg.dataset_kind == "synth") {
        auto [train, test] = synth_blob_splits(cfg.dataset_seed, cfg.dataset_train_n,
                                               cfg.dataset_test_n, cfg.dataset_size,
                                               cfg.dataset_classes);
        s.train = std::move(train);
        s.test = std::move(test);
    } else if (cfg.dataset_kind == "idx") {
        if (cfg.dataset_dir.empty()) throw ConfigError("dataset.dir required for idx data");
        s.train = load_idx(cfg.dataset_dir + "/train-images-idx3-ubyte",
                           cfg.dataset_dir + "/train-labels-idx1-ubyte");
        s.test = load_idx(cfg.dataset_dir + "/t10k-images-idx3-ubyte",
                          cfg.dataset_dir + "/t10k-labels-idx1-ubyte");
        if (cfg.dataset_train_n) s.train = head(s.train, cfg.dataset_train_n);
        if (cfg.dataset_test_n) s.test = head(s.test, cfg.dataset_test_n);
        s.train.split = "train";
        s.test.split = "test";
    } else if (cfg.dataset_kind == "cifar10") {
        if (cfg.dataset_dir.empty()) throw ConfigError("dataset.dir required for cifar10 data");
        std::vector<std::string> train_files;
        for (int i = 1; i <= 5; ++i)
            train_files.push_back(cfg.dataset_dir + "/data_batch_" + std::to_string(i) + ".bin");
        s.train = load_cifar10_binary(train_files);
        s.test = load_cifar10_binary({cfg.dataset_dir + "/test_batch.bin"});
        if (cfg.dataset_train_n) s.train = head(s.train, cfg.dataset_train_n);
        if (cfg.dataset_test_n) s.test = head(s.test, cfg.dataset_test_n);
        s.train.split = "train";
        s.test.split = "test";
    } else {
        throw ConfigError("unknown dataset kind: " + cfg.dataset_kind);
    }
    return s;
}

std::string dataset_id(const RunConfig& cfg, const Dataset& d) {
    std::ostringstream os;
    os << d.name << "(classes=" << d.classes << ",n=" << d.size();
    if (cfg.dataset_kind == "synth") os << ",seed=" << cfg.dataset_seed;
    os << ")";
    return os.str();
}

TrainConfig train_config(const RunConfig& cfg) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    return tc;
}

void print_accuracy_line(const std::string& label, double accuracy) {
    std::cout << "  " << std::left << std::setw(16) << label << std::right << std::fixed
              << std::setprecision(4) << accuracy << "\n";
}

int cmd_train_classifier(RunConfig cfg, bool madry) {
    Splits data = load_dataset(cfg);
    finalize_for_dataset(cfg, data.train);
    ClassifierModel model = build_classifier(cfg.model, cfg.seed);
    TrainLog log = madry ? train_madry(model, data.train, train_config(cfg), cfg.train_attack)
                         : train_natural(model, data.train, train_config(cfg));
    save_model(model, cfg.out_model);
    if (!cfg.out_log.empty()) log.save(cfg.out_log);
    EvalContext ctx{&model, nullptr, nullptr, cfg.workers, cfg.eval_batch};
    double acc = clean_accuracy(ctx, data.test);
    std::cout << (madry ? "train-madry" : "train-classifier") << ": " << log.steps.size()
              << " steps, final loss " << log.final_loss() << "\n";
    print_accuracy_line("clean", acc);
    std::cout << "model written to " << cfg.out_model << "\n";
    return 0;
}

int cmd_train_purifier(RunConfig cfg) {
    if (cfg.in_classifier.empty())
        throw ConfigError("train-purifier needs in.classifier=<model file>");
    ClassifierModel clf = load_classifier(cfg.in_classifier);
    Splits data = load_dataset(cfg);
    cfg.model = clf.spec;  // tap channels follow the loaded classifier
    finalize_for_dataset(cfg, data.train);
    DiscriminatorModel disc = build_discriminator(cfg.disc, cfg.seed);
    TrainConfig tc = train_config(cfg);
    tc.epochs = cfg.disc_epochs;
    TrainLog log = train_discriminator(clf, disc, data.train, tc, cfg.avmixup_config());
    save_model(disc, cfg.out_model);
    if (!cfg.out_log.empty()) log.save(cfg.out_log);
    std::cout << "train-purifier: " << log.steps.size() << " steps, final loss "
              << log.final_loss() << "\nmodel written to " << cfg.out_model << "\n";
    return 0;
}

int cmd_attack(RunConfig cfg) {
    if (cfg.in_classifier.empty()) throw ConfigError("attack needs in.classifier=<model file>");
    ClassifierModel clf = load_classifier(cfg.in_classifier);
    std::optional<DiscriminatorModel> disc;
    if (!cfg.in_disc.empty()) disc = load_discriminator(cfg.in_disc);
    Splits data = load_dataset(cfg);
    cfg.model = clf.spec;
    finalize_for_dataset(cfg, data.test);
    Dataset eval_set = cfg.eval_n ? head(data.test, cfg.eval_n) : data.test;

    AttackConfig acfg = cfg.suite_attack(attack_kind_name(cfg.attack.kind));
    AdversarialBatch out;
    out.labels = eval_set.labels;
    out.x_adv = Tensor::uninit(eval_set.images.shape());
    out.failed.assign(eval_set.size(), false);
    const std::size_t per = eval_set.images.size() / eval_set.size();
    auto batches = minibatches(eval_set.size(), cfg.eval_batch, false, 0);
    std::size_t flips = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        auto [x, y] = gather(eval_set, batches[b]);
        AttackConfig bc = acfg;
        bc.seed = acfg.seed ^ static_cast<std::uint64_t>(b);
        AttackResult res = run_attack(clf, disc ? &*disc : nullptr, x, y, bc);
        std::vector<int> pred = predict_batch(clf, res.x_adv);
        for (std::size_t i = 0; i < batches[b].size(); ++i) {
            std::copy(res.x_adv.data() + i * per, res.x_adv.data() + (i + 1) * per,
                      out.x_adv.data() + batches[b][i] * per);
            if (!res.failed.empty()) out.failed[batches[b][i]] = res.failed[i];
            if (pred[i] != y[i]) ++flips;
        }
    }
    save_adversarial_batch(out, cfg.out_batch);
    std::cout << "attack " << attack_kind_name(acfg.kind) << ": " << flips << "/"
              << eval_set.size() << " examples misclassified\nbatch written to "
              << cfg.out_batch << "\n";
    return 0;
}

EvalReport run_evaluation(const RunConfig& cfg, const ClassifierModel& clf,
                          const DiscriminatorModel* disc, const ClassifierModel* surrogate,
                          const Dataset& eval_set) {
    EvalContext ctx;
    ctx.classifier = &clf;
    ctx.discriminator = disc;
    ctx.purify = (disc && cfg.purify_enabled) ? &cfg.purify : nullptr;
    ctx.workers = cfg.workers;
    ctx.batch_size = cfg.eval_batch;

    EvalReport report;
    report.dataset = dataset_id(cfg, eval_set);
    report.classifier_id = cfg.in_classifier;
    report.discriminator_id = disc ? cfg.in_disc : "";
    report.surrogate_id = surrogate ? cfg.in_surrogate : "";
    report.seed = cfg.seed;
    report.clean_accuracy = clean_accuracy(ctx, eval_set);
    for (const auto& name : cfg.eval_attacks) {
        AttackRow row;
        row.attack = name;
        row.config = cfg.suite_attack(name);
        row.accuracy = surrogate ? black_box_eval(*surrogate, ctx, row.config, eval_set)
                                 : robust_accuracy(ctx, row.config, eval_set);
        row.n = eval_set.size();
        report.attacks.push_back(std::move(row));
    }
    report.worst_accuracy = worst_case_accuracy(report.attacks);
    if (cfg.eval_timing) {
        if (!ctx.purify)
            throw ConfigError("eval.timing needs a discriminator and purify.enabled=true");
        report.timing = measure_timing(ctx, eval_set, cfg.timing_reps, cfg.timing_warmup,
                                       cfg.out_log);
    }
    report.config_echo = cfg.echo();
    return report;
}

void print_report(const EvalReport& report) {
    std::cout << "dataset:    " << report.dataset << "\nclassifier: " << report.classifier_id
              << "\n";
    if (!report.discriminator_id.empty())
        std::cout << "purifier:   " << report.discriminator_id << "\n";
    if (!report.surrogate_id.empty())
        std::cout << "surrogate:  " << report.surrogate_id << " (black-box)\n";
    print_accuracy_line("clean", report.clean_accuracy);
    for (const auto& row : report.attacks) print_accuracy_line(row.attack, row.accuracy);
    print_accuracy_line("worst", report.worst_accuracy);
    if (report.timing)
        std::cout << "  purification " << report.timing->purify_seconds_per_image
                  << " s/image, training " << report.timing->training_minutes << " min\n";
}

int cmd_evaluate(RunConfig cfg) {
    if (cfg.in_classifier.empty()) throw ConfigError("evaluate needs in.classifier=<model file>");
    ClassifierModel clf = load_classifier(cfg.in_classifier);
    std::optional<DiscriminatorModel> disc;
    if (!cfg.in_disc.empty()) disc = load_discriminator(cfg.in_disc);
    std::optional<ClassifierModel> surrogate;
    if (!cfg.in_surrogate.empty()) surrogate = load_classifier(cfg.in_surrogate);
    Splits data = load_dataset(cfg);
    cfg.model = clf.spec;
    finalize_for_dataset(cfg, data.test);
    Dataset eval_set = cfg.eval_n ? head(data.test, cfg.eval_n) : data.test;

    EvalReport report = run_evaluation(cfg, clf, disc ? &*disc : nullptr,
                                       surrogate ? &*surrogate : nullptr, eval_set);
    write_report(report, cfg.out_report, ReportFormat::json);
    if (!cfg.out_csv.empty()) write_report(report, cfg.out_csv, ReportFormat::csv);
    print_report(report);
    std::cout << "report written to " << cfg.out_report << "\n";
    return 0;
}

int cmd_sweep(const CliArgs& args, RunConfig base) {
    if (!args.axis || !args.values) throw ConfigError("sweep needs --axis KEY --values V1,V2,...");
    std::vector<std::string> values;
    {
        std::stringstream ss(*args.values);
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(item);
    }
    if (values.empty()) throw ConfigError("sweep: empty --values");
    if (base.in_classifier.empty()) throw ConfigError("sweep needs in.classifier=<model file>");

    const bool retrain = args.axis->rfind("avmixup.", 0) == 0 ||
                         args.axis->rfind("train_attack.", 0) == 0 ||
                         args.axis->rfind("disc.", 0) == 0;
    ClassifierModel clf = load_classifier(base.in_classifier);
    std::optional<DiscriminatorModel> loaded_disc;
    if (!base.in_disc.empty()) loaded_disc = load_discriminator(base.in_disc);

    std::string stem = base.out_report;
    std::string ext = ".json";
    if (auto dot = stem.rfind(".json"); dot != std::string::npos && dot == stem.size() - 5)
        stem = stem.substr(0, dot);

    std::string csv_path = base.out_csv.empty() ? stem + "-sweep.csv" : base.out_csv;
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot open for writing: " + csv_path);
    csv << "axis,value,attack,epsilon,step,iters,accuracy,n\n";

    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        RunConfig cfg = base;
        apply_config_entry(cfg, *args.axis, values[vi], static_cast<int>(vi + 1));
        Splits data = load_dataset(cfg);
        cfg.model = clf.spec;
        finalize_for_dataset(cfg, data.test);
        Dataset eval_set = cfg.eval_n ? head(data.test, cfg.eval_n) : data.test;

        std::optional<DiscriminatorModel> fresh;
        const DiscriminatorModel* disc = loaded_disc ? &*loaded_disc : nullptr;
        if (retrain) {
            fresh = build_discriminator(cfg.disc, cfg.seed);
            TrainConfig tc = train_config(cfg);
            tc.epochs = cfg.disc_epochs;
            train_discriminator(clf, *fresh, data.train, tc, cfg.avmixup_config());
            disc = &*fresh;
        }
        EvalReport report = run_evaluation(cfg, clf, disc, nullptr, eval_set);
        std::string path = stem + "-" + std::to_string(vi) + ext;
        write_report(report, path, ReportFormat::json);
        for (const auto& row : report.attacks) {
            std::ostringstream eps, step, acc;
            eps << row.config.epsilon;
            step << row.config.step_size;
            acc << row.accuracy;
            csv << *args.axis << ',' << values[vi] << ',' << row.attack << ',' << eps.str()
                << ',' << step.str() << ',' << row.config.iterations << ',' << acc.str() << ','
                << row.n << '\n';
        }
        std::cout << *args.axis << "=" << values[vi] << " -> worst "
                  << report.worst_accuracy << " (" << path << ")\n";
    }
    if (!csv) throw IoError("write failed: " + csv_path);
    std::cout << "sweep csv written to " << csv_path << "\n";
    return 0;
}

int cmd_report(RunConfig cfg) {
    if (cfg.in_report.empty()) throw ConfigError("report needs in.report=<report.json>");
    EvalReport report = read_report(cfg.in_report);
    print_report(report);
    if (!cfg.out_csv.empty()) {
        write_report(report, cfg.out_csv, ReportFormat::csv);
        std::cout << "csv written to " << cfg.out_csv << "\n";
    }
    return 0;
}

int run(int argc, char** argv) {
    CliArgs args = parse_args(argc, argv);
    if (args.subcommand == "help" || args.subcommand == "--help" || args.subcommand == "-h") {
        std::cout << kUsage;
        return 0;
    }
    if (args.subcommand == "keys") {
        for (const auto& k : config_keys()) std::cout << k << "\n";
        return 0;
    }
    std::optional<std::string> file_text;
    if (args.config_path) file_text = read_text_file(*args.config_path);
    RunConfig cfg = resolve_config(file_text, args.flags);

    if (args.subcommand == "train-classifier") return cmd_train_classifier(std::move(cfg), false);
    if (args.subcommand == "train-madry") return cmd_train_classifier(std::move(cfg), true);
    if (args.subcommand == "train-purifier") return cmd_train_purifier(std::move(cfg));
    if (args.subcommand == "attack") return cmd_attack(std::move(cfg));
    if (args.subcommand == "evaluate") return cmd_evaluate(std::move(cfg));
    if (args.subcommand == "sweep") return cmd_sweep(args, std::move(cfg));
    if (args.subcommand == "report") return cmd_report(std::move(cfg));
    throw ConfigError("unknown subcommand '" + args.subcommand + "'");
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n" << kUsage;
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
