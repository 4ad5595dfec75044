#include "aidp/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "aidp/training.hpp"

namespace aidp {

namespace {

using ordered_json = nlohmann::ordered_json;

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& f) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

void check_context(const EvalContext& ctx) {
    if (!ctx.classifier) throw ContractError("evaluation: no classifier in context");
    if (ctx.purify && !ctx.discriminator)
        throw ConfigError("evaluation: purification enabled without a discriminator");
    if (ctx.workers < 1) throw ConfigError("evaluation: workers must be >= 1");
    if (ctx.batch_size < 1) throw ConfigError("evaluation: batch size must be >= 1");
}

/// Integer correct-counts per fixed batch, reduced in batch order, so the
/// result does not depend on the worker count.
double batched_accuracy(
    const EvalContext& ctx, const Dataset& data,
    const std::function<Tensor(const Tensor&, const std::vector<int>&, std::size_t)>&
        make_batch) {
    check_context(ctx);
    if (data.size() == 0) throw ConfigError("evaluation: empty dataset");
    auto batches = minibatches(data.size(), ctx.batch_size, false, 0);
    std::vector<std::size_t> correct(batches.size(), 0);
    parallel_for(batches.size(), ctx.workers, [&](std::size_t i) {
        auto [x, y] = gather(data, batches[i]);
        Tensor xe = make_batch(x, y, i);
        if (ctx.purify) xe = purify(*ctx.classifier, *ctx.discriminator, xe, *ctx.purify);
        std::vector<int> pred = predict_batch(*ctx.classifier, xe);
        std::size_t c = 0;
        for (std::size_t k = 0; k < y.size(); ++k)
            if (pred[k] == y[k]) ++c;
        correct[i] = c;
    });
    std::size_t total = 0;
    for (std::size_t c : correct) total += c;
    return static_cast<double>(total) / static_cast<double>(data.size());
}

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

ordered_json attack_config_json(const AttackConfig& c) {
    ordered_json j;
    j["kind"] = attack_kind_name(c.kind);
    j["epsilon"] = c.epsilon;
    j["step_size"] = c.step_size;
    j["iterations"] = c.iterations;
    j["random_start"] = c.random_start;
    j["mim_decay"] = c.mim_decay;
    j["lambda"] = c.lambda;
    j["cw_constant"] = c.cw_constant;
    j["cw_lr"] = c.cw_lr;
    j["cw_kappa"] = c.cw_kappa;
    j["deepfool_overshoot"] = c.deepfool_overshoot;
    j["seed"] = c.seed;
    return j;
}

AttackConfig attack_config_from_json(const ordered_json& j) {
    AttackConfig c;
    c.kind = attack_kind_from_name(j.at("kind").get<std::string>());
    c.epsilon = j.at("epsilon").get<double>();
    c.step_size = j.at("step_size").get<double>();
    c.iterations = j.at("iterations").get<int>();
    c.random_start = j.at("random_start").get<bool>();
    c.mim_decay = j.at("mim_decay").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.cw_constant = j.at("cw_constant").get<double>();
    c.cw_lr = j.at("cw_lr").get<double>();
    c.cw_kappa = j.at("cw_kappa").get<double>();
    c.deepfool_overshoot = j.at("deepfool_overshoot").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

double clean_accuracy(const EvalContext& ctx, const Dataset& data) {
    return batched_accuracy(
        ctx, data, [](const Tensor& x, const std::vector<int>&, std::size_t) { return x; });
}

double robust_accuracy(const EvalContext& ctx, const AttackConfig& attack,
                       const Dataset& data) {
    return batched_accuracy(
        ctx, data, [&](const Tensor& x, const std::vector<int>& y, std::size_t batch) {
            AttackConfig acfg = attack;
            acfg.seed = attack.seed ^ static_cast<std::uint64_t>(batch);
            return run_attack(*ctx.classifier, ctx.discriminator, x, y, acfg).x_adv;
        });
}

double black_box_eval(const ClassifierModel& surrogate, const EvalContext& ctx,
                      const AttackConfig& attack, const Dataset& data) {
    return batched_accuracy(
        ctx, data, [&](const Tensor& x, const std::vector<int>& y, std::size_t batch) {
            AttackConfig acfg = attack;
            acfg.seed = attack.seed ^ static_cast<std::uint64_t>(batch);
            return run_attack(surrogate, nullptr, x, y, acfg).x_adv;
        });
}

double worst_case_accuracy(const std::vector<double>& attack_accuracies) {
    if (attack_accuracies.empty())
        throw ContractError("worst_case_accuracy: no attack rows");
    return *std::min_element(attack_accuracies.begin(), attack_accuracies.end());
}

double worst_case_accuracy(const std::vector<AttackRow>& rows) {
    std::vector<double> acc;
    acc.reserve(rows.size());
    for (const auto& r : rows) acc.push_back(r.accuracy);
    return worst_case_accuracy(acc);
}

double auc_from_scores(const std::vector<double>& clean_scores,
                       const std::vector<double>& adv_scores) {
    if (clean_scores.empty() || adv_scores.empty())
        throw ContractError("detector_auc: empty score set");
    double wins = 0.0;
    for (double a : adv_scores)
        for (double c : clean_scores) {
            if (a > c)
                wins += 1.0;
            else if (a == c)
                wins += 0.5;
        }
    return wins / (static_cast<double>(clean_scores.size()) *
                   static_cast<double>(adv_scores.size()));
}

namespace {

std::vector<double> disc_scores(const DiscriminatorModel& disc, const ClassifierModel& clf,
                                const Tensor& images) {
    const std::size_t n = images.extent(0);
    const std::size_t per = n ? images.size() / n : 0;
    std::vector<double> scores;
    scores.reserve(n);
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t count = std::min(chunk, n - start);
        Shape s = images.shape();
        s[0] = count;
        Tensor batch = Tensor::uninit(s);
        std::copy(images.data() + start * per, images.data() + (start + count) * per,
                  batch.data());
        Tensor p = discriminate_batch(clf, disc, batch);
        for (std::size_t i = 0; i < count; ++i) scores.push_back(p[i]);
    }
    return scores;
}

}  // namespace

double detector_auc(const DiscriminatorModel& disc, const ClassifierModel& clf,
                    const Tensor& clean_images, const Tensor& adv_images) {
    if (clean_images.size() == 0 || adv_images.size() == 0)
        throw ContractError("detector_auc: empty image set");
    return auc_from_scores(disc_scores(disc, clf, clean_images),
                           disc_scores(disc, clf, adv_images));
}

TimingInfo measure_timing(const EvalContext& ctx, const Dataset& data, int repetitions,
                          int warmup, const std::string& training_log_path) {
    check_context(ctx);
    if (!ctx.purify) throw ContractError("measure_timing: purification not configured");
    if (data.size() == 0) throw ConfigError("measure_timing: empty dataset");
    if (repetitions < 1) throw ConfigError("measure_timing: repetitions must be >= 1");

    const std::size_t per = data.images.size() / data.size();
    Shape single = data.images.shape();
    single[0] = 1;
    auto image_at = [&](std::size_t i) {
        Tensor img = Tensor::uninit(single);
        std::copy(data.images.data() + (i % data.size()) * per,
                  data.images.data() + (i % data.size() + 1) * per, img.data());
        return img;
    };

    using Clock = std::chrono::steady_clock;
    for (int i = 0; i < warmup; ++i)
        purify(*ctx.classifier, *ctx.discriminator, image_at(i), *ctx.purify);
    std::vector<double> samples(repetitions);
    for (int i = 0; i < repetitions; ++i) {
        Tensor img = image_at(warmup + i);
        auto t0 = Clock::now();
        purify(*ctx.classifier, *ctx.discriminator, img, *ctx.purify);
        samples[i] = std::chrono::duration<double>(Clock::now() - t0).count();
    }
    std::sort(samples.begin(), samples.end());
    TimingInfo info;
    info.purify_seconds_per_image =
        (samples.size() % 2 == 1)
            ? samples[samples.size() / 2]
            : 0.5 * (samples[samples.size() / 2 - 1] + samples[samples.size() / 2]);
    if (!training_log_path.empty())
        info.training_minutes = TrainLog::load(training_log_path).total_seconds() / 60.0;
    return info;
}

void write_report(const EvalReport& report, const std::string& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    if (format == ReportFormat::csv) {
        out << "attack,epsilon,step,iters,accuracy,n\n";
        for (const auto& row : report.attacks)
            out << row.attack << ',' << format_double(row.config.epsilon) << ','
                << format_double(row.config.step_size) << ',' << row.config.iterations << ','
                << format_double(row.accuracy) << ',' << row.n << '\n';
        if (!out) throw IoError("write failed: " + path);
        return;
    }
    ordered_json j;
    j["version"] = report.version;
    j["tool_version"] = report.tool_version;
    j["dataset"] = report.dataset;
    ordered_json models;
    models["classifier"] = report.classifier_id;
    models["discriminator"] =
        report.discriminator_id.empty() ? ordered_json(nullptr) : ordered_json(report.discriminator_id);
    models["surrogate"] =
        report.surrogate_id.empty() ? ordered_json(nullptr) : ordered_json(report.surrogate_id);
    j["models"] = std::move(models);
    j["clean_accuracy"] = report.clean_accuracy;
    ordered_json rows = ordered_json::array();
    for (const auto& row : report.attacks) {
        ordered_json r;
        r["attack"] = row.attack;
        r["config"] = attack_config_json(row.config);
        r["accuracy"] = row.accuracy;
        r["n"] = row.n;
        rows.push_back(std::move(r));
    }
    j["attacks"] = std::move(rows);
    j["worst_accuracy"] = report.worst_accuracy;
    if (report.timing) {
        ordered_json t;
        t["purify_seconds_per_image"] = report.timing->purify_seconds_per_image;
        t["training_minutes"] = report.timing->training_minutes;
        j["timing"] = std::move(t);
    } else {
        j["timing"] = nullptr;
    }
    j["seeds"] = ordered_json{{"base", report.seed}};
    ordered_json echo = ordered_json::object();
    for (const auto& [k, v] : report.config_echo) echo[k] = v;
    j["config"] = std::move(echo);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

EvalReport read_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw FormatError(std::string("bad report json: ") + e.what(), 0);
    }
    EvalReport r;
    if (!j.contains("version") || !j["version"].is_number_integer())
        throw FormatError("report missing version", 0);
    r.version = j["version"].get<int>();
    if (r.version != 1)
        throw FormatError("unknown report version " + std::to_string(r.version), 0);
    r.tool_version = j.at("tool_version").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    const auto& models = j.at("models");
    r.classifier_id = models.at("classifier").get<std::string>();
    if (!models.at("discriminator").is_null())
        r.discriminator_id = models.at("discriminator").get<std::string>();
    if (!models.at("surrogate").is_null())
        r.surrogate_id = models.at("surrogate").get<std::string>();
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    for (const auto& row : j.at("attacks")) {
        AttackRow ar;
        ar.attack = row.at("attack").get<std::string>();
        ar.config = attack_config_from_json(row.at("config"));
        ar.accuracy = row.at("accuracy").get<double>();
        ar.n = row.at("n").get<std::size_t>();
        r.attacks.push_back(std::move(ar));
    }
    r.worst_accuracy = j.at("worst_accuracy").get<double>();
    if (!j.at("timing").is_null()) {
        TimingInfo t;
        t.purify_seconds_per_image = j["timing"].at("purify_seconds_per_image").get<double>();
        t.training_minutes = j["timing"].at("training_minutes").get<double>();
        r.timing = t;
    }
    r.seed = j.at("seeds").at("base").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("config").items())
        r.config_echo.emplace_back(k, v.get<std::string>());
    return r;
}

}  // namespace aidp
