#include "aidp/training.hpp"

#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>

#include "aidp/rng.hpp"

namespace aidp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

void check_labels(const Dataset& data, std::size_t classes, const char* op) {
    for (int y : data.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw DomainError(std::string(op) + ": label " + std::to_string(y) +
                              " outside [0," + std::to_string(classes) + ")");
}

// x_hat = x + (1-u)*gamma*delta, one rounding per element after the scale.
void interpolate_row(const double* x, const double* delta, double gamma, double u,
                     double* out, std::size_t n) {
    const double s = (1.0 - u) * gamma;
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + s * delta[i];
}

TrainLog run_classifier_training(
    ClassifierModel& model, const Dataset& data, const TrainConfig& cfg,
    const std::function<Tensor(const Tensor&, const std::vector<int>&, std::size_t)>&
        make_batch) {
    cfg.validate();
    if (data.size() == 0) throw ConfigError("training: empty dataset");
    if (model.frozen) throw ConfigError("training: classifier is frozen");
    check_labels(data, model.spec.classes, "training");

    SgdConfig scfg{cfg.lr, cfg.momentum, cfg.weight_decay};
    SgdState state;
    TrainLog log;
    Rng shuffle_rng(cfg.seed);
    std::size_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::uint64_t epoch_seed = shuffle_rng();
        for (const auto& bidx : minibatches(data.size(), cfg.batch_size, cfg.shuffle,
                                            epoch_seed)) {
            const auto t0 = Clock::now();
            auto [x, y] = gather(data, bidx);
            Tensor xb = make_batch(x, y, step);
            Tape tape;
            Var xv = tape.leaf(std::move(xb), false);
            ParamVars pvars;
            ClassifierOut out = classifier_forward(model, tape, xv, true, &pvars);
            Var loss = ops::softmax_cross_entropy(out.logits, y);
            tape.backward(loss);
            for (auto& [name, var] : pvars)
                sgd_step(name, model.param(name), var.grad(), scfg, state);
            log.steps.push_back({step, loss.value()[0], seconds_since(t0)});
            ++step;
        }
    }
    return log;
}

}  // namespace

void TrainConfig::validate() const {
    if (lr < 0.0) throw ConfigError("train: lr must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
}

void AVmixupConfig::validate() const {
    if (gamma < 1.0) throw ConfigError("avmixup: gamma must be >= 1");
    train_attack.validate();
}

const char* augmentation_name(Augmentation a) {
    switch (a) {
        case Augmentation::none: return "none";
        case Augmentation::av: return "av";
        case Augmentation::mixup: return "mixup";
        case Augmentation::avmixup: return "avmixup";
    }
    return "avmixup";
}

Augmentation augmentation_from_name(const std::string& s) {
    if (s == "none") return Augmentation::none;
    if (s == "av") return Augmentation::av;
    if (s == "mixup") return Augmentation::mixup;
    if (s == "avmixup") return Augmentation::avmixup;
    throw ConfigError("unknown augmentation mode: " + s);
}

const char* target_mode_name(TargetMode t) {
    return t == TargetMode::contrastive ? "contrastive" : "clean_vs_adv";
}

TargetMode target_mode_from_name(const std::string& s) {
    if (s == "clean_vs_adv") return TargetMode::clean_vs_adv;
    if (s == "contrastive") return TargetMode::contrastive;
    throw ConfigError("unknown target mode: " + s);
}

double TrainLog::total_seconds() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.seconds;
    return total;
}

void TrainLog::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "step,loss,seconds\n";
    for (const auto& s : steps)
        out << s.step << ',' << format_double(s.loss) << ',' << format_double(s.seconds)
            << '\n';
    if (!out) throw IoError("write failed: " + path);
}

TrainLog TrainLog::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    TrainLog log;
    std::string line;
    if (!std::getline(in, line)) return log;  // empty file: no steps
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        StepRecord rec{};
        const char* p = line.c_str();
        const char* end = p + line.size();
        auto r1 = std::from_chars(p, end, rec.step);
        if (r1.ec != std::errc() || r1.ptr == end || *r1.ptr != ',')
            throw ParseError("bad training-log line", lineno);
        auto r2 = std::from_chars(r1.ptr + 1, end, rec.loss);
        if (r2.ec != std::errc() || r2.ptr == end || *r2.ptr != ',')
            throw ParseError("bad training-log line", lineno);
        auto r3 = std::from_chars(r2.ptr + 1, end, rec.seconds);
        if (r3.ec != std::errc()) throw ParseError("bad training-log line", lineno);
        log.steps.push_back(rec);
    }
    return log;
}

TrainLog train_natural(ClassifierModel& model, const Dataset& data, const TrainConfig& cfg) {
    return run_classifier_training(
        model, data, cfg,
        [](const Tensor& x, const std::vector<int>&, std::size_t) { return x; });
}

TrainLog train_madry(ClassifierModel& model, const Dataset& data, const TrainConfig& cfg,
                     const AttackConfig& attack) {
    if (attack.kind != AttackKind::pgd)
        throw ConfigError("train_madry: training attack must be pgd");
    return run_classifier_training(
        model, data, cfg, [&](const Tensor& x, const std::vector<int>& y, std::size_t step) {
            AttackConfig acfg = attack;
            acfg.seed = attack.seed ^ static_cast<std::uint64_t>(step);
            return pgd(classifier_logits_fn(model), x, y, acfg);
        });
}

std::pair<Tensor, double> avmixup_sample(const Tensor& x, const Tensor& delta, double gamma,
                                         double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("avmixup_sample: u outside [0,1]");
    if (!x.same_shape(delta))
        throw ShapeError("avmixup_sample: x " + shape_str(x.shape()) + " vs delta " +
                         shape_str(delta.shape()));
    Tensor out = Tensor::uninit(x.shape());
    interpolate_row(x.data(), delta.data(), gamma, u, out.data(), x.size());
    return {std::move(out), 1.0 - u};
}

TrainLog train_discriminator(ClassifierModel& clf, DiscriminatorModel& disc,
                             const Dataset& data, const TrainConfig& cfg,
                             const AVmixupConfig& avcfg) {
    cfg.validate();
    avcfg.validate();
    if (data.size() == 0) throw ConfigError("train_discriminator: empty dataset");
    check_labels(data, clf.spec.classes, "train_discriminator");
    if (disc.spec.taps != avcfg.taps_used)
        throw ConfigError("train_discriminator: discriminator wiring " +
                          std::string(taps_mode_name(disc.spec.taps)) +
                          " does not match taps_used " +
                          std::string(taps_mode_name(avcfg.taps_used)));
    if (disc.spec.taps != TapsMode::high_only &&
        disc.spec.c_low != clf.spec.tap_low_channels())
        throw ConfigError("train_discriminator: discriminator expects " +
                          std::to_string(disc.spec.c_low) + " low-tap channels, classifier taps " +
                          std::to_string(clf.spec.tap_low_channels()));
    if (disc.spec.taps != TapsMode::low_only &&
        disc.spec.c_high != clf.spec.tap_high_channels())
        throw ConfigError("train_discriminator: discriminator expects " +
                          std::to_string(disc.spec.c_high) +
                          " high-tap channels, classifier taps " +
                          std::to_string(clf.spec.tap_high_channels()));

    clf.frozen = true;
    SgdConfig scfg{cfg.lr, cfg.momentum, cfg.weight_decay};
    SgdState state;
    TrainLog log;
    Rng shuffle_rng(cfg.seed);
    Rng u_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    Rng derange_rng(cfg.seed ^ 0xc2b2ae3d27d4eb4full);
    std::size_t step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::uint64_t epoch_seed = shuffle_rng();
        for (const auto& bidx : minibatches(data.size(), cfg.batch_size, cfg.shuffle,
                                            epoch_seed)) {
            const auto t0 = Clock::now();
            auto [x, y] = gather(data, bidx);
            const std::size_t b = x.extent(0);
            const std::size_t per = b ? x.size() / b : 0;

            Tensor input_batch, h_low_in, h_high_in, targets;
            bool precomputed_taps = false;

            if (avcfg.target_mode == TargetMode::contrastive) {
                // Matched pairs scored clean (0), deranged pairs adversarial (1).
                Tape taps_tape;
                Var xv = taps_tape.leaf(x, false);
                ClassifierOut out = classifier_forward(clf, taps_tape, xv, false);
                const Tensor& hl = out.h_low.value();
                const Tensor& hh = out.h_high.value();
                const std::size_t lper = hl.size() / b;
                const std::size_t hper = hh.size() / b;
                const std::size_t rot = b > 1 ? 1 + derange_rng() % (b - 1) : 0;
                const std::size_t rows = b > 1 ? 2 * b : b;

                Shape ls = hl.shape(), hs = hh.shape();
                ls[0] = rows;
                hs[0] = rows;
                h_low_in = Tensor::uninit(ls);
                h_high_in = Tensor::uninit(hs);
                targets = Tensor::uninit({rows});
                std::memcpy(h_low_in.data(), hl.data(), b * lper * sizeof(double));
                std::memcpy(h_high_in.data(), hh.data(), b * hper * sizeof(double));
                for (std::size_t i = 0; i < b; ++i) targets[i] = 0.0;
                if (b > 1) {
                    std::memcpy(h_low_in.data() + b * lper, hl.data(),
                                b * lper * sizeof(double));
                    for (std::size_t i = 0; i < b; ++i) {
                        const std::size_t j = (i + rot) % b;
                        std::memcpy(h_high_in.data() + (b + i) * hper, hh.data() + j * hper,
                                    hper * sizeof(double));
                        targets[b + i] = 1.0;
                    }
                }
                precomputed_taps = true;
            } else {
                AttackConfig acfg = avcfg.train_attack;
                acfg.seed = avcfg.train_attack.seed ^ static_cast<std::uint64_t>(step);
                Tensor x_adv = run_attack(clf, nullptr, x, y, acfg).x_adv;
                Tensor delta = Tensor::uninit(x.shape());
                for (std::size_t i = 0; i < x.size(); ++i) delta[i] = x_adv[i] - x[i];

                Tensor xin;
                if (avcfg.augmentation == Augmentation::none ||
                    avcfg.augmentation == Augmentation::av) {
                    Shape s = x.shape();
                    s[0] = 2 * b;
                    xin = Tensor::uninit(s);
                    targets = Tensor::uninit({2 * b});
                    std::memcpy(xin.data(), x.data(), x.size() * sizeof(double));
                    for (std::size_t i = 0; i < b; ++i) targets[i] = 0.0;
                    if (avcfg.augmentation == Augmentation::none) {
                        std::memcpy(xin.data() + x.size(), x_adv.data(),
                                    x.size() * sizeof(double));
                    } else {
                        for (std::size_t i = 0; i < b; ++i)
                            interpolate_row(x.data() + i * per, delta.data() + i * per,
                                            avcfg.gamma, 0.0, xin.data() + x.size() + i * per,
                                            per);
                    }
                    for (std::size_t i = 0; i < b; ++i) targets[b + i] = 1.0;
                } else {
                    const double gamma =
                        avcfg.augmentation == Augmentation::mixup ? 1.0 : avcfg.gamma;
                    xin = Tensor::uninit(x.shape());
                    targets = Tensor::uninit({b});
                    for (std::size_t i = 0; i < b; ++i) {
                        const double u = uniform01(u_rng);
                        interpolate_row(x.data() + i * per, delta.data() + i * per, gamma, u,
                                        xin.data() + i * per, per);
                        targets[i] = 1.0 - u;
                    }
                }
                input_batch = std::move(xin);
            }

            Tape tape;
            Var hl_var, hh_var;
            if (precomputed_taps) {
                hl_var = tape.leaf(std::move(h_low_in), false);
                hh_var = tape.leaf(std::move(h_high_in), false);
            } else {
                Var xv = tape.leaf(std::move(input_batch), false);
                ClassifierOut out = classifier_forward(clf, tape, xv, false);
                hl_var = out.h_low;
                hh_var = out.h_high;
            }
            ParamVars dvars;
            Var z = discriminator_logit(disc, tape, hl_var, hh_var, true, &dvars);
            Var t = tape.leaf(std::move(targets), false);
            Var loss = ops::bce_with_logits(z, t);
            tape.backward(loss);
            for (auto& [name, var] : dvars)
                sgd_step(name, disc.param(name), var.grad(), scfg, state);
            log.steps.push_back({step, loss.value()[0], seconds_since(t0)});
            ++step;
        }
    }
    return log;
}

}  // namespace aidp
