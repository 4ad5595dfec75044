#include "aidp/config.hpp"
#include <functional>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <map>
#include <sstream>

namespace aidp {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_plain_double(const std::string& text, int line) {
    double v = 0.0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size())
        throw ParseError("malformed number '" + text + "'", line);
    return v;
}

std::uint64_t parse_u64(const std::string& text, int line) {
    std::uint64_t v = 0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size())
        throw ParseError("malformed unsigned integer '" + text + "'", line);
    return v;
}

int parse_int(const std::string& text, int line) {
    int v = 0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size())
        throw ParseError("malformed integer '" + text + "'", line);
    return v;
}

std::size_t parse_size(const std::string& text, int line) {
    return static_cast<std::size_t>(parse_u64(text, line));
}

bool parse_bool(const std::string& text, int line) {
    if (text == "true" || text == "1" || text == "on") return true;
    if (text == "false" || text == "0" || text == "off") return false;
    throw ParseError("malformed boolean '" + text + "'", line);
}

std::vector<std::string> split_csv(const std::string& text, int line) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ParseError("empty item in list '" + text + "'", line);
        out.push_back(item);
    }
    if (out.empty()) throw ParseError("empty list", line);
    return out;
}

std::vector<std::size_t> parse_csv_sizes(const std::string& text, int line) {
    std::vector<std::size_t> out;
    for (const auto& item : split_csv(text, line)) out.push_back(parse_size(item, line));
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += v[i];
    }
    return s;
}

template <typename F>
auto guard(F f, int line) {
    // Enum name lookups raise ConfigError; config parsing reports ParseError.
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ParseError(e.what(), line);
    }
}

struct KeyDef {
    const char* key;
    std::function<void(RunConfig&, const std::string&, int)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyDef>& registry() {
    static const std::vector<KeyDef> defs = {
        {"preset", [](RunConfig& c, const std::string& v, int) { c.preset = v; },
         [](const RunConfig& c) { return c.preset; }},
        {"seed", [](RunConfig& c, const std::string& v, int l) { c.seed = parse_u64(v, l); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"workers",
         [](RunConfig& c, const std::string& v, int l) { c.workers = parse_int(v, l); },
         [](const RunConfig& c) { return std::to_string(c.workers); }},

        {"dataset.kind",
         [](RunConfig& c, const std::string& v, int l) {
             if (v != "synth" && v != "idx" && v != "cifar10")
                 throw ParseError("dataset.kind must be synth, idx, or cifar10", l);
             c.dataset_kind = v;
         },
         [](const RunConfig& c) { return c.dataset_kind; }},
        {"dataset.dir", [](RunConfig& c, const std::string& v, int) { c.dataset_dir = v; },
         [](const RunConfig& c) { return c.dataset_dir; }},
        {"dataset.train_n",
         [](RunConfig& c, const std::string& v, int l) { c.dataset_train_n = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.dataset_train_n); }},
        {"dataset.test_n",
         [](RunConfig& c, const std::string& v, int l) { c.dataset_test_n = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.dataset_test_n); }},
        {"dataset.size",
         [](RunConfig& c, const std::string& v, int l) { c.dataset_size = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.dataset_size); }},
        {"dataset.classes",
         [](RunConfig& c, const std::string& v, int l) { c.dataset_classes = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.dataset_classes); }},
        {"dataset.seed",
         [](RunConfig& c, const std::string& v, int l) { c.dataset_seed = parse_u64(v, l); },
         [](const RunConfig& c) { return std::to_string(c.dataset_seed); }},

        {"model.widths",
         [](RunConfig& c, const std::string& v, int l) { c.model.widths = parse_csv_sizes(v, l); },
         [](const RunConfig& c) { return join_sizes(c.model.widths); }},
        {"model.kernel",
         [](RunConfig& c, const std::string& v, int l) { c.model.kernel = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.model.kernel); }},
        {"model.classes",
         [](RunConfig& c, const std::string& v, int l) { c.model.classes = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.model.classes); }},
        {"model.tap_low",
         [](RunConfig& c, const std::string& v, int l) { c.model.tap_low = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.model.tap_low); }},
        {"model.tap_high",
         [](RunConfig& c, const std::string& v, int l) { c.model.tap_high = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.model.tap_high); }},
        {"model.in_channels",
         [](RunConfig& c, const std::string& v, int l) { c.model.in_channels = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.model.in_channels); }},
        {"model.in_h",
         [](RunConfig& c, const std::string& v, int l) { c.model.in_h = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.model.in_h); }},
        {"model.in_w",
         [](RunConfig& c, const std::string& v, int l) { c.model.in_w = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.model.in_w); }},

        {"disc.branch_widths",
         [](RunConfig& c, const std::string& v, int l) {
             c.disc.branch_widths = parse_csv_sizes(v, l);
         },
         [](const RunConfig& c) { return join_sizes(c.disc.branch_widths); }},
        {"disc.trunk_widths",
         [](RunConfig& c, const std::string& v, int l) {
             c.disc.trunk_widths = parse_csv_sizes(v, l);
         },
         [](const RunConfig& c) { return join_sizes(c.disc.trunk_widths); }},
        {"disc.c_low",
         [](RunConfig& c, const std::string& v, int l) { c.disc.c_low = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.disc.c_low); }},
        {"disc.c_high",
         [](RunConfig& c, const std::string& v, int l) { c.disc.c_high = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.disc.c_high); }},
        {"disc.epochs",
         [](RunConfig& c, const std::string& v, int l) { c.disc_epochs = parse_int(v, l); },
         [](const RunConfig& c) { return std::to_string(c.disc_epochs); }},

        {"train.lr",
         [](RunConfig& c, const std::string& v, int l) { c.train.lr = parse_fraction(v, l); },
         [](const RunConfig& c) { return format_double(c.train.lr); }},
        {"train.momentum",
         [](RunConfig& c, const std::string& v, int l) { c.train.momentum = parse_fraction(v, l); },
         [](const RunConfig& c) { return format_double(c.train.momentum); }},
        {"train.weight_decay",
         [](RunConfig& c, const std::string& v, int l) {
             c.train.weight_decay = parse_fraction(v, l);
         },
         [](const RunConfig& c) { return format_double(c.train.weight_decay); }},
        {"train.epochs",
         [](RunConfig& c, const std::string& v, int l) { c.train.epochs = parse_int(v, l); },
         [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
        {"train.batch",
         [](RunConfig& c, const std::string& v, int l) { c.train.batch_size = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
        {"train.shuffle",
         [](RunConfig& c, const std::string& v, int l) { c.train.shuffle = parse_bool(v, l); },
         [](const RunConfig& c) { return c.train.shuffle ? "true" : "false"; }},

        {"train_attack.kind",
         [](RunConfig& c, const std::string& v, int l) {
             c.train_attack.kind = guard([&] { return attack_kind_from_name(v); }, l);
         },
         [](const RunConfig& c) { return std::string(attack_kind_name(c.train_attack.kind)); }},
        {"train_attack.epsilon",
         [](RunConfig& c, const std::string& v, int l) {
             c.train_attack.epsilon = parse_fraction(v, l);
         },
         [](const RunConfig& c) { return format_double(c.train_attack.epsilon); }},
        {"train_attack.step",
         [](RunConfig& c, const std::string& v, int l) {
             c.train_attack.step_size = parse_fraction(v, l);
         },
         [](const RunConfig& c) { return format_double(c.train_attack.step_size); }},
        {"train_attack.iters",
         [](RunConfig& c, const std::string& v, int l) {
             c.train_attack.iterations = parse_int(v, l);
         },
         [](const RunConfig& c) { return std::to_string(c.train_attack.iterations); }},
        {"train_attack.random_start",
         [](RunConfig& c, const std::string& v, int l) {
             c.train_attack.random_start = parse_bool(v, l);
         },
         [](const RunConfig& c) { return c.train_attack.random_start ? "true" : "false"; }},
        {"train_attack.seed",
         [](RunConfig& c, const std::string& v, int l) { c.train_attack.seed = parse_u64(v, l); },
         [](const RunConfig& c) { return std::to_string(c.train_attack.seed); }},

        {"avmixup.gamma",
         [](RunConfig& c, const std::string& v, int l) { c.avmixup.gamma = parse_fraction(v, l); },
         [](const RunConfig& c) { return format_double(c.avmixup.gamma); }},
        {"avmixup.augmentation",
         [](RunConfig& c, const std::string& v, int l) {
             c.avmixup.augmentation = guard([&] { return augmentation_from_name(v); }, l);
         },
         [](const RunConfig& c) { return std::string(augmentation_name(c.avmixup.augmentation)); }},
        {"avmixup.target_mode",
         [](RunConfig& c, const std::string& v, int l) {
             c.avmixup.target_mode = guard([&] { return target_mode_from_name(v); }, l);
         },
         [](const RunConfig& c) { return std::string(target_mode_name(c.avmixup.target_mode)); }},
        {"avmixup.taps",
         [](RunConfig& c, const std::string& v, int l) {
             c.avmixup.taps_used = guard([&] { return taps_mode_from_name(v); }, l);
         },
         [](const RunConfig& c) { return std::string(taps_mode_name(c.avmixup.taps_used)); }},

        {"attack.kind",
         [](RunConfig& c, const std::string& v, int l) {
             c.attack.kind = guard([&] { return attack_kind_from_name(v); }, l);
         },
         [](const RunConfig& c) { return std::string(attack_kind_name(c.attack.kind)); }},
        {"attack.epsilon",
         [](RunConfig& c, const std::string& v, int l) { c.attack.epsilon = parse_fraction(v, l); },
         [](const RunConfig& c) { return format_double(c.attack.epsilon); }},
        {"attack.step",
         [](RunConfig& c, const std::string& v, int l) {
             c.attack.step_size = parse_fraction(v, l);
         },
         [](const RunConfig& c) { return format_double(c.attack.step_size); }},
        {"attack.iters",
         [](RunConfig& c, const std::string& v, int l) { c.attack.iterations = parse_int(v, l); },
         [](const RunConfig& c) { return std::to_string(c.attack.iterations); }},
        {"attack.random_start",
         [](RunConfig& c, const std::string& v, int l) {
             c.attack.random_start = parse_bool(v, l);
         },
         [](const RunConfig& c) { return c.attack.random_start ? "true" : "false"; }},
        {"attack.mim_decay",
         [](RunConfig& c, const std::string& v, int l) {
             c.attack.mim_decay = parse_fraction(v, l);
         },
         [](const RunConfig& c) { return format_double(c.attack.mim_decay); }},
        {"attack.lambda",
         [](RunConfig& c, const std::string& v, int l) { c.attack.lambda = parse_fraction(v, l); },
         [](const RunConfig& c) { return format_double(c.attack.lambda); }},
        {"attack.cw_constant",
         [](RunConfig& c, const std::string& v, int l) {
             c.attack.cw_constant = parse_fraction(v, l);
         },
         [](const RunConfig& c) { return format_double(c.attack.cw_constant); }},
        {"attack.cw_lr",
         [](RunConfig& c, const std::string& v, int l) { c.attack.cw_lr = parse_fraction(v, l); },
         [](const RunConfig& c) { return format_double(c.attack.cw_lr); }},
        {"attack.cw_kappa",
         [](RunConfig& c, const std::string& v, int l) {
             c.attack.cw_kappa = parse_fraction(v, l);
         },
         [](const RunConfig& c) { return format_double(c.attack.cw_kappa); }},
        {"attack.cw_steps",
         [](RunConfig& c, const std::string& v, int l) { c.cw_steps = parse_int(v, l); },
         [](const RunConfig& c) { return std::to_string(c.cw_steps); }},
        {"attack.df_iters",
         [](RunConfig& c, const std::string& v, int l) { c.df_iters = parse_int(v, l); },
         [](const RunConfig& c) { return std::to_string(c.df_iters); }},
        {"attack.df_overshoot",
         [](RunConfig& c, const std::string& v, int l) {
             c.attack.deepfool_overshoot = parse_fraction(v, l);
         },
         [](const RunConfig& c) { return format_double(c.attack.deepfool_overshoot); }},
        {"attack.seed",
         [](RunConfig& c, const std::string& v, int l) { c.attack.seed = parse_u64(v, l); },
         [](const RunConfig& c) { return std::to_string(c.attack.seed); }},

        {"eval.attacks",
         [](RunConfig& c, const std::string& v, int l) { c.eval_attacks = split_csv(v, l); },
         [](const RunConfig& c) { return join_strings(c.eval_attacks); }},
        {"eval.n", [](RunConfig& c, const std::string& v, int l) { c.eval_n = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.eval_n); }},
        {"eval.batch",
         [](RunConfig& c, const std::string& v, int l) { c.eval_batch = parse_size(v, l); },
         [](const RunConfig& c) { return std::to_string(c.eval_batch); }},
        {"eval.timing",
         [](RunConfig& c, const std::string& v, int l) { c.eval_timing = parse_bool(v, l); },
         [](const RunConfig& c) { return c.eval_timing ? "true" : "false"; }},
        {"eval.timing_reps",
         [](RunConfig& c, const std::string& v, int l) { c.timing_reps = parse_int(v, l); },
         [](const RunConfig& c) { return std::to_string(c.timing_reps); }},
        {"eval.timing_warmup",
         [](RunConfig& c, const std::string& v, int l) { c.timing_warmup = parse_int(v, l); },
         [](const RunConfig& c) { return std::to_string(c.timing_warmup); }},

        {"purify.enabled",
         [](RunConfig& c, const std::string& v, int l) { c.purify_enabled = parse_bool(v, l); },
         [](const RunConfig& c) { return c.purify_enabled ? "true" : "false"; }},
        {"purify.epsilon",
         [](RunConfig& c, const std::string& v, int l) { c.purify.epsilon = parse_fraction(v, l); },
         [](const RunConfig& c) { return format_double(c.purify.epsilon); }},
        {"purify.alpha",
         [](RunConfig& c, const std::string& v, int l) { c.purify.alpha = parse_fraction(v, l); },
         [](const RunConfig& c) { return format_double(c.purify.alpha); }},
        {"purify.iters",
         [](RunConfig& c, const std::string& v, int l) { c.purify.iterations = parse_int(v, l); },
         [](const RunConfig& c) { return std::to_string(c.purify.iterations); }},
        {"purify.use_logit",
         [](RunConfig& c, const std::string& v, int l) {
             c.purify.use_logit_gradient = parse_bool(v, l);
         },
         [](const RunConfig& c) { return c.purify.use_logit_gradient ? "true" : "false"; }},

        {"in.classifier", [](RunConfig& c, const std::string& v, int) { c.in_classifier = v; },
         [](const RunConfig& c) { return c.in_classifier; }},
        {"in.disc", [](RunConfig& c, const std::string& v, int) { c.in_disc = v; },
         [](const RunConfig& c) { return c.in_disc; }},
        {"in.surrogate", [](RunConfig& c, const std::string& v, int) { c.in_surrogate = v; },
         [](const RunConfig& c) { return c.in_surrogate; }},
        {"in.report", [](RunConfig& c, const std::string& v, int) { c.in_report = v; },
         [](const RunConfig& c) { return c.in_report; }},
        {"out.model", [](RunConfig& c, const std::string& v, int) { c.out_model = v; },
         [](const RunConfig& c) { return c.out_model; }},
        {"out.report", [](RunConfig& c, const std::string& v, int) { c.out_report = v; },
         [](const RunConfig& c) { return c.out_report; }},
        {"out.csv", [](RunConfig& c, const std::string& v, int) { c.out_csv = v; },
         [](const RunConfig& c) { return c.out_csv; }},
        {"out.log", [](RunConfig& c, const std::string& v, int) { c.out_log = v; },
         [](const RunConfig& c) { return c.out_log; }},
        {"out.batch", [](RunConfig& c, const std::string& v, int) { c.out_batch = v; },
         [](const RunConfig& c) { return c.out_batch; }},
    };
    return defs;
}

const KeyDef* find_key(const std::string& key) {
    for (const auto& def : registry())
        if (key == def.key) return &def;
    return nullptr;
}

}  // namespace

double parse_fraction(const std::string& text, int line) {
    const std::size_t slash = text.find('/');
    if (slash == std::string::npos) return parse_plain_double(text, line);
    if (slash == 0 || slash + 1 >= text.size() || text.find('/', slash + 1) != std::string::npos)
        throw ParseError("malformed fraction '" + text + "'", line);
    const double num = parse_plain_double(text.substr(0, slash), line);
    const double den = parse_plain_double(text.substr(slash + 1), line);
    if (den == 0.0) throw ParseError("fraction with zero denominator '" + text + "'", line);
    return num / den;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& def : registry()) keys.push_back(def.key);
    std::sort(keys.begin(), keys.end());
    return keys;
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value,
                        int line) {
    const KeyDef* def = find_key(key);
    if (!def) throw ParseError("unknown key '" + key + "'", line);
    def->set(cfg, value, line);
}

namespace {

struct Entry {
    std::string key;
    std::string value;
    int line;
};

std::vector<Entry> parse_entries(const std::string& text) {
    std::vector<Entry> entries;
    std::map<std::string, int> seen;
    std::stringstream ss(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(ss, raw)) {
        ++lineno;
        std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        raw = trim(raw);
        if (raw.empty()) continue;
        std::size_t eq = raw.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key=value, got '" + raw + "'", lineno);
        std::string key = trim(raw.substr(0, eq));
        std::string value = trim(raw.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", lineno);
        auto [it, inserted] = seen.emplace(key, lineno);
        if (!inserted)
            throw ParseError("duplicate key '" + key + "' (lines " +
                                 std::to_string(it->second) + " and " + std::to_string(lineno) +
                                 ")",
                             lineno);
        entries.push_back({std::move(key), std::move(value), lineno});
    }
    return entries;
}

}  // namespace

void apply_config_text(RunConfig& cfg, const std::string& text) {
    for (const auto& e : parse_entries(text)) apply_config_entry(cfg, e.key, e.value, e.line);
}

void apply_preset(RunConfig& cfg, const std::string& name) {
    auto set_attacks = [&](double eps, double step) {
        cfg.attack.epsilon = eps;
        cfg.attack.step_size = step;
        cfg.attack.iterations = 40;
        cfg.train_attack.epsilon = eps;
        cfg.train_attack.step_size = step;
        cfg.train_attack.iterations = 10;
    };
    if (name == "toy") {
        set_attacks(8.0 / 255.0, 2.0 / 255.0);
        cfg.purify.epsilon = 8.0 / 255.0;
        cfg.purify.alpha = 2.0 / 255.0;
        cfg.purify.iterations = 10;
        cfg.avmixup.gamma = 2.0;
        cfg.disc.branch_widths = {64, 64};
        cfg.disc.trunk_widths = {64, 32};
        cfg.train.epochs = 3;
        cfg.disc_epochs = 1;
        cfg.dataset_kind = "synth";
        cfg.dataset_train_n = 4000;
        cfg.dataset_test_n = 1000;
        cfg.dataset_size = 32;
        cfg.dataset_classes = 4;
        cfg.model.widths = {16, 32, 64};
        cfg.model.kernel = 3;
        cfg.model.tap_low = 0;
        cfg.model.tap_high = 2;
    } else if (name == "svhn-paper") {
        set_attacks(12.0 / 255.0, 2.0 / 255.0);
        cfg.purify.epsilon = 12.0 / 255.0;
        cfg.purify.alpha = 3.0 / 255.0;
        cfg.purify.iterations = 10;
        cfg.avmixup.gamma = 2.0;
        cfg.disc.branch_widths = {1024, 1024, 1024};  // three hidden layers
        cfg.disc.trunk_widths = {1024, 512};
        cfg.disc_epochs = 1;
    } else if (name == "cifar10-paper") {
        set_attacks(8.0 / 255.0, 1.0 / 255.0);
        cfg.purify.epsilon = 8.0 / 255.0;
        cfg.purify.alpha = 2.0 / 255.0;
        cfg.purify.iterations = 10;
        cfg.avmixup.gamma = 1.5;
        cfg.disc.branch_widths = {1024, 1024};
        cfg.disc.trunk_widths = {1024, 512};
        cfg.disc_epochs = 1;
    } else if (name == "cifar100-paper") {
        set_attacks(8.0 / 255.0, 1.0 / 255.0);
        cfg.purify.epsilon = 16.0 / 255.0;
        cfg.purify.alpha = 2.0 / 255.0;
        cfg.purify.iterations = 20;
        cfg.avmixup.gamma = 1.5;
        cfg.disc.branch_widths = {1024, 1024};
        cfg.disc.trunk_widths = {1024, 512};
        cfg.disc_epochs = 1;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    cfg.preset = name;
}

RunConfig resolve_config(const std::optional<std::string>& file_text,
                         const std::vector<std::pair<std::string, std::string>>& flags) {
    RunConfig cfg;
    // Sentinels meaning "derive from the dataset / model at finalize time".
    cfg.model.classes = 0;
    cfg.model.in_channels = 0;
    cfg.model.in_h = 0;
    cfg.model.in_w = 0;
    cfg.disc.c_low = 0;
    cfg.disc.c_high = 0;
    if (const char* env = std::getenv("AIDP_SEED")) {
        try {
            cfg.seed = parse_u64(env, 0);
        } catch (const ParseError&) {
            throw ConfigError("AIDP_SEED is not an unsigned integer");
        }
    }

    std::vector<Entry> file_entries;
    if (file_text) file_entries = parse_entries(*file_text);

    // Duplicate flags are as much an error as duplicate file lines.
    std::map<std::string, int> seen_flags;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        auto [it, inserted] = seen_flags.emplace(flags[i].first, static_cast<int>(i + 1));
        if (!inserted)
            throw ParseError("duplicate flag '" + flags[i].first + "'",
                             static_cast<int>(i + 1));
        if (!find_key(flags[i].first))
            throw ParseError("unknown key '" + flags[i].first + "'", static_cast<int>(i + 1));
    }

    std::string preset = cfg.preset;
    for (const auto& e : file_entries)
        if (e.key == "preset") preset = e.value;
    for (const auto& [k, v] : flags)
        if (k == "preset") preset = v;
    apply_preset(cfg, preset);

    for (const auto& e : file_entries)
        if (e.key != "preset") apply_config_entry(cfg, e.key, e.value, e.line);
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (flags[i].first != "preset")
            apply_config_entry(cfg, flags[i].first, flags[i].second, static_cast<int>(i + 1));
    return cfg;
}

void finalize_for_dataset(RunConfig& cfg, const Dataset& train) {
    if (cfg.model.classes == 0) cfg.model.classes = train.classes;
    if (cfg.model.in_channels == 0) cfg.model.in_channels = train.images.extent(1);
    if (cfg.model.in_h == 0) cfg.model.in_h = train.images.extent(2);
    if (cfg.model.in_w == 0) cfg.model.in_w = train.images.extent(3);
    cfg.disc.taps = cfg.avmixup.taps_used;
    if (cfg.disc.c_low == 0) cfg.disc.c_low = cfg.model.tap_low_channels();
    if (cfg.disc.c_high == 0) cfg.disc.c_high = cfg.model.tap_high_channels();
}

AttackConfig RunConfig::suite_attack(const std::string& kind_name) const {
    AttackConfig a = attack;
    a.kind = attack_kind_from_name(kind_name);
    if (a.kind == AttackKind::cw_l2) a.iterations = cw_steps;
    if (a.kind == AttackKind::deepfool) a.iterations = df_iters;
    if (a.kind == AttackKind::fgsm) a.iterations = 1;
    return a;
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& def : registry()) out.emplace_back(def.key, def.get(*this));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace aidp
