#include "aidp/models.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "aidp/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "model file format assumes a little-endian host");

namespace aidp {

namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
    Tensor t = Tensor::uninit(shape);
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std * normal01(rng);
    return t;
}

Tensor& find_param(std::vector<std::pair<std::string, Tensor>>& params,
                   const std::string& name) {
    for (auto& [n, t] : params)
        if (n == name) return t;
    throw ContractError("unknown parameter: " + name);
}

const Tensor& find_param_const(const std::vector<std::pair<std::string, Tensor>>& params,
                               const std::string& name) {
    for (auto& [n, t] : params)
        if (n == name) return t;
    throw ContractError("unknown parameter: " + name);
}

std::size_t count_params(const std::vector<std::pair<std::string, Tensor>>& params) {
    std::size_t n = 0;
    for (auto& [name, t] : params) n += t.size();
    return n;
}

}  // namespace

void ClassifierSpec::validate() const {
    if (widths.empty()) throw ConfigError("classifier: needs at least one conv block");
    for (std::size_t w : widths)
        if (w == 0) throw ConfigError("classifier: zero-width block");
    if (classes < 2) throw ConfigError("classifier: needs at least 2 classes");
    if (in_channels == 0 || in_h == 0 || in_w == 0)
        throw ConfigError("classifier: empty input shape");
    if (kernel == 0 || kernel % 2 == 0)
        throw ConfigError("classifier: kernel must be odd and positive");
    if (!(tap_low < tap_high && tap_high < widths.size()))
        throw ConfigError("classifier: taps must satisfy 0 <= tap_low < tap_high < blocks");
}

Tensor& ClassifierModel::param(const std::string& name) { return find_param(params, name); }
const Tensor& ClassifierModel::param(const std::string& name) const {
    return find_param_const(params, name);
}
std::size_t ClassifierModel::param_count() const { return count_params(params); }

ClassifierModel build_classifier(const ClassifierSpec& spec, std::uint64_t seed) {
    spec.validate();
    ClassifierModel m;
    m.spec = spec;
    Rng rng(seed);
    std::size_t cin = spec.in_channels;
    for (std::size_t i = 0; i < spec.blocks(); ++i) {
        const std::size_t cout = spec.widths[i];
        m.params.emplace_back("block" + std::to_string(i) + ".w",
                              he_normal({cout, cin, spec.kernel, spec.kernel},
                                        cin * spec.kernel * spec.kernel, rng));
        m.params.emplace_back("block" + std::to_string(i) + ".b", Tensor::zeros({cout}));
        cin = cout;
    }
    m.params.emplace_back("head.w", he_normal({cin, spec.classes}, cin, rng));
    m.params.emplace_back("head.b", Tensor::zeros({spec.classes}));
    return m;
}

ClassifierOut classifier_forward(const ClassifierModel& model, Tape& tape, Var x,
                                 bool param_grads, ParamVars* out_params) {
    const ClassifierSpec& spec = model.spec;
    const Tensor& xv = x.value();
    if (xv.rank() != 4 || xv.extent(1) != spec.in_channels || xv.extent(2) != spec.in_h ||
        xv.extent(3) != spec.in_w)
        throw ShapeError("classifier: input " + shape_str(xv.shape()) + " does not match spec [N," +
                         std::to_string(spec.in_channels) + "," + std::to_string(spec.in_h) + "," +
                         std::to_string(spec.in_w) + "]");
    auto reg = [&](const std::string& name) {
        Var v = tape.leaf(model.param(name), param_grads);
        if (out_params) out_params->emplace_back(name, v);
        return v;
    };
    ClassifierOut out;
    Var h = x;
    const int pad = static_cast<int>(spec.kernel / 2);
    for (std::size_t i = 0; i < spec.blocks(); ++i) {
        Var w = reg("block" + std::to_string(i) + ".w");
        Var b = reg("block" + std::to_string(i) + ".b");
        h = ops::relu(ops::conv2d(h, w, b, /*stride=*/2, pad));
        if (i == spec.tap_low) out.h_low = h;
        if (i == spec.tap_high) out.h_high = h;
    }
    Var pooled = ops::global_average_pool(h);
    Var hw = reg("head.w");
    Var hb = reg("head.b");
    out.logits = ops::affine(pooled, hw, hb);
    return out;
}

const char* taps_mode_name(TapsMode m) {
    switch (m) {
        case TapsMode::both: return "both";
        case TapsMode::low_only: return "low_only";
        case TapsMode::high_only: return "high_only";
    }
    return "both";
}

TapsMode taps_mode_from_name(const std::string& s) {
    if (s == "both") return TapsMode::both;
    if (s == "low_only") return TapsMode::low_only;
    if (s == "high_only") return TapsMode::high_only;
    throw ConfigError("unknown taps mode: " + s);
}

void DiscriminatorSpec::validate() const {
    if (c_low == 0 || c_high == 0) throw ConfigError("discriminator: zero tap channels");
    if (branch_widths.empty()) throw ConfigError("discriminator: empty branch");
    if (trunk_widths.empty()) throw ConfigError("discriminator: empty trunk");
    for (std::size_t w : branch_widths)
        if (w == 0) throw ConfigError("discriminator: zero branch width");
    for (std::size_t w : trunk_widths)
        if (w == 0) throw ConfigError("discriminator: zero trunk width");
}

std::size_t DiscriminatorSpec::trunk_input_width() const {
    // Concatenation of the branch outputs; single-tap ablations drop one branch.
    return taps == TapsMode::both ? 2 * branch_widths.back() : branch_widths.back();
}

Tensor& DiscriminatorModel::param(const std::string& name) { return find_param(params, name); }
const Tensor& DiscriminatorModel::param(const std::string& name) const {
    return find_param_const(params, name);
}
std::size_t DiscriminatorModel::param_count() const { return count_params(params); }

DiscriminatorModel build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) {
    spec.validate();
    DiscriminatorModel m;
    m.spec = spec;
    Rng rng(seed);
    auto add_mlp = [&](const std::string& prefix, std::size_t in,
                       const std::vector<std::size_t>& widths) {
        for (std::size_t i = 0; i < widths.size(); ++i) {
            m.params.emplace_back(prefix + "." + std::to_string(i) + ".w",
                                  he_normal({in, widths[i]}, in, rng));
            m.params.emplace_back(prefix + "." + std::to_string(i) + ".b",
                                  Tensor::zeros({widths[i]}));
            in = widths[i];
        }
        return in;
    };
    if (spec.taps != TapsMode::high_only) add_mlp("branch_low", spec.c_low, spec.branch_widths);
    if (spec.taps != TapsMode::low_only) add_mlp("branch_high", spec.c_high, spec.branch_widths);
    std::size_t w = add_mlp("trunk", spec.trunk_input_width(), spec.trunk_widths);
    m.params.emplace_back("out.w", he_normal({w, 1}, w, rng));
    m.params.emplace_back("out.b", Tensor::zeros({1}));
    return m;
}

Var discriminator_logit(const DiscriminatorModel& model, Tape& tape, Var h_low, Var h_high,
                        bool param_grads, ParamVars* out_params) {
    const DiscriminatorSpec& spec = model.spec;
    auto reg = [&](const std::string& name) {
        Var v = tape.leaf(model.param(name), param_grads);
        if (out_params) out_params->emplace_back(name, v);
        return v;
    };
    auto run_mlp = [&](const std::string& prefix, Var h, std::size_t layers) {
        for (std::size_t i = 0; i < layers; ++i) {
            Var w = reg(prefix + "." + std::to_string(i) + ".w");
            Var b = reg(prefix + "." + std::to_string(i) + ".b");
            h = ops::relu(ops::affine(h, w, b));
        }
        return h;
    };
    auto check_tap = [&](Var h, std::size_t channels, const char* which) {
        if (h.value().rank() != 4 || h.value().extent(1) != channels)
            throw ShapeError(std::string("discriminator: ") + which + " tap " +
                             shape_str(h.value().shape()) + " does not carry " +
                             std::to_string(channels) + " channels");
    };

    Var joined;
    if (spec.taps == TapsMode::both) {
        check_tap(h_low, spec.c_low, "low");
        check_tap(h_high, spec.c_high, "high");
        Var b1 = run_mlp("branch_low", ops::global_average_pool(h_low), spec.branch_widths.size());
        Var b2 = run_mlp("branch_high", ops::global_average_pool(h_high), spec.branch_widths.size());
        joined = ops::concat(b1, b2);
    } else if (spec.taps == TapsMode::low_only) {
        check_tap(h_low, spec.c_low, "low");
        joined = run_mlp("branch_low", ops::global_average_pool(h_low), spec.branch_widths.size());
    } else {
        check_tap(h_high, spec.c_high, "high");
        joined = run_mlp("branch_high", ops::global_average_pool(h_high), spec.branch_widths.size());
    }
    Var h = run_mlp("trunk", joined, spec.trunk_widths.size());
    Var z = ops::affine(h, reg("out.w"), reg("out.b"));  // [N,1]
    return ops::per_example_sum(z);                      // [N]
}

Var discriminate(const DiscriminatorModel& model, Tape& tape, Var h_low, Var h_high) {
    return ops::sigmoid(discriminator_logit(model, tape, h_low, h_high));
}

Tensor discriminate_batch(const ClassifierModel& clf, const DiscriminatorModel& disc,
                          const Tensor& x) {
    Tape tape;
    Var xv = tape.leaf(x, false);
    ClassifierOut out = classifier_forward(clf, tape, xv);
    Var p = discriminate(disc, tape, out.h_low, out.h_high);
    return p.value();
}

std::vector<int> predict_batch(const ClassifierModel& clf, const Tensor& x) {
    Tape tape;
    Var xv = tape.leaf(x, false);
    ClassifierOut out = classifier_forward(clf, tape, xv);
    const Tensor& z = out.logits.value();
    const std::size_t n = z.extent(0), k = z.extent(1);
    std::vector<int> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = z.data() + i * k;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        pred[i] = static_cast<int>(best);
    }
    return pred;
}

// ---------------------------------------------------------------------------
// Model file container.

namespace {

constexpr char kMagic[4] = {'A', 'I', 'D', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kTagClassifier = 0;
constexpr std::uint8_t kTagDiscriminator = 1;

class Writer {
  public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open for writing: " + path);
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void finish(const std::string& path) {
        out_.flush();
        if (!out_) throw IoError("write failed: " + path);
    }

  private:
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open for reading: " + path);
    }
    std::size_t offset() const { return offset_; }
    void bytes(void* p, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError(std::string("truncated model file while reading ") + what, offset_);
        offset_ += n;
    }
    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        bytes(&v, 1, what);
        return v;
    }
    std::uint32_t u32(const char* what) {
        std::uint32_t v;
        bytes(&v, 4, what);
        return v;
    }
    std::uint64_t u64(const char* what) {
        std::uint64_t v;
        bytes(&v, 8, what);
        return v;
    }
    std::string str(const char* what) {
        std::uint32_t n = u32(what);
        if (n > (1u << 20)) throw FormatError("implausible string length", offset_ - 4);
        std::string s(n, '\0');
        bytes(s.data(), n, what);
        return s;
    }

  private:
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void write_params(Writer& w, const std::vector<std::pair<std::string, Tensor>>& params) {
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) w.u64(d);
        w.u64(t.size() * sizeof(double));
        w.bytes(t.data(), t.size() * sizeof(double));
    }
}

std::vector<std::pair<std::string, Tensor>> read_params(Reader& r) {
    std::vector<std::pair<std::string, Tensor>> params;
    const std::uint32_t count = r.u32("parameter count");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str("parameter name");
        std::uint32_t rank = r.u32("parameter rank");
        if (rank > 8) throw FormatError("implausible parameter rank", r.offset() - 4);
        Shape shape(rank);
        for (auto& d : shape) d = r.u64("parameter extent");
        std::uint64_t len = r.u64("parameter payload length");
        if (len != shape_numel(shape) * sizeof(double))
            throw FormatError("parameter payload length does not match shape", r.offset() - 8);
        Tensor t = Tensor::uninit(shape);
        r.bytes(t.data(), len, "parameter payload");
        params.emplace_back(std::move(name), std::move(t));
    }
    return params;
}

std::uint8_t read_header(Reader& r, const char* expect_what) {
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic, expected AIDP", 0);
    std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError("unsupported model file version " + std::to_string(version), 4);
    (void)expect_what;
    return r.u8("type tag");
}

}  // namespace

void save_model(const ClassifierModel& model, const std::string& path) {
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u8(kTagClassifier);
    const ClassifierSpec& s = model.spec;
    // Length-prefixed spec record: 8 fixed words plus the width list.
    std::uint64_t spec_len = 4u * (8 + s.widths.size());
    w.u64(spec_len);
    w.u32(static_cast<std::uint32_t>(s.in_channels));
    w.u32(static_cast<std::uint32_t>(s.in_h));
    w.u32(static_cast<std::uint32_t>(s.in_w));
    w.u32(static_cast<std::uint32_t>(s.widths.size()));
    for (std::size_t v : s.widths) w.u32(static_cast<std::uint32_t>(v));
    w.u32(static_cast<std::uint32_t>(s.kernel));
    w.u32(static_cast<std::uint32_t>(s.classes));
    w.u32(static_cast<std::uint32_t>(s.tap_low));
    w.u32(static_cast<std::uint32_t>(s.tap_high));
    write_params(w, model.params);
    w.finish(path);
}

void save_model(const DiscriminatorModel& model, const std::string& path) {
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u8(kTagDiscriminator);
    const DiscriminatorSpec& s = model.spec;
    std::uint64_t spec_len = 1 + 4u * (4 + s.branch_widths.size() + s.trunk_widths.size());
    w.u64(spec_len);
    w.u8(static_cast<std::uint8_t>(s.taps));
    w.u32(static_cast<std::uint32_t>(s.c_low));
    w.u32(static_cast<std::uint32_t>(s.c_high));
    w.u32(static_cast<std::uint32_t>(s.branch_widths.size()));
    for (std::size_t v : s.branch_widths) w.u32(static_cast<std::uint32_t>(v));
    w.u32(static_cast<std::uint32_t>(s.trunk_widths.size()));
    for (std::size_t v : s.trunk_widths) w.u32(static_cast<std::uint32_t>(v));
    write_params(w, model.params);
    w.finish(path);
}

ClassifierModel load_classifier(const std::string& path) {
    Reader r(path);
    std::uint8_t tag = read_header(r, "classifier");
    if (tag != kTagClassifier)
        throw FormatError("type tag is not classifier (got tag " + std::to_string(tag) + ")", 8);
    std::uint64_t spec_len = r.u64("spec length");
    std::size_t spec_start = r.offset();
    ClassifierModel m;
    ClassifierSpec& s = m.spec;
    s.in_channels = r.u32("in_channels");
    s.in_h = r.u32("in_h");
    s.in_w = r.u32("in_w");
    std::uint32_t nblocks = r.u32("block count");
    if (nblocks > 64) throw FormatError("implausible block count", r.offset() - 4);
    s.widths.resize(nblocks);
    for (auto& v : s.widths) v = r.u32("block width");
    s.kernel = r.u32("kernel");
    s.classes = r.u32("classes");
    s.tap_low = r.u32("tap_low");
    s.tap_high = r.u32("tap_high");
    if (r.offset() - spec_start != spec_len)
        throw FormatError("spec record length mismatch", spec_start);
    s.validate();
    m.params = read_params(r);
    return m;
}

DiscriminatorModel load_discriminator(const std::string& path) {
    Reader r(path);
    std::uint8_t tag = read_header(r, "discriminator");
    if (tag != kTagDiscriminator)
        throw FormatError("type tag is not discriminator (got tag " + std::to_string(tag) + ")", 8);
    std::uint64_t spec_len = r.u64("spec length");
    std::size_t spec_start = r.offset();
    DiscriminatorModel m;
    DiscriminatorSpec& s = m.spec;
    std::uint8_t taps = r.u8("taps mode");
    if (taps > 2) throw FormatError("bad taps mode", r.offset() - 1);
    s.taps = static_cast<TapsMode>(taps);
    s.c_low = r.u32("c_low");
    s.c_high = r.u32("c_high");
    std::uint32_t nb = r.u32("branch layer count");
    if (nb > 64) throw FormatError("implausible branch layer count", r.offset() - 4);
    s.branch_widths.resize(nb);
    for (auto& v : s.branch_widths) v = r.u32("branch width");
    std::uint32_t nt = r.u32("trunk layer count");
    if (nt > 64) throw FormatError("implausible trunk layer count", r.offset() - 4);
    s.trunk_widths.resize(nt);
    for (auto& v : s.trunk_widths) v = r.u32("trunk width");
    if (r.offset() - spec_start != spec_len)
        throw FormatError("spec record length mismatch", spec_start);
    s.validate();
    m.params = read_params(r);
    return m;
}

}  // namespace aidp
