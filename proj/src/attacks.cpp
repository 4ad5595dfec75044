#include "aidp/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>

#include "aidp/rng.hpp"

namespace aidp {

namespace {

/// Gradient of a scalar loss built on top of the logits, w.r.t. the input.
Tensor input_gradient(const Tensor& x,
                      const std::function<Var(Tape&, Var)>& build_loss) {
    Tape tape;
    Var xv = tape.leaf(x, true);
    Var loss = build_loss(tape, xv);
    tape.backward(loss);
    return xv.grad_tensor();
}

Tensor ce_input_gradient(const LogitsFn& logits, const Tensor& x,
                         const std::vector<int>& y) {
    return input_gradient(x, [&](Tape& t, Var xv) {
        return ops::softmax_cross_entropy(logits(t, xv), y);
    });
}

std::vector<int> predictions(const LogitsFn& logits, const Tensor& x) {
    Tape tape;
    Var z = logits(tape, tape.leaf(x, false));
    const Tensor& zv = z.value();
    const std::size_t n = zv.extent(0), k = zv.extent(1);
    std::vector<int> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = zv.data() + i * k;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        pred[i] = static_cast<int>(best);
    }
    return pred;
}

void check_batch(const Tensor& x, const std::vector<int>& y, const char* op) {
    if (x.rank() < 1) throw ShapeError(std::string(op) + ": input needs a batch axis");
    if (y.size() != x.extent(0))
        throw ShapeError(std::string(op) + ": " + std::to_string(y.size()) +
                         " labels for batch of " + std::to_string(x.extent(0)));
}

/// Shared iteration body for the sign-step family.
Tensor sign_step_attack(const Tensor& x, const AttackConfig& cfg,
                        const std::function<Tensor(const Tensor&)>& gradient,
                        bool use_momentum, bool allow_random_start) {
    if (cfg.step_size > 2.0 * cfg.epsilon && cfg.iterations > 0)
        std::cerr << "[aidp] warning: step size " << cfg.step_size << " exceeds 2*epsilon "
                  << 2.0 * cfg.epsilon << "; iterates will oscillate across the ball\n";
    Tensor cur = x;
    if (allow_random_start && cfg.random_start) {
        Rng rng(cfg.seed);
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur[i] += uniform(rng, -cfg.epsilon, cfg.epsilon);
        cur = clip_unit(cur);
    }
    const std::size_t n = x.extent(0);
    const std::size_t per = n ? x.size() / n : 0;
    std::vector<double> g_acc(use_momentum ? x.size() : 0, 0.0);
    for (int it = 0; it < cfg.iterations; ++it) {
        Tensor g = gradient(cur);
        if (use_momentum) {
            for (std::size_t i = 0; i < n; ++i) {
                double l1 = 0.0;
                for (std::size_t k = 0; k < per; ++k) l1 += std::abs(g[i * per + k]);
                const double inv = l1 > 0.0 ? 1.0 / l1 : 0.0;
                for (std::size_t k = 0; k < per; ++k) {
                    std::size_t idx = i * per + k;
                    g_acc[idx] = cfg.mim_decay * g_acc[idx] + g[idx] * inv;
                }
            }
            for (std::size_t i = 0; i < cur.size(); ++i)
                cur[i] += cfg.step_size * sign0(g_acc[i]);
        } else {
            for (std::size_t i = 0; i < cur.size(); ++i)
                cur[i] += cfg.step_size * sign0(g[i]);
        }
        cur = clip_unit(clip_to_ball(cur, x, cfg.epsilon));
    }
    return cur;
}

}  // namespace

const char* attack_kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::fgsm: return "fgsm";
        case AttackKind::pgd: return "pgd";
        case AttackKind::mim: return "mim";
        case AttackKind::deepfool: return "deepfool";
        case AttackKind::cw_l2: return "cw_l2";
        case AttackKind::aux_aware_pgd: return "aux_aware_pgd";
    }
    return "pgd";
}

AttackKind attack_kind_from_name(const std::string& s) {
    if (s == "fgsm") return AttackKind::fgsm;
    if (s == "pgd") return AttackKind::pgd;
    if (s == "mim") return AttackKind::mim;
    if (s == "deepfool" || s == "df") return AttackKind::deepfool;
    if (s == "cw_l2" || s == "cw") return AttackKind::cw_l2;
    if (s == "aux_aware_pgd" || s == "aux") return AttackKind::aux_aware_pgd;
    throw ConfigError("unknown attack kind: " + s);
}

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw DomainError("attack: epsilon must be >= 0");
    if (step_size < 0.0) throw DomainError("attack: step_size must be >= 0");
    if (iterations < 0) throw DomainError("attack: iterations must be >= 0");
}

AttackConfig default_attack(AttackKind kind) {
    AttackConfig cfg;
    cfg.kind = kind;
    switch (kind) {
        case AttackKind::deepfool:
            cfg.iterations = 50;
            cfg.random_start = false;
            break;
        case AttackKind::cw_l2:
            cfg.iterations = 100;
            cfg.random_start = false;
            break;
        case AttackKind::fgsm:
            cfg.iterations = 1;
            cfg.random_start = false;
            break;
        default:
            break;  // pgd / mim / aux_aware_pgd keep the 40-iteration default
    }
    return cfg;
}

Tensor clip_to_ball(const Tensor& v, const Tensor& center, double radius) {
    if (!v.same_shape(center))
        throw ShapeError("clip_to_ball: value " + shape_str(v.shape()) + " vs center " +
                         shape_str(center.shape()));
    if (radius < 0.0) throw DomainError("clip_to_ball: negative radius");
    Tensor out = Tensor::uninit(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double lo = center[i] - radius;
        const double hi = center[i] + radius;
        out[i] = v[i] < lo ? lo : (v[i] > hi ? hi : v[i]);
    }
    return out;
}

Tensor clip_unit(const Tensor& v) {
    Tensor out = Tensor::uninit(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = v[i] < 0.0 ? 0.0 : (v[i] > 1.0 ? 1.0 : v[i]);
    return out;
}

Tensor fgsm(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
            double epsilon) {
    check_batch(x, y, "fgsm");
    if (epsilon < 0.0) throw DomainError("fgsm: epsilon must be >= 0");
    Tensor g = ce_input_gradient(logits, x, y);
    Tensor out = Tensor::uninit(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + epsilon * sign0(g[i]);
    return clip_unit(out);
}

Tensor pgd(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
           const AttackConfig& cfg) {
    check_batch(x, y, "pgd");
    cfg.validate();
    return sign_step_attack(
        x, cfg, [&](const Tensor& cur) { return ce_input_gradient(logits, cur, y); },
        /*use_momentum=*/false, /*allow_random_start=*/true);
}

Tensor mim(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
           const AttackConfig& cfg) {
    check_batch(x, y, "mim");
    cfg.validate();
    return sign_step_attack(
        x, cfg, [&](const Tensor& cur) { return ce_input_gradient(logits, cur, y); },
        /*use_momentum=*/true, /*allow_random_start=*/false);
}

AttackResult deepfool(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
                      const AttackConfig& cfg) {
    check_batch(x, y, "deepfool");
    cfg.validate();
    const std::size_t n = x.extent(0);
    const std::size_t per = n ? x.size() / n : 0;

    std::vector<int> pred0 = predictions(logits, x);
    std::vector<bool> active(n);
    for (std::size_t i = 0; i < n; ++i) active[i] = pred0[i] == y[i];

    std::vector<double> r_total(x.size(), 0.0);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        if (std::none_of(active.begin(), active.end(), [](bool b) { return b; })) break;
        Tensor cur = x;
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += r_total[i];

        Tape tape;
        Var xv = tape.leaf(cur, true);
        Var zvar = logits(tape, xv);
        const Tensor& z = zvar.value();
        const std::size_t k = z.extent(1);
        const std::size_t topk = std::min<std::size_t>(3, k - 1);

        // Deactivate examples that already crossed the boundary.
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            const double* row = z.data() + i * k;
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            if (static_cast<int>(best) != pred0[i]) active[i] = false;
        }
        if (std::none_of(active.begin(), active.end(), [](bool b) { return b; })) break;

        // Top competing classes per example, by logit value.
        std::vector<std::vector<int>> cand(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            const double* row = z.data() + i * k;
            std::vector<int> order;
            for (std::size_t j = 0; j < k; ++j)
                if (static_cast<int>(j) != pred0[i]) order.push_back(static_cast<int>(j));
            std::sort(order.begin(), order.end(),
                      [&](int a, int b) { return row[a] > row[b]; });
            order.resize(topk);
            cand[i] = std::move(order);
        }

        // Gradient of z_cand - z_pred0 per candidate rank, all examples at once.
        std::vector<std::vector<double>> grads(topk);
        for (std::size_t r = 0; r < topk; ++r) {
            Tensor mask = Tensor::zeros(z.shape());
            for (std::size_t i = 0; i < n; ++i) {
                if (!active[i]) continue;
                mask[i * k + cand[i][r]] = 1.0;
                mask[i * k + pred0[i]] = -1.0;
            }
            Var loss = ops::sum(ops::mul(zvar, tape.leaf(mask, false)));
            tape.backward(loss);
            grads[r] = xv.grad();
        }

        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            const double* row = z.data() + i * k;
            double best_ratio = std::numeric_limits<double>::infinity();
            std::size_t best_r = topk;
            for (std::size_t r = 0; r < topk; ++r) {
                double f = row[cand[i][r]] - row[pred0[i]];
                double w2 = 0.0;
                for (std::size_t p = 0; p < per; ++p) {
                    double wv = grads[r][i * per + p];
                    w2 += wv * wv;
                }
                if (w2 <= 0.0) continue;
                double ratio = std::abs(f) / std::sqrt(w2);
                if (ratio < best_ratio) {
                    best_ratio = ratio;
                    best_r = r;
                }
            }
            if (best_r == topk) {  // flat logits; nowhere to move
                active[i] = false;
                continue;
            }
            double f = row[cand[i][best_r]] - row[pred0[i]];
            double w2 = 0.0;
            for (std::size_t p = 0; p < per; ++p) {
                double wv = grads[best_r][i * per + p];
                w2 += wv * wv;
            }
            const double coef = std::abs(f) / w2;
            double moved = 0.0;
            for (std::size_t p = 0; p < per; ++p) {
                double step = coef * grads[best_r][i * per + p];
                r_total[i * per + p] += step;
                moved = std::max(moved, std::abs(step));
            }
            if (moved == 0.0) active[i] = false;  // stuck exactly on the boundary
        }
    }

    Tensor out = Tensor::uninit(x.shape());
    const double scale = 1.0 + cfg.deepfool_overshoot;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + scale * r_total[i];
    out = clip_unit(clip_to_ball(out, x, cfg.epsilon));

    AttackResult res;
    res.x_adv = std::move(out);
    std::vector<int> final_pred = predictions(logits, res.x_adv);
    res.failed.resize(n);
    for (std::size_t i = 0; i < n; ++i) res.failed[i] = final_pred[i] == y[i];
    return res;
}

AttackResult cw_l2(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
                   const AttackConfig& cfg) {
    check_batch(x, y, "cw_l2");
    cfg.validate();
    const std::size_t n = x.extent(0);
    const std::size_t per = n ? x.size() / n : 0;
    const int steps = cfg.iterations;

    Tensor cur = x;
    Tensor best = x;
    std::vector<double> best_dist(n, std::numeric_limits<double>::infinity());
    std::vector<bool> found(n, false);

    for (int step = 0; step < steps; ++step) {
        Tape tape;
        Var xv = tape.leaf(cur, true);
        Var zvar = logits(tape, xv);
        const Tensor& z = zvar.value();
        const std::size_t k = z.extent(1);

        // Margin bookkeeping and the per-step selection mask for its gradient.
        Tensor mask = Tensor::zeros(z.shape());
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = z.data() + i * k;
            std::size_t jstar = y[i] == 0 ? 1 : 0;
            for (std::size_t j = 0; j < k; ++j)
                if (static_cast<int>(j) != y[i] && row[j] > row[jstar]) jstar = j;
            mask[i * k + y[i]] = 1.0;
            mask[i * k + jstar] -= 1.0;
            const double margin = row[y[i]] - row[jstar];
            const bool misclassified =
                row[jstar] > row[y[i]] || (static_cast<int>(jstar) < y[i] && row[jstar] == row[y[i]]);
            if (misclassified && margin <= -cfg.cw_kappa) {
                double d2 = 0.0;
                for (std::size_t p = 0; p < per; ++p) {
                    double d = cur[i * per + p] - x[i * per + p];
                    d2 += d * d;
                }
                if (d2 < best_dist[i]) {
                    best_dist[i] = d2;
                    found[i] = true;
                    for (std::size_t p = 0; p < per; ++p) best[i * per + p] = cur[i * per + p];
                }
            }
        }

        Var margin = ops::per_example_sum(ops::mul(zvar, tape.leaf(mask, false)));
        Var penalty = ops::clamp(margin, -cfg.cw_kappa,
                                 std::numeric_limits<double>::infinity());
        Var diff = ops::sub(xv, tape.leaf(x, false));
        Var dist2 = ops::per_example_sum(ops::mul(diff, diff));
        Var obj = ops::sum(ops::add(dist2, ops::scale(penalty, cfg.cw_constant)));
        tape.backward(obj);
        const auto& g = xv.grad();
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] -= cfg.cw_lr * g[i];
        cur = clip_unit(cur);
    }

    AttackResult res;
    res.failed.resize(n);
    Tensor out = Tensor::uninit(x.shape());
    for (std::size_t i = 0; i < n; ++i) {
        res.failed[i] = !found[i];
        const double* src = (found[i] ? best : x).data() + i * per;
        std::copy(src, src + per, out.data() + i * per);
    }
    res.x_adv = clip_unit(clip_to_ball(out, x, cfg.epsilon));
    return res;
}

Tensor aux_aware_pgd(const LogitsFn& logits, const DiscLogitFn& disc_logit, const Tensor& x,
                     const std::vector<int>& y, const AttackConfig& cfg) {
    check_batch(x, y, "aux_aware_pgd");
    cfg.validate();
    auto gradient = [&](const Tensor& cur) {
        return input_gradient(cur, [&](Tape& t, Var xv) {
            Var lc = ops::softmax_cross_entropy(logits(t, xv), y);
            Var zd = disc_logit(t, xv);
            Var ld = ops::bce_with_logits(zd, t.leaf(Tensor::full(zd.value().shape(), 1.0), false));
            return ops::sub(lc, ops::scale(ld, cfg.lambda));
        });
    };
    return sign_step_attack(x, cfg, gradient, /*use_momentum=*/false,
                            /*allow_random_start=*/true);
}

LogitsFn classifier_logits_fn(const ClassifierModel& clf) {
    const ClassifierModel* m = &clf;
    return [m](Tape& tape, Var x) { return classifier_forward(*m, tape, x).logits; };
}

DiscLogitFn disc_logit_fn(const ClassifierModel& clf, const DiscriminatorModel& disc) {
    const ClassifierModel* c = &clf;
    const DiscriminatorModel* d = &disc;
    return [c, d](Tape& tape, Var x) {
        ClassifierOut out = classifier_forward(*c, tape, x);
        return discriminator_logit(*d, tape, out.h_low, out.h_high);
    };
}

void save_adversarial_batch(const AdversarialBatch& batch, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write("AIDA", 4);
    std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const Tensor& x = batch.x_adv;
    if (x.rank() != 4) throw ShapeError("adversarial batch must be [N,C,H,W]");
    std::uint64_t dims[4] = {x.extent(0), x.extent(1), x.extent(2), x.extent(3)};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    for (int y : batch.labels) {
        std::int32_t v = y;
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    out.write(reinterpret_cast<const char*>(x.data()),
              static_cast<std::streamsize>(x.size() * sizeof(double)));
    for (std::size_t i = 0; i < x.extent(0); ++i) {
        std::uint8_t f = i < batch.failed.size() && batch.failed[i] ? 1 : 0;
        out.write(reinterpret_cast<const char*>(&f), 1);
    }
    if (!out) throw IoError("write failed: " + path);
}

AdversarialBatch load_adversarial_batch(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::size_t offset = 0;
    auto need = [&](void* p, std::size_t n, const char* what) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw FormatError(std::string("truncated batch file while reading ") + what, offset);
        offset += n;
    };
    char magic[4];
    need(magic, 4, "magic");
    if (std::memcmp(magic, "AIDA", 4) != 0) throw FormatError("bad magic, expected AIDA", 0);
    std::uint32_t version;
    need(&version, 4, "version");
    if (version != 1) throw FormatError("unsupported batch file version", 4);
    std::uint64_t dims[4];
    need(dims, sizeof(dims), "extents");
    AdversarialBatch batch;
    const std::size_t n = dims[0];
    batch.labels.resize(n);
    for (auto& y : batch.labels) {
        std::int32_t v;
        need(&v, 4, "label");
        y = v;
    }
    batch.x_adv = Tensor::uninit({dims[0], dims[1], dims[2], dims[3]});
    need(batch.x_adv.data(), batch.x_adv.size() * sizeof(double), "pixels");
    batch.failed.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t f;
        need(&f, 1, "flags");
        batch.failed[i] = f != 0;
    }
    return batch;
}

AttackResult run_attack(const ClassifierModel& clf, const DiscriminatorModel* disc,
                        const Tensor& x, const std::vector<int>& y, const AttackConfig& cfg) {
    LogitsFn logits = classifier_logits_fn(clf);
    AttackResult res;
    switch (cfg.kind) {
        case AttackKind::fgsm:
            res.x_adv = fgsm(logits, x, y, cfg.epsilon);
            break;
        case AttackKind::pgd:
            res.x_adv = pgd(logits, x, y, cfg);
            break;
        case AttackKind::mim:
            res.x_adv = mim(logits, x, y, cfg);
            break;
        case AttackKind::deepfool:
            res = deepfool(logits, x, y, cfg);
            break;
        case AttackKind::cw_l2:
            res = cw_l2(logits, x, y, cfg);
            break;
        case AttackKind::aux_aware_pgd: {
            if (!disc)
                throw ConfigError("aux_aware_pgd requires a discriminator model");
            res.x_adv = aux_aware_pgd(logits, disc_logit_fn(clf, *disc), x, y, cfg);
            break;
        }
    }
    return res;
}

}  // namespace aidp
