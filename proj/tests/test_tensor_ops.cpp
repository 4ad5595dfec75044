#include <doctest.h>

#include <cmath>

#include "aidp/ops.hpp"
#include "test_helpers.hpp"

using namespace aidp;
using namespace aidp::testing;

TEST_CASE("tensor construction validates external input") {
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(Tensor::from_data({2}, {1.0, std::nan("")}), DomainError);
    CHECK_THROWS_AS(Tensor::from_data({1}, {INFINITY}), DomainError);
    Tensor t = Tensor::from_data({2, 3}, {0, 1, 2, 3, 4, 5});
    CHECK(t.size() == 6);
    CHECK(t.extent(1) == 3);
}

TEST_CASE("global_average_pool values") {
    // single 2x2 map [[1,3],[5,7]] -> 4
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 3, 5, 7});
    Tape tape;
    Var out = ops::global_average_pool(tape.leaf(x, false));
    CHECK(out.value()[0] == doctest::Approx(4.0));

    Tensor constant = Tensor::full({2, 3, 4, 5}, 0.37);
    Tape t2;
    Var out2 = ops::global_average_pool(t2.leaf(constant, false));
    for (std::size_t i = 0; i < out2.value().size(); ++i)
        CHECK(out2.value()[i] == doctest::Approx(0.37));

    Tape t3;
    CHECK_THROWS_AS(ops::global_average_pool(t3.leaf(Tensor::zeros({2, 3}), false)),
                    ShapeError);
}

TEST_CASE("global_average_pool gradient matches central differences") {
    Rng rng(11);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    auto graph = [](Tape& t, Var v) { return ops::sum(ops::global_average_pool(v)); };
    Tensor ad = tape_gradient(graph, x);
    Tensor fd = fd_gradient(graph, x);
    CHECK(max_relative_error(ad, fd, 1e-6) < 1e-6);
}

TEST_CASE("gap gradient mass is 1/(H*W) under sum") {
    Tensor x = Tensor::full({1, 2, 4, 8}, 0.5);
    Tensor g = tape_gradient(
        [](Tape& t, Var v) { return ops::sum(ops::global_average_pool(v)); }, x);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(1.0 / 32.0));
}

TEST_CASE("bce_with_logits values and domain") {
    Tape tape;
    Var z = tape.leaf(Tensor::from_data({3}, {0.0, 0.0, 0.0}), false);
    Var t = tape.leaf(Tensor::from_data({3}, {0.0, 0.5, 1.0}), false);
    CHECK(ops::bce_with_logits(z, t).value()[0] == doctest::Approx(std::log(2.0)));

    Tape t2;
    Var z2 = t2.leaf(Tensor::from_data({1}, {50.0}), false);
    Var t2v = t2.leaf(Tensor::from_data({1}, {1.0}), false);
    CHECK(ops::bce_with_logits(z2, t2v).value()[0] < 1e-20);

    Tape t3;
    CHECK_THROWS_AS(ops::bce_with_logits(t3.leaf(Tensor::zeros({2}), false),
                                         t3.leaf(Tensor::from_data({2}, {0.5, 1.2}), false)),
                    DomainError);
    Tape t4;
    CHECK_THROWS_AS(ops::bce_with_logits(t4.leaf(Tensor::zeros({2}), false),
                                         t4.leaf(Tensor::zeros({3}), false)),
                    ShapeError);
}

TEST_CASE("bce_with_logits gradient matches central differences") {
    // z=1.5, t=0.75: value and gradient against the oracle
    Tensor z = Tensor::from_data({1}, {1.5});
    auto graph = [](Tape& t, Var v) {
        return ops::bce_with_logits(v, t.leaf(Tensor::from_data({1}, {0.75}), false));
    };
    double sig = 1.0 / (1.0 + std::exp(-1.5));
    double expected = -0.75 * std::log(sig) - 0.25 * std::log(1.0 - sig);
    Tape tape;
    Var zv = tape.leaf(z, false);
    CHECK(graph(tape, zv).value()[0] == doctest::Approx(expected));
    check_grad(graph, z, 1e-6);
}

TEST_CASE("bce never returns NaN for extreme finite logits") {
    Tape tape;
    Var z = tape.leaf(Tensor::from_data({4}, {-700.0, -50.0, 50.0, 700.0}), false);
    Var t = tape.leaf(Tensor::from_data({4}, {0.0, 1.0, 0.0, 1.0}), false);
    double v = ops::bce_with_logits(z, t).value()[0];
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
}

TEST_CASE("softmax_cross_entropy values") {
    Tape tape;
    Var z = tape.leaf(Tensor::zeros({2, 10}), false);
    CHECK(ops::softmax_cross_entropy(z, {3, 7}).value()[0] ==
          doctest::Approx(std::log(10.0)));

    Tensor hot = Tensor::zeros({1, 4});
    hot[2] = 1000.0;
    Tape t2;
    CHECK(ops::softmax_cross_entropy(t2.leaf(hot, false), {2}).value()[0] < 1e-12);

    Tape t3;
    CHECK_THROWS_AS(ops::softmax_cross_entropy(t3.leaf(Tensor::zeros({2, 3}), false), {0, 3}),
                    DomainError);
    Tape t4;
    CHECK_THROWS_AS(ops::softmax_cross_entropy(t4.leaf(Tensor::zeros({2, 3}), false), {0}),
                    ShapeError);
}

TEST_CASE("softmax_cross_entropy gradient matches central differences") {
    Rng rng(5);
    Tensor z = random_tensor({4, 3}, rng, -2.0, 2.0);
    auto graph = [](Tape& t, Var v) { return ops::softmax_cross_entropy(v, {0, 2, 1, 2}); };
    Tensor ad = tape_gradient(graph, z);
    Tensor fd = fd_gradient(graph, z);
    CHECK(max_relative_error(ad, fd, 1e-6) < 1e-6);
}

TEST_CASE("losses are non-negative and finite on random logits") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor z = random_tensor({3, 5}, rng, -30.0, 30.0);
        Tape tape;
        double ce = ops::softmax_cross_entropy(tape.leaf(z, false), {0, 1, 2}).value()[0];
        CHECK(std::isfinite(ce));
        CHECK(ce >= 0.0);
        Tensor zb = random_tensor({6}, rng, -40.0, 40.0);
        Tensor tb = random_tensor({6}, rng, 0.0, 1.0);
        Tape t2;
        double bce =
            ops::bce_with_logits(t2.leaf(zb, false), t2.leaf(tb, false)).value()[0];
        CHECK(std::isfinite(bce));
        CHECK(bce >= 0.0);
    }
}

TEST_CASE("backward basics") {
    // loss = sum(x) -> all-ones gradient
    Rng rng(3);
    Tensor x = random_tensor({2, 3}, rng);
    Tensor g = tape_gradient([](Tape& t, Var v) { return ops::sum(v); }, x);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 1.0);

    // loss = x^2 at x=3 -> gradient 6
    Tensor x3 = Tensor::from_data({1}, {3.0});
    Tensor g3 = tape_gradient([](Tape& t, Var v) { return ops::sum(ops::mul(v, v)); }, x3);
    CHECK(g3[0] == doctest::Approx(6.0));

    // non-scalar loss is a contract violation
    Tape tape;
    Var xv = tape.leaf(x, true);
    CHECK_THROWS_AS(tape.backward(xv), ContractError);
}

TEST_CASE("backward is deterministic and repeatable") {
    Rng rng(10);
    Tensor x = random_tensor({3, 4}, rng);
    auto graph = [](Tape& t, Var v) { return ops::mean(ops::mul(v, ops::sigmoid(v))); };
    Tape tape;
    Var xv = tape.leaf(x, true);
    Var loss = graph(tape, xv);
    tape.backward(loss);
    Tensor g1 = xv.grad_tensor();
    tape.backward(loss);  // second pass over the same graph
    Tensor g2 = xv.grad_tensor();
    CHECK(bitwise_equal(g1, g2));
    Tensor g3 = tape_gradient(graph, x);  // fresh tape, same input
    CHECK(bitwise_equal(g1, g3));
}

TEST_CASE("three-layer MLP gradients match central differences") {
    Rng rng(21);
    Tensor x = random_tensor({2, 6}, rng);
    Tensor w1 = random_tensor({6, 8}, rng, -0.7, 0.7);
    Tensor b1 = random_tensor({8}, rng, -0.2, 0.2);
    Tensor w2 = random_tensor({8, 5}, rng, -0.7, 0.7);
    Tensor b2 = random_tensor({5}, rng, -0.2, 0.2);
    Tensor w3 = random_tensor({5, 3}, rng, -0.7, 0.7);
    Tensor b3 = random_tensor({3}, rng, -0.2, 0.2);
    std::vector<int> labels = {0, 2};

    // Gradient w.r.t. the input and every weight matrix.
    struct Wiring {
        Tensor* probe;
    };
    std::vector<Tensor*> probes = {&x, &w1, &b1, &w2, &b2, &w3, &b3};
    for (Tensor* probe : probes) {
        auto graph = [&](Tape& t, Var pv) {
            auto lift = [&](Tensor& tns) {
                return &tns == probe ? pv : t.leaf(tns, false);
            };
            Var h1 = ops::relu(ops::affine(lift(x), lift(w1), lift(b1)));
            Var h2 = ops::relu(ops::affine(h1, lift(w2), lift(b2)));
            Var z = ops::affine(h2, lift(w3), lift(b3));
            return ops::softmax_cross_entropy(z, labels);
        };
        Tensor ad = tape_gradient(graph, *probe);
        Tensor fd = fd_gradient(graph, *probe);
        CHECK(max_relative_error(ad, fd) < 1e-4);
    }
}

TEST_CASE("primitive catalog gradient checks") {
    Rng rng(42);
    auto run = [&](const char* name, Shape shape,
                   const std::function<Var(Tape&, Var)>& graph, bool kinks = false) {
        CAPTURE(name);
        Tensor x = random_tensor(shape, rng);
        if (kinks) push_off_kinks(x);
        check_grad(graph, x);
    };

    run("relu", {3, 4}, [](Tape& t, Var v) { return ops::sum(ops::relu(v)); }, true);
    run("sigmoid", {3, 4}, [](Tape& t, Var v) { return ops::sum(ops::sigmoid(v)); });
    run("clamp", {3, 4},
        [](Tape& t, Var v) { return ops::sum(ops::clamp(v, -0.5, 0.5)); }, true);
    run("scale", {2, 5}, [](Tape& t, Var v) { return ops::sum(ops::scale(v, -2.5)); });
    run("mean", {7}, [](Tape& t, Var v) { return ops::mean(v); });
    run("per_example_sum", {3, 5},
        [](Tape& t, Var v) { return ops::sum(ops::per_example_sum(v)); });
    run("add", {2, 3}, [&](Tape& t, Var v) {
        Rng r2(7);
        return ops::sum(ops::add(v, t.leaf(random_tensor({2, 3}, r2), false)));
    });
    run("sub", {2, 3}, [&](Tape& t, Var v) {
        Rng r2(8);
        return ops::sum(ops::sub(v, t.leaf(random_tensor({2, 3}, r2), false)));
    });
    run("mul", {2, 3}, [&](Tape& t, Var v) {
        Rng r2(9);
        return ops::sum(ops::mul(v, t.leaf(random_tensor({2, 3}, r2), false)));
    });
    run("concat", {2, 3}, [&](Tape& t, Var v) {
        Rng r2(10);
        Var other = t.leaf(random_tensor({2, 4}, r2), false);
        return ops::sum(ops::mul(ops::concat(v, other),
                                 t.leaf(random_tensor({2, 7}, r2), false)));
    });
    run("affine", {2, 4}, [&](Tape& t, Var v) {
        Rng r2(11);
        Var w = t.leaf(random_tensor({4, 3}, r2), false);
        Var b = t.leaf(random_tensor({3}, r2), false);
        return ops::sum(ops::affine(v, w, b));
    });
    run("conv2d", {2, 2, 5, 5}, [&](Tape& t, Var v) {
        Rng r2(12);
        Var w = t.leaf(random_tensor({3, 2, 3, 3}, r2, -0.5, 0.5), false);
        Var b = t.leaf(random_tensor({3}, r2, -0.2, 0.2), false);
        return ops::sum(ops::conv2d(v, w, b, 2, 1));
    });
    run("gap", {2, 3, 4, 4},
        [](Tape& t, Var v) { return ops::sum(ops::global_average_pool(v)); });
}

TEST_CASE("conv2d weight and bias gradients match central differences") {
    Rng rng(31);
    Tensor x = random_tensor({2, 2, 6, 6}, rng);
    Tensor w = random_tensor({4, 2, 3, 3}, rng, -0.5, 0.5);
    Tensor b = random_tensor({4}, rng, -0.2, 0.2);
    for (Tensor* probe : {&w, &b}) {
        auto graph = [&](Tape& t, Var pv) {
            Var xv = t.leaf(x, false);
            Var wv = &w == probe ? pv : t.leaf(w, false);
            Var bv = &b == probe ? pv : t.leaf(b, false);
            return ops::mean(ops::conv2d(xv, wv, bv, 2, 1));
        };
        Tensor ad = tape_gradient(graph, *probe);
        Tensor fd = fd_gradient(graph, *probe);
        CHECK(max_relative_error(ad, fd) < 1e-4);
    }
}

TEST_CASE("conv2d shape contracts") {
    Tape tape;
    Var x = tape.leaf(Tensor::zeros({1, 2, 5, 5}), false);
    Var w = tape.leaf(Tensor::zeros({3, 2, 3, 3}), false);
    Var wbad = tape.leaf(Tensor::zeros({3, 4, 3, 3}), false);
    Var b = tape.leaf(Tensor::zeros({3}), false);
    Var bbad = tape.leaf(Tensor::zeros({2}), false);
    CHECK_THROWS_AS(ops::conv2d(x, wbad, b, 1, 1), ShapeError);
    CHECK_THROWS_AS(ops::conv2d(x, w, bbad, 1, 1), ShapeError);
    Var y = ops::conv2d(x, w, b, 2, 1);
    CHECK(y.value().shape() == Shape{1, 3, 3, 3});
}

TEST_CASE("sigmoid output stays strictly inside (0,1)") {
    Tape tape;
    Var z = tape.leaf(Tensor::from_data({4}, {-1000.0, -40.0, 40.0, 1000.0}), false);
    const Tensor& p = ops::sigmoid(z).value();
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] > 0.0);
        CHECK(p[i] < 1.0);
    }
}
