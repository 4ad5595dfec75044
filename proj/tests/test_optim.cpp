#include <doctest.h>

#include "aidp/optim.hpp"
#include "test_helpers.hpp"

using namespace aidp;
using namespace aidp::testing;

TEST_CASE("vanilla gradient step without momentum or decay") {
    Tensor theta = Tensor::from_data({3}, {1.0, -2.0, 0.5});
    std::vector<double> grad = {0.1, 0.2, -0.4};
    std::vector<double> vel;
    sgd_step(theta, grad, {0.5, 0.0, 0.0}, vel);
    CHECK(theta[0] == doctest::Approx(1.0 - 0.5 * 0.1));
    CHECK(theta[1] == doctest::Approx(-2.0 - 0.5 * 0.2));
    CHECK(theta[2] == doctest::Approx(0.5 + 0.5 * 0.4));
}

TEST_CASE("zero gradient leaves parameters unchanged on the first step") {
    Tensor theta = Tensor::from_data({2}, {0.25, -0.75});
    Tensor before = theta;
    std::vector<double> vel;
    sgd_step(theta, {0.0, 0.0}, {0.01, 0.9, 0.0}, vel);
    CHECK(bitwise_equal(theta, before));
}

TEST_CASE("two momentum steps match the hand-evaluated recurrence") {
    // theta=1, g=1, lr=0.01, m=0.9, wd=2e-4: evaluate the update rule twice
    // by hand with plain doubles and compare.
    double theta = 1.0, v = 0.0;
    const double lr = 0.01, m = 0.9, wd = 2e-4;
    for (int i = 0; i < 2; ++i) {
        double g = 1.0 + wd * theta;
        v = m * v + g;
        theta = theta - lr * v;
    }

    Tensor p = Tensor::from_data({1}, {1.0});
    std::vector<double> vel;
    sgd_step(p, {1.0}, {lr, m, wd}, vel);
    sgd_step(p, {1.0}, {lr, m, wd}, vel);
    CHECK(p[0] == doctest::Approx(theta).epsilon(1e-15));
    CHECK(p[0] == doctest::Approx(0.970994220004).epsilon(1e-9));
}

TEST_CASE("sgd_step validates shapes") {
    Tensor theta = Tensor::zeros({3});
    std::vector<double> vel;
    CHECK_THROWS_AS(sgd_step(theta, {1.0, 2.0}, {0.1, 0.0, 0.0}, vel), ShapeError);
}

TEST_CASE("named state keeps per-parameter velocities apart") {
    SgdState state;
    Tensor a = Tensor::from_data({1}, {1.0});
    Tensor b = Tensor::from_data({1}, {1.0});
    sgd_step("a", a, {1.0}, {0.1, 0.9, 0.0}, state);
    sgd_step("b", b, {-1.0}, {0.1, 0.9, 0.0}, state);
    CHECK(state.velocity.at("a")[0] == doctest::Approx(1.0));
    CHECK(state.velocity.at("b")[0] == doctest::Approx(-1.0));
}
