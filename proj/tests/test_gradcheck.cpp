#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"

using namespace aidp;
using namespace aidp::testing;

TEST_CASE("finite differences recover the quadratic derivative") {
    Tensor x = Tensor::from_data({1}, {3.0});
    Tensor g = finite_difference_gradient(
        [](const Tensor& v) { return v[0] * v[0]; }, x, 1e-5);
    CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("finite differences of a sum are all ones") {
    Rng rng(2);
    Tensor x = random_tensor({2, 3}, rng);
    Tensor g = finite_difference_gradient(
        [](const Tensor& v) {
            double s = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) s += v[i];
            return s;
        },
        x, 1e-5);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(1.0));
}

TEST_CASE("finite differences match the analytic sigmoid derivative") {
    Rng rng(4);
    Tensor w = random_tensor({5}, rng);
    Tensor x = random_tensor({5}, rng);
    auto f = [&](const Tensor& v) {
        double dot = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) dot += w[i] * v[i];
        return 1.0 / (1.0 + std::exp(-dot));
    };
    Tensor g = finite_difference_gradient(f, x, 1e-5);
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += w[i] * x[i];
    double sig = 1.0 / (1.0 + std::exp(-dot));
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(g[i] == doctest::Approx(sig * (1.0 - sig) * w[i]).epsilon(1e-6));
}

TEST_CASE("finite differences reject non-positive step") {
    Tensor x = Tensor::scalar(1.0);
    CHECK_THROWS_AS(
        finite_difference_gradient([](const Tensor& v) { return v[0]; }, x, 0.0),
        DomainError);
}
