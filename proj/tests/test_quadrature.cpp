#include <doctest.h>

#include <cmath>

#include "ktube/quadrature.hpp"

using namespace ktube;

TEST_CASE("adaptive simpson on smooth integrands") {
    CHECK(integrate([](double x) { return std::sin(x); }, 0.0, M_PI) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(integrate([](double x) { return x * x; }, 0.0, 3.0) == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(integrate([](double x) { return std::exp(-x * x); }, -8.0, 8.0) ==
          doctest::Approx(std::sqrt(M_PI)).epsilon(1e-10));
    // reversed limits flip the sign
    CHECK(integrate([](double x) { return x; }, 1.0, 0.0) == doctest::Approx(-0.5));
}

TEST_CASE("brent root") {
    double r = brent_root([](double x) { return x * x - 2.0; }, 0.0, 2.0);
    CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-13));
    r = brent_root([](double x) { return std::cos(x); }, 0.0, 3.0);
    CHECK(r == doctest::Approx(M_PI / 2).epsilon(1e-13));
}
