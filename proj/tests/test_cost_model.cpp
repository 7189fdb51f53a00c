#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedsim/cost_model.hpp"

using namespace fedsim;

namespace {

CostParams make(double k_n, double k_s, int a, double m_r) {
    CostParams p;
    p.transfer_cost = k_n;
    p.train_cost = k_s;
    p.agencies = a;
    p.model_ratio = m_r;
    return p;
}

}  // namespace

TEST_CASE("time_ratio reproduces hand-computed values") {
    // (1 + 10) / (1/10 + 0.01 * 10) = 11 / 0.2
    CHECK(time_ratio(make(10.0, 1.0, 10, 0.01)) == doctest::Approx(55.0).epsilon(1e-12));
    // (1 + 10) / (1/4 + 0.1 * 10) = 11 / 1.25
    CHECK(time_ratio(make(10.0, 1.0, 4, 0.1)) == doctest::Approx(8.8).epsilon(1e-12));
    // balanced costs, one agency: (1 + 1) / (1 + m * 1)
    CHECK(time_ratio(make(1.0, 1.0, 1, 0.0)) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("zero network ratio collapses to the agency count") {
    for (int a : {1, 2, 7, 50})
        for (double m : {0.0, 0.01, 0.5, 10.0})
            CHECK(time_ratio(make(0.0, 1.0, a, m)) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("asymptotic ratio is A * (1 + N)") {
    CHECK(asymptotic_ratio(make(99.0, 1.0, 10, 0.5)) == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(asymptotic_ratio(make(0.0, 1.0, 3, 0.1)) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(asymptotic_ratio(make(4.0, 2.0, 5, 0.0)) == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("a weightless model attains the asymptote") {
    // division by 1/A and multiplication by A can differ by an ulp
    for (int a : {1, 4, 5, 17})
        for (double n : {0.0, 0.25, 3.0, 1e6}) {
            const CostParams p = make(n, 1.0, a, 0.0);
            CHECK(time_ratio(p) == doctest::Approx(asymptotic_ratio(p)).epsilon(1e-14));
        }
}

TEST_CASE("ratio is monotone in N exactly when M_r is below 1/A") {
    const std::vector<int> agency_grid = {2, 5, 10, 20};
    std::vector<double> n_grid;
    for (int i = 0; i < 100; ++i) n_grid.push_back(0.01 * std::pow(10.0, 4.0 * i / 99.0));

    for (int a : agency_grid) {
        const double critical = 1.0 / a;
        for (double m : {critical * 0.5, critical * 0.9, critical, critical * 1.1, critical * 4.0}) {
            double prev = time_ratio(make(n_grid[0], 1.0, a, m));
            for (std::size_t i = 1; i < n_grid.size(); ++i) {
                const double cur = time_ratio(make(n_grid[i], 1.0, a, m));
                if (m < critical)
                    CHECK(cur > prev);
                else if (m > critical)
                    CHECK(cur < prev);
                else
                    CHECK(cur == doctest::Approx(static_cast<double>(a)).epsilon(1e-12));
                prev = cur;
            }
        }
    }
}

TEST_CASE("transfer-dominated limit approaches 1 / M_r") {
    for (double m : {0.01, 0.1, 0.5})
        for (int a : {2, 10}) {
            const double r = time_ratio(make(1e9, 1.0, a, m));
            CHECK(std::abs(r - 1.0 / m) / (1.0 / m) < 1e-3);
        }
}

TEST_CASE("ratio depends on costs only through their quotient") {
    CHECK(time_ratio(make(3.0, 1.5, 6, 0.05)) == time_ratio(make(6.0, 3.0, 6, 0.05)));
    CHECK(time_ratio(make(0.5, 0.25, 9, 0.2)) == time_ratio(make(2.0, 1.0, 9, 0.2)));
    CHECK(time_ratio(make(7.0, 3.0, 4, 0.1)) ==
          doctest::Approx(time_ratio(make(70.0, 30.0, 4, 0.1))).epsilon(1e-14));
}

TEST_CASE("parameter validation rejects out-of-domain values") {
    CHECK_THROWS_AS(time_ratio(make(-1.0, 1.0, 2, 0.1)), std::invalid_argument);
    CHECK_THROWS_AS(time_ratio(make(1.0, 0.0, 2, 0.1)), std::invalid_argument);
    CHECK_THROWS_AS(time_ratio(make(1.0, -2.0, 2, 0.1)), std::invalid_argument);
    CHECK_THROWS_AS(time_ratio(make(1.0, 1.0, 0, 0.1)), std::invalid_argument);
    CHECK_THROWS_AS(time_ratio(make(1.0, 1.0, 2, -0.1)), std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(time_ratio(make(inf, 1.0, 2, 0.1)), std::invalid_argument);
    CHECK_NOTHROW(time_ratio(make(0.0, 1.0, 1, 0.0)));
}

TEST_CASE("sweep_curve lists every (A, N) pair in order with exact ratios") {
    const std::vector<double> ns = {0.1, 1.0, 10.0};
    const std::vector<int> as = {2, 5};
    const std::vector<SweepRow> rows = sweep_curve(ns, as, 0.01);
    REQUIRE(rows.size() == 6);
    std::size_t r = 0;
    for (int a : as)
        for (double n : ns) {
            CHECK(rows[r].agencies == a);
            CHECK(rows[r].network_ratio == n);
            CHECK(rows[r].ratio == time_ratio(make(n, 1.0, a, 0.01)));
            ++r;
        }

    CHECK_THROWS_AS(sweep_curve({-0.5}, {2}, 0.01), std::invalid_argument);
    CHECK(sweep_curve({}, {2}, 0.01).empty());
    CHECK(sweep_curve({1.0}, {}, 0.01).empty());
}
