#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "aoi/disciplines.hpp"
#include "aoi/error.hpp"

using aoi::Discipline;
using aoi::MultiSourceParams;

namespace {

const MultiSourceParams kSym{{0.5, 0.5}, 1.0};

// Explicit two-source closed forms, spelled out by hand; used as
// independent oracles against the permutation-sum path.
double np_two_source_mgf(const MultiSourceParams& p, double sb1, double sb2) {
    const double rho = p.rho(), r1 = p.rho_k(1), r2 = p.rho_k(2);
    const double rm12 = rho - r1 - r2;
    const double sb = sb1 + sb2;
    double tail = 0.0;
    const double rm[2] = {rho - r1, rho - r2};
    const double sbi[2] = {sb1, sb2};
    for (int i = 0; i < 2; ++i) tail += 1.0 / ((1.0 - sbi[i]) * (rho - sbi[i]) - rm[i]);
    return r1 * r2 * (1.0 + rho - sb) /
           ((1.0 + rho) * ((rho - sb) * (1.0 - sb) - rm12) * (1.0 - sb)) * tail;
}

double ps_two_source_mgf(const MultiSourceParams& p, double sb1, double sb2) {
    const double rho = p.rho(), r1 = p.rho_k(1), r2 = p.rho_k(2);
    const double rm12 = rho - r1 - r2;
    const double sb = sb1 + sb2;
    double tail = 0.0;
    const double rm[2] = {rho - r1, rho - r2};
    const double sbi[2] = {sb1, sb2};
    for (int i = 0; i < 2; ++i) tail += 1.0 / ((1.0 - sbi[i]) * (rho - sbi[i]) - rm[i]);
    return r1 * r2 / ((rho - sb) * (1.0 - sb) - rm12) * tail;
}

double sa_two_source_mgf(const MultiSourceParams& p, double sb1, double sb2) {
    const double rho = p.rho(), r1 = p.rho_k(1), r2 = p.rho_k(2);
    const double rm12 = rho - r1 - r2;
    const double sb = sb1 + sb2;
    const double ri[2] = {r1, r2};
    const double rm[2] = {rho - r1, rho - r2};
    const double sbi[2] = {sb1, sb2};
    double tail = 0.0;
    for (int i = 0; i < 2; ++i)
        tail += (1.0 + ri[i]) * (1.0 + rm[i] - sbi[i]) /
                ((1.0 + ri[i] - sbi[i]) * (1.0 + rm[i] - sb) *
                 ((1.0 - sbi[i]) * (rho - sbi[i]) - rm[i]));
    return r1 * r2 * (1.0 + rho - sb) / ((1.0 + rho) * ((rho - sb) * (1.0 - sb) - rm12)) * tail;
}

double np_two_source_corr(double r1, double r2) {
    const double rho = r1 + r2;
    const double num = r1 * r2 * (rho * rho * rho - 2.0 * (2.0 * rho + 1.0));
    double den = rho;
    const double ri[2] = {r1, r2};
    for (int i = 0; i < 2; ++i) {
        const double rmi = rho - ri[i];
        den *= std::sqrt((1.0 + rho) * (1.0 + rho) * (rho * rho + 2.0 * rmi + 1.0) +
                         ri[i] * ri[i] * rho * (rho + 2.0));
    }
    return num / den;
}

double ps_two_source_corr(double r1, double r2) {
    const double rho = r1 + r2;
    return -2.0 * r1 * r2 /
           (rho * std::sqrt((rho * rho + 2.0 * r1 + 1.0) * (rho * rho + 2.0 * r2 + 1.0)));
}

double sa_two_source_corr(double r1, double r2) {
    const double rho = r1 + r2;
    const double g = r1 * r1 * r2 * r2 * (rho + 2.0) * (2.0 * rho + 1.0) +
                     r1 * r2 * rho * (1.0 + rho) * (3.0 * rho + 5.0) +
                     2.0 * std::pow(1.0 + rho, 4);
    auto fprime = [rho](double y, double z) {
        return z * z * z * y + y * y * z * (2.0 * rho * rho + 7.0 * rho + 4.0) +
               y * z * (rho * rho + 6.0 * rho + 3.0) + y * y * rho * rho * rho * (rho + 2.0) +
               y * rho * (2.0 * rho * rho * rho + 6.0 * rho * rho + 4.0 * rho + 1.0) +
               std::pow(1.0 + rho, 4);
    };
    return -r1 * r2 * g /
           (rho * (1.0 + r1) * (1.0 + r2) * std::sqrt(fprime(r1, r2) * fprime(r2, r1)));
}

MultiSourceParams random_params(std::mt19937_64& rng, int min_n = 1, int max_n = 3) {
    std::uniform_real_distribution<double> rate(0.1, 3.0);
    const int n = min_n + static_cast<int>(rng() % static_cast<unsigned>(max_n - min_n + 1));
    MultiSourceParams p;
    for (int i = 0; i < n; ++i) p.lambdas.push_back(rate(rng));
    p.mu = rate(rng);
    return p;
}

}  // namespace

TEST_CASE("build_model lays out the transition tables") {
    const auto np = aoi::build_model(kSym, Discipline::kLcfsNp);
    REQUIRE(np.transitions().size() == 4);
    CHECK(np.transitions()[0].rate == 0.5);   // arrival source 1
    CHECK(np.transitions()[1].rate == 1.0);   // delivery
    CHECK(np.transitions()[2].rate == 0.5);   // arrival source 2
    CHECK(np.transitions()[3].rate == 1.0);
    // delivery of source i copies x_0 into x_i
    const auto cols = np.transitions()[1].reset.column_form();
    REQUIRE(cols.has_value());
    CHECK((*cols)[1] == 0);

    const auto ps = aoi::build_model(kSym, Discipline::kLcfsPs);
    REQUIRE(ps.transitions().size() == 8);
    bool preempt_12 = false, preempt_21 = false;
    for (const auto& t : ps.transitions()) {
        if (t.source == 1 && t.target == 2) {
            preempt_12 = true;
            CHECK(t.rate == 0.5);  // lambda_2
        }
        if (t.source == 2 && t.target == 1) {
            preempt_21 = true;
            CHECK(t.rate == 0.5);  // lambda_1
        }
    }
    CHECK(preempt_12);
    CHECK(preempt_21);

    const auto sa = aoi::build_model(kSym, Discipline::kLcfsSa);
    REQUIRE(sa.transitions().size() == 6);
    int self_loops = 0;
    for (const auto& t : sa.transitions()) {
        if (t.source == t.target) {
            ++self_loops;
            const auto c = t.reset.column_form();
            REQUIRE(c.has_value());
            CHECK((*c)[0] == -1);  // x_0 is zeroed on self-preemption
        }
    }
    CHECK(self_loops == 2);
    CHECK(sa.validate().empty());
}

TEST_CASE("suffix_factor matches the hand evaluations") {
    // full set at s = 0: lambda * mu
    CHECK(aoi::suffix_factor(kSym, {1, 2}, {0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-14));
    // singleton at s = 0: mu * lambda_k
    CHECK(aoi::suffix_factor(kSym, {1}, {0.0}) == doctest::Approx(0.5).epsilon(1e-14));
    // worked example: (1 - 0.1)(1 - 0.1) - 0.5 = 0.31
    CHECK(aoi::suffix_factor(kSym, {1}, {0.1}) == doctest::Approx(0.31).epsilon(1e-14));
}

TEST_CASE("chain products reduce as expected") {
    std::vector<double> s_by_source{0.1, 0.2};
    // |P| = 1: single factor
    CHECK(aoi::chain_product(kSym, {1}, s_by_source) ==
          doctest::Approx(aoi::suffix_factor(kSym, {1}, {0.1})).epsilon(1e-14));
    // P = (1,2): c_{1,2} * c_{2}
    const double expect =
        aoi::suffix_factor(kSym, {1, 2}, {0.1, 0.2}) * aoi::suffix_factor(kSym, {2}, {0.2});
    CHECK(aoi::chain_product(kSym, {1, 2}, s_by_source) == doctest::Approx(expect).epsilon(1e-14));
    // source-aware weight at s = 0 telescopes to 1/mu
    CHECK(aoi::sa_chain_weight(kSym, {1, 2}, {0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-14));
    MultiSourceParams p{{0.7, 1.3, 0.4}, 2.0};
    CHECK(aoi::sa_chain_weight(p, {3, 1, 2}, {0.0, 0.0, 0.0}) ==
          doctest::Approx(1.0 / p.mu).epsilon(1e-13));
}

TEST_CASE("joint MGF normalizes to 1 at s = 0") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        const auto p = random_params(rng);
        for (auto d : {Discipline::kLcfsNp, Discipline::kLcfsPs, Discipline::kLcfsSa}) {
            std::vector<int> k;
            for (int i = 1; i <= p.num_sources(); ++i) k.push_back(i);
            std::vector<double> zeros(k.size(), 0.0);
            CHECK(std::abs(aoi::joint_mgf(p, d, k, zeros) - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("marginal MGF values match the worked special cases") {
    // source-agnostic preemption: rho_k / ((1 - sb)(rho - sb) - rho_{-k})
    const double got = aoi::marginal_mgf(kSym, Discipline::kLcfsPs, 1, 0.1);
    CHECK(got == doctest::Approx(0.5 / 0.31).epsilon(1e-12));
    // joint path at K = {k} agrees after the s = sb * mu substitution
    const double joint = aoi::joint_mgf(kSym, Discipline::kLcfsPs, {1}, {0.1 * kSym.mu});
    CHECK(joint == doctest::Approx(got).epsilon(1e-12));
}

TEST_CASE("two-source joint MGFs agree with the explicit N=2 forms") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> sdist(-0.6, 0.05);
    for (int rep = 0; rep < 60; ++rep) {
        auto p = random_params(rng, 2, 3);
        const double sb1 = sdist(rng), sb2 = sdist(rng);
        if (aoi::region_violation(p, Discipline::kLcfsNp, {1, 2}, {sb1 * p.mu, sb2 * p.mu}))
            continue;
        const std::vector<int> k{1, 2};
        const std::vector<double> s{sb1 * p.mu, sb2 * p.mu};
        CHECK(aoi::joint_mgf(p, Discipline::kLcfsNp, k, s) ==
              doctest::Approx(np_two_source_mgf(p, sb1, sb2)).epsilon(1e-11));
        CHECK(aoi::joint_mgf(p, Discipline::kLcfsPs, k, s) ==
              doctest::Approx(ps_two_source_mgf(p, sb1, sb2)).epsilon(1e-11));
        // the explicit source-aware two-source form holds only when the pair
        // exhausts the sources (its rho_{-i} slots mean the partner's rho)
        if (p.num_sources() == 2 && !aoi::region_violation(p, Discipline::kLcfsSa, k, s))
            CHECK(aoi::joint_mgf(p, Discipline::kLcfsSa, k, s) ==
                  doctest::Approx(sa_two_source_mgf(p, sb1, sb2)).epsilon(1e-11));
    }
}

TEST_CASE("permutation symmetry and marginal reduction") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> sdist(-0.5, 0.03);
    for (int rep = 0; rep < 40; ++rep) {
        auto p = random_params(rng, 2, 3);
        const int n = p.num_sources();
        std::vector<int> k{1, n};
        std::vector<double> s{sdist(rng) * p.mu, sdist(rng) * p.mu};
        for (auto d : {Discipline::kLcfsNp, Discipline::kLcfsPs, Discipline::kLcfsSa}) {
            if (aoi::region_violation(p, d, k, s)) continue;
            const double fwd = aoi::joint_mgf(p, d, k, s);
            const double rev = aoi::joint_mgf(p, d, {k[1], k[0]}, {s[1], s[0]});
            CHECK(fwd == doctest::Approx(rev).epsilon(1e-12));
            // collapsing s_2 = 0 reduces to the marginal
            const double reduced = aoi::joint_mgf(p, d, k, {s[0], 0.0});
            const double marginal = aoi::marginal_mgf(p, d, k[0], s[0] / p.mu);
            CHECK(reduced == doctest::Approx(marginal).epsilon(1e-12));
        }
    }
}

TEST_CASE("general joint form reduces to the marginal corollary at |K| = 1") {
    std::mt19937_64 rng(34);
    std::uniform_real_distribution<double> sdist(-0.7, 0.05);
    int checked = 0;
    while (checked < 20) {
        auto p = random_params(rng, 1, 3);
        const double sb = sdist(rng);
        if (aoi::region_violation(p, Discipline::kLcfsNp, {1}, {sb * p.mu})) continue;
        ++checked;
        for (auto d : {Discipline::kLcfsNp, Discipline::kLcfsPs, Discipline::kLcfsSa}) {
            if (aoi::region_violation(p, d, {1}, {sb * p.mu})) continue;
            CHECK(aoi::joint_mgf(p, d, {1}, {sb * p.mu}) ==
                  doctest::Approx(aoi::marginal_mgf(p, d, 1, sb)).epsilon(1e-12));
        }
    }
}

TEST_CASE("closed-form moments match the worked numbers") {
    // symmetric two-source, lambda_i = 0.5, mu = 1
    CHECK(aoi::moments(kSym, Discipline::kLcfsNp, 1).mean == doctest::Approx(4.5).epsilon(1e-13));
    CHECK(aoi::moments(kSym, Discipline::kLcfsPs, 1).mean == doctest::Approx(4.0).epsilon(1e-13));
    CHECK(aoi::moments(kSym, Discipline::kLcfsPs, 1).second_moment ==
          doctest::Approx(28.0).epsilon(1e-13));
    CHECK(aoi::moments(kSym, Discipline::kLcfsSa, 1).mean ==
          doctest::Approx(6.25 / 1.5).epsilon(1e-13));
}

TEST_CASE("moments agree with central finite differences of the MGF") {
    std::mt19937_64 rng(35);
    for (int rep = 0; rep < 20; ++rep) {
        const auto p = random_params(rng, 2, 3);
        const double h = 1e-4 * p.mu;
        for (auto d : {Discipline::kLcfsNp, Discipline::kLcfsPs, Discipline::kLcfsSa}) {
            auto m1 = [&](double s) { return aoi::joint_mgf(p, d, {1}, {s}); };
            const double mean_fd = (m1(h) - m1(-h)) / (2.0 * h);
            const double second_fd = (m1(h) - 2.0 * m1(0.0) + m1(-h)) / (h * h);
            const auto mom = aoi::moments(p, d, 1);
            CHECK(mean_fd == doctest::Approx(mom.mean).epsilon(1e-4));
            CHECK(second_fd == doctest::Approx(mom.second_moment).epsilon(1e-4));

            auto m2 = [&](double s1, double s2) { return aoi::joint_mgf(p, d, {1, 2}, {s1, s2}); };
            const double cross_fd =
                (m2(h, h) - m2(h, -h) - m2(-h, h) + m2(-h, -h)) / (4.0 * h * h);
            CHECK(cross_fd == doctest::Approx(aoi::cross_moment(p, d, 1, 2)).epsilon(1e-4));
        }
    }
}

TEST_CASE("correlations match the worked numbers and the N=2 corollaries") {
    CHECK(aoi::correlation(kSym, Discipline::kLcfsPs, 1, 2) ==
          doctest::Approx(-2.0 * 0.25 / 3.0).epsilon(1e-12));
    CHECK(aoi::correlation(kSym, Discipline::kLcfsNp, 1, 2) ==
          doctest::Approx(0.25 * (1.0 - 6.0) / 12.75).epsilon(1e-12));

    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> rate(0.1, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        MultiSourceParams p{{rate(rng), rate(rng)}, 1.0};
        const double r1 = p.rho_k(1), r2 = p.rho_k(2);
        CHECK(aoi::correlation(p, Discipline::kLcfsNp, 1, 2) ==
              doctest::Approx(np_two_source_corr(r1, r2)).epsilon(1e-12));
        CHECK(aoi::correlation(p, Discipline::kLcfsPs, 1, 2) ==
              doctest::Approx(ps_two_source_corr(r1, r2)).epsilon(1e-12));
        CHECK(aoi::correlation(p, Discipline::kLcfsSa, 1, 2) ==
              doctest::Approx(sa_two_source_corr(r1, r2)).epsilon(1e-12));
    }
}

TEST_CASE("correlation closed forms equal the moment-assembled coefficient") {
    std::mt19937_64 rng(37);
    for (int rep = 0; rep < 100; ++rep) {
        const auto p = random_params(rng, 2, 3);
        for (auto d : {Discipline::kLcfsNp, Discipline::kLcfsPs, Discipline::kLcfsSa}) {
            const auto m1 = aoi::moments(p, d, 1);
            const auto m2 = aoi::moments(p, d, 2);
            const double cov = aoi::cross_moment(p, d, 1, 2) - m1.mean * m2.mean;
            const double pearson =
                cov / std::sqrt((m1.second_moment - m1.mean * m1.mean) *
                                (m2.second_moment - m2.mean * m2.mean));
            CHECK(aoi::correlation(p, d, 1, 2) == doctest::Approx(pearson).epsilon(1e-10));
        }
    }
}

TEST_CASE("preemptive correlations stay negative; non-preemptive crosses at the threshold") {
    std::mt19937_64 rng(38);
    std::uniform_real_distribution<double> rate(0.1, 3.0);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 4);
        MultiSourceParams p;
        for (int i = 0; i < n; ++i) p.lambdas.push_back(rate(rng));
        p.mu = rate(rng);
        CHECK(aoi::correlation(p, Discipline::kLcfsPs, 1, 2) < 0.0);
        CHECK(aoi::correlation(p, Discipline::kLcfsSa, 1, 2) < 0.0);
    }

    const double threshold = aoi::rho_threshold_np();
    CHECK(threshold >= 2.2142);
    CHECK(threshold <= 2.2144);
    CHECK(std::abs(std::pow(threshold, 3) - 4.0 * threshold - 2.0) <= 1e-9);
    auto corr_at = [](double rho) {
        MultiSourceParams p{{rho / 2.0, rho / 2.0}, 1.0};
        return aoi::correlation(p, Discipline::kLcfsNp, 1, 2);
    };
    CHECK(corr_at(threshold + 1e-3) > 0.0);
    CHECK(corr_at(threshold - 1e-3) < 0.0);
}

TEST_CASE("out-of-region arguments raise errors naming the factor") {
    try {
        // push s far beyond mu
        aoi::joint_mgf(kSym, Discipline::kLcfsPs, {1}, {5.0});
        FAIL("expected out-of-region");
    } catch (const aoi::Error& e) {
        CHECK(e.code() == aoi::ErrorCode::kOutOfRegion);
        CHECK(std::string(e.what()).find("validity region") != std::string::npos);
    }
    CHECK_THROWS_AS(aoi::joint_mgf(kSym, Discipline::kLcfsNp, {1, 1}, {0.0, 0.0}), aoi::Error);
    CHECK_THROWS_AS(aoi::joint_mgf(kSym, Discipline::kLcfsNp, {3}, {0.0}), aoi::Error);
    CHECK_THROWS_AS(aoi::correlation(kSym, Discipline::kLcfsNp, 1, 1), aoi::Error);
}

TEST_CASE("params validation rejects bad rates and oversized N") {
    MultiSourceParams bad{{0.5, -0.1}, 1.0};
    CHECK_THROWS_AS(bad.validate(), aoi::Error);
    MultiSourceParams zero_mu{{0.5}, 0.0};
    CHECK_THROWS_AS(zero_mu.validate(), aoi::Error);
    MultiSourceParams big{std::vector<double>(7, 1.0), 1.0};
    CHECK_THROWS_AS(big.validate(), aoi::Error);
}
