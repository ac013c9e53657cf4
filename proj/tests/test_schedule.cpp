#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "viewpaint/error.hpp"
#include "viewpaint/schedule.hpp"

using namespace viewpaint;

namespace {

// closed-form cosine marginal, evaluated independently of the module
double cosine_abar_closed_form(int t, int T) {
    const double s = 0.008;
    auto f = [&](double u) {
        const double v = std::cos((u + s) / (1.0 + s) * std::numbers::pi / 2.0);
        return v * v;
    };
    return f(static_cast<double>(t) / T) / f(0.0);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST_SUITE("schedule") {

TEST_CASE("construction preconditions") {
    CHECK_THROWS_AS(cosine_schedule(1), ContractError);
    CHECK_THROWS_AS(laplace_schedule(100, 0.0, 0.0), ContractError);
    CHECK_THROWS_AS(laplace_schedule(100, 0.0, -1.0), ContractError);
    CHECK(cosine_schedule(1000).T == 1000);
}

TEST_CASE("alpha_bar convention and accessor bounds") {
    auto s = cosine_schedule(100);
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK_THROWS_AS(s.beta(0), ContractError);
    CHECK_THROWS_AS(s.beta(101), ContractError);
    CHECK_THROWS_AS(s.alpha_bar(-1), ContractError);
    CHECK_THROWS_AS(s.posterior_var(0), ContractError);
}

TEST_CASE("cosine alpha_bar matches independent closed-form evaluation") {
    auto s = cosine_schedule(10);
    // clamping is inactive before the final step, so the stored product
    // telescopes back to the raw curve
    for (int t = 1; t <= 9; ++t)
        CHECK(s.alpha_bar(t) ==
              doctest::Approx(cosine_abar_closed_form(t, 10)).epsilon(1e-12));
    CHECK(s.alpha_bar(5) == doctest::Approx(cosine_abar_closed_form(5, 10)).epsilon(1e-12));
}

TEST_CASE("basic shape of both schedules") {
    for (int T : {10, 100, 250}) {
        auto c = cosine_schedule(T);
        auto l = laplace_schedule(T);
        for (const auto* s : {&c, &l}) {
            CHECK(static_cast<int>(s->betas.size()) == T + 1);
            for (int t = 1; t <= T; ++t) {
                CHECK(s->beta(t) > 0.0);
                CHECK(s->beta(t) < 1.0);
                CHECK(s->alpha(t) == 1.0 - s->beta(t));
                CHECK(s->alpha_bar(t) < s->alpha_bar(t - 1));
                CHECK(s->posterior_var(t) >= 0.0);
            }
            CHECK(s->alpha_bar(T) <= 1e-3);
            CHECK(s->posterior_var(1) == 0.0);
        }
    }
}

TEST_CASE("cosine keeps alpha_bar(1) near one at large T") {
    for (int T : {250, 500, 1000}) CHECK(cosine_schedule(T).alpha_bar(1) >= 0.99);
}

TEST_CASE("product of (1-beta) reproduces alpha_bar within 1e-5") {
    for (int T : {10, 100, 250, 1000}) {
        auto c = cosine_schedule(T);
        auto l = laplace_schedule(T);
        for (const auto* s : {&c, &l}) {
            double prod = 1.0;
            for (int t = 1; t <= T; ++t) {
                prod *= 1.0 - s->beta(t);
                CHECK(std::fabs(prod - s->alpha_bar(t)) <=
                      1e-5 * std::max(prod, 1e-300));
            }
        }
    }
}

TEST_CASE("cosine clamping only ever activates at the final step") {
    for (int T : {250, 500, 1000}) {
        auto s = cosine_schedule(T);
        for (int t = 1; t < T; ++t) {
            CHECK(s.beta(t) > 1e-8);
            CHECK(s.beta(t) < 0.999);
        }
    }
}

TEST_CASE("laplace median and symmetry") {
    auto s = laplace_schedule(100, 0.0, 0.5);
    CHECK(s.alpha_bar(50) == doctest::Approx(0.5).epsilon(1e-9));
    // nonzero mu shifts the median log-SNR
    auto s2 = laplace_schedule(100, 1.5, 0.5);
    CHECK(logit(s2.alpha_bar(50)) == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("snr is monotone decreasing and matches its definition") {
    for (int T : {100, 250}) {
        auto c = cosine_schedule(T);
        auto l = laplace_schedule(T);
        for (const auto* s : {&c, &l}) {
            double prev = 1e18;
            for (int t = 1; t <= T; ++t) {
                const double v = snr(*s, t);
                const double ab = s->alpha_bar(t);
                CHECK(v == doctest::Approx(ab / (1.0 - ab)).epsilon(1e-12));
                CHECK(v < prev);
                prev = v;
            }
        }
    }
    auto s = cosine_schedule(100);
    CHECK_THROWS_AS(snr(s, 0), ContractError);
    CHECK_THROWS_AS(snr(s, 101), ContractError);
}

TEST_CASE("snr value 1 at alpha_bar one-half and cap at extreme alpha_bar") {
    NoiseSchedule s;
    s.T = 2;
    s.kind = "synthetic";
    s.betas = {0.0, 0.1, 0.1};
    s.alphas = {1.0, 0.9, 0.9};
    s.alpha_bars = {1.0, 0.5, 1.0 - 1e-15};
    s.posterior_vars = {0.0, 0.0, 0.0};
    CHECK(snr(s, 1) == doctest::Approx(1.0));
    CHECK(snr(s, 2) == 1e12);
}

TEST_CASE("laplace concentrates at least twice the steps of cosine in mid log-SNR") {
    const int T = 1000;
    auto lap = laplace_schedule(T, 0.0, 0.5);
    auto cos_s = cosine_schedule(T);
    int n_lap = 0, n_cos = 0;
    for (int t = 1; t <= T; ++t) {
        if (std::fabs(std::log(snr(lap, t))) <= 1.0) ++n_lap;
        if (std::fabs(std::log(snr(cos_s, t))) <= 1.0) ++n_cos;
    }
    CHECK(n_cos > 0);
    CHECK(n_lap >= 2 * n_cos);
}

TEST_CASE("laplace log-SNR density peaks at the median") {
    // histogram lambda(t/T) over T=1000; the modal bin must contain mu
    const int T = 1000;
    auto s = laplace_schedule(T, 0.0, 0.5);
    const double lo = -6.0, hi = 6.0;
    const int nbins = 24;
    std::vector<int> hist(nbins, 0);
    for (int t = 1; t <= T; ++t) {
        const double lam = std::log(snr(s, t));
        if (lam < lo || lam >= hi) continue;
        ++hist[static_cast<int>((lam - lo) / (hi - lo) * nbins)];
    }
    int best = 0;
    for (int i = 1; i < nbins; ++i)
        if (hist[i] > hist[best]) best = i;
    const double center = lo + (best + 0.5) * (hi - lo) / nbins;
    CHECK(std::fabs(center) < 1.0);  // modal bin straddles lambda = mu = 0
}

TEST_CASE("posterior variance formula") {
    auto s = cosine_schedule(100);
    for (int t = 2; t <= 100; t += 7) {
        const double want =
            (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t)) * s.beta(t);
        CHECK(s.posterior_var(t) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("descriptor round trip") {
    auto c = cosine_schedule(123);
    auto c2 = NoiseSchedule::from_descriptor(c.descriptor());
    CHECK(c2.T == 123);
    CHECK(c2.kind == "cosine");
    CHECK(c2.alpha_bar(60) == c.alpha_bar(60));

    auto l = laplace_schedule(77, 0.25, 0.75);
    auto l2 = NoiseSchedule::from_descriptor(l.descriptor());
    CHECK(l2.T == 77);
    CHECK(l2.mu == 0.25);
    CHECK(l2.b == 0.75);
    CHECK(l2.alpha_bar(33) == l.alpha_bar(33));

    CHECK_THROWS_AS(NoiseSchedule::from_descriptor("nonsense"), FormatError);
    CHECK_THROWS_AS(NoiseSchedule::from_descriptor("gauss:T=10"), FormatError);
    CHECK_THROWS_AS(NoiseSchedule::from_descriptor("cosine:T=abc"), FormatError);
}

TEST_CASE("csv dump has the documented header and row count") {
    auto s = cosine_schedule(5);
    std::ostringstream os;
    dump_schedule_csv(s, os);
    const std::string text = os.str();
    CHECK(text.rfind("t,beta,alpha_bar,snr,posterior_var\n", 0) == 0);
    int lines = 0;
    for (char ch : text) lines += ch == '\n';
    CHECK(lines == 6);
}

}  // TEST_SUITE
