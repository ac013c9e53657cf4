#include "viewpaint/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

#include "viewpaint/error.hpp"

namespace viewpaint {

namespace {

constexpr double kBetaFloor = 1e-8;
constexpr double kBetaCeil = 0.999;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_step(const NoiseSchedule& s, int t, const char* op, int lo = 1) {
    if (t < lo || t > s.T)
        throw ContractError(std::string(op) + ": step " + std::to_string(t) +
                            " outside [" + std::to_string(lo) + "," + std::to_string(s.T) + "]");
}

// Derive betas from the raw marginal curve abar_raw(t), clamp them, then
// recompute the stored alpha_bars as the running product of (1 - beta) so
// the product identity holds exactly even where clamping bit.
NoiseSchedule build(int T, std::string kind, const std::function<double(int)>& abar_raw) {
    NoiseSchedule s;
    s.T = T;
    s.kind = std::move(kind);
    s.betas.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alphas.assign(static_cast<std::size_t>(T) + 1, 1.0);
    s.alpha_bars.assign(static_cast<std::size_t>(T) + 1, 1.0);
    s.posterior_vars.assign(static_cast<std::size_t>(T) + 1, 0.0);
    double prev_raw = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double raw = abar_raw(t);
        double beta = 1.0 - raw / prev_raw;
        beta = std::clamp(beta, kBetaFloor, kBetaCeil);
        prev_raw = raw;
        s.betas[static_cast<std::size_t>(t)] = beta;
        s.alphas[static_cast<std::size_t>(t)] = 1.0 - beta;
        s.alpha_bars[static_cast<std::size_t>(t)] =
            s.alpha_bars[static_cast<std::size_t>(t) - 1] * (1.0 - beta);
    }
    for (int t = 1; t <= T; ++t) {
        const double ab_prev = s.alpha_bars[static_cast<std::size_t>(t) - 1];
        const double ab = s.alpha_bars[static_cast<std::size_t>(t)];
        s.posterior_vars[static_cast<std::size_t>(t)] =
            (1.0 - ab_prev) / (1.0 - ab) * s.betas[static_cast<std::size_t>(t)];
    }
    // construction-time sanity; violations are schedule-builder bugs
    for (int t = 1; t <= T; ++t) {
        const double beta = s.betas[static_cast<std::size_t>(t)];
        if (!(beta > 0.0 && beta < 1.0))
            throw NumericError("schedule: beta outside (0,1) at t=" + std::to_string(t));
        if (!(s.alpha_bars[static_cast<std::size_t>(t)] <
              s.alpha_bars[static_cast<std::size_t>(t) - 1]))
            throw NumericError("schedule: alpha_bar not strictly decreasing at t=" +
                               std::to_string(t));
    }
    if (s.alpha_bars[static_cast<std::size_t>(T)] > 1e-3)
        throw NumericError("schedule: alpha_bar(T) above 1e-3");
    if (s.kind == "cosine" && T >= 250 && s.alpha_bars[1] < 0.99)
        throw NumericError("schedule: alpha_bar(1) below 0.99");
    return s;
}

}  // namespace

double NoiseSchedule::beta(int t) const {
    check_step(*this, t, "beta");
    return betas[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha(int t) const {
    check_step(*this, t, "alpha");
    return alphas[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
    check_step(*this, t, "alpha_bar", 0);
    return alpha_bars[static_cast<std::size_t>(t)];
}

double NoiseSchedule::posterior_var(int t) const {
    check_step(*this, t, "posterior_var");
    return posterior_vars[static_cast<std::size_t>(t)];
}

std::string NoiseSchedule::descriptor() const {
    std::ostringstream os;
    os.precision(17);
    os << kind << ":T=" << T;
    if (kind == "laplace") os << ",mu=" << mu << ",b=" << b;
    return os.str();
}

NoiseSchedule NoiseSchedule::from_descriptor(const std::string& desc) {
    const auto colon = desc.find(':');
    if (colon == std::string::npos)
        throw FormatError("schedule descriptor missing ':': " + desc);
    const std::string kind = desc.substr(0, colon);
    int T = 0;
    double mu = 0.0, b = 0.5;
    std::string rest = desc.substr(colon + 1);
    std::istringstream is(rest);
    std::string field;
    while (std::getline(is, field, ',')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos)
            throw FormatError("schedule descriptor field missing '=': " + field);
        const std::string key = field.substr(0, eq);
        const std::string val = field.substr(eq + 1);
        try {
            if (key == "T")
                T = std::stoi(val);
            else if (key == "mu")
                mu = std::stod(val);
            else if (key == "b")
                b = std::stod(val);
            else
                throw FormatError("schedule descriptor unknown key: " + key);
        } catch (const std::invalid_argument&) {
            throw FormatError("schedule descriptor bad value: " + field);
        }
    }
    if (kind == "cosine") return cosine_schedule(T);
    if (kind == "laplace") return laplace_schedule(T, mu, b);
    throw FormatError("schedule descriptor unknown kind: " + kind);
}

NoiseSchedule cosine_schedule(int T) {
    if (T < 2) throw ContractError("cosine_schedule: T must be >= 2");
    constexpr double s_off = 0.008;
    auto f = [&](double u) {
        const double v = std::cos((u + s_off) / (1.0 + s_off) * std::numbers::pi / 2.0);
        return v * v;
    };
    const double f0 = f(0.0);
    return build(T, "cosine",
                 [&](int t) { return f(static_cast<double>(t) / T) / f0; });
}

NoiseSchedule laplace_schedule(int T, double mu, double b) {
    if (T < 2) throw ContractError("laplace_schedule: T must be >= 2");
    if (b <= 0.0) throw ContractError("laplace_schedule: b must be positive");
    auto lambda = [&](double u) {
        const double d = u - 0.5;
        const double arg = std::max(1.0 - 2.0 * std::fabs(d), 1e-12);
        const double sgn = d < 0.0 ? 1.0 : (d > 0.0 ? -1.0 : 0.0);  // sign(0.5 - u)
        return mu - b * sgn * std::log(arg);
    };
    NoiseSchedule s = build(T, "laplace", [&](int t) {
        return sigmoid(lambda(static_cast<double>(t) / T));
    });
    s.mu = mu;
    s.b = b;
    return s;
}

double snr(const NoiseSchedule& s, int t) {
    check_step(s, t, "snr");
    const double ab = s.alpha_bars[static_cast<std::size_t>(t)];
    const double denom = 1.0 - ab;
    if (denom <= 0.0) return 1e12;
    return std::min(ab / denom, 1e12);
}

void dump_schedule_csv(const NoiseSchedule& s, std::ostream& os) {
    os << "t,beta,alpha_bar,snr,posterior_var\n";
    os.precision(10);
    for (int t = 1; t <= s.T; ++t)
        os << t << ',' << s.beta(t) << ',' << s.alpha_bar(t) << ',' << snr(s, t) << ','
           << s.posterior_var(t) << '\n';
}

}  // namespace viewpaint
