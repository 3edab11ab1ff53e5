#include "pnsim/ctrnn.hpp"
#include "pnsim/errors.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

using namespace pnsim;
using namespace pnsim::ctrnn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Vec vec1(double a) { return Vec::Constant(1, a); }

// Centred output range, so the symmetric Hopf network keeps its fixed point at s = 0.
SigmoidParams centred(double beta) { return {1.0, beta, -0.5, 0.0}; }

}  // namespace

TEST_CASE("sigmoid midpoint, asymptotes and slope") {
    SigmoidParams p{2.0, 3.0, 0.25, 1.5};
    CHECK_THAT(sigmoid(1.5, p), WithinAbs(1.25, 1e-15));
    CHECK_THAT(sigmoid(1e6, p), WithinAbs(2.25, 1e-12));
    CHECK_THAT(sigmoid(-1e6, p), WithinAbs(0.25, 1e-12));
    CHECK_THAT(sigmoid_derivative(1.5, p), WithinAbs(2.0 * 3.0 / 4.0, 1e-14));
    CHECK(std::isfinite(sigmoid(-1e308, p)));
    CHECK_THAT(sigmoid_inverse(sigmoid(0.3, p), p), WithinAbs(0.3, 1e-12));
    CHECK_THROWS_AS(sigmoid_inverse(0.25, p), InvalidInputError);
}

TEST_CASE("sigmoid is strictly increasing and bounded for positive beta") {
    SigmoidParams p{1.3, 0.7, -0.2, 0.4};
    double prev = sigmoid(-40, p);
    for (double s = -39.9; s < 40; s += 0.1) {
        const double y = sigmoid(s, p);
        CHECK(y > prev);
        CHECK(y > p.gamma);
        CHECK(y < p.alpha + p.gamma);
        prev = y;
    }
}

TEST_CASE("feedforward network relaxes exponentially to W_x x + b") {
    auto p = CtrnnParams::uniform(2, 2, 1e-9, SigmoidParams{});
    p.w_x << 0.5, -0.3, 0.2, 1.1;
    p.b = vec2(0.1, -0.4);
    const Vec x = vec2(0.7, 0.2);
    const Vec s_star = p.w_x * x + p.b;
    const Vec s0 = vec2(1.0, -1.0);
    auto tr = integrate(p, [&](double) { return x; }, s0, 5e-9, 1e-11);
    for (std::size_t k = 0; k < tr.time.size(); k += 50) {
        const Vec expect = s_star + (s0 - s_star) * std::exp(-tr.time[k] / 1e-9);
        CHECK((tr.s[k] - expect).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("pure decay without weights") {
    auto p = CtrnnParams::uniform(1, 0, 2.0, SigmoidParams{});
    auto tr = integrate(p, {}, vec1(0.8), 4.0, 0.01);
    CHECK_THAT(tr.s.back()[0], WithinRel(0.8 * std::exp(-2.0), 1e-9));
}

TEST_CASE("RK4 endpoint error shrinks 16x per halving of dt") {
    auto p = hopf_network(0.3, SigmoidParams{1.0, 4.0, 0.0, 0.2}, 1.0);
    p.b = vec2(0.1, -0.2);
    const Vec s0 = vec2(0.5, -0.3);
    auto end = [&](double dt) { return integrate(p, {}, s0, 2.0, dt).s.back(); };
    const Vec a = end(0.05), b = end(0.025), c = end(0.0125);
    const double ratio = (a - b).norm() / (b - c).norm();
    CHECK(ratio > 14.0);
    CHECK(ratio < 18.0);
}

TEST_CASE("dt above tau/20 is rejected") {
    auto p = CtrnnParams::uniform(1, 0, 1.0, SigmoidParams{});
    CHECK_THROWS_AS(integrate(p, {}, vec1(0.0), 1.0, 0.1), InvalidInputError);
}

TEST_CASE("divergence reports the failure time") {
    auto p = CtrnnParams::uniform(1, 0, 1.0, SigmoidParams{});
    p.w_y(0, 0) = 1e308;
    p.b[0] = 1e308;
    try {
        integrate(p, {}, vec1(1e308), 1.0, 0.01);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.time() > 0.0);
    }
}

TEST_CASE("feedforward fixed point is reached within 1e-8 after 20 tau for random parameters") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 4, m = 1 + trial % 3;
        auto p = CtrnnParams::uniform(n, m, 1.0, SigmoidParams{});
        for (int i = 0; i < n; ++i) {
            p.tau[i] = 0.5 + 0.5 * (u(rng) + 1.0);
            p.b[i] = u(rng);
            p.sigma[i] = {1.0 + 0.5 * (u(rng) + 1), 1.0 + 2 * (u(rng) + 1), u(rng), u(rng)};
            for (int k = 0; k < m; ++k) p.w_x(i, k) = u(rng);
        }
        Vec x(m), s0(n);
        for (int k = 0; k < m; ++k) x[k] = u(rng);
        for (int i = 0; i < n; ++i) s0[i] = 2 * u(rng);
        auto [s_star, y_star] = feedforward_fixed_point(p, x);
        auto tr = integrate(p, [&](double) { return x; }, s0, 20 * p.tau.maxCoeff(), p.tau.minCoeff() / 40);
        CHECK((tr.s.back() - s_star).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((tr.y.back() - y_star).cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("fan-in sums and differences at the feedforward fixed point") {
    auto p = CtrnnParams::uniform(1, 2, 1.0, SigmoidParams{});
    p.b[0] = 0.25;
    CHECK_THAT(feedforward_fixed_point(p, vec2(0, 0)).first[0], WithinAbs(0.25, 1e-15));
    p.w_x << 1.0, 1.0;
    CHECK_THAT(feedforward_fixed_point(p, vec2(0.3, 0.5)).first[0], WithinAbs(1.05, 1e-15));
    p.w_x << 1.0, -1.0;
    CHECK_THAT(feedforward_fixed_point(p, vec2(0.3, 0.5)).first[0], WithinAbs(0.05, 1e-15));
    p.w_y(0, 0) = 0.1;
    CHECK_THROWS_AS(feedforward_fixed_point(p, vec2(0, 0)), ContractViolation);
}

TEST_CASE("nullcline of the feedforward neuron has the single root b + x") {
    auto p = CtrnnParams::uniform(1, 1, 1.0, SigmoidParams{1, 5, 0, 0.5});
    p.b[0] = 0.2;
    auto roots = nullcline_roots(p, 0.3, 0.0);
    REQUIRE(roots.size() == 1);
    CHECK_THAT(roots[0].s, WithinAbs(0.5, 1e-12));
    CHECK(roots[0].stable);
}

TEST_CASE("strong centred feedback gives stable, unstable, stable roots") {
    SigmoidParams sg{1, 10, 0, 0.5};
    auto p = CtrnnParams::uniform(1, 1, 1.0, sg);
    p.w_y(0, 0) = 1.0;
    p.b = centering_bias(p);
    p.w_y(0, 0) = 0.0;
    auto roots = nullcline_roots(p, 0.0, 1.0);
    REQUIRE(roots.size() == 3);
    CHECK(roots[0].stable);
    CHECK_FALSE(roots[1].stable);
    CHECK(roots[2].stable);
    CHECK_THAT(roots[1].s, WithinAbs(0.5, 1e-12));
    for (const auto& r : roots) {
        CHECK(std::abs(-r.s + p.b[0] + sigmoid(r.s, sg)) < 1e-11);
    }
}

TEST_CASE("root count goes 1 -> 3 at the critical weight and matches brute-force integration") {
    SigmoidParams sg{1, 8, 0, 0.5};
    int prev = 1, transitions = 0;
    for (double w = 0.0; w <= 1.0 + 1e-9; w += 0.025) {
        auto p = CtrnnParams::uniform(1, 0, 1.0, sg);
        p.b[0] = sg.s0 - w * 0.5;  // centred for this w
        const auto roots = nullcline_roots(p, 0.0, w);
        const int count = static_cast<int>(roots.size());
        CHECK((count == 1 || count == 3));
        if (count != prev) ++transitions;
        prev = count;
        // Independent oracle: distinct endpoints from many starting states.
        p.w_y(0, 0) = w;
        std::vector<double> ends;
        for (double s0 = -1.0; s0 <= 2.0; s0 += 0.25) {
            if (std::abs(s0 - sg.s0) < 1e-9) continue;  // exactly on the unstable root
            const double e = integrate(p, {}, vec1(s0), 200.0, 0.05).s.back()[0];
            if (std::none_of(ends.begin(), ends.end(), [&](double v) { return std::abs(v - e) < 1e-3; })) {
                ends.push_back(e);
            }
        }
        const int stable = static_cast<int>(std::count_if(roots.begin(), roots.end(), [](auto r) { return r.stable; }));
        if (std::abs(w - 0.5) > 0.1) {  // away from the slow critical point
            CHECK(static_cast<int>(ends.size()) == stable);
        }
    }
    CHECK(transitions == 1);
}

TEST_CASE("cubic approximation agrees on the root count for centred bias") {
    SigmoidParams sg{1, 6, 0, 0.0};
    for (double w = 0.1; w <= 1.5; w += 0.1) {
        auto p = CtrnnParams::uniform(1, 0, 1.0, sg);
        p.b[0] = -w * 0.5;
        CHECK(cubic_nullcline_roots(p, 0.0, w).size() == nullcline_roots(p, 0.0, w).size());
    }
}

TEST_CASE("Jacobian matches central finite differences over random draws") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 5;
        auto p = CtrnnParams::uniform(n, 0, 1.0, SigmoidParams{});
        Vec s(n);
        for (int i = 0; i < n; ++i) {
            p.tau[i] = 0.2 + (u(rng) + 1);
            p.b[i] = u(rng);
            p.sigma[i] = {1 + (u(rng) + 1), 3 * u(rng) + (u(rng) > 0 ? 0.5 : -0.5), u(rng), u(rng)};
            s[i] = u(rng);
            for (int k = 0; k < n; ++k) p.w_y(i, k) = 2 * u(rng);
        }
        const Mat j = jacobian(p, s);
        const double h = 1e-6;
        Mat fd(n, n);
        for (int k = 0; k < n; ++k) {
            Vec sp = s, sm = s;
            sp[k] += h;
            sm[k] -= h;
            fd.col(k) = (rhs(p, sp, Vec()) - rhs(p, sm, Vec())) / (2 * h);
        }
        CHECK((j - fd).norm() <= 1e-6 * j.norm());
    }
}

TEST_CASE("Jacobian without feedback is -I/tau") {
    auto p = CtrnnParams::uniform(3, 0, 2.0, SigmoidParams{});
    CHECK((jacobian(p, Vec::Constant(3, 0.4)) + Mat::Identity(3, 3) / 2.0).norm() < 1e-15);
    for (const auto& l : eigenvalues(jacobian(p, Vec::Zero(3)))) CHECK_THAT(l.real(), WithinAbs(-0.5, 1e-14));
}

TEST_CASE("Hopf matrix at the symmetric fixed point has a complex pair") {
    auto p = hopf_network(0.2, centred(4.0), 1.0);
    auto fp = find_fixed_point(p, Vec(), vec2(0.1, -0.1));
    REQUIRE(fp);
    CHECK(fp->s_star.norm() < 1e-12);
    REQUIRE(fp->eigenvalues.size() == 2);
    CHECK(std::abs(fp->eigenvalues[0].imag()) > 0.5);
    CHECK_THAT(fp->eigenvalues[0].imag(), WithinAbs(-fp->eigenvalues[1].imag(), 1e-12));
    CHECK(fp->stability == Stability::StableFocus);
}

TEST_CASE("Hopf sweep locates the crossing and the cycle onset") {
    // Fixed point pinned at 0 with slope alpha*beta/4 = 2, so W_F* = 0.5 exactly.
    auto base = hopf_network(0.0, centred(8.0), 1.0);
    HopfOptions o;
    o.resolution = 0.05;
    auto rec = hopf_sweep(base, o);
    REQUIRE(rec.samples.size() == 21);
    REQUIRE(rec.critical_w_f);
    CHECK_THAT(*rec.critical_w_f, WithinAbs(0.5, 1e-6));

    auto at = hopf_network(*rec.critical_w_f, centred(8.0), 1.0);
    auto fp = analyze_fixed_point(at, Vec::Zero(2), Vec());
    CHECK(std::abs(fp.eigenvalues[0].real()) < 1e-5);

    double prev_amp = 0.0;
    for (const auto& s : rec.samples) {
        if (s.w_f < 0.45) {
            CHECK_FALSE(s.cycle.oscillating);
            CHECK(s.max_real < 0.0);
        }
        if (s.w_f > 0.55) {
            CHECK(s.cycle.oscillating);
            CHECK(s.cycle.amplitude > prev_amp);
            prev_amp = s.cycle.amplitude;
        }
    }
    // Integration agrees with the eigenvalue crossing to within one sweep step.
    double onset = 2.0;
    for (const auto& s : rec.samples) {
        if (s.cycle.oscillating) {
            onset = s.w_f;
            break;
        }
    }
    CHECK(std::abs(onset - *rec.critical_w_f) <= o.resolution + 1e-9);
}

TEST_CASE("Recentred Hopf sweep keeps the crossing at 4 / (alpha beta)") {
    // Outputs in (0, 1): the centre moves with W_F, so a fixed bias would drift off it.
    const SigmoidParams sp{1.0, 8.0, 0.0, 0.3};
    auto base = hopf_network(0.0, sp, 1.0);
    base.b = centering_bias(base);
    HopfOptions o;
    o.integrate = false;
    o.recenter = true;
    auto rec = hopf_sweep(base, o);
    REQUIRE(rec.critical_w_f);
    CHECK_THAT(*rec.critical_w_f, WithinAbs(0.5, 1e-6));
    for (const auto& s : rec.samples) {
        CHECK_THAT(sigmoid(s.fixed_point.s_star[0], sp), WithinAbs(0.5, 1e-9));
    }

    o.recenter = false;
    auto fixed = hopf_sweep(base, o);
    CHECK((!fixed.critical_w_f || std::abs(*fixed.critical_w_f - 0.5) > 1e-3));
}

TEST_CASE("measure_cycle recovers amplitude and period of a sine") {
    std::vector<double> t, y;
    for (int k = 0; k < 20000; ++k) {
        t.push_back(k * 1e-3);
        y.push_back(0.3 + 0.2 * std::sin(2 * 3.141592653589793 * t.back() / 0.7));
    }
    auto m = measure_cycle(t, y, 2.0, 1e-6);
    CHECK(m.oscillating);
    CHECK_THAT(m.amplitude, WithinAbs(0.4, 1e-4));
    CHECK_THAT(m.period, WithinRel(0.7, 1e-3));
}

namespace {

CtrnnParams wta_test_net() {
    auto p = wta_network(-1.0, SigmoidParams{1, 4, 0, 0.5}, 1.0);
    p.b = centering_bias(p);
    return p;
}

}  // namespace

TEST_CASE("WTA: the stronger input wins and the state is remembered") {
    auto p = wta_test_net();
    auto r1 = wta_analyze(p, vec2(0.5, 0.0), vec2(0.5, 0.5), 60.0, 0.02);
    CHECK(r1.settled);
    CHECK(r1.winner == 0);
    auto r2 = wta_analyze(p, vec2(0.0, 0.5), vec2(0.5, 0.5), 60.0, 0.02);
    CHECK(r2.winner == 1);
    auto mem = wta_analyze(p, vec2(0.0, 0.0), r1.trajectory.s.back(), 60.0, 0.02);
    CHECK(mem.winner == 0);
    auto mem2 = wta_analyze(p, vec2(0.0, 0.0), r2.trajectory.s.back(), 60.0, 0.02);
    CHECK(mem2.winner == 1);
}

TEST_CASE("WTA: symmetric input and state stay on the diagonal") {
    auto p = wta_test_net();
    auto r = wta_analyze(p, vec2(0.2, 0.2), vec2(0.3, 0.3), 60.0, 0.02);
    for (const auto& y : r.trajectory.y) CHECK(y[0] == y[1]);
    CHECK(r.winner == -1);
    CHECK(r.tie);
}

TEST_CASE("vector field vanishes at a fixed point and points along trajectories") {
    auto p = wta_test_net();
    const Vec x = Vec::Zero(2);
    auto fp = find_fixed_point(p, x, vec2(0.5, 0.5));
    REQUIRE(fp);
    const Vec y = outputs(p, fp->s_star);
    auto one = vector_field(p, x, y, y, 1, 1);
    REQUIRE(one[0].valid);
    CHECK(std::hypot(one[0].dy1, one[0].dy2) < 1e-12);

    auto field = vector_field(p, x, vec2(0.05, 0.05), vec2(0.95, 0.95), 19, 19);
    int aligned = 0, total = 0;
    for (const auto& f : field) {
        REQUIRE(f.valid);
        if (std::hypot(f.dy1, f.dy2) < 1e-6) continue;
        // Oracle: short integration step from the same point.
        Vec s = vec2(sigmoid_inverse(f.y1, p.sigma[0]), sigmoid_inverse(f.y2, p.sigma[1]));
        auto tr = integrate(p, {}, s, 0.01, 0.001);
        const Vec dy = (tr.y.back() - tr.y.front()) / 0.01;
        const double cosang = (dy[0] * f.dy1 + dy[1] * f.dy2) / (dy.norm() * std::hypot(f.dy1, f.dy2));
        ++total;
        if (cosang > 0.99) ++aligned;
        // Basin side: points off the diagonal end on their own side.
        if (std::abs(f.y1 - f.y2) > 0.05) {
            auto end = integrate(p, {}, s, 40.0, 0.02).y.back();
            CHECK(((end[0] > end[1]) == (f.y1 > f.y2)));
        }
    }
    CHECK(aligned == total);
    auto outside = vector_field(p, x, vec2(0.0, 0.5), vec2(1.0, 0.5), 3, 1);
    CHECK_FALSE(outside[0].valid);
    CHECK(outside[1].valid);
    CHECK_FALSE(outside[2].valid);
}

TEST_CASE("output trace obeys the chain rule") {
    auto p = hopf_network(0.8, SigmoidParams{1, 5, 0, 0.5}, 1.0);
    p.b = centering_bias(p);
    const double dt = 0.001;
    auto tr = integrate(p, {}, vec2(0.7, 0.2), 3.0, dt);
    for (std::size_t k = 1; k + 1 < tr.y.size(); k += 97) {
        const Vec dy = (tr.y[k + 1] - tr.y[k - 1]) / (2 * dt);
        const Vec ds = rhs(p, tr.s[k], Vec());
        for (int i = 0; i < 2; ++i) {
            CHECK_THAT(dy[i], WithinAbs(sigmoid_derivative(tr.s[k][i], p.sigma[i]) * ds[i], 1e-5));
        }
    }
}

TEST_CASE("network parameters round-trip through JSON") {
    auto p = wta_test_net();
    nlohmann::json j = p;
    auto q = j.get<CtrnnParams>();
    CHECK(q.w_y == p.w_y);
    CHECK(q.w_x == p.w_x);
    CHECK(q.b == p.b);
    CHECK(q.sigma == p.sigma);
}
