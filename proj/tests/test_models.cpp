#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "doser/dynamics.hpp"
#include "doser/errors.hpp"
#include "doser/metrics.hpp"
#include "doser/ood_detect.hpp"
#include "doser/toyworld.hpp"

using namespace doser;

namespace {

Dataset medium_data(size_t n = 8000, uint64_t seed = 4) {
    NavEnv env;
    return gen_dataset(env, DatasetKind::kMedium, n, seed);
}

}  // namespace

TEST_CASE("dynamics model learns the toy transition to high accuracy") {
    NavEnv env;
    const Dataset train_set = medium_data(8000, 4);
    const Dataset held_out = medium_data(2000, 5);

    Rng rng(1);
    DynamicsModel m = DynamicsModel::make(1, 1, {64, 64}, env.state_lo, env.state_hi, rng);
    DynamicsTrainConfig cfg;
    cfg.steps = 4000;
    cfg.lr = 1e-3;
    const std::vector<double> trace = train_dynamics(m, train_set, cfg, rng);
    CHECK(trace.front() > trace.back());
    CHECK(m.training_steps_done == 4000);

    MlpWorkspace ws;
    const Mat s = dataset_states(held_out);
    const Mat a = dataset_actions(held_out);
    Mat s_hat;
    std::vector<double> r_hat;
    predict_batch(m, s, a, s_hat, r_hat, ws);
    double mse = 0.0;
    for (size_t i = 0; i < held_out.rows(); ++i) {
        const double diff = s_hat.at(i, 0) - held_out.s_next[i];
        mse += diff * diff;
    }
    mse /= static_cast<double>(held_out.rows());
    CHECK(mse < 1e-3);
}

TEST_CASE("dynamics prediction is idempotent and clamped") {
    NavEnv env;
    Rng rng(2);
    DynamicsModel m = DynamicsModel::make(1, 1, {16}, env.state_lo, env.state_hi, rng);
    const double s = 3.0, a = -0.5;
    std::vector<double> out1(1), out2(1);
    double r1 = 0.0, r2 = 0.0;
    predict(m, {&s, 1}, {&a, 1}, out1, r1);
    predict(m, {&s, 1}, {&a, 1}, out2, r2);
    CHECK(out1 == out2);
    CHECK(r1 == r2);
    CHECK(out1[0] >= env.state_lo);
    CHECK(out1[0] <= env.state_hi);
}

TEST_CASE("trained dynamics recovers unit slopes in the interior") {
    NavEnv env;
    const Dataset data = medium_data(8000, 6);
    Rng rng(3);
    DynamicsModel m = DynamicsModel::make(1, 1, {64, 64}, env.state_lo, env.state_hi, rng);
    DynamicsTrainConfig cfg;
    cfg.steps = 4000;
    cfg.lr = 1e-3;
    train_dynamics(m, data, cfg, rng);

    // s' = s + a has slope 1 in both inputs; probe by central differences
    // at interior points of the visited region.
    const double h = 0.05;
    for (const double s : {-0.4, 0.0, 0.4}) {
        const double a = optimal_action(env, s) * 0.5;
        std::vector<double> lo(1), hi(1);
        double r = 0.0;
        const double sp = s + h, sm = s - h;
        predict(m, {&sp, 1}, {&a, 1}, hi, r);
        predict(m, {&sm, 1}, {&a, 1}, lo, r);
        CHECK(std::abs((hi[0] - lo[0]) / (2 * h) - 1.0) < 0.25);
        const double ap = a + h, am = a - h;
        predict(m, {&s, 1}, {&ap, 1}, hi, r);
        predict(m, {&s, 1}, {&am, 1}, lo, r);
        CHECK(std::abs((hi[0] - lo[0]) / (2 * h) - 1.0) < 0.25);
    }
}

TEST_CASE("nearest-rank percentile conventions") {
    std::vector<double> errs(100);
    for (size_t i = 0; i < 100; ++i) errs[i] = static_cast<double>(i + 1);
    CHECK(nearest_rank_percentile(errs, 99.0) == 99.0);
    CHECK(nearest_rank_percentile(errs, 100.0) == 100.0);
    CHECK(nearest_rank_percentile(errs, 1.0) == 1.0);
    CHECK(nearest_rank_percentile(errs, 0.5) == 1.0);
    CHECK_THROWS_AS(nearest_rank_percentile({}, 50.0), InputError);
    CHECK_THROWS_AS(nearest_rank_percentile(errs, 0.0), InputError);
    CHECK_THROWS_AS(nearest_rank_percentile(errs, 101.0), InputError);
}

TEST_CASE("ood indicators use a strict inequality at the threshold") {
    OodThresholds t;
    t.tau_a = 0.5;
    t.tau_s = 0.25;
    t.calibration_errors_a = {0.1, 0.5};
    t.calibration_errors_s = {0.1, 0.25};
    CHECK_FALSE(is_ood_action(t, 0.5));
    CHECK_FALSE(is_ood_action(t, 0.0));
    CHECK(is_ood_action(t, 0.5 + 1e-12));
    CHECK_FALSE(is_ood_state(t, 0.25));
    CHECK(is_ood_state(t, 0.26));
    CHECK_THROWS_AS(is_ood_action(t, -0.1), InputError);
}

TEST_CASE("threshold calibration bounds the flagged fraction") {
    NavEnv env;
    const Dataset data = medium_data(3000, 7);
    Rng rng(5);
    NoiseSchedule sched;
    DenoiserModel behavior = DenoiserModel::make(1, 1, {32, 32}, sched, rng);
    DenoiserModel state_model = DenoiserModel::make(1, 0, {32, 32}, sched, rng);
    DenoiserTrainConfig tc;
    tc.steps = 2500;
    tc.batch = 128;
    train_denoiser(behavior, dataset_actions(data), dataset_states(data), tc, rng);
    train_denoiser(state_model, dataset_states(data), Mat(), tc, rng);

    const OodThresholds t = fit_thresholds(behavior, state_model, data, 99.0, 99.0, 10, 17);
    CHECK(t.calibrated());
    CHECK(t.calibration_errors_a.size() == data.rows());
    CHECK(std::is_sorted(t.calibration_errors_a.begin(), t.calibration_errors_a.end()));

    // Recount on the calibration set itself: flagged fraction <= 1% + one rank.
    size_t flagged = 0;
    for (double e : t.calibration_errors_a) flagged += is_ood_action(t, e);
    CHECK(static_cast<double>(flagged) <= 0.01 * 3000.0 + 1.0);

    CHECK_THROWS_AS(fit_thresholds(behavior, state_model, Dataset{}, 99.0, 99.0, 10, 17),
                    InputError);

    // Actions shifted by 5-sigma Gaussian noise score clearly above the
    // in-distribution median.
    const OodSplit split = perturb_ood(data, 500, 5.0, 23);
    std::vector<double> id_err = recon_errors(behavior, dataset_actions(split.id),
                                              dataset_states(split.id), 10, 29);
    std::vector<double> ood_err = recon_errors(behavior, dataset_actions(split.ood),
                                               dataset_states(split.ood), 10, 29);
    std::sort(id_err.begin(), id_err.end());
    std::sort(ood_err.begin(), ood_err.end());
    CHECK(id_err[id_err.size() / 2] < ood_err[ood_err.size() / 2]);
}

TEST_CASE("ensemble variance: degenerate and hand-computed cases") {
    EnsembleDetector det;
    det.state_dim = 1;
    det.action_dim = 1;
    // Two members, single linear layer each, producing +1 and -1 regardless
    // of input: variance = 1.
    for (const double out : {1.0, -1.0}) {
        Mlp m = Mlp::make({2, 1}, Activation::kIdentity, Activation::kIdentity);
        m.weights[m.bias_offset(0)] = out;
        det.members.push_back(m);
    }
    const double s = 0.3, a = -0.2;
    CHECK(ensemble_score(det, {&s, 1}, {&a, 1}) == doctest::Approx(1.0));

    det.members[1] = det.members[0];  // identical members
    CHECK(ensemble_score(det, {&s, 1}, {&a, 1}) == doctest::Approx(0.0));

    EnsembleDetector untrained;
    CHECK_THROWS_AS(ensemble_score(untrained, {&s, 1}, {&a, 1}), StateError);
}

TEST_CASE("ensemble gate calibration flags about one percent of ID data") {
    const Dataset data = medium_data(3000, 9);
    EnsembleTrainConfig cfg;
    cfg.steps = 1500;
    EnsembleDetector det = train_ensemble(data, cfg, 31);
    CHECK(det.members.size() == 5);
    CHECK_FALSE(det.calibrated());
    const double s = 0.1, a = 0.0;
    CHECK_THROWS_AS(ensemble_gate(det, {&s, 1}, {&a, 1}), StateError);

    calibrate_gate(det, data, 99.0);
    CHECK(det.calibrated());
    size_t uncertain = 0;
    std::vector<double> sv(1), av(1);
    for (size_t i = 0; i < data.rows(); ++i) {
        sv[0] = data.s[i];
        av[0] = data.a[i];
        uncertain += ensemble_gate(det, sv, av) == GateDecision::kUncertain;
    }
    const double frac = static_cast<double>(uncertain) / static_cast<double>(data.rows());
    CHECK(frac <= 0.011);
    CHECK(frac >= 0.0);
}

TEST_CASE("mc dropout variance: reproducible, positive, rejects bad config") {
    Rng rng(11);
    Mlp q = Mlp::make({2, 32, 1}, Activation::kRelu, Activation::kIdentity, 0.1);
    q.init_glorot(rng);
    for (auto& w : q.weights) w *= 3.0;  // make outputs clearly nonzero
    const double s = 0.5, a = -0.5;

    Rng r1(3), r2(3);
    const double v1 = mc_dropout_score(q, {&s, 1}, {&a, 1}, 20, r1);
    const double v2 = mc_dropout_score(q, {&s, 1}, {&a, 1}, 20, r2);
    CHECK(v1 == v2);
    CHECK(v1 > 0.0);

    Mlp no_dropout = Mlp::make({2, 8, 1}, Activation::kRelu, Activation::kIdentity);
    Rng r3(4);
    CHECK_THROWS_AS(mc_dropout_score(no_dropout, {&s, 1}, {&a, 1}, 20, r3), InputError);
    CHECK_THROWS_AS(mc_dropout_score(q, {&s, 1}, {&a, 1}, 1, r3), InputError);
}

TEST_CASE("identical dropout masks give zero variance") {
    // With dropout active but masks forced equal (same rng seed per pass),
    // the passes coincide. Emulate by computing each pass with a fresh rng
    // seeded identically and taking the variance by hand.
    Rng rng(13);
    Mlp q = Mlp::make({2, 16, 1}, Activation::kRelu, Activation::kIdentity, 0.3);
    q.init_glorot(rng);
    Mat x(1, 2);
    x.at(0, 0) = 0.2;
    x.at(0, 1) = -0.7;
    MlpWorkspace ws;
    std::vector<double> outs;
    for (int p = 0; p < 5; ++p) {
        Rng mask_rng(77);  // same masks every pass
        outs.push_back(mlp_forward(q, x, true, &mask_rng, ws).at(0, 0));
    }
    for (double o : outs) CHECK(o == outs[0]);
}

TEST_CASE("cvae overfits a memorized pair and scores it near zero") {
    // Single repeated (s, a): reconstruction from the posterior mean should
    // be nearly exact after training.
    Dataset d;
    d.state_dim = 1;
    d.action_dim = 1;
    for (int i = 0; i < 256; ++i) {
        d.s.push_back(0.5f);
        d.a.push_back(-0.3f);
        d.r.push_back(0.0f);
        d.s_next.push_back(0.2f);
        d.done.push_back(0.0f);
    }
    Rng rng(15);
    CvaeModel m = CvaeModel::make(1, 1, 4, {32, 32}, rng);
    CvaeTrainConfig cfg;
    cfg.steps = 3000;
    cfg.lr = 1e-3;
    const std::vector<double> trace = train_cvae(m, d, cfg, rng);
    CHECK(trace.back() < trace.front());

    const double s = 0.5, a = -0.3;
    const double err = cvae_score(m, {&s, 1}, {&a, 1});
    CHECK(err >= 0.0);
    CHECK(err < 0.05);

    // Deterministic by default; stochastic with an rng.
    CHECK(cvae_score(m, {&s, 1}, {&a, 1}) == err);
}

TEST_CASE("dropout-q trainer fits the oracle Q on the data support") {
    NavEnv env;
    const Dataset data = medium_data(4000, 21);
    const Mat q_table = ground_truth_q(env, 201, 41, 0.99);
    DropoutQConfig cfg;
    cfg.steps = 3000;
    const Mlp q = train_dropout_q(data, env, q_table, cfg, 33);
    CHECK(q.dropout_prob == 0.1);

    // Eval-mode predictions should track the oracle on ID pairs.
    double err = 0.0;
    Mat x(1, 2);
    MlpWorkspace ws;
    for (size_t i = 0; i < 500; ++i) {
        x.at(0, 0) = data.s[i];
        x.at(0, 1) = data.a[i];
        const double pred = mlp_forward(q, x, false, nullptr, ws).at(0, 0);
        err += std::abs(pred - q_lookup(env, q_table, data.s[i], data.a[i]));
    }
    CHECK(err / 500.0 < 2.0);  // oracle values span roughly [-100, 0]
}
