// Command-line front end: dataset generation, model pretraining, threshold
// calibration, agent training/evaluation, detection benchmarks, operator
// certification, and the GMM correlation study.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "doser/agent.hpp"
#include "doser/config.hpp"
#include "doser/diffusion.hpp"
#include "doser/dynamics.hpp"
#include "doser/errors.hpp"
#include "doser/io.hpp"
#include "doser/metrics.hpp"
#include "doser/ood_detect.hpp"
#include "doser/tabular.hpp"
#include "doser/toyworld.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace doser;

namespace {

constexpr uint64_t kAnchorSeed = 0xA9C0FFEE;
constexpr size_t kAnchorEpisodes = 4000;

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_json(const json& j, const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

std::string artifact_dir_override(std::string configured) {
    if (const char* env = std::getenv("DOSER_ARTIFACTS")) return env;
    return configured;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw UsageError("empty list: " + s);
    return out;
}

Dataset dataset_from_config(const RunConfig& cfg) {
    if (!cfg.dataset_path.empty()) return load_dataset(cfg.dataset_path);
    NavEnv env;
    env.horizon = cfg.horizon;
    return gen_dataset(env, cfg.kind, cfg.size, cfg.seed);
}

struct PretrainedStack {
    DenoiserModel behavior;
    DenoiserModel state_model;
    DynamicsModel dynamics;
    OodThresholds thresholds;
    EnsembleDetector gate;  // trained only when gating is on
};

/// The pretraining phase: diffusion models, dynamics model, thresholds, and
/// (optionally) the ensemble gate, all from one run configuration.
PretrainedStack pretrain_stack(const RunConfig& cfg, const Dataset& data, const NavEnv& env,
                               std::vector<double>* behavior_trace = nullptr) {
    PretrainedStack stack;
    const Rng base(cfg.seed);
    const std::vector<size_t> hidden(cfg.diffusion_hidden_layers, cfg.diffusion_hidden);

    Rng brng = base.split(1);
    stack.behavior = DenoiserModel::make(data.action_dim, data.state_dim, hidden, cfg.schedule,
                                         brng, cfg.embedding);
    DenoiserTrainConfig dtc{cfg.diffusion_steps, cfg.diffusion_batch, cfg.diffusion_lr};
    const TrainTraceResult btrace =
        train_denoiser(stack.behavior, dataset_actions(data), dataset_states(data), dtc, brng);
    if (behavior_trace) *behavior_trace = btrace.loss_trace;

    Rng srng = base.split(2);
    stack.state_model =
        DenoiserModel::make(data.state_dim, 0, hidden, cfg.schedule, srng, cfg.embedding);
    train_denoiser(stack.state_model, dataset_states(data), Mat(), dtc, srng);

    Rng dyn_rng = base.split(3);
    stack.dynamics = DynamicsModel::make(data.state_dim, data.action_dim,
                                         {cfg.agent.hidden, cfg.agent.hidden}, env.state_lo,
                                         env.state_hi, dyn_rng);
    DynamicsTrainConfig dc{cfg.dynamics_steps, cfg.dynamics_batch, cfg.dynamics_lr};
    train_dynamics(stack.dynamics, data, dc, dyn_rng);

    stack.thresholds = fit_thresholds(stack.behavior, stack.state_model, data, cfg.percentile_a,
                                      cfg.percentile_s, cfg.m_draws, splitmix64(cfg.seed + 4),
                                      cfg.calib_subsample);

    if (cfg.gating) {
        EnsembleTrainConfig etc;
        stack.gate = train_ensemble(data, etc, splitmix64(cfg.seed + 5));
        calibrate_gate(stack.gate, data, 99.0);
    }
    return stack;
}

int cmd_gen_data(const std::string& kind, size_t n, uint64_t seed, const std::string& out,
                 int horizon) {
    NavEnv env;
    env.horizon = horizon;
    DatasetKind k;
    if (kind == "expert")
        k = DatasetKind::kExpert;
    else if (kind == "medium")
        k = DatasetKind::kMedium;
    else
        throw UsageError("gen-data: --kind must be expert|medium");
    const Dataset d = gen_dataset(env, k, n, seed);
    save_dataset(d, out);

    double r_min = 1e300, r_max = -1e300, r_mean = 0.0;
    for (float r : d.r) {
        r_min = std::min(r_min, static_cast<double>(r));
        r_max = std::max(r_max, static_cast<double>(r));
        r_mean += r;
    }
    r_mean /= static_cast<double>(d.rows());
    std::cout << "wrote " << d.rows() << " rows to " << out << "\n";
    std::cout << "reward mean " << r_mean << " min " << r_min << " max " << r_max << "\n";
    return 0;
}

int cmd_pretrain(const std::string& what, const std::string& data_path, size_t steps,
                 const std::string& out, uint64_t seed, size_t batch, double lr) {
    const Dataset data = load_dataset(data_path);
    NavEnv env;
    Rng rng(seed);

    std::vector<double> trace;
    if (what == "behavior" || what == "state") {
        NoiseSchedule sched;
        const size_t cond = what == "behavior" ? data.state_dim : 0;
        const size_t target = what == "behavior" ? data.action_dim : data.state_dim;
        DenoiserModel m = DenoiserModel::make(target, cond, {64, 64}, sched, rng);
        DenoiserTrainConfig cfg{steps, batch, lr};
        const Mat targets = what == "behavior" ? dataset_actions(data) : dataset_states(data);
        const Mat conds = what == "behavior" ? dataset_states(data) : Mat();
        trace = train_denoiser(m, targets, conds, cfg, rng).loss_trace;
        save_denoiser(m, out);
    } else if (what == "dynamics") {
        DynamicsModel m = DynamicsModel::make(data.state_dim, data.action_dim, {64, 64},
                                              env.state_lo, env.state_hi, rng);
        DynamicsTrainConfig cfg{steps, batch, lr};
        trace = train_dynamics(m, data, cfg, rng);
        save_dynamics(m, out);
    } else if (what == "cvae") {
        CvaeModel m = CvaeModel::make(data.state_dim, data.action_dim, 4, {64, 64}, rng);
        CvaeTrainConfig cfg;
        cfg.steps = steps;
        cfg.batch = batch;
        cfg.lr = lr;
        trace = train_cvae(m, data, cfg, rng);
        save_cvae(m, out);
    } else if (what == "ensemble") {
        EnsembleTrainConfig cfg;
        cfg.steps = steps;
        cfg.batch = batch;
        cfg.lr = lr;
        EnsembleDetector det = train_ensemble(data, cfg, seed);
        calibrate_gate(det, data, 99.0);
        save_ensemble(det, out);
    } else {
        throw UsageError("pretrain: --what must be behavior|state|dynamics|cvae|ensemble");
    }

    if (!trace.empty()) {
        const std::string trace_path = out + ".loss.csv";
        CsvWriter w(trace_path, {"step", "loss"});
        for (size_t i = 0; i < trace.size(); ++i) w.row({static_cast<double>(i), trace[i]});
        svg_line_chart(out + ".loss.svg", trace, what + " training loss");
        std::cout << "final loss " << trace.back() << " (initial " << trace.front() << ")\n";
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_calibrate(const std::string& behavior_path, const std::string& state_path,
                  const std::string& data_path, double pa, double ps, size_t m_draws,
                  uint64_t seed, const std::string& out) {
    const DenoiserModel behavior = load_denoiser(behavior_path);
    const DenoiserModel state_model = load_denoiser(state_path);
    const Dataset data = load_dataset(data_path);
    const OodThresholds t = fit_thresholds(behavior, state_model, data, pa, ps, m_draws, seed);
    save_thresholds(t, out);

    // Calibration histograms, 64 bins per error kind.
    const auto histogram = [](const std::vector<double>& sorted, const std::string& path) {
        const double lo = sorted.front(), hi = sorted.back();
        const size_t bins = 64;
        std::vector<size_t> count(bins, 0);
        for (double e : sorted) {
            size_t b = hi > lo ? static_cast<size_t>((e - lo) / (hi - lo) * bins) : 0;
            count[std::min(b, bins - 1)]++;
        }
        CsvWriter w(path, {"bin_low", "bin_high", "count"});
        for (size_t b = 0; b < bins; ++b)
            w.row({lo + (hi - lo) * static_cast<double>(b) / bins,
                   lo + (hi - lo) * static_cast<double>(b + 1) / bins,
                   static_cast<double>(count[b])});
    };
    histogram(t.calibration_errors_a, out + ".hist_a.csv");
    histogram(t.calibration_errors_s, out + ".hist_s.csv");
    std::cout << "tau_a " << t.tau_a << " (p" << pa << "), tau_s " << t.tau_s << " (p" << ps
              << ")\n";
    return 0;
}

int cmd_train(const std::string& config_path) {
    RunConfig cfg = load_config(config_path);
    cfg.artifact_dir = artifact_dir_override(cfg.artifact_dir);
    fs::create_directories(cfg.artifact_dir);
    const std::string dir = cfg.artifact_dir;

    NavEnv env;
    env.horizon = cfg.horizon;
    const Dataset data = dataset_from_config(cfg);

    std::vector<double> behavior_trace;
    const PretrainedStack stack = pretrain_stack(cfg, data, env, &behavior_trace);
    save_denoiser(stack.behavior, dir + "/behavior.ckpt");
    save_denoiser(stack.state_model, dir + "/state.ckpt");
    save_dynamics(stack.dynamics, dir + "/dynamics.ckpt");
    save_thresholds(stack.thresholds, dir + "/thresholds.json");
    if (!behavior_trace.empty())
        svg_line_chart(dir + "/behavior_loss.svg", behavior_trace, "behavior diffusion loss");

    AgentState agent =
        make_agent(data.state_dim, data.action_dim, cfg.agent, splitmix64(cfg.seed + 10));
    ClassifyContext ctx{&stack.behavior, &stack.state_model, &stack.dynamics, &stack.thresholds,
                        cfg.gating ? &stack.gate : nullptr};

    const EvalAnchors anchors = normalization_anchors(env, kAnchorEpisodes, kAnchorSeed);
    EvalSetup eval{env, anchors, cfg.eval_episodes, cfg.eval_interval, splitmix64(cfg.seed + 11)};

    Rng rng(splitmix64(cfg.seed + 12));
    const TrainLog log = train(agent, data, ctx, rng, eval);

    {
        CsvWriter w(dir + "/metrics.csv",
                    {"step", "v_loss", "bellman", "penalty", "bonus", "actor_loss", "alpha",
                     "frac_id", "frac_beneficial", "frac_detrimental", "eval_score"});
        for (const auto& r : log.rows)
            w.row({static_cast<double>(r.step), r.v_loss, r.bellman, r.penalty, r.bonus,
                   r.actor_loss, r.alpha, r.frac_id, r.frac_beneficial, r.frac_detrimental,
                   r.eval_score});
    }
    {
        CsvWriter w(dir + "/class_proportions.csv",
                    {"step", "frac_id", "frac_beneficial", "frac_detrimental"});
        for (const auto& r : log.rows)
            w.row({static_cast<double>(r.step), r.frac_id, r.frac_beneficial,
                   r.frac_detrimental});
    }
    save_agent(agent, dir + "/agent");

    const EvalResult final_eval =
        evaluate(agent, env, cfg.eval_episodes, splitmix64(cfg.seed + 13), anchors);
    json summary;
    summary["seed"] = cfg.seed;
    summary["config_hash"] = hex64(cfg.hash());
    summary["steps"] = agent.step;
    summary["mean_return"] = final_eval.mean_return;
    summary["normalized_score"] = final_eval.normalized;
    summary["rows"] = data.rows();
    write_json(summary, dir + "/summary.json");

    std::cout << "normalized score " << final_eval.normalized << " (return "
              << final_eval.mean_return << ") after " << agent.step << " steps\n";
    return 0;
}

int cmd_eval(const std::string& agent_dir, size_t episodes, uint64_t seed,
             const std::string& out) {
    const AgentState agent = load_agent(agent_dir);
    NavEnv env;
    const EvalAnchors anchors = normalization_anchors(env, kAnchorEpisodes, kAnchorSeed);
    const EvalResult res = evaluate(agent, env, episodes, seed, anchors);
    json summary;
    summary["episodes"] = episodes;
    summary["seed"] = seed;
    summary["mean_return"] = res.mean_return;
    summary["normalized_score"] = res.normalized;
    if (!out.empty()) write_json(summary, out);
    std::cout << "normalized score " << res.normalized << " (return " << res.mean_return
              << ")\n";
    return 0;
}

struct DetectorScores {
    std::vector<double> id, ood;
};

DetectorScores score_split(const std::string& detector, const OodSplit& split,
                           const DenoiserModel* behavior, const EnsembleDetector* ensemble,
                           const Mlp* dropout_q, const CvaeModel* cvae, size_t m_draws,
                           uint64_t seed) {
    DetectorScores scores;
    const size_t n = split.id.rows();
    if (detector == "diffusion") {
        scores.id = recon_errors(*behavior, dataset_actions(split.id), dataset_states(split.id),
                                 m_draws, splitmix64(seed));
        scores.ood = recon_errors(*behavior, dataset_actions(split.ood),
                                  dataset_states(split.ood), m_draws, splitmix64(seed + 1));
        return scores;
    }
    scores.id.resize(n);
    scores.ood.resize(n);
    std::vector<double> s(split.id.state_dim), a(split.id.action_dim);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < s.size(); ++j) s[j] = split.id.s[i * s.size() + j];
        for (const bool ood : {false, true}) {
            const Dataset& part = ood ? split.ood : split.id;
            for (size_t j = 0; j < a.size(); ++j) a[j] = part.a[i * a.size() + j];
            double v = 0.0;
            if (detector == "ensemble") {
                v = ensemble_score(*ensemble, s, a);
            } else if (detector == "dropout") {
                Rng rng = Rng(seed).split(i * 2 + (ood ? 1 : 0));
                v = mc_dropout_score(*dropout_q, s, a, 20, rng);
            } else if (detector == "cvae") {
                v = cvae_score(*cvae, s, a);
            } else {
                throw UsageError("ood-bench: unknown detector " + detector);
            }
            (ood ? scores.ood : scores.id)[i] = v;
        }
    }
    return scores;
}

int cmd_ood_bench(const std::string& detector, const std::string& data_path,
                  const std::string& scales_text, size_t n_pairs, uint64_t seed, size_t steps,
                  const std::string& out_dir) {
    const Dataset data = load_dataset(data_path);
    const std::vector<double> scales = parse_double_list(scales_text);
    fs::create_directories(out_dir);
    NavEnv env;

    // Train the requested detector on the full dataset.
    DenoiserModel behavior;
    EnsembleDetector ensemble;
    Mlp dropout_q;
    CvaeModel cvae;
    Rng rng(seed);
    if (detector == "diffusion") {
        NoiseSchedule sched;
        behavior = DenoiserModel::make(data.action_dim, data.state_dim, {64, 64}, sched, rng);
        DenoiserTrainConfig cfg{steps, 256, 3e-4};
        train_denoiser(behavior, dataset_actions(data), dataset_states(data), cfg, rng);
    } else if (detector == "ensemble") {
        EnsembleTrainConfig cfg;
        ensemble = train_ensemble(data, cfg, seed);
    } else if (detector == "dropout") {
        const Mat q_table = ground_truth_q(env, 201, 41, 0.99);
        DropoutQConfig cfg;
        dropout_q = train_dropout_q(data, env, q_table, cfg, seed);
    } else if (detector == "cvae") {
        cvae = CvaeModel::make(data.state_dim, data.action_dim, 4, {64, 64}, rng);
        CvaeTrainConfig cfg;
        train_cvae(cvae, data, cfg, rng);
    } else {
        throw UsageError("ood-bench: --detector must be diffusion|ensemble|dropout|cvae");
    }

    CsvWriter reports(out_dir + "/reports.csv",
                      {"noise_scale", "tp", "tn", "fp", "fn", "accuracy", "precision", "recall",
                       "f1", "auroc", "threshold"});
    json summary;
    summary["detector"] = detector;
    summary["pairs"] = n_pairs;
    summary["seed"] = seed;
    std::vector<double> aurocs;
    for (size_t si = 0; si < scales.size(); ++si) {
        const double scale = scales[si];
        const OodSplit split = perturb_ood(data, n_pairs, scale, splitmix64(seed + 100 + si));
        const DetectorScores sc = score_split(detector, split, &behavior, &ensemble, &dropout_q,
                                              &cvae, 10, splitmix64(seed + 200 + si));

        std::vector<double> id_sorted = sc.id;
        std::sort(id_sorted.begin(), id_sorted.end());
        const double threshold = nearest_rank_percentile(id_sorted, 99.0);

        std::vector<double> all = sc.id;
        all.insert(all.end(), sc.ood.begin(), sc.ood.end());
        std::vector<uint8_t> labels(sc.id.size(), 0);
        labels.insert(labels.end(), sc.ood.size(), 1);
        const DetectionReport rep = confusion(all, labels, threshold);
        aurocs.push_back(rep.auroc);

        reports.row({scale, static_cast<double>(rep.tp), static_cast<double>(rep.tn),
                     static_cast<double>(rep.fp), static_cast<double>(rep.fn), rep.accuracy,
                     rep.precision, rep.recall, rep.f1, rep.auroc, threshold});

        // ROC point cloud: raw scores with labels.
        char name[64];
        std::snprintf(name, sizeof(name), "/roc_scale_%g.csv", scale);
        CsvWriter roc(out_dir + name, {"score", "is_ood"});
        for (size_t i = 0; i < all.size(); ++i)
            roc.row({all[i], static_cast<double>(labels[i])});
        std::cout << "scale " << scale << ": auroc " << rep.auroc << " recall " << rep.recall
                  << "\n";
    }
    summary["auroc"] = aurocs;
    write_json(summary, out_dir + "/summary.json");
    return 0;
}

int cmd_tabular_verify(const std::string& sizes_text, size_t trials, uint64_t seed,
                       const std::string& out_dir) {
    fs::create_directories(out_dir);
    Rng rng(seed);

    std::vector<std::pair<size_t, size_t>> sizes;
    {
        std::stringstream ss(sizes_text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const size_t x = item.find('x');
            if (x == std::string::npos) throw UsageError("tabular-verify: sizes look like 50x20");
            sizes.emplace_back(std::stoull(item.substr(0, x)), std::stoull(item.substr(x + 1)));
        }
    }
    if (sizes.empty()) throw UsageError("tabular-verify: no sizes given");

    double max_ratio = 0.0;
    CsvWriter cert(out_dir + "/contraction.csv", {"states", "actions", "gamma", "max_ratio"});
    for (const auto& [S, A] : sizes) {
        RandomMdpConfig mcfg;
        mcfg.reward_lo = -1.0;
        mcfg.reward_hi = 1.0;
        TabularMdp mdp = random_mdp(S, A, mcfg, rng);
        const double ratio = check_contraction(mdp, trials, rng);
        max_ratio = std::max(max_ratio, ratio);
        cert.row({static_cast<double>(S), static_cast<double>(A), mdp.gamma, ratio});
    }

    // Value-bound margins on nonnegative-reward instances, where the upper
    // bound's premise (nonnegative in-sample optimum) holds.
    double worst_lower = 1e300, worst_upper = 1e300;
    for (int inst = 0; inst < 5; ++inst) {
        RandomMdpConfig mcfg;
        TabularMdp mdp = random_mdp(20, 8, mcfg, rng);
        const Mat q_doser = fixed_point(mdp, 1e-10);
        const Mat q_in = in_sample_fixed_point(mdp, 1e-10);
        for (size_t s = 0; s < mdp.n_states; ++s) {
            double best_id = -1e300;
            for (size_t a = 0; a < mdp.n_actions; ++a)
                if (mdp.support[s * mdp.n_actions + a]) best_id = std::max(best_id, q_in.at(s, a));
            for (size_t a = 0; a < mdp.n_actions; ++a) {
                worst_lower = std::min(worst_lower, q_doser.at(s, a) - mdp.q_min());
                worst_upper =
                    std::min(worst_upper, best_id + mdp.eta * mdp.delta_v - q_doser.at(s, a));
            }
        }
    }

    // Deviation trend under detector corruption.
    RandomMdpConfig mcfg;
    TabularMdp mdp = random_mdp(12, 5, mcfg, rng);
    const std::vector<double> eps_dyn = {0.0};
    const std::vector<double> eps_det = {0.0, 0.1, 0.2, 0.4};
    const DeviationTable table = deviation_experiment(mdp, eps_dyn, eps_det, 50, rng);
    CsvWriter dev(out_dir + "/deviation.csv", {"eps_dyn", "eps_det", "mean_deviation"});
    for (size_t i = 0; i < eps_dyn.size(); ++i)
        for (size_t j = 0; j < eps_det.size(); ++j)
            dev.row({eps_dyn[i], eps_det[j], table.mean_deviation.at(i, j)});
    const std::vector<double> devs(table.mean_deviation.row(0), table.mean_deviation.row(0) + 4);
    const double trend = spearman(eps_det, devs);

    json report;
    report["max_contraction_ratio"] = max_ratio;
    report["gamma"] = 0.99;
    report["bound_margin_lower"] = worst_lower;
    report["bound_margin_upper"] = worst_upper;
    report["deviation_spearman"] = trend;
    report["trials"] = trials;
    write_json(report, out_dir + "/report.json");
    std::cout << "max ratio " << max_ratio << " (gamma 0.99), deviation spearman " << trend
              << "\n";
    return 0;
}

int cmd_gmm_correlate(size_t n, size_t steps, size_t m_draws, uint64_t seed,
                      const std::string& out_dir) {
    fs::create_directories(out_dir);
    const GmmSpec spec = GmmSpec::symmetric_default();
    const Mat train_points = sample_gmm(spec, 20000, splitmix64(seed));

    Rng rng(seed);
    NoiseSchedule sched;
    // sigma_data follows the data: the mixture's scale is nothing like the
    // unit action box the default schedule assumes.
    {
        double mean = 0.0, var = 0.0;
        for (double v : train_points.v) mean += v;
        mean /= static_cast<double>(train_points.v.size());
        for (double v : train_points.v) var += (v - mean) * (v - mean);
        var /= static_cast<double>(train_points.v.size());
        sched.sigma_data = std::sqrt(var);
    }
    DenoiserModel model = DenoiserModel::make(spec.dim(), 0, {64, 64}, sched, rng);
    DenoiserTrainConfig cfg{steps, 256, 3e-4};
    train_denoiser(model, train_points, Mat(), cfg, rng);

    const GmmProbe probe = gen_gmm(spec, n, splitmix64(seed + 1));
    const std::vector<double> errors =
        recon_errors(model, probe.points, Mat(), m_draws, splitmix64(seed + 2));
    const double rho = pearson(errors, probe.nll);

    CsvWriter scatter(out_dir + "/scatter.csv", {"error", "nll"});
    for (size_t i = 0; i < n; ++i) scatter.row({errors[i], probe.nll[i]});
    svg_scatter(out_dir + "/scatter.svg", errors, probe.nll, "recon error vs NLL");

    json summary;
    summary["n"] = n;
    summary["pearson"] = rho;
    summary["seed"] = seed;
    write_json(summary, out_dir + "/summary.json");
    std::cout << "pearson " << rho << " over " << n << " probes\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline RL laboratory: diffusion-based OOD detection with selective "
                 "value regularization"};
    app.require_subcommand(1);

    std::string gd_kind = "medium", gd_out;
    size_t gd_n = 50000;
    uint64_t gd_seed = 1;
    int gd_horizon = 50;
    auto* gen = app.add_subcommand("gen-data", "generate an offline dataset");
    gen->add_option("--kind", gd_kind, "expert|medium");
    gen->add_option("--n", gd_n, "transition count");
    gen->add_option("--seed", gd_seed);
    gen->add_option("--horizon", gd_horizon);
    gen->add_option("--out", gd_out)->required();

    std::string pt_what, pt_data, pt_out;
    size_t pt_steps = 20000, pt_batch = 256;
    uint64_t pt_seed = 1;
    double pt_lr = 3e-4;
    auto* pre = app.add_subcommand("pretrain", "train one model on a dataset");
    pre->add_option("--what", pt_what, "behavior|state|dynamics|cvae|ensemble")->required();
    pre->add_option("--data", pt_data)->required();
    pre->add_option("--steps", pt_steps);
    pre->add_option("--batch", pt_batch);
    pre->add_option("--lr", pt_lr);
    pre->add_option("--seed", pt_seed);
    pre->add_option("--out", pt_out)->required();

    std::string cal_behavior, cal_state, cal_data, cal_out;
    double cal_pa = 99.0, cal_ps = 99.0;
    size_t cal_m = 10;
    uint64_t cal_seed = 1;
    auto* cal = app.add_subcommand("calibrate", "fit OOD thresholds from reconstruction errors");
    cal->add_option("--behavior", cal_behavior)->required();
    cal->add_option("--state", cal_state)->required();
    cal->add_option("--data", cal_data)->required();
    cal->add_option("--pa", cal_pa);
    cal->add_option("--ps", cal_ps);
    cal->add_option("--m-draws", cal_m);
    cal->add_option("--seed", cal_seed);
    cal->add_option("--out", cal_out)->required();

    std::string tr_config;
    auto* tr = app.add_subcommand("train", "run the full pipeline from a config file");
    tr->add_option("--config", tr_config)->required();

    std::string ev_agent, ev_out;
    size_t ev_episodes = 40;
    uint64_t ev_seed = 1;
    auto* ev = app.add_subcommand("eval", "evaluate a trained agent checkpoint");
    ev->add_option("--agent", ev_agent)->required();
    ev->add_option("--episodes", ev_episodes);
    ev->add_option("--seed", ev_seed);
    ev->add_option("--out", ev_out);

    std::string ob_detector, ob_data, ob_scales = "0.5,1.0,5.0", ob_out;
    size_t ob_n = 2000, ob_steps = 20000;
    uint64_t ob_seed = 1;
    auto* ob = app.add_subcommand("ood-bench", "synthetic-OOD detection benchmark");
    ob->add_option("--detector", ob_detector, "diffusion|ensemble|dropout|cvae")->required();
    ob->add_option("--data", ob_data)->required();
    ob->add_option("--noise-scales", ob_scales);
    ob->add_option("--n", ob_n, "ID/OOD pairs per scale");
    ob->add_option("--steps", ob_steps, "detector training steps");
    ob->add_option("--seed", ob_seed);
    ob->add_option("--out", ob_out)->required();

    std::string tv_sizes = "50x20,30x10,10x4", tv_out;
    size_t tv_trials = 200;
    uint64_t tv_seed = 1;
    auto* tv = app.add_subcommand("tabular-verify", "operator certificates on random MDPs");
    tv->add_option("--sizes", tv_sizes, "comma-separated SxA sizes");
    tv->add_option("--trials", tv_trials);
    tv->add_option("--seed", tv_seed);
    tv->add_option("--out", tv_out)->required();

    size_t gc_n = 10000, gc_steps = 30000, gc_m = 128;
    uint64_t gc_seed = 1;
    std::string gc_out;
    auto* gc = app.add_subcommand("gmm-correlate", "reconstruction error vs analytic NLL");
    gc->add_option("--n", gc_n);
    gc->add_option("--steps", gc_steps);
    gc->add_option("--m-draws", gc_m, "noise draws averaged per probe");
    gc->add_option("--seed", gc_seed);
    gc->add_option("--out", gc_out)->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(gd_kind, gd_n, gd_seed, gd_out, gd_horizon);
        if (pre->parsed())
            return cmd_pretrain(pt_what, pt_data, pt_steps, pt_out, pt_seed, pt_batch, pt_lr);
        if (cal->parsed())
            return cmd_calibrate(cal_behavior, cal_state, cal_data, cal_pa, cal_ps, cal_m,
                                 cal_seed, cal_out);
        if (tr->parsed()) return cmd_train(tr_config);
        if (ev->parsed()) return cmd_eval(ev_agent, ev_episodes, ev_seed, ev_out);
        if (ob->parsed())
            return cmd_ood_bench(ob_detector, ob_data, ob_scales, ob_n, ob_seed, ob_steps,
                                 ob_out);
        if (tv->parsed()) return cmd_tabular_verify(tv_sizes, tv_trials, tv_seed, tv_out);
        if (gc->parsed()) return cmd_gmm_correlate(gc_n, gc_steps, gc_m, gc_seed, gc_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const InputError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 5;
    } catch (const StateError& e) {
        std::cerr << "state error: " << e.what() << "\n";
        return 4;
    }
}
