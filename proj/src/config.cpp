#include "doser/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "doser/errors.hpp"

namespace doser {

namespace {

std::string trim(const std::string& s) {
    const size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config: bad integer value for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw UsageError("config: bad boolean value for " + key + ": '" + v + "'");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    bool q_min_given = false;

    std::map<std::string, std::function<void(const std::string&, const std::string&)>> keys;
    const auto add = [&](const std::string& full,
                         std::function<void(const std::string&, const std::string&)> fn) {
        keys[full] = std::move(fn);
    };

    add("run.seed", [&](const std::string& k, const std::string& v) { c.seed = to_u64(k, v); });
    add("run.artifact_dir", [&](const std::string&, const std::string& v) { c.artifact_dir = v; });

    add("env.horizon", [&](const std::string& k, const std::string& v) {
        c.horizon = static_cast<int>(to_u64(k, v));
        if (c.horizon < 1) throw UsageError("config: env.horizon must be >= 1");
    });
    add("env.kind", [&](const std::string& k, const std::string& v) {
        if (v == "expert")
            c.kind = DatasetKind::kExpert;
        else if (v == "medium")
            c.kind = DatasetKind::kMedium;
        else
            throw UsageError("config: " + k + " must be expert|medium");
    });
    add("env.size", [&](const std::string& k, const std::string& v) { c.size = to_u64(k, v); });
    add("env.dataset", [&](const std::string&, const std::string& v) { c.dataset_path = v; });

    add("diffusion.sigma_data",
        [&](const std::string& k, const std::string& v) { c.schedule.sigma_data = to_double(k, v); });
    add("diffusion.sigma_min",
        [&](const std::string& k, const std::string& v) { c.schedule.sigma_min = to_double(k, v); });
    add("diffusion.sigma_max",
        [&](const std::string& k, const std::string& v) { c.schedule.sigma_max = to_double(k, v); });
    add("diffusion.scale",
        [&](const std::string& k, const std::string& v) { c.schedule.scale = to_double(k, v); });
    add("diffusion.sqrt_cin",
        [&](const std::string& k, const std::string& v) { c.schedule.sqrt_cin = to_bool(k, v); });
    add("diffusion.steps",
        [&](const std::string& k, const std::string& v) { c.diffusion_steps = to_u64(k, v); });
    add("diffusion.batch",
        [&](const std::string& k, const std::string& v) { c.diffusion_batch = to_u64(k, v); });
    add("diffusion.lr",
        [&](const std::string& k, const std::string& v) { c.diffusion_lr = to_double(k, v); });
    add("diffusion.m_draws",
        [&](const std::string& k, const std::string& v) { c.m_draws = to_u64(k, v); });
    add("diffusion.sampler_steps",
        [&](const std::string& k, const std::string& v) { c.sampler_steps = to_u64(k, v); });
    add("diffusion.hidden",
        [&](const std::string& k, const std::string& v) { c.diffusion_hidden = to_u64(k, v); });
    add("diffusion.hidden_layers", [&](const std::string& k, const std::string& v) {
        c.diffusion_hidden_layers = to_u64(k, v);
    });
    add("diffusion.embedding", [&](const std::string& k, const std::string& v) {
        if (v == "scalar")
            c.embedding = NoiseEmbedding::kScalar;
        else if (v == "sinusoidal")
            c.embedding = NoiseEmbedding::kSinusoidal;
        else
            throw UsageError("config: " + k + " must be scalar|sinusoidal");
    });

    add("dynamics.steps",
        [&](const std::string& k, const std::string& v) { c.dynamics_steps = to_u64(k, v); });
    add("dynamics.batch",
        [&](const std::string& k, const std::string& v) { c.dynamics_batch = to_u64(k, v); });
    add("dynamics.lr",
        [&](const std::string& k, const std::string& v) { c.dynamics_lr = to_double(k, v); });

    add("ood.percentile_a", [&](const std::string& k, const std::string& v) {
        c.percentile_a = to_double(k, v);
        if (c.percentile_a <= 0.0 || c.percentile_a > 100.0)
            throw UsageError("config: ood.percentile_a must be in (0,100]");
    });
    add("ood.percentile_s", [&](const std::string& k, const std::string& v) {
        c.percentile_s = to_double(k, v);
        if (c.percentile_s <= 0.0 || c.percentile_s > 100.0)
            throw UsageError("config: ood.percentile_s must be in (0,100]");
    });
    add("ood.gating",
        [&](const std::string& k, const std::string& v) { c.gating = to_bool(k, v); });
    add("ood.calib_subsample",
        [&](const std::string& k, const std::string& v) { c.calib_subsample = to_u64(k, v); });

    add("agent.gamma", [&](const std::string& k, const std::string& v) {
        c.agent.gamma = to_double(k, v);
        if (c.agent.gamma < 0.0 || c.agent.gamma >= 1.0)
            throw UsageError("config: agent.gamma must be in [0,1)");
    });
    add("agent.rho", [&](const std::string& k, const std::string& v) {
        c.agent.rho = to_double(k, v);
        if (c.agent.rho <= 0.0 || c.agent.rho > 1.0)
            throw UsageError("config: agent.rho must be in (0,1]");
    });
    add("agent.beta",
        [&](const std::string& k, const std::string& v) { c.agent.beta = to_double(k, v); });
    add("agent.lambda",
        [&](const std::string& k, const std::string& v) { c.agent.lambda = to_double(k, v); });
    add("agent.eta", [&](const std::string& k, const std::string& v) {
        c.agent.eta = to_double(k, v);
        if (c.agent.eta < 0.0 || c.agent.eta > 1.0)
            throw UsageError("config: agent.eta must be in [0,1]");
    });
    add("agent.expectile", [&](const std::string& k, const std::string& v) {
        c.agent.expectile = to_double(k, v);
        if (c.agent.expectile <= 0.0 || c.agent.expectile >= 1.0)
            throw UsageError("config: agent.expectile must be in (0,1)");
    });
    add("agent.q_min", [&](const std::string& k, const std::string& v) {
        c.agent.q_min = to_double(k, v);
        q_min_given = true;
    });
    add("agent.n_candidates",
        [&](const std::string& k, const std::string& v) { c.agent.n_candidates = to_u64(k, v); });
    add("agent.policy_update_freq", [&](const std::string& k, const std::string& v) {
        c.agent.policy_update_freq = to_u64(k, v);
    });
    add("agent.target_update_freq", [&](const std::string& k, const std::string& v) {
        c.agent.target_update_freq = to_u64(k, v);
    });
    add("agent.lr",
        [&](const std::string& k, const std::string& v) { c.agent.lr = to_double(k, v); });
    add("agent.batch",
        [&](const std::string& k, const std::string& v) { c.agent.batch = to_u64(k, v); });
    add("agent.total_steps",
        [&](const std::string& k, const std::string& v) { c.agent.total_steps = to_u64(k, v); });
    add("agent.q_ensemble",
        [&](const std::string& k, const std::string& v) { c.agent.q_ensemble = to_u64(k, v); });
    add("agent.bellman_target", [&](const std::string& k, const std::string& v) {
        if (v == "behavior")
            c.agent.bellman_target = BellmanTarget::kBehaviorSample;
        else if (v == "v_net")
            c.agent.bellman_target = BellmanTarget::kVNet;
        else
            throw UsageError("config: " + k + " must be behavior|v_net");
    });
    add("agent.ablation", [&](const std::string& k, const std::string& v) {
        if (v == "full")
            c.agent.ablation = AblationMode::kFull;
        else if (v == "no_vc")
            c.agent.ablation = AblationMode::kNoVc;
        else if (v == "no_ac_vc")
            c.agent.ablation = AblationMode::kNoAcVc;
        else
            throw UsageError("config: " + k + " must be full|no_vc|no_ac_vc");
    });
    add("agent.hidden",
        [&](const std::string& k, const std::string& v) { c.agent.hidden = to_u64(k, v); });
    add("agent.hidden_layers",
        [&](const std::string& k, const std::string& v) { c.agent.hidden_layers = to_u64(k, v); });
    add("agent.target_entropy", [&](const std::string& k, const std::string& v) {
        c.agent.target_entropy = to_double(k, v);
    });
    add("agent.log_interval",
        [&](const std::string& k, const std::string& v) { c.agent.log_interval = to_u64(k, v); });
    add("agent.bootstrap_through_done", [&](const std::string& k, const std::string& v) {
        c.agent.bootstrap_through_done = to_bool(k, v);
    });
    add("agent.eval_interval",
        [&](const std::string& k, const std::string& v) { c.eval_interval = to_u64(k, v); });
    add("agent.eval_episodes",
        [&](const std::string& k, const std::string& v) { c.eval_episodes = to_u64(k, v); });

    std::istringstream in(text);
    std::string line, section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw UsageError("config: malformed section at line " + std::to_string(line_no));
            section = t.substr(1, t.size() - 2);
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError("config: expected key = value at line " + std::to_string(line_no));
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        const auto it = keys.find(full);
        if (it == keys.end()) throw UsageError("config: unknown key '" + full + "'");
        it->second(full, value);
    }

    // Q_min defaults to R_min/(1-gamma) for the navigation reward, whose
    // most negative value is -max|s|.
    if (!q_min_given) {
        const double r_min = -10.0;
        c.agent.q_min = r_min / (1.0 - c.agent.gamma);
    }
    c.agent.sampler_steps = c.sampler_steps;
    c.agent.m_draws = c.m_draws;
    c.agent.gating = c.gating;
    if (c.agent.target_entropy == 0.0) c.agent.target_entropy = -1.0;
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string RunConfig::canonical_text() const {
    // artifact_dir is deliberately excluded: it moves outputs around without
    // affecting any computed value, and DOSER_ARTIFACTS may override it.
    std::ostringstream o;
    o << "run.seed=" << seed << "\n";
    o << "env.horizon=" << horizon << "\n";
    o << "env.kind=" << (kind == DatasetKind::kExpert ? "expert" : "medium") << "\n";
    o << "env.size=" << size << "\n";
    o << "env.dataset=" << dataset_path << "\n";
    o << "diffusion.sigma_data=" << fmt(schedule.sigma_data) << "\n";
    o << "diffusion.sigma_min=" << fmt(schedule.sigma_min) << "\n";
    o << "diffusion.sigma_max=" << fmt(schedule.sigma_max) << "\n";
    o << "diffusion.scale=" << fmt(schedule.scale) << "\n";
    o << "diffusion.sqrt_cin=" << (schedule.sqrt_cin ? 1 : 0) << "\n";
    o << "diffusion.steps=" << diffusion_steps << "\n";
    o << "diffusion.batch=" << diffusion_batch << "\n";
    o << "diffusion.lr=" << fmt(diffusion_lr) << "\n";
    o << "diffusion.m_draws=" << m_draws << "\n";
    o << "diffusion.sampler_steps=" << sampler_steps << "\n";
    o << "diffusion.hidden=" << diffusion_hidden << "\n";
    o << "diffusion.hidden_layers=" << diffusion_hidden_layers << "\n";
    o << "diffusion.embedding=" << (embedding == NoiseEmbedding::kScalar ? "scalar" : "sinusoidal")
      << "\n";
    o << "dynamics.steps=" << dynamics_steps << "\n";
    o << "dynamics.batch=" << dynamics_batch << "\n";
    o << "dynamics.lr=" << fmt(dynamics_lr) << "\n";
    o << "ood.percentile_a=" << fmt(percentile_a) << "\n";
    o << "ood.percentile_s=" << fmt(percentile_s) << "\n";
    o << "ood.gating=" << (gating ? 1 : 0) << "\n";
    o << "ood.calib_subsample=" << calib_subsample << "\n";
    o << "agent.gamma=" << fmt(agent.gamma) << "\n";
    o << "agent.rho=" << fmt(agent.rho) << "\n";
    o << "agent.beta=" << fmt(agent.beta) << "\n";
    o << "agent.lambda=" << fmt(agent.lambda) << "\n";
    o << "agent.eta=" << fmt(agent.eta) << "\n";
    o << "agent.expectile=" << fmt(agent.expectile) << "\n";
    o << "agent.q_min=" << fmt(agent.q_min) << "\n";
    o << "agent.n_candidates=" << agent.n_candidates << "\n";
    o << "agent.policy_update_freq=" << agent.policy_update_freq << "\n";
    o << "agent.target_update_freq=" << agent.target_update_freq << "\n";
    o << "agent.lr=" << fmt(agent.lr) << "\n";
    o << "agent.batch=" << agent.batch << "\n";
    o << "agent.total_steps=" << agent.total_steps << "\n";
    o << "agent.q_ensemble=" << agent.q_ensemble << "\n";
    o << "agent.bellman_target="
      << (agent.bellman_target == BellmanTarget::kBehaviorSample ? "behavior" : "v_net") << "\n";
    o << "agent.ablation="
      << (agent.ablation == AblationMode::kFull     ? "full"
          : agent.ablation == AblationMode::kNoVc   ? "no_vc"
                                                    : "no_ac_vc")
      << "\n";
    o << "agent.hidden=" << agent.hidden << "\n";
    o << "agent.hidden_layers=" << agent.hidden_layers << "\n";
    o << "agent.target_entropy=" << fmt(agent.target_entropy) << "\n";
    o << "agent.log_interval=" << agent.log_interval << "\n";
    o << "agent.bootstrap_through_done=" << (agent.bootstrap_through_done ? 1 : 0) << "\n";
    o << "agent.eval_interval=" << eval_interval << "\n";
    o << "agent.eval_episodes=" << eval_episodes << "\n";
    return o.str();
}

uint64_t RunConfig::hash() const {
    // FNV-1a over the canonical text.
    const std::string text = canonical_text();
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace doser
