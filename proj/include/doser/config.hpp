#pragma once

#include <cstdint>
#include <string>

#include "doser/agent.hpp"
#include "doser/diffusion.hpp"
#include "doser/toyworld.hpp"

namespace doser {

/// Full experiment configuration, parsed from sectioned key = value text.
/// Unknown sections or keys are a hard usage error.
struct RunConfig {
    // [run]
    uint64_t seed = 1;
    std::string artifact_dir = "runs/out";

    // [env]
    int horizon = 50;
    DatasetKind kind = DatasetKind::kMedium;
    size_t size = 50000;
    std::string dataset_path;  // when set, load instead of generating

    // [diffusion]
    NoiseSchedule schedule;
    size_t diffusion_steps = 20000;
    size_t diffusion_batch = 256;
    double diffusion_lr = 3e-4;
    size_t m_draws = 10;
    size_t sampler_steps = 8;
    size_t diffusion_hidden = 64;
    size_t diffusion_hidden_layers = 2;
    NoiseEmbedding embedding = NoiseEmbedding::kScalar;

    // [dynamics]
    size_t dynamics_steps = 6000;
    size_t dynamics_batch = 256;
    double dynamics_lr = 3e-4;

    // [ood]
    double percentile_a = 99.0;
    double percentile_s = 99.0;
    bool gating = false;
    size_t calib_subsample = 0;  // 0 = use every row

    // [agent]
    AgentConfig agent;
    size_t eval_interval = 1000;
    size_t eval_episodes = 40;

    std::string canonical_text() const;
    uint64_t hash() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace doser
