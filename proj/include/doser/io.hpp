#pragma once

#include <string>
#include <utility>
#include <vector>

#include "doser/agent.hpp"
#include "doser/diffusion.hpp"
#include "doser/dynamics.hpp"
#include "doser/mlp.hpp"
#include "doser/ood_detect.hpp"
#include "doser/toyworld.hpp"

namespace doser {

/// Dataset file: text manifest (magic "DOSR1", key: value lines, blank line)
/// followed by little-endian f32 rows in column order s | a | r | s' | done.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Checkpoint file: text manifest (magic "DOSRCKPT1", ordered key: value
/// lines, blank line) followed by the little-endian f32 weight blob in
/// manifest-declared order. load->save round-trips byte-identically.
struct Checkpoint {
    std::vector<std::pair<std::string, std::string>> manifest;
    std::vector<float> blob;

    const std::string* find(const std::string& key) const;
    const std::string& require(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint mlp_to_checkpoint(const Mlp& m, const std::string& kind);
Mlp mlp_from_checkpoint(const Checkpoint& c);

void save_denoiser(const DenoiserModel& m, const std::string& path);
DenoiserModel load_denoiser(const std::string& path);

void save_dynamics(const DynamicsModel& m, const std::string& path);
DynamicsModel load_dynamics(const std::string& path);

/// Agent checkpoints are directories: one checkpoint per network plus an
/// agent.txt manifest with scalar state.
void save_agent(const AgentState& a, const std::string& dir);
AgentState load_agent(const std::string& dir);

void save_thresholds(const OodThresholds& t, const std::string& path);
OodThresholds load_thresholds(const std::string& path);

void save_cvae(const CvaeModel& m, const std::string& dir);
CvaeModel load_cvae(const std::string& dir);

void save_ensemble(const EnsembleDetector& det, const std::string& dir);
EnsembleDetector load_ensemble(const std::string& dir);

/// CSV with a declared header; every value formatted with %.17g so repeated
/// runs are byte-identical.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();
    void row(const std::vector<double>& values);
    void row_strings(const std::vector<std::string>& values);
    static std::string format(double v);

private:
    struct Impl;
    Impl* impl_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);

/// Best-effort plot emission; CSV is the contract, these are for eyeballing.
void svg_line_chart(const std::string& path, const std::vector<double>& ys,
                    const std::string& caption);
void svg_scatter(const std::string& path, const std::vector<double>& xs,
                 const std::vector<double>& ys, const std::string& caption);

void ensure_parent_dir(const std::string& path);

}  // namespace doser
