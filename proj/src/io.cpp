#include "doser/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doser/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "persistence assumes a little-endian host");

namespace doser {

namespace fs = std::filesystem;

void ensure_parent_dir(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path() && !p.parent_path().empty()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
}

namespace {

constexpr const char* kDatasetMagic = "DOSR1";
constexpr const char* kCheckpointMagic = "DOSRCKPT1";

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    return f;
}

void write_blob(std::ofstream& f, const std::vector<float>& blob) {
    f.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
}

std::vector<float> read_blob(std::ifstream& f, size_t count, const std::string& path) {
    std::vector<float> blob(count);
    f.read(reinterpret_cast<char*>(blob.data()),
           static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<size_t>(f.gcount()) != count * sizeof(float))
        throw IoError("truncated blob in " + path);
    return blob;
}

/// Reads "key: value" lines until the blank separator line.
std::vector<std::pair<std::string, std::string>> read_manifest(std::ifstream& f,
                                                               const std::string& path) {
    std::vector<std::pair<std::string, std::string>> manifest;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) return manifest;
        const size_t colon = line.find(": ");
        if (colon == std::string::npos) throw IoError("malformed manifest line in " + path);
        manifest.emplace_back(line.substr(0, colon), line.substr(colon + 2));
    }
    throw IoError("manifest not terminated by blank line in " + path);
}

std::string manifest_get(const std::vector<std::pair<std::string, std::string>>& m,
                         const std::string& key, const std::string& path) {
    for (const auto& [k, v] : m)
        if (k == key) return v;
    throw IoError("missing manifest key '" + key + "' in " + path);
}

std::vector<size_t> parse_size_list(const std::string& s) {
    std::vector<size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
    return out;
}

std::string join_sizes(const std::vector<size_t>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::kIdentity: return "identity";
        case Activation::kRelu: return "relu";
        case Activation::kMish: return "mish";
        case Activation::kTanh: return "tanh";
    }
    return "identity";
}

Activation activation_from(const std::string& s) {
    if (s == "identity") return Activation::kIdentity;
    if (s == "relu") return Activation::kRelu;
    if (s == "mish") return Activation::kMish;
    if (s == "tanh") return Activation::kTanh;
    throw IoError("unknown activation: " + s);
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
    std::ofstream f = open_out(path);
    f << kDatasetMagic << "\n";
    f << "state_dim: " << d.state_dim << "\n";
    f << "action_dim: " << d.action_dim << "\n";
    f << "rows: " << d.rows() << "\n";
    f << "source: " << d.source_tag << "\n";
    f << "seed: " << d.seed << "\n";
    f << "\n";
    const size_t n = d.rows();
    std::vector<float> row(d.state_dim * 2 + d.action_dim + 2);
    for (size_t i = 0; i < n; ++i) {
        size_t c = 0;
        for (size_t j = 0; j < d.state_dim; ++j) row[c++] = d.s[i * d.state_dim + j];
        for (size_t j = 0; j < d.action_dim; ++j) row[c++] = d.a[i * d.action_dim + j];
        row[c++] = d.r[i];
        for (size_t j = 0; j < d.state_dim; ++j) row[c++] = d.s_next[i * d.state_dim + j];
        row[c++] = d.done[i];
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!f) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream f = open_in(path);
    std::string magic;
    if (!std::getline(f, magic) || magic != kDatasetMagic)
        throw IoError("not a dataset file: " + path);
    const auto manifest = read_manifest(f, path);

    Dataset d;
    d.state_dim = std::stoull(manifest_get(manifest, "state_dim", path));
    d.action_dim = std::stoull(manifest_get(manifest, "action_dim", path));
    const size_t rows = std::stoull(manifest_get(manifest, "rows", path));
    d.source_tag = manifest_get(manifest, "source", path);
    d.seed = std::stoull(manifest_get(manifest, "seed", path));

    const size_t row_len = d.state_dim * 2 + d.action_dim + 2;
    const std::vector<float> blob = read_blob(f, rows * row_len, path);
    d.s.resize(rows * d.state_dim);
    d.a.resize(rows * d.action_dim);
    d.r.resize(rows);
    d.s_next.resize(rows * d.state_dim);
    d.done.resize(rows);
    for (size_t i = 0; i < rows; ++i) {
        size_t c = i * row_len;
        for (size_t j = 0; j < d.state_dim; ++j) d.s[i * d.state_dim + j] = blob[c++];
        for (size_t j = 0; j < d.action_dim; ++j) d.a[i * d.action_dim + j] = blob[c++];
        d.r[i] = blob[c++];
        for (size_t j = 0; j < d.state_dim; ++j) d.s_next[i * d.state_dim + j] = blob[c++];
        d.done[i] = blob[c++];
    }
    return d;
}

const std::string* Checkpoint::find(const std::string& key) const {
    for (const auto& [k, v] : manifest)
        if (k == key) return &v;
    return nullptr;
}

const std::string& Checkpoint::require(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw IoError("checkpoint missing key: " + key);
    return *v;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::ofstream f = open_out(path);
    f << kCheckpointMagic << "\n";
    for (const auto& [k, v] : c.manifest) f << k << ": " << v << "\n";
    f << "\n";
    write_blob(f, c.blob);
    if (!f) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f = open_in(path);
    std::string magic;
    if (!std::getline(f, magic) || magic != kCheckpointMagic)
        throw IoError("not a checkpoint file: " + path);
    Checkpoint c;
    c.manifest = read_manifest(f, path);
    const size_t count = std::stoull(manifest_get(c.manifest, "weights", path));
    c.blob = read_blob(f, count, path);
    return c;
}

Checkpoint mlp_to_checkpoint(const Mlp& m, const std::string& kind) {
    Checkpoint c;
    c.manifest.emplace_back("format", "1");
    c.manifest.emplace_back("kind", kind);
    c.manifest.emplace_back("layer_dims", join_sizes(m.dims));
    std::string acts;
    for (size_t i = 0; i < m.acts.size(); ++i) {
        if (i) acts += ",";
        acts += activation_name(m.acts[i]);
    }
    c.manifest.emplace_back("activations", acts);
    c.manifest.emplace_back("dropout", fmt_double(m.dropout_prob));
    c.manifest.emplace_back("weights", std::to_string(m.weight_count()));
    c.blob.assign(m.weights.begin(), m.weights.end());
    return c;
}

Mlp mlp_from_checkpoint(const Checkpoint& c) {
    Mlp m;
    m.dims = parse_size_list(c.require("layer_dims"));
    std::stringstream ss(c.require("activations"));
    std::string item;
    while (std::getline(ss, item, ',')) m.acts.push_back(activation_from(item));
    if (m.acts.size() != m.dims.size() - 1) throw IoError("checkpoint activations mismatch");
    m.dropout_prob = std::stod(c.require("dropout"));
    if (c.blob.size() != m.weight_count()) throw IoError("checkpoint weight count mismatch");
    m.weights.assign(c.blob.begin(), c.blob.end());
    return m;
}

void save_denoiser(const DenoiserModel& m, const std::string& path) {
    Checkpoint c = mlp_to_checkpoint(m.net, "denoiser");
    c.manifest.emplace_back("target_dim", std::to_string(m.target_dim));
    c.manifest.emplace_back("condition_dim", std::to_string(m.condition_dim));
    c.manifest.emplace_back("embedding",
                            m.embedding == NoiseEmbedding::kScalar ? "scalar" : "sinusoidal");
    c.manifest.emplace_back("embed_width", std::to_string(m.embed_width));
    c.manifest.emplace_back("sigma_data", fmt_double(m.schedule.sigma_data));
    c.manifest.emplace_back("sigma_min", fmt_double(m.schedule.sigma_min));
    c.manifest.emplace_back("sigma_max", fmt_double(m.schedule.sigma_max));
    c.manifest.emplace_back("scale", fmt_double(m.schedule.scale));
    c.manifest.emplace_back("sqrt_cin", m.schedule.sqrt_cin ? "1" : "0");
    save_checkpoint(c, path);
}

DenoiserModel load_denoiser(const std::string& path) {
    const Checkpoint c = load_checkpoint(path);
    if (c.require("kind") != "denoiser") throw IoError("not a denoiser checkpoint: " + path);
    DenoiserModel m;
    m.net = mlp_from_checkpoint(c);
    m.target_dim = std::stoull(c.require("target_dim"));
    m.condition_dim = std::stoull(c.require("condition_dim"));
    m.embedding = c.require("embedding") == "scalar" ? NoiseEmbedding::kScalar
                                                     : NoiseEmbedding::kSinusoidal;
    m.embed_width = std::stoull(c.require("embed_width"));
    m.schedule.sigma_data = std::stod(c.require("sigma_data"));
    m.schedule.sigma_min = std::stod(c.require("sigma_min"));
    m.schedule.sigma_max = std::stod(c.require("sigma_max"));
    m.schedule.scale = std::stod(c.require("scale"));
    m.schedule.sqrt_cin = c.require("sqrt_cin") == "1";
    if (m.net.input_dim() != m.feature_dim())
        throw IoError("denoiser checkpoint dims inconsistent: " + path);
    return m;
}

void save_dynamics(const DynamicsModel& m, const std::string& path) {
    Checkpoint c = mlp_to_checkpoint(m.net, "dynamics");
    c.manifest.emplace_back("state_dim", std::to_string(m.state_dim));
    c.manifest.emplace_back("action_dim", std::to_string(m.action_dim));
    c.manifest.emplace_back("state_lo", fmt_double(m.state_lo));
    c.manifest.emplace_back("state_hi", fmt_double(m.state_hi));
    c.manifest.emplace_back("training_steps", std::to_string(m.training_steps_done));
    save_checkpoint(c, path);
}

DynamicsModel load_dynamics(const std::string& path) {
    const Checkpoint c = load_checkpoint(path);
    if (c.require("kind") != "dynamics") throw IoError("not a dynamics checkpoint: " + path);
    DynamicsModel m;
    m.net = mlp_from_checkpoint(c);
    m.state_dim = std::stoull(c.require("state_dim"));
    m.action_dim = std::stoull(c.require("action_dim"));
    m.state_lo = std::stod(c.require("state_lo"));
    m.state_hi = std::stod(c.require("state_hi"));
    m.training_steps_done = std::stoull(c.require("training_steps"));
    return m;
}

namespace {

nlohmann::json agent_config_json(const AgentConfig& c) {
    nlohmann::json j;
    j["gamma"] = c.gamma;
    j["rho"] = c.rho;
    j["beta"] = c.beta;
    j["lambda"] = c.lambda;
    j["eta"] = c.eta;
    j["expectile"] = c.expectile;
    j["q_min"] = c.q_min;
    j["n_candidates"] = c.n_candidates;
    j["policy_update_freq"] = c.policy_update_freq;
    j["target_update_freq"] = c.target_update_freq;
    j["lr"] = c.lr;
    j["batch"] = c.batch;
    j["total_steps"] = c.total_steps;
    j["q_ensemble"] = c.q_ensemble;
    j["bellman_target"] = c.bellman_target == BellmanTarget::kBehaviorSample ? "behavior" : "v_net";
    j["ablation"] = c.ablation == AblationMode::kFull     ? "full"
                    : c.ablation == AblationMode::kNoVc   ? "no_vc"
                                                          : "no_ac_vc";
    j["sampler_steps"] = c.sampler_steps;
    j["m_draws"] = c.m_draws;
    j["gating"] = c.gating;
    j["bootstrap_through_done"] = c.bootstrap_through_done;
    j["target_entropy"] = c.target_entropy;
    j["hidden"] = c.hidden;
    j["hidden_layers"] = c.hidden_layers;
    j["logstd_min"] = c.logstd_min;
    j["logstd_max"] = c.logstd_max;
    j["log_interval"] = c.log_interval;
    j["action_lo"] = c.action_lo;
    j["action_hi"] = c.action_hi;
    return j;
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
    AgentConfig c;
    c.gamma = j.at("gamma");
    c.rho = j.at("rho");
    c.beta = j.at("beta");
    c.lambda = j.at("lambda");
    c.eta = j.at("eta");
    c.expectile = j.at("expectile");
    c.q_min = j.at("q_min");
    c.n_candidates = j.at("n_candidates");
    c.policy_update_freq = j.at("policy_update_freq");
    c.target_update_freq = j.at("target_update_freq");
    c.lr = j.at("lr");
    c.batch = j.at("batch");
    c.total_steps = j.at("total_steps");
    c.q_ensemble = j.at("q_ensemble");
    c.bellman_target = j.at("bellman_target") == "behavior" ? BellmanTarget::kBehaviorSample
                                                            : BellmanTarget::kVNet;
    const std::string ab = j.at("ablation");
    c.ablation = ab == "full" ? AblationMode::kFull
                 : ab == "no_vc" ? AblationMode::kNoVc
                                 : AblationMode::kNoAcVc;
    c.sampler_steps = j.at("sampler_steps");
    c.m_draws = j.at("m_draws");
    c.gating = j.at("gating");
    c.bootstrap_through_done = j.at("bootstrap_through_done");
    c.target_entropy = j.at("target_entropy");
    c.hidden = j.at("hidden");
    c.hidden_layers = j.at("hidden_layers");
    c.logstd_min = j.at("logstd_min");
    c.logstd_max = j.at("logstd_max");
    c.log_interval = j.at("log_interval");
    c.action_lo = j.at("action_lo");
    c.action_hi = j.at("action_hi");
    return c;
}

}  // namespace

void save_agent(const AgentState& a, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    for (size_t k = 0; k < a.q_nets.size(); ++k) {
        save_checkpoint(mlp_to_checkpoint(a.q_nets[k], "mlp"), dir + "/q" + std::to_string(k) + ".ckpt");
        save_checkpoint(mlp_to_checkpoint(a.q_targets[k], "mlp"),
                        dir + "/q" + std::to_string(k) + "_target.ckpt");
    }
    save_checkpoint(mlp_to_checkpoint(a.v_net, "mlp"), dir + "/v.ckpt");
    save_checkpoint(mlp_to_checkpoint(a.v_target, "mlp"), dir + "/v_target.ckpt");
    save_checkpoint(mlp_to_checkpoint(a.actor, "mlp"), dir + "/actor.ckpt");
    save_checkpoint(mlp_to_checkpoint(a.actor_target, "mlp"), dir + "/actor_target.ckpt");

    nlohmann::json j;
    j["state_dim"] = a.state_dim;
    j["action_dim"] = a.action_dim;
    j["log_alpha"] = a.log_alpha;
    j["step"] = a.step;
    j["config"] = agent_config_json(a.cfg);
    std::ofstream f = open_out(dir + "/agent.json");
    f << j.dump(2) << "\n";
    if (!f) throw IoError("write failed: " + dir + "/agent.json");
}

AgentState load_agent(const std::string& dir) {
    std::ifstream f = open_in(dir + "/agent.json");
    nlohmann::json j;
    f >> j;
    AgentState a = make_agent(j.at("state_dim"), j.at("action_dim"),
                              agent_config_from_json(j.at("config")), /*seed=*/0);
    a.log_alpha = j.at("log_alpha");
    a.step = j.at("step");
    for (size_t k = 0; k < a.q_nets.size(); ++k) {
        a.q_nets[k] = mlp_from_checkpoint(load_checkpoint(dir + "/q" + std::to_string(k) + ".ckpt"));
        a.q_targets[k] =
            mlp_from_checkpoint(load_checkpoint(dir + "/q" + std::to_string(k) + "_target.ckpt"));
    }
    a.v_net = mlp_from_checkpoint(load_checkpoint(dir + "/v.ckpt"));
    a.v_target = mlp_from_checkpoint(load_checkpoint(dir + "/v_target.ckpt"));
    a.actor = mlp_from_checkpoint(load_checkpoint(dir + "/actor.ckpt"));
    a.actor_target = mlp_from_checkpoint(load_checkpoint(dir + "/actor_target.ckpt"));
    return a;
}

void save_thresholds(const OodThresholds& t, const std::string& path) {
    nlohmann::json j;
    j["tau_a"] = t.tau_a;
    j["tau_s"] = t.tau_s;
    j["percentile_a"] = t.percentile_a;
    j["percentile_s"] = t.percentile_s;
    j["calibration_errors_a"] = t.calibration_errors_a;
    j["calibration_errors_s"] = t.calibration_errors_s;
    std::ofstream f = open_out(path);
    f << j.dump(2) << "\n";
    if (!f) throw IoError("write failed: " + path);
}

OodThresholds load_thresholds(const std::string& path) {
    std::ifstream f = open_in(path);
    nlohmann::json j;
    f >> j;
    OodThresholds t;
    t.tau_a = j.at("tau_a");
    t.tau_s = j.at("tau_s");
    t.percentile_a = j.at("percentile_a");
    t.percentile_s = j.at("percentile_s");
    t.calibration_errors_a = j.at("calibration_errors_a").get<std::vector<double>>();
    t.calibration_errors_s = j.at("calibration_errors_s").get<std::vector<double>>();
    return t;
}

void save_cvae(const CvaeModel& m, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    Checkpoint enc = mlp_to_checkpoint(m.encoder, "cvae_encoder");
    enc.manifest.emplace_back("state_dim", std::to_string(m.state_dim));
    enc.manifest.emplace_back("action_dim", std::to_string(m.action_dim));
    enc.manifest.emplace_back("latent_dim", std::to_string(m.latent_dim));
    save_checkpoint(enc, dir + "/encoder.ckpt");
    save_checkpoint(mlp_to_checkpoint(m.decoder, "cvae_decoder"), dir + "/decoder.ckpt");
}

CvaeModel load_cvae(const std::string& dir) {
    const Checkpoint enc = load_checkpoint(dir + "/encoder.ckpt");
    if (enc.require("kind") != "cvae_encoder") throw IoError("not a cvae dir: " + dir);
    CvaeModel m;
    m.encoder = mlp_from_checkpoint(enc);
    m.decoder = mlp_from_checkpoint(load_checkpoint(dir + "/decoder.ckpt"));
    m.state_dim = std::stoull(enc.require("state_dim"));
    m.action_dim = std::stoull(enc.require("action_dim"));
    m.latent_dim = std::stoull(enc.require("latent_dim"));
    return m;
}

void save_ensemble(const EnsembleDetector& det, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    for (size_t k = 0; k < det.members.size(); ++k) {
        Checkpoint c = mlp_to_checkpoint(det.members[k], "ensemble_member");
        if (k == 0) {
            c.manifest.emplace_back("members", std::to_string(det.members.size()));
            c.manifest.emplace_back("state_dim", std::to_string(det.state_dim));
            c.manifest.emplace_back("action_dim", std::to_string(det.action_dim));
            c.manifest.emplace_back("variance_threshold", fmt_double(det.variance_threshold));
        }
        save_checkpoint(c, dir + "/member" + std::to_string(k) + ".ckpt");
    }
}

EnsembleDetector load_ensemble(const std::string& dir) {
    const Checkpoint head = load_checkpoint(dir + "/member0.ckpt");
    if (head.require("kind") != "ensemble_member") throw IoError("not an ensemble dir: " + dir);
    EnsembleDetector det;
    const size_t members = std::stoull(head.require("members"));
    det.state_dim = std::stoull(head.require("state_dim"));
    det.action_dim = std::stoull(head.require("action_dim"));
    det.variance_threshold = std::stod(head.require("variance_threshold"));
    det.members.push_back(mlp_from_checkpoint(head));
    for (size_t k = 1; k < members; ++k)
        det.members.push_back(
            mlp_from_checkpoint(load_checkpoint(dir + "/member" + std::to_string(k) + ".ckpt")));
    return det;
}

struct CsvWriter::Impl {
    std::ofstream f;
    size_t columns = 0;
    std::string path;
};

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : impl_(new Impl) {
    impl_->path = path;
    impl_->columns = header.size();
    impl_->f = open_out(path);
    for (size_t i = 0; i < header.size(); ++i)
        impl_->f << (i ? "," : "") << header[i];
    impl_->f << "\n";
}

CsvWriter::~CsvWriter() { delete impl_; }

std::string CsvWriter::format(double v) { return fmt_double(v); }

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != impl_->columns) throw InputError("CsvWriter: column count mismatch");
    for (size_t i = 0; i < values.size(); ++i)
        impl_->f << (i ? "," : "") << fmt_double(values[i]);
    impl_->f << "\n";
    if (!impl_->f) throw IoError("write failed: " + impl_->path);
}

void CsvWriter::row_strings(const std::vector<std::string>& values) {
    if (values.size() != impl_->columns) throw InputError("CsvWriter: column count mismatch");
    for (size_t i = 0; i < values.size(); ++i)
        impl_->f << (i ? "," : "") << values[i];
    impl_->f << "\n";
    if (!impl_->f) throw IoError("write failed: " + impl_->path);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream f = open_in(path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            table.header = cells;
            first = false;
        } else {
            table.rows.push_back(cells);
        }
    }
    return table;
}

namespace {

void svg_open(std::ofstream& f, const std::string& caption) {
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
         "viewBox=\"0 0 640 400\">\n";
    f << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    f << "<text x=\"10\" y=\"20\" font-family=\"monospace\" font-size=\"13\">" << caption
      << "</text>\n";
}

std::pair<double, double> min_max(const std::vector<double>& v) {
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (lo == hi) hi = lo + 1.0;
    return {lo, hi};
}

}  // namespace

void svg_line_chart(const std::string& path, const std::vector<double>& ys,
                    const std::string& caption) {
    if (ys.empty()) return;
    std::ofstream f = open_out(path);
    svg_open(f, caption);
    const auto [lo, hi] = min_max(ys);
    f << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < ys.size(); ++i) {
        const double x = 40.0 + 580.0 * static_cast<double>(i) / static_cast<double>(
                                            std::max<size_t>(1, ys.size() - 1));
        const double y = 370.0 - 330.0 * (ys[i] - lo) / (hi - lo);
        f << fmt_double(x) << "," << fmt_double(y) << " ";
    }
    f << "\"/>\n</svg>\n";
}

void svg_scatter(const std::string& path, const std::vector<double>& xs,
                 const std::vector<double>& ys, const std::string& caption) {
    if (xs.empty() || xs.size() != ys.size()) return;
    std::ofstream f = open_out(path);
    svg_open(f, caption);
    const auto [xlo, xhi] = min_max(xs);
    const auto [ylo, yhi] = min_max(ys);
    for (size_t i = 0; i < xs.size(); ++i) {
        const double x = 40.0 + 580.0 * (xs[i] - xlo) / (xhi - xlo);
        const double y = 370.0 - 330.0 * (ys[i] - ylo) / (yhi - ylo);
        f << "<circle cx=\"" << fmt_double(x) << "\" cy=\"" << fmt_double(y)
          << "\" r=\"1.5\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n";
    }
    f << "</svg>\n";
}

}  // namespace doser
