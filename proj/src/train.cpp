#include "viewpaint/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "viewpaint/diffusion.hpp"
#include "viewpaint/error.hpp"
#include "viewpaint/io.hpp"

namespace viewpaint {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- optimizer -----------------------------------------------------------

OptimizerState OptimizerState::init(const std::vector<std::pair<std::string, Tensor>>& params,
                                    double lr) {
    OptimizerState o;
    o.lr = lr;
    o.m.reserve(params.size());
    o.v.reserve(params.size());
    for (const auto& [name, p] : params) {
        o.m.push_back(Tensor::zeros(p.shape()));
        o.v.push_back(Tensor::zeros(p.shape()));
    }
    return o;
}

void OptimizerState::apply(const std::vector<std::pair<std::string, Tensor>>& params) {
    if (params.size() != m.size())
        throw ContractError("OptimizerState::apply: " + std::to_string(params.size()) +
                            " parameters vs " + std::to_string(m.size()) + " moment slots");
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].second;
        if (p.shape() != m[i].shape())
            throw ContractError("OptimizerState::apply: parameter '" + params[i].first +
                                "' shape " + shape_str(p.shape()) +
                                " does not match moment shape " + shape_str(m[i].shape()));
        const bool hg = p.has_grad();
        std::span<const float> g = hg ? p.grad() : std::span<const float>{};
        std::span<float> pd = p.raw_data();
        std::span<float> md = m[i].raw_data();
        std::span<float> vd = v[i].raw_data();
        for (std::size_t k = 0; k < pd.size(); ++k) {
            const double gk = hg ? static_cast<double>(g[k]) : 0.0;
            const double mk = beta1 * md[k] + (1.0 - beta1) * gk;
            const double vk = beta2 * vd[k] + (1.0 - beta2) * gk * gk;
            md[k] = static_cast<float>(mk);
            vd[k] = static_cast<float>(vk);
            const double mhat = mk / bc1;
            const double vhat = vk / bc2;
            const double upd = mhat / (std::sqrt(vhat) + eps) + weight_decay * pd[k];
            pd[k] = static_cast<float>(pd[k] - lr * upd);
        }
    }
}

// ---- config --------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("TrainConfig: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be positive");
    if (lr <= 0.0) throw ConfigError("TrainConfig: learning rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("TrainConfig: weight_decay must be >= 0");
    if (T < 1) throw ConfigError("TrainConfig: T must be positive");
    if (checkpoint_stride < 0) throw ConfigError("TrainConfig: checkpoint_stride must be >= 0");
    if (schedule != "cosine" && schedule != "laplace")
        throw ConfigError("TrainConfig: unknown schedule '" + schedule + "'");
    model.validate();
}

NoiseSchedule TrainConfig::make_schedule() const {
    return schedule == "laplace" ? laplace_schedule(T) : cosine_schedule(T);
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

json model_config_to_json(const DenoiserConfig& c) {
    return json{{"image_size", c.image_size},
                {"patch_size", c.patch_size},
                {"channels", c.channels},
                {"embed_dim", c.embed_dim},
                {"enc_depth", c.enc_depth},
                {"dec_depth", c.dec_depth},
                {"enc_heads", c.enc_heads},
                {"dec_heads", c.dec_heads},
                {"mlp_ratio", c.mlp_ratio},
                {"time_embed_dim", c.time_embed_dim}};
}

DenoiserConfig model_config_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    reject_unknown_keys(j,
                        {"image_size", "patch_size", "channels", "embed_dim", "enc_depth",
                         "dec_depth", "enc_heads", "dec_heads", "mlp_ratio", "time_embed_dim"},
                        where);
    DenoiserConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.channels = j.value("channels", c.channels);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.enc_depth = j.value("enc_depth", c.enc_depth);
    c.dec_depth = j.value("dec_depth", c.dec_depth);
    c.enc_heads = j.value("enc_heads", c.enc_heads);
    c.dec_heads = j.value("dec_heads", c.dec_heads);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    c.time_embed_dim = j.value("time_embed_dim", c.time_embed_dim);
    return c;
}

bool config_equal(const DenoiserConfig& a, const DenoiserConfig& b) {
    return model_config_to_json(a) == model_config_to_json(b);
}

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("train config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    reject_unknown_keys(j,
                        {"epochs", "batch_size", "learning_rate", "weight_decay", "schedule", "T",
                         "seed", "checkpoint_stride", "dataset", "model"},
                        "train config");
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr = j.value("learning_rate", c.lr);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.schedule = j.value("schedule", c.schedule);
        c.T = j.value("T", c.T);
        c.seed = j.value("seed", c.seed);
        c.checkpoint_stride = j.value("checkpoint_stride", c.checkpoint_stride);
        c.dataset_dir = j.value("dataset", c.dataset_dir);
        if (j.contains("model")) c.model = model_config_from_json(j["model"], "model config");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config field has the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

// ---- steps ---------------------------------------------------------------

double train_step(DenoiserModel& model, const std::vector<ScenePair>& batch,
                  const NoiseSchedule& s, OptimizerState& opt, Rng& rng) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    auto params = model.parameters();
    for (auto& [name, p] : params) p.zero_grad();

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    std::vector<int> drawn_t;
    drawn_t.reserve(batch.size());
    for (const ScenePair& pair : batch) {
        const int t = static_cast<int>(rng.uniform_int(1, s.T));
        drawn_t.push_back(t);
        const Tensor x0 = to_model_range(pair.view_a);
        const Tensor eps = randn(x0.shape(), rng);
        const Tensor xt = forward_marginal(x0, t, s, eps);
        GradTape tape;
        const Tensor eps_hat = predict_eps(xt, t, pair.view_b, model, s);
        const Tensor loss = loss_eps(eps, eps_hat);
        tape.backward(scale(loss, inv_b));
        total += loss.item();
    }
    const double batch_loss = total * inv_b;
    if (!std::isfinite(batch_loss)) {
        std::ostringstream os;
        os << "train_step: non-finite loss " << batch_loss << " at optimizer step "
           << (opt.step + 1) << "; drawn t:";
        for (int t : drawn_t) os << ' ' << t;
        throw TrainingError(os.str());
    }
    opt.apply(params);
    return batch_loss;
}

double eval_loss(const DenoiserModel& model, const std::vector<ScenePair>& pairs,
                 const NoiseSchedule& s, Rng& rng) {
    if (pairs.empty()) throw ContractError("eval_loss: empty pair list");
    double total = 0.0;
    for (const ScenePair& pair : pairs) {
        const int t = static_cast<int>(rng.uniform_int(1, s.T));
        const Tensor x0 = to_model_range(pair.view_a);
        const Tensor eps = randn(x0.shape(), rng);
        const Tensor xt = forward_marginal(x0, t, s, eps);
        const Tensor eps_hat = predict_eps(xt, t, pair.view_b, model, s);
        total += loss_eps(eps, eps_hat).item();
    }
    return total / static_cast<double>(pairs.size());
}

// ---- checkpoints ---------------------------------------------------------

void save_checkpoint(DenoiserModel& model, const OptimizerState& opt, const std::string& path,
                     int epoch, const std::string& schedule_descriptor) {
    auto params = model.parameters();
    if (params.size() != opt.m.size())
        throw ContractError("save_checkpoint: optimizer tracks " + std::to_string(opt.m.size()) +
                            " tensors but the model has " + std::to_string(params.size()));
    fs::create_directories(path);
    fs::create_directories(path + "/params");
    fs::create_directories(path + "/opt_m");
    fs::create_directories(path + "/opt_v");

    json names = json::array();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params[i].first;
        names.push_back(name);
        save_icdf(path + "/params/" + name + ".icdf", params[i].second);
        save_icdf(path + "/opt_m/" + name + ".icdf", opt.m[i]);
        save_icdf(path + "/opt_v/" + name + ".icdf", opt.v[i]);
    }
    json manifest{{"format", "viewpaint-checkpoint-v1"},
                  {"model", model_config_to_json(model.config)},
                  {"optimizer",
                   {{"lr", opt.lr},
                    {"beta1", opt.beta1},
                    {"beta2", opt.beta2},
                    {"weight_decay", opt.weight_decay},
                    {"eps", opt.eps},
                    {"step", opt.step}}},
                  {"epoch", epoch},
                  {"schedule", schedule_descriptor},
                  {"parameters", names}};
    const std::string text = manifest.dump(2) + "\n";
    write_file(path + "/manifest.json", std::vector<unsigned char>(text.begin(), text.end()));
}

namespace {

Tensor load_named_tensor(const std::string& dir, const std::string& name, const Shape& want) {
    const std::string file = dir + "/" + name + ".icdf";
    Tensor t;
    try {
        t = load_icdf(file);
    } catch (const Error& e) {
        throw FormatError("checkpoint tensor '" + name + "' (" + file + "): " + e.what());
    }
    if (t.shape() != want)
        throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_str(t.shape()) +
                          ", expected " + shape_str(want));
    return t;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path, const DenoiserConfig* expect) {
    std::vector<unsigned char> bytes;
    try {
        bytes = read_file(path + "/manifest.json");
    } catch (const Error& e) {
        throw FormatError("checkpoint manifest: " + std::string(e.what()));
    }
    json manifest;
    try {
        manifest = json::parse(std::string(bytes.begin(), bytes.end()));
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
    }
    if (manifest.value("format", "") != "viewpaint-checkpoint-v1")
        throw FormatError("checkpoint manifest: unknown format tag");

    Checkpoint ck;
    DenoiserConfig cfg;
    try {
        cfg = model_config_from_json(manifest.at("model"), "checkpoint model config");
        cfg.validate();
        if (expect && !config_equal(cfg, *expect))
            throw ConfigError("checkpoint model config does not match the requested config");

        // Materialize the right shapes, then overwrite every tensor from disk.
        Rng scratch(0);
        ck.model = DenoiserModel::init(cfg, scratch);
        auto params = ck.model.parameters();

        const json& o = manifest.at("optimizer");
        reject_unknown_keys(o, {"lr", "beta1", "beta2", "weight_decay", "eps", "step"},
                            "checkpoint optimizer state");
        ck.opt.lr = o.at("lr").get<double>();
        ck.opt.beta1 = o.at("beta1").get<double>();
        ck.opt.beta2 = o.at("beta2").get<double>();
        ck.opt.weight_decay = o.at("weight_decay").get<double>();
        ck.opt.eps = o.at("eps").get<double>();
        ck.opt.step = o.at("step").get<std::int64_t>();
        ck.epoch = manifest.at("epoch").get<int>();
        ck.schedule_descriptor = manifest.value("schedule", "");

        const json& names = manifest.at("parameters");
        if (!names.is_array() || names.size() != params.size())
            throw FormatError("checkpoint manifest: parameter list does not match the model (" +
                              std::to_string(names.size()) + " vs " +
                              std::to_string(params.size()) + ")");
        for (std::size_t i = 0; i < params.size(); ++i) {
            const std::string name = names[i].get<std::string>();
            if (name != params[i].first)
                throw FormatError("checkpoint manifest: parameter " + std::to_string(i) +
                                  " is '" + name + "', expected '" + params[i].first + "'");
            Tensor stored = load_named_tensor(path + "/params", name, params[i].second.shape());
            std::copy(stored.data().begin(), stored.data().end(),
                      params[i].second.raw_data().begin());
            ck.opt.m.push_back(load_named_tensor(path + "/opt_m", name, stored.shape()));
            ck.opt.v.push_back(load_named_tensor(path + "/opt_v", name, stored.shape()));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }
    return ck;
}

// ---- datasets and the training loop --------------------------------------

std::vector<ScenePair> load_pairs(const std::string& dir) {
    const std::vector<PairRecord> records = load_index(dir);
    std::vector<ScenePair> pairs;
    pairs.reserve(records.size());
    for (const PairRecord& r : records) {
        ScenePair p;
        p.view_a = load_png(pair_image_path(dir, r.id, 'a'));
        p.view_b = load_png(pair_image_path(dir, r.id, 'b'));
        p.offset = r.offset;
        p.brightness_delta = r.delta;
        p.overlap = r.overlap;
        p.quality_score = r.quality;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

TrainResult train(const TrainConfig& cfg, const std::string& out_dir,
                  const std::string& resume_from) {
    cfg.validate();
    const NoiseSchedule sched = cfg.make_schedule();
    const std::vector<ScenePair> data = load_pairs(cfg.dataset_dir);
    if (data.empty()) throw ContractError("train: dataset '" + cfg.dataset_dir + "' is empty");

    TrainResult res;
    int start_epoch = 0;
    if (resume_from.empty()) {
        Rng init_rng(derive_seed(cfg.seed, 0));
        res.model = DenoiserModel::init(cfg.model, init_rng);
        res.opt = OptimizerState::init(res.model.parameters(), cfg.lr);
        res.opt.weight_decay = cfg.weight_decay;
    } else {
        Checkpoint ck = load_checkpoint(resume_from, &cfg.model);
        if (ck.schedule_descriptor != sched.descriptor())
            throw ConfigError("train: checkpoint schedule '" + ck.schedule_descriptor +
                              "' does not match configured '" + sched.descriptor() + "'");
        res.model = std::move(ck.model);
        res.opt = std::move(ck.opt);
        start_epoch = ck.epoch;
    }

    std::ofstream log;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        log.open(out_dir + "/loss.csv", std::ios::trunc);
        if (!log) throw Error("train: cannot write " + out_dir + "/loss.csv");
        log << "step,epoch,loss\n";
    }

    const int n = static_cast<int>(data.size());
    std::vector<int> order(data.size());
    char buf[64];
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        Rng er(derive_seed(cfg.seed, 1 + static_cast<std::uint64_t>(epoch)));
        std::iota(order.begin(), order.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(er.uniform_int(0, i));
            std::swap(order[i], order[j]);
        }
        for (int base = 0; base < n; base += cfg.batch_size) {
            const int take = std::min(cfg.batch_size, n - base);
            std::vector<ScenePair> batch;
            batch.reserve(take);
            for (int i = 0; i < take; ++i) batch.push_back(data[order[base + i]]);
            const double loss = train_step(res.model, batch, sched, res.opt, er);
            res.losses.push_back(loss);
            if (log) {
                std::snprintf(buf, sizeof(buf), "%lld,%d,%.9g\n",
                              static_cast<long long>(res.opt.step), epoch, loss);
                log << buf << std::flush;
            }
        }
        ++res.epochs_run;
        if (!out_dir.empty() && cfg.checkpoint_stride > 0 &&
            (epoch + 1) % cfg.checkpoint_stride == 0 && epoch + 1 < cfg.epochs) {
            std::snprintf(buf, sizeof(buf), "/epoch_%04d", epoch + 1);
            save_checkpoint(res.model, res.opt, out_dir + buf, epoch + 1, sched.descriptor());
        }
    }
    if (!out_dir.empty())
        save_checkpoint(res.model, res.opt, out_dir + "/final", cfg.epochs, sched.descriptor());
    return res;
}

}  // namespace viewpaint
