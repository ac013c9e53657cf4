// Command-line front end for the two-view diffusion inpainting library:
// dataset synthesis, mask generation, training, mask-conditioned sampling,
// metric reports and schedule inspection.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "viewpaint/diffusion.hpp"
#include "viewpaint/error.hpp"
#include "viewpaint/inpaint.hpp"
#include "viewpaint/io.hpp"
#include "viewpaint/mask.hpp"
#include "viewpaint/metrics.hpp"
#include "viewpaint/pairs.hpp"
#include "viewpaint/schedule.hpp"
#include "viewpaint/train.hpp"

namespace fs = std::filesystem;
using namespace viewpaint;

namespace {

std::string read_text(const std::string& path) {
    std::vector<unsigned char> bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

// ---- gen-data ------------------------------------------------------------

struct GenDataArgs {
    int n = 100;
    std::uint64_t seed = 0;
    int size = 32;
    double min_overlap = 0.5;
    double max_overlap = 0.9;
    std::string out;
};

int run_gen_data(const GenDataArgs& a) {
    PairFilter filter{a.min_overlap, a.max_overlap};
    std::vector<PairRecord> index = make_dataset(a.n, a.seed, filter, a.out, a.size);
    std::cout << "wrote " << index.size() << " pairs to " << a.out << "\n";
    return 0;
}

// ---- mask-gen ------------------------------------------------------------

struct MaskGenArgs {
    int rects = 10;
    double ratio = 0.4;
    std::uint64_t seed = 0;
    int size = 32;
    std::string out;
};

int run_mask_gen(const MaskGenArgs& a) {
    Rng rng(a.seed);
    MaskSpec spec = random_rect_mask(a.size, a.size, a.rects, a.ratio, rng);
    save_mask(spec, a.out);
    std::printf("wrote %s (ratio %.4f)\n", a.out.c_str(), spec.achieved_ratio);
    return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string out;
    std::string resume;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg = parse_train_config(read_text(a.config));
    TrainResult res = train(cfg, a.out, a.resume);
    std::printf("trained %d epoch(s), %zu step(s)", res.epochs_run, res.losses.size());
    if (!res.losses.empty()) std::printf(", final loss %.6f", res.losses.back());
    std::printf("; checkpoint in %s/final\n", a.out.c_str());
    return 0;
}

// ---- inpaint -------------------------------------------------------------

struct InpaintArgs {
    std::string image, context, mask, checkpoint, out;
    int steps = 0;             // 0 = take from the checkpoint
    std::string schedule;      // empty = take from the checkpoint
    int jumps = 10;
    int jump_length = 10;
    std::uint64_t seed = 0;
    std::string known_noise = "marginal";
    std::string dump_chain;
    int dump_stride = 100;
};

NoiseSchedule resolve_schedule(const std::string& descriptor, int steps,
                               const std::string& kind) {
    std::string base_kind;
    int base_T = 0;
    if (!descriptor.empty()) {
        NoiseSchedule stored = NoiseSchedule::from_descriptor(descriptor);
        base_kind = stored.kind;
        base_T = stored.T;
        if (steps == 0 && kind.empty()) return stored;
    }
    const std::string use_kind = kind.empty() ? base_kind : kind;
    const int use_T = steps == 0 ? base_T : steps;
    if (use_kind.empty() || use_T <= 0)
        throw ConfigError(
            "inpaint: the checkpoint has no stored schedule; pass --steps and --schedule");
    if (use_kind == "cosine") return cosine_schedule(use_T);
    if (use_kind == "laplace") return laplace_schedule(use_T);
    throw ConfigError("inpaint: unknown schedule '" + use_kind + "'");
}

int run_inpaint(const InpaintArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    InpaintTask task;
    task.x0_known = load_png(a.image);
    task.ctx = load_png(a.context);
    task.mask = load_mask(a.mask).pixel_mask;
    task.schedule = resolve_schedule(ck.schedule_descriptor, a.steps, a.schedule);
    task.jump_length = a.jump_length;
    task.n_jumps = a.jumps;
    task.seed = a.seed;
    task.known_noise =
        a.known_noise == "stepwise" ? KnownNoise::stepwise : KnownNoise::marginal;

    InpaintObserver observer;
    if (!a.dump_chain.empty()) {
        fs::create_directories(a.dump_chain);
        const std::string dir = a.dump_chain;
        const int stride = a.dump_stride;
        observer = [dir, stride](int transition, int t, const Tensor& x) {
            if (transition % stride != 0 && t != 0) return;
            char name[64];
            std::snprintf(name, sizeof(name), "/chain_%06d_t%04d.png", transition, t);
            save_png(dir + name, from_model_range(x));
        };
    }

    InpaintResult res = inpaint(task, ck.model, observer);
    save_png(a.out, res.image);
    save_icdf(a.out + ".icdf", res.image);
    std::printf("wrote %s; model evaluations %d (denoise transitions %d)\n", a.out.c_str(),
                res.model_evals, res.denoise_transitions);
    return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
    std::string pred, gt, masks, out;
};

/// Prefer the lossless tensor dump when both sides have one.
Tensor load_image_for_metrics(const fs::path& dir, const std::string& stem,
                              const std::string& png_name, bool use_icdf) {
    if (use_icdf) return load_icdf((dir / (stem + ".icdf")).string());
    return load_png((dir / png_name).string());
}

int run_eval(const EvalArgs& a) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a.pred))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw ContractError("eval: no .png images under " + a.pred);

    std::ofstream csv(a.out, std::ios::trunc);
    if (!csv) throw Error("eval: cannot write " + a.out);
    csv << "image,psnr,ssim,masked_psnr,masked_ssim\n";
    double sum_psnr = 0.0, sum_ssim = 0.0, sum_mpsnr = 0.0, sum_mssim = 0.0;
    char buf[256];
    for (const std::string& name : names) {
        const std::string stem = fs::path(name).stem().string();
        const bool icdf = fs::exists(fs::path(a.pred) / (stem + ".icdf")) &&
                          fs::exists(fs::path(a.gt) / (stem + ".icdf"));
        Tensor pred = load_image_for_metrics(a.pred, stem, name, icdf);
        Tensor gt = load_image_for_metrics(a.gt, stem, name, icdf);
        MetricReport full = full_metrics(pred, gt);
        sum_psnr += full.psnr;
        sum_ssim += full.ssim;
        if (!a.masks.empty()) {
            Tensor mask = load_mask((fs::path(a.masks) / name).string()).pixel_mask;
            MetricReport masked = masked_metrics(pred, gt, mask);
            sum_mpsnr += masked.psnr;
            sum_mssim += masked.ssim;
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f\n", name.c_str(), full.psnr,
                          full.ssim, masked.psnr, masked.ssim);
        } else {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,,\n", name.c_str(), full.psnr,
                          full.ssim);
        }
        csv << buf;
    }
    const double n = static_cast<double>(names.size());
    if (!a.masks.empty())
        std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f,%.6f,%.6f\n", sum_psnr / n, sum_ssim / n,
                      sum_mpsnr / n, sum_mssim / n);
    else
        std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f,,\n", sum_psnr / n, sum_ssim / n);
    csv << buf;
    std::cout << "wrote " << a.out << " (" << names.size() << " images)\n";
    return 0;
}

// ---- schedule-dump -------------------------------------------------------

struct ScheduleDumpArgs {
    std::string schedule = "cosine";
    int T = 1000;
    std::string out;
};

int run_schedule_dump(const ScheduleDumpArgs& a) {
    NoiseSchedule s;
    if (a.schedule == "cosine")
        s = cosine_schedule(a.T);
    else if (a.schedule == "laplace")
        s = laplace_schedule(a.T);
    else
        throw ConfigError("schedule-dump: unknown schedule '" + a.schedule + "'");
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw Error("schedule-dump: cannot write " + a.out);
    dump_schedule_csv(s, f);
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"viewpaint: two-view diffusion inpainting toolkit"};
    app.require_subcommand(1);

    GenDataArgs gd;
    CLI::App* gen_data = app.add_subcommand("gen-data", "Synthesize a paired-view dataset");
    gen_data->add_option("--n", gd.n, "Number of pairs to keep")->check(CLI::PositiveNumber);
    gen_data->add_option("--seed", gd.seed, "Base seed");
    gen_data->add_option("--size", gd.size, "View size in pixels")->check(CLI::PositiveNumber);
    gen_data->add_option("--min-overlap", gd.min_overlap, "Minimum kept view overlap");
    gen_data->add_option("--max-overlap", gd.max_overlap, "Maximum kept view overlap");
    gen_data->add_option("--out", gd.out, "Output dataset directory")->required();

    MaskGenArgs mg;
    CLI::App* mask_gen = app.add_subcommand("mask-gen", "Generate a random-rectangle mask");
    mask_gen->add_option("--rects", mg.rects, "Number of rectangles")->check(CLI::PositiveNumber);
    mask_gen->add_option("--ratio", mg.ratio, "Target masked-pixel ratio")
        ->check(CLI::Range(0.0, 1.0));
    mask_gen->add_option("--seed", mg.seed, "Seed");
    mask_gen->add_option("--size", mg.size, "Mask side length")->check(CLI::PositiveNumber);
    mask_gen->add_option("--out", mg.out, "Output PNG path")->required();

    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the denoiser on a dataset");
    train_cmd->add_option("--config", tr.config, "JSON training config")
        ->required()
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--out", tr.out, "Output directory")->required();
    train_cmd->add_option("--resume", tr.resume, "Checkpoint directory to resume from");

    InpaintArgs ip;
    CLI::App* inpaint_cmd = app.add_subcommand("inpaint", "Inpaint a masked image");
    inpaint_cmd->add_option("--image", ip.image, "Image to inpaint (PNG)")
        ->required()
        ->check(CLI::ExistingFile);
    inpaint_cmd->add_option("--context", ip.context, "Second view of the scene (PNG)")
        ->required()
        ->check(CLI::ExistingFile);
    inpaint_cmd->add_option("--mask", ip.mask, "Mask PNG, white = inpaint")
        ->required()
        ->check(CLI::ExistingFile);
    inpaint_cmd->add_option("--checkpoint", ip.checkpoint, "Checkpoint directory")->required();
    inpaint_cmd->add_option("--steps", ip.steps, "Sampling steps (default: from checkpoint)");
    inpaint_cmd->add_option("--jumps", ip.jumps, "Resampling cycles per jump site")
        ->check(CLI::PositiveNumber);
    inpaint_cmd->add_option("--jump-length", ip.jump_length, "Levels per re-noise jump")
        ->check(CLI::PositiveNumber);
    inpaint_cmd->add_option("--schedule", ip.schedule, "cosine or laplace")
        ->check(CLI::IsMember({"cosine", "laplace"}));
    inpaint_cmd->add_option("--seed", ip.seed, "Sampling seed");
    inpaint_cmd->add_option("--known-noise", ip.known_noise,
                            "Known-region noising rule: marginal (default) or stepwise")
        ->check(CLI::IsMember({"marginal", "stepwise"}));
    inpaint_cmd->add_option("--out", ip.out, "Output PNG path")->required();
    inpaint_cmd->add_option("--dump-chain", ip.dump_chain,
                            "Directory for intermediate chain states");
    inpaint_cmd->add_option("--dump-stride", ip.dump_stride,
                            "Store every k-th transition when dumping")
        ->check(CLI::PositiveNumber);

    EvalArgs ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Image-quality report for two directories");
    eval_cmd->add_option("--pred", ev.pred, "Directory of predictions")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--gt", ev.gt, "Directory of references")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--masks", ev.masks, "Directory of masks (optional)")
        ->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--out", ev.out, "Output CSV path")->required();

    ScheduleDumpArgs sd;
    CLI::App* sched_cmd = app.add_subcommand("schedule-dump", "Write a schedule table as CSV");
    sched_cmd->add_option("--schedule", sd.schedule, "cosine or laplace")
        ->check(CLI::IsMember({"cosine", "laplace"}));
    sched_cmd->add_option("--T", sd.T, "Number of steps")->check(CLI::PositiveNumber);
    sched_cmd->add_option("--out", sd.out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen_data->parsed()) return run_gen_data(gd);
        if (mask_gen->parsed()) return run_mask_gen(mg);
        if (train_cmd->parsed()) return run_train(tr);
        if (inpaint_cmd->parsed()) return run_inpaint(ip);
        if (eval_cmd->parsed()) return run_eval(ev);
        if (sched_cmd->parsed()) return run_schedule_dump(sd);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
