// unipcb: condition generation, toy diffusion sampling, dataset curation
// and evaluation from one binary. Every subcommand prints a JSON summary
// on stdout and keeps diagnostics on stderr; outputs are deterministic for
// a fixed seed.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "unipcb/augment.hpp"
#include "unipcb/blocks_check.hpp"
#include "unipcb/cond_inject.hpp"
#include "unipcb/condgen.hpp"
#include "unipcb/config.hpp"
#include "unipcb/detections.hpp"
#include "unipcb/diffusion.hpp"
#include "unipcb/errors.hpp"
#include "unipcb/feature_io.hpp"
#include "unipcb/image.hpp"
#include "unipcb/manifest.hpp"
#include "unipcb/metrics.hpp"
#include "unipcb/rng.hpp"
#include "unipcb/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace unipcb;

namespace {

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

bool flag_given(const CLI::App* cmd, const char* flag) {
    const CLI::Option* opt = cmd->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
}

// Flag beats config file beats built-in default.
double eff_double(const CLI::App* cmd, const char* flag, double flag_val, const Config& cfg,
                  const char* key, double fallback) {
    if (flag_given(cmd, flag)) return flag_val;
    return config_get_double(cfg, key, fallback);
}

std::size_t eff_size(const CLI::App* cmd, const char* flag, std::size_t flag_val,
                     const Config& cfg, const char* key, std::size_t fallback) {
    if (flag_given(cmd, flag)) return flag_val;
    return config_get_size(cfg, key, fallback);
}

std::vector<DefectInstance> load_instances(const std::string& path) {
    const auto records = metrics::load_detections(path, /*predictions=*/false);
    if (records.empty()) throw ValidationError("no box records in " + path);
    std::vector<DefectInstance> instances;
    instances.reserve(records.size());
    for (const auto& r : records) instances.push_back({r.classId, r.box});
    return instances;
}

cond::TemplateLibrary templates_from(const std::string& path) {
    return path.empty() ? cond::default_templates() : cond::load_templates(path);
}

json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

// ---- conditions / prompt ----

struct CondFlags {
    std::string image, boxes, out_dir, config_path, templates_path;
    double low_factor = 0.5, high_factor = 1.5, edge_sigma = 1.4, depth_sigma = 2.0;
    std::size_t edge_radius = 2, embed_dim = 64, count_threshold = 6, spread_threshold = 5;
    double scale_t1 = 1024.0, scale_t2 = 9216.0;
    std::uint64_t embed_seed = 0;
};

cond::CondGenConfig resolve_cond_config(const CLI::App* cmd, const CondFlags& f,
                                        const Config& cfg) {
    cond::CondGenConfig out;
    out.edge.lowFactor = eff_double(cmd, "--low-factor", f.low_factor, cfg, "edge.low_factor", 0.5);
    out.edge.highFactor =
        eff_double(cmd, "--high-factor", f.high_factor, cfg, "edge.high_factor", 1.5);
    out.edge.gaussianSigma = eff_double(cmd, "--edge-sigma", f.edge_sigma, cfg, "edge.sigma", 1.4);
    out.edge.gaussianRadius = eff_size(cmd, "--edge-radius", f.edge_radius, cfg, "edge.radius", 2);
    out.prompt.countThreshold =
        eff_size(cmd, "--count-threshold", f.count_threshold, cfg, "prompt.count_threshold", 6);
    out.prompt.spreadThreshold =
        eff_size(cmd, "--spread-threshold", f.spread_threshold, cfg, "prompt.spread_threshold", 5);
    out.prompt.scaleThresholds.t1 = eff_double(cmd, "--scale-t1", f.scale_t1, cfg, "scale.t1", 1024.0);
    out.prompt.scaleThresholds.t2 = eff_double(cmd, "--scale-t2", f.scale_t2, cfg, "scale.t2", 9216.0);
    out.embedDim = eff_size(cmd, "--embed-dim", f.embed_dim, cfg, "embed.dim", 64);
    out.embedSeed = flag_given(cmd, "--embed-seed")
                        ? f.embed_seed
                        : static_cast<std::uint64_t>(config_get_size(cfg, "embed.seed", 0));
    return out;
}

int run_conditions(const CLI::App* cmd, const CondFlags& f) {
    const Config cfg = load_config(f.config_path);
    const cond::CondGenConfig cc = resolve_cond_config(cmd, f, cfg);
    const double depth_sigma = eff_double(cmd, "--depth-sigma", f.depth_sigma, cfg, "depth.sigma", 2.0);

    const GrayImage img = load_image(f.image);
    const auto instances = load_instances(f.boxes);
    const cond::BlurInverseDepth depth(depth_sigma);
    const auto set = cond::generate_conditions(img, instances, cc, templates_from(f.templates_path),
                                               depth);

    fs::create_directories(f.out_dir);
    const std::string edge_path = (fs::path(f.out_dir) / "edge.png").string();
    const std::string depth_path = (fs::path(f.out_dir) / "depth.txt").string();
    const std::string prompt_path = (fs::path(f.out_dir) / "prompt.txt").string();
    const std::string embed_path = (fs::path(f.out_dir) / "embedding.txt").string();
    save_image(edge_path, set.edgeMap);
    save_tensor(depth_path, set.depthMap);
    save_tensor(embed_path, set.textEmbedding);
    {
        std::ofstream out(prompt_path);
        if (!out) throw IoError("cannot write " + prompt_path);
        out << set.prompt << '\n';
    }

    std::size_t edge_pixels = 0;
    for (const auto v : set.edgeMap.data) edge_pixels += v == 255 ? 1 : 0;
    const int otsu = cond::otsu_threshold(img);
    const auto [low, high] = cond::canny_thresholds(otsu, cc.edge);

    std::cerr << "conditions: " << instances.size() << " boxes, " << edge_pixels
              << " edge pixels\n";
    emit(json{{"edgePath", edge_path},
              {"depthPath", depth_path},
              {"promptPath", prompt_path},
              {"embeddingPath", embed_path},
              {"prompt", set.prompt},
              {"edgePixels", edge_pixels},
              {"otsu", otsu},
              {"lowThreshold", low},
              {"highThreshold", high}});
    return 0;
}

int run_prompt(const CLI::App* cmd, const CondFlags& f) {
    const Config cfg = load_config(f.config_path);
    const cond::CondGenConfig cc = resolve_cond_config(cmd, f, cfg);
    const GrayImage img = load_image(f.image);
    const auto instances = load_instances(f.boxes);
    const std::string prompt = cond::build_prompt(instances, img.width, img.height, cc.prompt,
                                                  templates_from(f.templates_path));
    emit(json{{"prompt", prompt}, {"instances", instances.size()}});
    return 0;
}

// ---- diffuse ----

struct DiffuseFlags {
    std::string out_dir, cond_image, boxes;
    std::size_t timesteps = 50, steps = 10, latent_channels = 4;
    std::uint64_t seed = 0;
};

void write_schedule_csv(const std::string& path, const diff::NoiseSchedule& sched) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t,beta,alpha_bar\n";
    char buf[80];
    for (std::size_t t = 1; t <= sched.T; ++t) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", t, sched.betas[t - 1],
                      sched.alpha_bar(t));
        out << buf;
    }
    if (!out) throw IoError("write failed for " + path);
}

int run_diffuse(const CLI::App* cmd, const DiffuseFlags& f, const CondFlags& cf) {
    const Config cfg = load_config(cf.config_path);
    const double beta_start = config_get_double(cfg, "diffusion.beta_start", 1e-4);
    const double beta_end = config_get_double(cfg, "diffusion.beta_end", 0.02);
    const diff::NoiseSchedule sched = diff::make_schedule(f.timesteps, beta_start, beta_end);

    const std::array<std::size_t, diff::kNumInjectScales> widths = {8, 12, 16, 20};
    const cond::CondGenConfig cc = resolve_cond_config(cmd, cf, cfg);

    const diff::ToyUNet unet(f.latent_channels, widths, cc.embedDim,
                             mix_seed(f.seed ^ 0x746f79756e6574ull));
    Rng z_rng(mix_seed(f.seed ^ 0x7a696e6974ull));
    const Tensor z_init = Tensor::random_normal({1, f.latent_channels, 64, 64}, z_rng);

    const bool conditioned = !f.cond_image.empty();
    Tensor z_final;
    std::string prompt;
    if (conditioned) {
        if (f.boxes.empty()) throw ValidationError("--cond-image requires --boxes");
        const GrayImage img = load_image(f.cond_image);
        if (img.width != 64 || img.height != 64)
            throw ValidationError("conditioning image must be 64x64 to match the latent grid");
        const double depth_sigma =
            eff_double(cmd, "--depth-sigma", cf.depth_sigma, cfg, "depth.sigma", 2.0);
        const cond::BlurInverseDepth depth(depth_sigma);
        const auto set = cond::generate_conditions(img, load_instances(f.boxes), cc,
                                                   templates_from(cf.templates_path), depth);
        prompt = set.prompt;

        Rng enc_rng(mix_seed(f.seed ^ 0x7363656e63ull));
        const auto enc = diff::make_scale_encoder(2, 8, widths, enc_rng);
        Rng mod_rng(mix_seed(f.seed ^ 0x6d6f6473ull));
        std::array<diff::CondModParams, diff::kNumInjectScales> mods;
        for (std::size_t i = 0; i < diff::kNumInjectScales; ++i)
            mods[i] = diff::make_cond_mod(widths[i], diff::ToyUNet::kNormGroups, mod_rng);

        const auto feats = diff::scale_embed(diff::scale_align(diff::condition_input(set), enc), enc);
        z_final = diff::ddim_sample(z_init, unet, sched, f.steps, &feats, &set.textEmbedding, &mods);
    } else {
        z_final = diff::ddim_sample(z_init, unet, sched, f.steps);
    }

    fs::create_directories(f.out_dir);
    const std::string sched_path = (fs::path(f.out_dir) / "schedule.csv").string();
    const std::string init_path = (fs::path(f.out_dir) / "z_init.txt").string();
    const std::string final_path = (fs::path(f.out_dir) / "z_final.txt").string();
    write_schedule_csv(sched_path, sched);
    save_tensor(init_path, z_init);
    save_tensor(final_path, z_final);

    std::cerr << "diffuse: " << f.steps << " steps over T=" << f.timesteps
              << (conditioned ? " (conditioned)" : " (unconditioned)") << '\n';
    json j{{"timesteps", f.timesteps}, {"steps", f.steps},
           {"seed", f.seed},           {"conditioned", conditioned},
           {"schedulePath", sched_path}, {"zInitPath", init_path},
           {"zFinalPath", final_path},  {"finalMaxAbs", max_abs(z_final)}};
    if (conditioned) j["prompt"] = prompt;
    emit(j);
    return 0;
}

// ---- blocks-check ----

int run_blocks_check(const std::string& filter, std::size_t workers) {
    const auto results = det::run_block_checks(filter, workers);
    if (results.empty()) {
        std::cerr << "blocks-check: no case matches filter '" << filter << "'\n";
        return 1;
    }
    bool all_ok = true;
    json out = json::array();
    for (const auto& r : results) {
        std::cerr << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << '\n';
        out.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
        all_ok = all_ok && r.passed;
    }
    emit(json{{"cases", out}, {"allPassed", all_ok}});
    return all_ok ? 0 : 1;
}

// ---- eval-det ----

int run_eval_det(const std::string& pred_path, const std::string& gt_path,
                 const std::string& iou_spec, bool all_point) {
    double op_iou = 0.5;
    if (const auto colon = iou_spec.find(':'); colon != std::string::npos) {
        const double lo = std::stod(iou_spec.substr(0, colon));
        const double hi = std::stod(iou_spec.substr(colon + 1));
        if (lo != 0.5 || hi != 0.95)
            throw ValidationError("only the 0.5:0.95 threshold grid is supported");
        op_iou = lo;
    } else {
        op_iou = std::stod(iou_spec);
    }

    const auto preds = metrics::load_detections(pred_path, true);
    const auto gts = metrics::load_detections(gt_path, false);
    const auto ap = metrics::mean_ap(preds, gts, all_point);
    const auto op = metrics::best_f1_point(preds, gts, op_iou);

    json per_class = json::object();
    for (const auto& [cls, entry] : ap.perClass)
        per_class[std::string(defect_class_name(cls))] = {
            {"ap50", entry.ap50}, {"ap5095", entry.ap5095}, {"groundTruth", entry.numGt}};
    emit(json{{"precision", op.precision},
              {"recall", op.recall},
              {"f1", op.f1},
              {"scoreThreshold", op.scoreThreshold},
              {"operatingIou", op_iou},
              {"map50", ap.map50},
              {"map5095", ap.map5095},
              {"perClass", per_class}});
    return 0;
}

// ---- eval-gen ----

// Pairs are <stem>.real.<ext> / <stem>.gen.<ext> files in one directory.
std::vector<std::pair<std::string, std::string>> find_pairs(const std::string& dir) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
        const auto pos = name.find(".real.");
        if (pos == std::string::npos) continue;
        const std::string partner = name.substr(0, pos) + ".gen." + name.substr(pos + 6);
        const fs::path gen = fs::path(dir) / partner;
        if (!fs::exists(gen))
            throw ValidationError("pair directory: missing generated partner " + partner);
        pairs.emplace_back((fs::path(dir) / name).string(), gen.string());
    }
    return pairs;
}

// Row-paired feature files treated as one single-site layer per row pair.
double lpips_from_features(const Tensor& real, const Tensor& gen) {
    if (real.dim(0) != gen.dim(0) || real.dim(1) != gen.dim(1))
        throw ValidationError("eval-gen: feature files must pair row for row");
    const std::size_t n = real.dim(0), d = real.dim(1);
    Tensor fx = Tensor::zeros({1, d, 1, n});
    Tensor fy = Tensor::zeros({1, d, 1, n});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            fx.at4(0, c, 0, r) = real.at2(r, c);
            fy.at4(0, c, 0, r) = gen.at2(r, c);
        }
    metrics::LpipsLayers layers;
    layers.layers.push_back({std::move(fx), std::move(fy), 1.0});
    return metrics::lpips_form(layers);
}

int run_eval_gen(const std::string& real_feats, const std::string& gen_feats,
                 const std::string& pairs_dir) {
    const Tensor real = metrics::load_feature_csv(real_feats);
    const Tensor gen = metrics::load_feature_csv(gen_feats);
    const double fid_value = metrics::fid(metrics::FeatureStats::from_samples(real),
                                          metrics::FeatureStats::from_samples(gen));
    const double lpips_value = lpips_from_features(real, gen);

    json j{{"fid", fid_value}, {"lpipsForm", lpips_value}, {"pairs", 0},
           {"psnr", nullptr},  {"ssim", nullptr}};
    if (!pairs_dir.empty()) {
        const auto pairs = find_pairs(pairs_dir);
        if (pairs.empty()) throw ValidationError("no *.real.* images in " + pairs_dir);
        double psnr_sum = 0.0, ssim_sum = 0.0;
        for (const auto& [real_path, gen_path] : pairs) {
            const GrayImage a = load_image(real_path);
            const GrayImage b = load_image(gen_path);
            metrics::SsimConfig sc;
            sc.globalWindow = a.width < sc.windowSize || a.height < sc.windowSize;
            psnr_sum += metrics::psnr(a, b);
            ssim_sum += metrics::ssim(a, b, sc);
        }
        j["pairs"] = pairs.size();
        j["psnr"] = finite_or_null(psnr_sum / static_cast<double>(pairs.size()));
        j["ssim"] = ssim_sum / static_cast<double>(pairs.size());
        std::cerr << "eval-gen: " << pairs.size() << " image pairs\n";
    }
    emit(j);
    return 0;
}

// ---- stats ----

int run_stats(const std::string& manifest_path) {
    const auto m = data::load_manifest(manifest_path);
    const auto st = data::dataset_stats(m);
    bool ratio_ok = true;
    std::string ratio_note;
    try {
        data::check_split_ratio(m);
    } catch (const ValidationError& e) {
        ratio_ok = false;
        ratio_note = e.what();
    }
    json per_class = json::object();
    for (std::size_t c = 0; c < kNumDefectClasses; ++c)
        per_class[std::string(defect_class_name(static_cast<DefectClass>(c)))] = {
            {"images", st.imagesPerClass[c]}, {"defects", st.defectsPerClass[c]}};
    json j{{"totalImages", st.totalImages},   {"trainImages", st.trainImages},
           {"valImages", st.valImages},       {"totalDefects", st.totalDefects},
           {"trainRatio", m.trainRatio},      {"splitRatioOk", ratio_ok},
           {"perClass", per_class}};
    if (!ratio_ok) j["splitRatioNote"] = ratio_note;
    emit(j);
    return 0;
}

// ---- augment ----

int run_augment(const std::string& manifest_path, const std::string& out_manifest,
                const std::string& out_dir, const std::string& image_root, std::uint64_t seed,
                const std::vector<std::string>& target_specs) {
    const auto m = data::load_manifest(manifest_path);

    std::array<std::size_t, kNumDefectClasses> targets{};
    for (const auto& e : m.entries)
        for (const auto& inst : e.instances) ++targets[static_cast<std::size_t>(inst.classId)];
    for (const auto& spec : target_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw ValidationError("--target expects class=count, got '" + spec + "'");
        const DefectClass cls = defect_class_from_name(spec.substr(0, eq));
        targets[static_cast<std::size_t>(cls)] =
            static_cast<std::size_t>(std::stoull(spec.substr(eq + 1)));
    }

    const auto result = data::build_extend1(m, targets, seed, image_root, out_dir);
    data::save_manifest(out_manifest, result.manifest);

    std::array<std::size_t, kNumDefectClasses> after{};
    for (const auto& e : result.manifest.entries)
        for (const auto& inst : e.instances) ++after[static_cast<std::size_t>(inst.classId)];

    json records = json::array();
    for (const auto& r : result.records)
        records.push_back(
            {{"source", r.sourcePath}, {"output", r.outputPath}, {"op", r.op.describe()}});
    json per_class = json::object();
    for (std::size_t c = 0; c < kNumDefectClasses; ++c)
        per_class[std::string(defect_class_name(static_cast<DefectClass>(c)))] = {
            {"target", targets[c]}, {"after", after[c]}};

    std::cerr << "augment: generated " << result.records.size() << " images\n";
    emit(json{{"inputImages", m.entries.size()},
              {"outputImages", result.manifest.entries.size()},
              {"generated", result.records.size()},
              {"outManifest", out_manifest},
              {"perClass", per_class},
              {"records", records}});
    return 0;
}

void add_cond_flags(CLI::App* cmd, CondFlags& f, bool with_edge, bool with_prompt) {
    cmd->add_option("--config", f.config_path, "key=value config file (or UNIPCB_CONFIG)");
    cmd->add_option("--templates", f.templates_path, "prompt template file");
    if (with_edge) {
        cmd->add_option("--low-factor", f.low_factor, "low hysteresis factor on the Otsu value");
        cmd->add_option("--high-factor", f.high_factor, "high hysteresis factor on the Otsu value");
        cmd->add_option("--edge-sigma", f.edge_sigma, "Gaussian sigma before Sobel");
        cmd->add_option("--edge-radius", f.edge_radius, "Gaussian kernel radius");
        cmd->add_option("--depth-sigma", f.depth_sigma, "blur sigma of the depth stand-in");
    }
    if (with_prompt) {
        cmd->add_option("--count-threshold", f.count_threshold,
                        "defect count above which prompts aggregate per category");
        cmd->add_option("--spread-threshold", f.spread_threshold,
                        "occupied grid cells at which a layout reads scattered");
        cmd->add_option("--scale-t1", f.scale_t1, "small/medium area boundary (px^2)");
        cmd->add_option("--scale-t2", f.scale_t2, "medium/large area boundary (px^2)");
    }
    cmd->add_option("--embed-dim", f.embed_dim, "text embedding dimension");
    cmd->add_option("--embed-seed", f.embed_seed, "text embedding seed");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PCB defect image generation toolkit"};
    app.require_subcommand(1);

    CondFlags cond_flags;
    auto* conditions = app.add_subcommand("conditions", "edge/depth/prompt conditions for an image");
    conditions->add_option("--image", cond_flags.image, "input image (png or pgm)")->required();
    conditions->add_option("--boxes", cond_flags.boxes, "defect boxes (JSON lines)")->required();
    conditions->add_option("--out-dir", cond_flags.out_dir, "output directory")->required();
    add_cond_flags(conditions, cond_flags, true, true);

    CondFlags prompt_flags;
    auto* prompt = app.add_subcommand("prompt", "structured text prompt for a box list");
    prompt->add_option("--image", prompt_flags.image, "image the boxes live in")->required();
    prompt->add_option("--boxes", prompt_flags.boxes, "defect boxes (JSON lines)")->required();
    add_cond_flags(prompt, prompt_flags, false, true);

    DiffuseFlags diffuse_flags;
    CondFlags diffuse_cond_flags;
    auto* diffuse = app.add_subcommand("diffuse", "deterministic DDIM sampling demo");
    diffuse->add_option("--out", diffuse_flags.out_dir, "output directory")->required();
    diffuse->add_option("--steps", diffuse_flags.steps, "sampling steps");
    diffuse->add_option("--timesteps", diffuse_flags.timesteps, "schedule length T");
    diffuse->add_option("--seed", diffuse_flags.seed, "master seed");
    diffuse->add_option("--latent-channels", diffuse_flags.latent_channels, "latent channels");
    diffuse->add_option("--cond-image", diffuse_flags.cond_image, "64x64 conditioning image");
    diffuse->add_option("--boxes", diffuse_flags.boxes, "defect boxes for the conditioning image");
    add_cond_flags(diffuse, diffuse_cond_flags, true, true);

    std::string check_filter;
    std::size_t check_workers = 0;
    auto* blocks = app.add_subcommand("blocks-check", "detector block invariant sweep");
    blocks->add_option("--case", check_filter, "substring filter on case names");
    blocks->add_option("--workers", check_workers, "worker threads (0 = hardware)");

    std::string pred_path, gt_path, iou_spec = "0.5:0.95";
    bool all_point = false;
    auto* eval_det = app.add_subcommand("eval-det", "detection metrics against ground truth");
    eval_det->add_option("--pred", pred_path, "predictions (JSON lines)")->required();
    eval_det->add_option("--gt", gt_path, "ground truth (JSON lines)")->required();
    eval_det->add_option("--iou", iou_spec, "operating IoU, or the 0.5:0.95 grid");
    eval_det->add_flag("--all-point", all_point, "integrate the exact PR curve instead of 101 points");

    std::string real_feats, gen_feats, pairs_dir;
    auto* eval_gen = app.add_subcommand("eval-gen", "generation metrics from features and pairs");
    eval_gen->add_option("--real-feats", real_feats, "real feature CSV")->required();
    eval_gen->add_option("--gen-feats", gen_feats, "generated feature CSV")->required();
    eval_gen->add_option("--pairs", pairs_dir, "directory of *.real.* / *.gen.* image pairs");

    std::string stats_manifest;
    auto* stats = app.add_subcommand("stats", "dataset manifest statistics");
    stats->add_option("--manifest", stats_manifest, "dataset manifest (JSON lines)")->required();

    std::string aug_manifest, aug_out_manifest, aug_out_dir, aug_image_root;
    std::uint64_t aug_seed = 0;
    std::vector<std::string> aug_targets;
    auto* augment = app.add_subcommand("augment", "extend a dataset to per-class defect targets");
    augment->add_option("--manifest", aug_manifest, "input manifest")->required();
    augment->add_option("--out-manifest", aug_out_manifest, "output manifest")->required();
    augment->add_option("--out-dir", aug_out_dir, "directory for generated images")->required();
    augment->add_option("--image-root", aug_image_root, "root for relative image paths");
    augment->add_option("--seed", aug_seed, "augmentation seed");
    augment->add_option("--target", aug_targets, "class=count floor, repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }

    try {
        if (conditions->parsed()) return run_conditions(conditions, cond_flags);
        if (prompt->parsed()) return run_prompt(prompt, prompt_flags);
        if (diffuse->parsed()) return run_diffuse(diffuse, diffuse_flags, diffuse_cond_flags);
        if (blocks->parsed()) return run_blocks_check(check_filter, check_workers);
        if (eval_det->parsed()) return run_eval_det(pred_path, gt_path, iou_spec, all_point);
        if (eval_gen->parsed()) return run_eval_gen(real_feats, gen_feats, pairs_dir);
        if (stats->parsed()) return run_stats(stats_manifest);
        if (augment->parsed()) return run_augment(aug_manifest, aug_out_manifest, aug_out_dir,
                                                  aug_image_root, aug_seed, aug_targets);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 2;
}
