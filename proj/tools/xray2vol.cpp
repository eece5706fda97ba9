// Command-line front end for the single-image tomography pipeline.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xray2vol/baselines.hpp"
#include "xray2vol/dataset.hpp"
#include "xray2vol/error.hpp"
#include "xray2vol/evaluate.hpp"
#include "xray2vol/fusion.hpp"
#include "xray2vol/image.hpp"
#include "xray2vol/net/network.hpp"
#include "xray2vol/net/train.hpp"
#include "xray2vol/parallel.hpp"
#include "xray2vol/projector.hpp"
#include "xray2vol/render.hpp"
#include "xray2vol/volume.hpp"

namespace fs = std::filesystem;
using namespace xray2vol;

namespace {

std::vector<double> parse_numbers(const std::string& s, std::size_t expected, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidInput(std::string("cannot parse ") + what + " '" + s + "'");
        }
    }
    if (expected && out.size() != expected)
        throw InvalidInput(std::string(what) + " needs " + std::to_string(expected) + " comma-separated numbers");
    return out;
}

Vec3 parse_direction(const std::string& s) {
    if (s == "top") return {0, 0, 1};
    if (s == "front") return {0, 1, 0};
    if (s == "side") return {1, 0, 0};
    auto n = parse_numbers(s, 3, "direction");
    return {n[0], n[1], n[2]};
}

ViewPose parse_pose(const std::string& s, bool mirrored) {
    ViewPose p = make_pose(normalize(parse_direction(s)), mirrored);
    p.validate();
    return p;
}

bool has_ext(const fs::path& p, const char* ext) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ext;
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw std::runtime_error("no such file: " + p.string());
}

Image read_xray(const fs::path& p, double gamma) {
    require_file(p);
    if (has_ext(p, ".png")) return gamma_decode(read_png_gray(p), gamma);
    return load_image(p);
}

void write_xray(const Image& img, const fs::path& p) {
    if (has_ext(p, ".png"))
        write_png_gray16(img, p);
    else
        save_image(img, p);
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

struct FusionFlags {
    bool disabled = false;
    std::string policy = "proportional";
    std::string error_mode = "exact";
    double beta = 2.0;

    void add(CLI::App* cmd) {
        cmd->add_flag("--no-fusion", disabled, "Write the coarse network output");
        cmd->add_option("--fusion-policy", policy, "proportional | uniform | first_slice")->capture_default_str();
        cmd->add_option("--fusion-beta", beta, "Sharpness exponent for the proportional policy")->capture_default_str();
        cmd->add_option("--fusion-error-mode", error_mode, "exact | paper_literal")->capture_default_str();
    }
    FusionConfig config(double chi) const {
        FusionConfig c;
        c.policy = parse_fusion_policy(policy);
        c.error_mode = parse_fusion_error_mode(error_mode);
        c.beta = beta;
        c.chi = chi;
        c.validate();
        return c;
    }
};

// ---- gen-dataset ----

struct GenArgs {
    DatasetConfig cfg;
    fs::path out;
};

int run_gen(const GenArgs& a) {
    DatasetManifest m = build_dataset(a.cfg, a.out);
    std::cout << "wrote " << m.samples.size() << " samples (" << m.count(Split::train) << " train, "
              << m.count(Split::validation) << " validation) to " << a.out.string() << "\n";
    return 0;
}

// ---- train ----

struct TrainArgs {
    fs::path manifest, out, loss_log;
    nn::TrainHyper hyper;
    int base_channels = 32, min_resolution = 8, blocks = 3;
};

int run_train(TrainArgs a) {
    require_file(a.manifest);
    DatasetManifest m = load_manifest(a.manifest);
    if (m.samples.empty()) throw InvalidInput("manifest has no samples");
    auto train_set = load_split(m, Split::train);
    auto val_set = load_split(m, Split::validation);
    if (train_set.empty()) throw InvalidInput("manifest has no training samples");
    nn::NetworkConfig cfg{train_set[0].image.width(), a.min_resolution, a.base_channels, train_set[0].volume.dims().nz, a.blocks};
    cfg.validate();
    a.hyper.on_epoch = [](const nn::EpochLog& r) {
        std::cout << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << " (" << r.seconds << " s)"
                  << std::endl;
    };
    nn::TrainResult res = nn::train(train_set, val_set, cfg, a.hyper);
    ensure_parent(a.out);
    nn::save_weights(cfg, res.weights, a.out);
    fs::path log = a.loss_log.empty() ? fs::path(a.out.string() + ".loss.csv") : a.loss_log;
    nn::save_loss_csv(res.log, log);
    std::cout << "best epoch " << res.best_epoch << "; weights " << a.out.string() << ", loss log " << log.string() << "\n";
    return 0;
}

// ---- infer ----

struct InferArgs {
    fs::path weights, image, out, manifest, out_dir;
    std::string split = "validation";
    double gamma = kDefaultIngestGamma;
    double chi = 10.0;
    FusionFlags fusion;
};

Volume infer_one(nn::Network& net, const Image& input, const FusionFlags& ff, double chi, bool fuse_at_output_resolution) {
    const int s = net.config().input_size;
    Image x = (input.width() == s && input.height() == s) ? input : resize_image(input, s, s);
    nn::Tensor y = net.forward(nn::images_to_tensor({&x}), nn::Mode::infer);
    Volume coarse = clamp01(nn::tensor_to_volume(y, 0));
    if (ff.disabled) return coarse;
    const Dims3 d = coarse.dims();
    const Image target = fuse_at_output_resolution ? resize_image(input, d.nx, d.ny) : input;
    FusionResult r = fuse_volume(coarse, target, ff.config(chi));
    if (r.fallback_pixels) std::cerr << r.fallback_pixels << " pixel(s) fell back to uniform fusion weights\n";
    return std::move(r.volume);
}

int run_infer(const InferArgs& a) {
    require_file(a.weights);
    nn::LoadedWeights lw = nn::load_weights(a.weights);
    nn::Network net(lw.config);
    net.set_weights(lw.weights);
    if (!a.manifest.empty()) {
        // Batch mode: outputs keep the network's resolution so they can be scored against ground truth.
        require_file(a.manifest);
        if (a.out_dir.empty()) throw InvalidInput("--manifest requires --out-dir");
        DatasetManifest m = load_manifest(a.manifest);
        std::vector<const Sample*> samples;
        if (a.split == "all") {
            for (const auto& s : m.samples) samples.push_back(&s);
        } else if (a.split == "train" || a.split == "validation" || a.split == "val") {
            samples = m.select(a.split == "train" ? Split::train : Split::validation);
        } else {
            throw InvalidInput("unknown split '" + a.split + "'");
        }
        fs::create_directories(a.out_dir);
        for (const Sample* s : samples) {
            Image img = load_image(m.resolve(s->image_path));
            save_volume(infer_one(net, img, a.fusion, m.projector.chi, true), a.out_dir / (s->id + ".xvol"));
        }
        std::cout << "wrote " << samples.size() << " volumes to " << a.out_dir.string() << "\n";
        return 0;
    }
    if (a.image.empty() || a.out.empty()) throw InvalidInput("infer needs --image and --out (or --manifest and --out-dir)");
    Image img = read_xray(a.image, a.gamma);
    Volume v = infer_one(net, img, a.fusion, a.chi, false);
    ensure_parent(a.out);
    save_volume(v, a.out);
    std::cout << "wrote " << a.out.string() << " (" << v.dims().nx << "x" << v.dims().ny << "x" << v.dims().nz << ")\n";
    return 0;
}

// ---- baseline ----

struct BaselineArgs {
    std::string method;
    fs::path manifest, query, out, out_dir;
    double gamma = kDefaultIngestGamma;
};

int run_baseline(const BaselineArgs& a) {
    require_file(a.manifest);
    DatasetManifest m = load_manifest(a.manifest);
    BaselineIndex index = BaselineIndex::from_manifest(m);
    const bool nn_method = a.method == "nn";
    auto pick = [&](const Image* img, const Volume* gt) { return nn_method ? nearest_neighbor(*img, index) : oracle(*gt, index); };
    if (!a.out_dir.empty()) {
        fs::create_directories(a.out_dir);
        auto val = m.select(Split::validation);
        for (const Sample* s : val) {
            std::optional<Image> img;
            std::optional<Volume> gt;
            if (nn_method)
                img = load_image(m.resolve(s->image_path));
            else
                gt = load_volume(m.resolve(s->volume_path));
            BaselineResult r = pick(img ? &*img : nullptr, gt ? &*gt : nullptr);
            save_volume(r.entry->volume, a.out_dir / (s->id + ".xvol"));
        }
        std::cout << "wrote " << val.size() << " " << a.method << " volumes to " << a.out_dir.string() << "\n";
        return 0;
    }
    if (a.query.empty() || a.out.empty()) throw InvalidInput("baseline needs --query and --out (or --out-dir)");
    BaselineResult r;
    if (nn_method) {
        Image q = read_xray(a.query, a.gamma);
        r = nearest_neighbor(q, index);
    } else {
        require_file(a.query);
        Volume q = load_volume(a.query);
        r = oracle(q, index);
    }
    ensure_parent(a.out);
    save_volume(r.entry->volume, a.out);
    std::cout << "match " << r.entry->id << " distance " << r.distance << "\n";
    return 0;
}

// ---- eval / ablate-depth ----

int run_eval(const fs::path& manifest, const fs::path& method_dir, const fs::path& out) {
    require_file(manifest);
    if (!fs::is_directory(method_dir)) throw std::runtime_error("no such directory: " + method_dir.string());
    DatasetManifest m = load_manifest(manifest);
    EvalReport r = evaluate(m, method_dir);
    write_report(r, out);
    write_report_summary(r, std::cout);
    if (!r.missing.empty()) {
        std::cerr << r.missing.size() << " validation sample(s) have no output in " << method_dir.string() << "\n";
        return 1;
    }
    return 0;
}

int run_ablate(const fs::path& manifest, const std::string& levels_arg, const fs::path& out) {
    require_file(manifest);
    std::vector<int> levels;
    for (double v : parse_numbers(levels_arg, 0, "levels")) {
        if (v < 1 || v != static_cast<int>(v)) throw InvalidInput("levels must be positive integers");
        levels.push_back(static_cast<int>(v));
    }
    if (levels.empty()) throw InvalidInput("no levels given");
    auto rows = depth_ablation(load_manifest(manifest), levels);
    if (out.empty()) {
        write_depth_ablation(rows, std::cout);
    } else {
        ensure_parent(out);
        std::ofstream os(out);
        write_depth_ablation(rows, os);
        if (!os) throw std::runtime_error("write failed: " + out.string());
        write_depth_ablation(rows, std::cout);
    }
    return 0;
}

// ---- render ----

struct RenderArgs {
    fs::path volume, out;
    std::string view = "top", cutaway;
    bool mirror = false, stereo = false;
    double iso = 0.1, eye_sep = 4.0;
    int size = 256, ao_samples = 16;
};

int run_render(const RenderArgs& a) {
    require_file(a.volume);
    Volume v = load_volume(a.volume);
    RenderConfig cfg;
    cfg.pose = parse_pose(a.view, a.mirror);
    cfg.iso_value = a.iso;
    cfg.width = cfg.height = a.size;
    cfg.ao_samples = a.ao_samples;
    cfg.eye_separation_deg = a.eye_sep;
    if (!a.cutaway.empty()) {
        auto b = parse_numbers(a.cutaway, 6, "cutaway box");
        cfg.clip_box = Box{{b[0], b[1], b[2]}, {b[3], b[4], b[5]}};
    }
    cfg.validate();
    ensure_parent(a.out);
    if (a.stereo)
        write_png_rgb8(render_stereo(v, cfg), a.out);
    else
        write_png_gray8(cfg.clip_box ? render_cutaway(v, cfg) : render_iso(v, cfg), a.out);
    std::cout << "wrote " << a.out.string() << "\n";
    return 0;
}

// ---- resynth ----

struct ResynthArgs {
    fs::path volume, out;
    std::string pose = "0,0,1";
    bool mirror = false;
    std::optional<double> gamma;
    double chi = 10.0;
    int steps = 0, width = 0, height = 0;
};

int run_resynth(const ResynthArgs& a) {
    require_file(a.volume);
    Volume v = load_volume(a.volume);
    ProjectorConfig pc;
    pc.chi = a.chi;
    pc.n_steps = a.steps ? a.steps : v.dims().nz;
    pc.width = a.width ? a.width : v.dims().nx;
    pc.height = a.height ? a.height : v.dims().ny;
    pc.validate();
    Image img = project(v, parse_pose(a.pose, a.mirror), pc);
    if (a.gamma) img = gamma_encode(img, *a.gamma);
    ensure_parent(a.out);
    write_xray(img, a.out);
    std::cout << "wrote " << a.out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-image x-ray tomography: datasets, training, inference, fusion, baselines and evaluation"};
    app.require_subcommand(1);
    int rc = 0;
    auto guarded = [&rc](auto fn) {
        return [&rc, fn] { rc = fn(); };
    };

    GenArgs gen;
    auto* g = app.add_subcommand("gen-dataset", "Generate a synthetic phantom dataset and manifest");
    g->add_option("--species", gen.cfg.n_species, "Number of species")->required()->check(CLI::PositiveNumber);
    g->add_option("--views", gen.cfg.views_per_species, "Views per species")->required()->check(CLI::PositiveNumber);
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--seed", gen.cfg.seed, "Random seed")->capture_default_str();
    g->add_option("--img-size", gen.cfg.image_size, "X-ray resolution")->capture_default_str()->check(CLI::PositiveNumber);
    g->add_option("--vol-size", gen.cfg.volume_size, "Ground-truth volume resolution")->capture_default_str()->check(CLI::PositiveNumber);
    g->add_option("--phantom-size", gen.cfg.phantom_size, "Source phantom resolution (0: the larger of image and volume size)")->capture_default_str();
    g->add_option("--chi", gen.cfg.chi, "Extinction coefficient")->capture_default_str();
    g->add_option("--steps", gen.cfg.n_steps, "Projector samples per ray")->capture_default_str();
    g->add_option("--val-fraction", gen.cfg.validation_fraction, "Fraction of species held out")->capture_default_str();
    g->callback(guarded([&] { return run_gen(gen); }));

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the network on a dataset");
    t->add_option("--manifest", tr.manifest, "Dataset manifest")->required();
    t->add_option("--out", tr.out, "Weights file")->required();
    t->add_option("--epochs", tr.hyper.epochs, "Epochs")->capture_default_str();
    t->add_option("--iterations", tr.hyper.iterations, "Fixed number of minibatch steps (overrides --epochs)");
    t->add_option("--lr", tr.hyper.lr, "Adam learning rate")->capture_default_str();
    t->add_option("--batch", tr.hyper.batch, "Minibatch size")->capture_default_str();
    t->add_option("--seed", tr.hyper.seed, "Initialization and shuffling seed")->capture_default_str();
    t->add_option("--loss-log", tr.loss_log, "Loss CSV (default: <out>.loss.csv)");
    t->add_option("--base-channels", tr.base_channels, "Channel cap")->capture_default_str();
    t->add_option("--min-res", tr.min_resolution, "Bottleneck resolution")->capture_default_str();
    t->add_option("--blocks", tr.blocks, "Stem blocks")->capture_default_str();
    t->callback(guarded([&] { return run_train(tr); }));

    InferArgs inf;
    auto* in = app.add_subcommand("infer", "Predict a volume from an x-ray");
    in->add_option("--weights", inf.weights, "Weights file")->required();
    in->add_option("--image", inf.image, "Input x-ray (.ximg, or .png decoded with --gamma)");
    in->add_option("--out", inf.out, "Output volume");
    in->add_option("--manifest", inf.manifest, "Batch mode: run every sample of --split");
    in->add_option("--split", inf.split, "validation | train | all")->capture_default_str();
    in->add_option("--out-dir", inf.out_dir, "Batch mode output directory (<id>.xvol)");
    in->add_option("--gamma", inf.gamma, "Display gamma of PNG input")->capture_default_str();
    in->add_option("--chi", inf.chi, "Extinction coefficient for fusion (batch mode uses the manifest's)")->capture_default_str();
    inf.fusion.add(in);
    in->callback(guarded([&] { return run_infer(inf); }));

    BaselineArgs bl;
    auto* b = app.add_subcommand("baseline", "Nearest-neighbour or oracle retrieval from the training split");
    b->add_option("--method", bl.method, "nn | oracle")->required()->check(CLI::IsMember({"nn", "oracle"}));
    b->add_option("--manifest", bl.manifest, "Dataset manifest")->required();
    b->add_option("--query", bl.query, "Query x-ray (nn) or ground-truth volume (oracle)");
    b->add_option("--out", bl.out, "Output volume");
    b->add_option("--out-dir", bl.out_dir, "Batch mode: answer every validation sample");
    b->add_option("--gamma", bl.gamma, "Display gamma of PNG queries")->capture_default_str();
    b->callback(guarded([&] { return run_baseline(bl); }));

    fs::path ev_manifest, ev_dir, ev_out;
    auto* e = app.add_subcommand("eval", "Score method outputs against validation ground truth");
    e->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
    e->add_option("--method-dir", ev_dir, "Directory of <id>.xvol outputs")->required();
    e->add_option("--out", ev_out, "Report directory")->required();
    e->callback(guarded([&] { return run_eval(ev_manifest, ev_dir, ev_out); }));

    fs::path ab_manifest, ab_out;
    std::string ab_levels = "8,16,32,64";
    auto* ab = app.add_subcommand("ablate-depth", "DSSIM of ground truth after depth down/up-sampling");
    ab->add_option("--manifest", ab_manifest, "Dataset manifest")->required();
    ab->add_option("--levels", ab_levels, "Comma-separated slice counts")->capture_default_str();
    ab->add_option("--out", ab_out, "CSV output (default: stdout only)");
    ab->callback(guarded([&] { return run_ablate(ab_manifest, ab_levels, ab_out); }));

    RenderArgs ra;
    auto* r = app.add_subcommand("render", "Iso-surface rendering to PNG");
    r->add_option("--volume", ra.volume, "Input volume")->required();
    r->add_option("--out", ra.out, "Output PNG")->required();
    r->add_option("--view", ra.view, "top | front | side | x,y,z")->capture_default_str();
    r->add_flag("--mirror", ra.mirror, "Mirror the view");
    r->add_option("--iso", ra.iso, "Iso value")->capture_default_str();
    r->add_option("--cutaway", ra.cutaway, "Clip box x0,y0,z0,x1,y1,z1");
    r->add_flag("--stereo", ra.stereo, "Red-cyan anaglyph");
    r->add_option("--eye-sep", ra.eye_sep, "Stereo eye separation in degrees")->capture_default_str();
    r->add_option("--size", ra.size, "Image width and height")->capture_default_str()->check(CLI::PositiveNumber);
    r->add_option("--ao-samples", ra.ao_samples, "Ambient occlusion rays per pixel")->capture_default_str();
    r->callback(guarded([&] { return run_render(ra); }));

    ResynthArgs rs;
    auto* s = app.add_subcommand("resynth", "Re-project a volume into an x-ray");
    s->add_option("--volume", rs.volume, "Input volume")->required();
    s->add_option("--out", rs.out, "Output x-ray (.ximg or 16-bit .png)")->required();
    s->add_option("--pose", rs.pose, "View direction x,y,z or top|front|side")->capture_default_str();
    s->add_flag("--mirror", rs.mirror, "Mirror the view");
    s->add_option("--gamma", rs.gamma, "Apply display gamma to the output");
    s->add_option("--chi", rs.chi, "Extinction coefficient")->capture_default_str();
    s->add_option("--steps", rs.steps, "Samples per ray (default: volume depth)");
    s->add_option("--width", rs.width, "Output width (default: volume x size)");
    s->add_option("--height", rs.height, "Output height (default: volume y size)");
    s->callback(guarded([&] { return run_resynth(rs); }));

    try {
        configure_threads_from_env();
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return rc;
}
