// SPDX-License-Identifier: Apache-2.0
//
// wespe: train, enhance, evaluate, ffs-train, ffs-score, init-features.
// Exit codes: 0 ok, 2 usage, 3 validation/input, 4 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wespe/errors.hpp"
#include "wespe/image.hpp"
#include "wespe/metrics.hpp"
#include "wespe/models.hpp"
#include "wespe/train.hpp"

namespace fs = std::filesystem;
using namespace wespe;

namespace {

TrainConfig effective_config(const std::string& config_path,
                             const std::vector<std::string>& overrides) {
    TrainConfig cfg = TrainConfig::load(config_path);
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ValidationError("--set expects key=value, got: " + ov);
        cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
    }
    return cfg;
}

void echo_config(const TrainConfig& cfg) {
    std::cout << "# effective config\n" << cfg.serialize();
    std::cout << "config_hash=" << std::hex << cfg.hash() << std::dec << "\n";
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::optional<std::string>& resume) {
    TrainConfig cfg = effective_config(config_path, overrides);
    echo_config(cfg);
    std::string final_ckpt = train(cfg, resume);
    std::cout << "final_checkpoint=" << final_ckpt << "\n";
    return 0;
}

int cmd_enhance(const std::string& ckpt, const std::string& in,
                const std::string& out, std::optional<int> tile) {
    Generator g = load_generator(ckpt);
    auto one = [&](const std::string& src, const std::string& dst) {
        Tensor img = load_image(src);
        if (img.c() == 1) {  // replicate grayscale, the generator wants RGB
            Tensor rgb(1, 3, img.h(), img.w());
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < img.h(); ++y)
                    for (int x = 0; x < img.w(); ++x)
                        rgb.at(0, c, y, x) = img.at(0, 0, y, x);
            img = rgb;
        }
        fs::create_directories(fs::path(dst).parent_path().empty()
                                   ? "."
                                   : fs::path(dst).parent_path());
        save_image(enhance(g, img, tile), dst);
    };
    if (fs::is_directory(in)) {
        for (const auto& e : fs::recursive_directory_iterator(in)) {
            if (!e.is_regular_file()) continue;
            fs::path rel = fs::relative(e.path(), in);
            one(e.path().string(), (fs::path(out) / rel).string());
        }
    } else {
        one(in, out);
    }
    return 0;
}

int cmd_evaluate(const std::string& enhanced,
                 const std::optional<std::string>& reference,
                 const std::optional<std::string>& ffs_ckpt,
                 const std::optional<std::string>& external,
                 const std::string& out) {
    EvaluateOptions opts;
    opts.reference_dir = reference;
    opts.external_scorer_cmd = external;
    FfsScorer scorer;
    if (ffs_ckpt) {
        scorer = FfsScorer::load(*ffs_ckpt);
        opts.scorer = &scorer;
        opts.checkpoint_id = *ffs_ckpt;
    }
    QualityReport rep = evaluate(enhanced, opts);
    std::cout << rep.to_table();
    std::ofstream os(out);
    if (!os) throw IoError("evaluate: cannot write " + out);
    bool csv = out.size() >= 4 && out.substr(out.size() - 4) == ".csv";
    os << (csv ? rep.to_csv() : rep.to_table());
    return 0;
}

int cmd_ffs_train(const std::string& records_path, const FfsConfig& cfg,
                  const std::string& out) {
    auto records = read_fave_records(records_path);
    auto labeled = label_faves(records);
    double acc = 0.0;
    FfsScorer scorer = train_ffs(labeled, cfg, &acc);
    scorer.save(out);
    std::cout << "validation_accuracy=" << acc << "\n"
              << "scorer=" << out << "\n";
    return 0;
}

int cmd_ffs_score(const std::string& ckpt, const std::string& in) {
    FfsScorer scorer = FfsScorer::load(ckpt);
    auto score_one = [&](const std::string& path) {
        Tensor img = load_image(path);
        if (img.c() == 1) {
            Tensor rgb(1, 3, img.h(), img.w());
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < img.h(); ++y)
                    for (int x = 0; x < img.w(); ++x)
                        rgb.at(0, c, y, x) = img.at(0, 0, y, x);
            img = rgb;
        }
        std::cout << path << "\t" << scorer.score(img) << "\n";
    };
    if (fs::is_directory(in)) {
        for (const auto& f : list_images(in)) score_one(f);
    } else {
        score_one(in);
    }
    return 0;
}

int cmd_init_features(const std::string& out, double width_scale,
                      uint64_t seed, double input_scale,
                      std::vector<double> mean) {
    std::array<double, 3> m{0, 0, 0};
    if (!mean.empty()) {
        if (mean.size() != 3)
            throw ValidationError("--input-mean expects three values");
        m = {mean[0], mean[1], mean[2]};
    }
    FeatureExtractor::write_archive(
        out, FeatureExtractor::vgg19_layers(width_scale), seed, input_scale, m);
    std::cout << "features=" << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"WESPE-style weakly supervised photo enhancement toolkit"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "run the training loop");
    std::string config_path;
    std::vector<std::string> overrides;
    std::string resume_path;
    train_cmd->add_option("--config", config_path, "flat key = value config file")
        ->required();
    train_cmd->add_option("--set", overrides,
                          "key=value override (repeatable, beats the file)");
    train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");

    // enhance
    auto* enh = app.add_subcommand("enhance", "enhance an image or directory");
    std::string enh_ckpt, enh_in, enh_out;
    int tile = 0;
    enh->add_option("--checkpoint", enh_ckpt)->required();
    enh->add_option("--in", enh_in)->required();
    enh->add_option("--out", enh_out)->required();
    enh->add_option("--tile", tile, "tile size for memory-bounded inference");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "compute quality metrics");
    std::string ev_enh, ev_ref, ev_ffs, ev_ext, ev_out;
    ev->add_option("--enhanced", ev_enh)->required();
    ev->add_option("--reference", ev_ref, "paired reference directory");
    ev->add_option("--ffs-checkpoint", ev_ffs, "trained FFS scorer archive");
    ev->add_option("--external-scorer", ev_ext,
                   "command printing one score per image path");
    ev->add_option("--out", ev_out, "report file (.txt table or .csv)")
        ->required();

    // ffs-train
    auto* ft = app.add_subcommand("ffs-train", "train the FFS quality scorer");
    std::string ft_records, ft_out;
    FfsConfig fcfg;
    ft->add_option("--records", ft_records,
                   "TSV: path<TAB>views<TAB>faves or path<TAB>label")
        ->required();
    ft->add_option("--features", fcfg.features_path, "feature archive")
        ->required();
    ft->add_option("--out", ft_out)->required();
    ft->add_option("--learning-rate", fcfg.learning_rate);
    ft->add_option("--batch-size", fcfg.batch_size);
    ft->add_option("--patch", fcfg.patch);
    ft->add_option("--max-epochs", fcfg.max_epochs);
    ft->add_option("--patience", fcfg.patience);
    ft->add_option("--val-fraction", fcfg.val_fraction);
    ft->add_option("--seed", fcfg.seed);

    // ffs-score
    auto* fsc = app.add_subcommand("ffs-score", "score images with a scorer");
    std::string fs_ckpt, fs_in;
    fsc->add_option("--checkpoint", fs_ckpt)->required();
    fsc->add_option("--in", fs_in, "image or directory")->required();

    // init-features
    auto* inf = app.add_subcommand(
        "init-features", "write a feature archive with seeded random weights");
    std::string inf_out;
    double inf_scale = 1.0, inf_input_scale = 1.0;
    uint64_t inf_seed = 0;
    std::vector<double> inf_mean;
    inf->add_option("--out", inf_out)->required();
    inf->add_option("--width-scale", inf_scale,
                    "channel width multiplier for desk-scale runs");
    inf->add_option("--seed", inf_seed);
    inf->add_option("--input-scale", inf_input_scale);
    inf->add_option("--input-mean", inf_mean, "per-channel mean (3 values)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*train_cmd)
            return cmd_train(config_path, overrides,
                             resume_path.empty()
                                 ? std::nullopt
                                 : std::optional<std::string>(resume_path));
        if (*enh)
            return cmd_enhance(enh_ckpt, enh_in, enh_out,
                               tile > 0 ? std::optional<int>(tile)
                                        : std::nullopt);
        if (*ev)
            return cmd_evaluate(
                ev_enh,
                ev_ref.empty() ? std::nullopt : std::optional<std::string>(ev_ref),
                ev_ffs.empty() ? std::nullopt : std::optional<std::string>(ev_ffs),
                ev_ext.empty() ? std::nullopt : std::optional<std::string>(ev_ext),
                ev_out);
        if (*ft) return cmd_ffs_train(ft_records, fcfg, ft_out);
        if (*fsc) return cmd_ffs_score(fs_ckpt, fs_in);
        if (*inf)
            return cmd_init_features(inf_out, inf_scale, inf_seed,
                                     inf_input_scale, inf_mean);
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    } catch (const ValidationError& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
