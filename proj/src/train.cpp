// SPDX-License-Identifier: Apache-2.0
#include "wespe/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "wespe/checkpoint.hpp"
#include "wespe/errors.hpp"
#include "wespe/image.hpp"

namespace fs = std::filesystem;

namespace wespe {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string TrainConfig::serialize() const {
    std::map<std::string, std::string> kv{
        {"iterations", std::to_string(iterations)},
        {"batch_size", std::to_string(batch_size)},
        {"patch_size", std::to_string(patch_size)},
        {"learning_rate", fmt(learning_rate)},
        {"adam_beta1", fmt(adam_beta1)},
        {"adam_beta2", fmt(adam_beta2)},
        {"adam_eps", fmt(adam_eps)},
        {"content_weight", fmt(content_weight)},
        {"adversarial_weight", fmt(adversarial_weight)},
        {"tv_weight", fmt(tv_weight)},
        {"perceptual_layer", perceptual_layer},
        {"blur_amplitude", fmt(blur_amplitude)},
        {"blur_sigma", fmt(blur_sigma)},
        {"blur_radius", std::to_string(blur_radius)},
        {"blur_sigma_squared", blur_sigma_squared ? "true" : "false"},
        {"tv_isotropic", tv_isotropic ? "true" : "false"},
        {"seed", std::to_string(seed)},
        {"checkpoint_every", std::to_string(checkpoint_every)},
        {"source_dir", source_dir},
        {"target_dir", target_dir},
        {"checkpoint_dir", checkpoint_dir},
        {"features_path", features_path},
        {"generator_width", std::to_string(generator_width)},
        {"residual_blocks", std::to_string(residual_blocks)},
        {"generator_entry_kernel", std::to_string(generator_entry_kernel)},
        {"disc_width_scale", fmt(disc_width_scale)},
        {"disc_fc_units", std::to_string(disc_fc_units)},
        {"recursive", recursive ? "true" : "false"},
        {"deterministic", deterministic ? "true" : "false"},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

uint64_t TrainConfig::hash() const {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : serialize()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

static bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError("config: bad boolean for " + key + ": " + v);
}

void TrainConfig::set(const std::string& key, const std::string& value) {
    try {
        if (key == "iterations") iterations = std::stol(value);
        else if (key == "batch_size") batch_size = std::stoi(value);
        else if (key == "patch_size") patch_size = std::stoi(value);
        else if (key == "learning_rate") learning_rate = std::stod(value);
        else if (key == "adam_beta1") adam_beta1 = std::stod(value);
        else if (key == "adam_beta2") adam_beta2 = std::stod(value);
        else if (key == "adam_eps") adam_eps = std::stod(value);
        else if (key == "content_weight") content_weight = std::stod(value);
        else if (key == "adversarial_weight") adversarial_weight = std::stod(value);
        else if (key == "tv_weight") tv_weight = std::stod(value);
        else if (key == "perceptual_layer") perceptual_layer = value;
        else if (key == "blur_amplitude") blur_amplitude = std::stod(value);
        else if (key == "blur_sigma") blur_sigma = std::stod(value);
        else if (key == "blur_radius") blur_radius = std::stoi(value);
        else if (key == "blur_sigma_squared") blur_sigma_squared = parse_bool(value, key);
        else if (key == "tv_isotropic") tv_isotropic = parse_bool(value, key);
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "checkpoint_every") checkpoint_every = std::stol(value);
        else if (key == "source_dir") source_dir = value;
        else if (key == "target_dir") target_dir = value;
        else if (key == "checkpoint_dir") checkpoint_dir = value;
        else if (key == "features_path") features_path = value;
        else if (key == "generator_width") generator_width = std::stoi(value);
        else if (key == "residual_blocks") residual_blocks = std::stoi(value);
        else if (key == "generator_entry_kernel") generator_entry_kernel = std::stoi(value);
        else if (key == "disc_width_scale") disc_width_scale = std::stod(value);
        else if (key == "disc_fc_units") disc_fc_units = std::stoi(value);
        else if (key == "recursive") recursive = parse_bool(value, key);
        else if (key == "deterministic") deterministic = parse_bool(value, key);
        else throw ValidationError("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw ValidationError("config: bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw ValidationError("config: value out of range for " + key + ": " + value);
    }
}

TrainConfig TrainConfig::parse(const std::string& text) {
    TrainConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hashpos = line.find('#');
        if (hashpos != std::string::npos) line = line.substr(0, hashpos);
        auto strip = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            size_t b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: line " + std::to_string(lineno) +
                                  " is not key = value: " + line);
        cfg.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return cfg;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

void TrainConfig::validate() const {
    if (iterations < 0) throw ValidationError("config: iterations must be >= 0");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (patch_size < generator_entry_kernel)
        throw ValidationError("config: patch_size below generator minimum input");
    if (checkpoint_every < 1)
        throw ValidationError("config: checkpoint_every must be >= 1");
    if (residual_blocks < 1)
        throw ValidationError("config: residual_blocks must be >= 1");
    if (generator_width < 1)
        throw ValidationError("config: generator_width must be >= 1");
    if (learning_rate <= 0.0)
        throw ValidationError("config: learning_rate must be positive");
    if (blur_radius < 0)
        throw ValidationError("config: blur_radius must be >= 0");
    if (features_path.empty())
        throw ValidationError("config: features_path is required");
}

BundleConfig TrainConfig::bundle_config() const {
    BundleConfig bc;
    bc.generator.width = generator_width;
    bc.generator.blocks = residual_blocks;
    bc.generator.entry_kernel = generator_entry_kernel;
    bc.patch_size = patch_size;
    bc.features_path = features_path;
    bc.perceptual_layer = perceptual_layer;
    bc.seed = seed;
    bc.disc_fc_units = disc_fc_units;
    for (auto& c : bc.disc_convs)
        c.out_c = std::max(1, static_cast<int>(std::lround(c.out_c *
                                                           disc_width_scale)));
    return bc;
}

BlurKernel TrainConfig::make_kernel() const {
    return make_blur_kernel(blur_radius, blur_amplitude, blur_sigma,
                            blur_sigma_squared);
}

TrainState make_train_state(const TrainConfig& cfg) {
    cfg.validate();
    TrainState s;
    s.cfg = cfg;
    s.bundle = build_bundle(cfg.bundle_config());
    s.kernel = cfg.make_kernel();
    s.opt_g = nn::Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                       cfg.adam_eps);
    s.opt_dc = nn::Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                        cfg.adam_eps);
    s.opt_dt = nn::Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                        cfg.adam_eps);
    return s;
}

LossBreakdown train_step(TrainState& s, const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y))
        throw ValidationError("train_step: x and y must be same-shape batches");
    LossBreakdown out;
    ModelBundle& b = s.bundle;

    // Fresh generator samples, detached for the discriminator updates.
    Tensor fake = b.G.forward(x);

    // d(-log p)/dp and d(-log(1-p))/dp, zero where the clamp binds.
    auto grad_real = [](const Tensor& p) {
        Tensor g(p.n(), 1, 1, 1);
        for (int i = 0; i < p.n(); ++i)
            g[i] = (p[i] < kProbEps || p[i] > 1.0 - kProbEps) ? 0.0 : -1.0 / p[i];
        return g;
    };
    auto grad_fake = [](const Tensor& p) {
        Tensor g(p.n(), 1, 1, 1);
        for (int i = 0; i < p.n(); ++i) {
            double q = 1.0 - p[i];
            g[i] = (q < kProbEps || q > 1.0 - kProbEps) ? 0.0 : 1.0 / q;
        }
        return g;
    };

    {  // D_c on blurred real/fake (backward directly follows each forward)
        Tensor pr = b.Dc.forward(blur(y, s.kernel));
        b.Dc.backward(grad_real(pr), /*accumulate=*/true);
        Tensor pf = b.Dc.forward(blur(fake, s.kernel));
        b.Dc.backward(grad_fake(pf), /*accumulate=*/true);
        out.d_color = discriminator_loss(pr, pf);
        s.opt_dc.step(b.dc_params());
    }
    {  // D_t on grayscale real/fake
        Tensor pr = b.Dt.forward(to_grayscale(y));
        b.Dt.backward(grad_real(pr), /*accumulate=*/true);
        Tensor pf = b.Dt.forward(to_grayscale(fake));
        b.Dt.backward(grad_fake(pf), /*accumulate=*/true);
        out.d_texture = discriminator_loss(pr, pf);
        s.opt_dt.step(b.dt_params());
    }

    // Joint G/F update on the total objective, against the updated
    // discriminators.
    Tensor enhanced = b.G.forward(x);
    Tensor g_color, g_texture, g_tv;
    out.color = color_loss_grad(enhanced, b.Dc, s.kernel, g_color);
    out.texture = texture_loss_grad(enhanced, b.Dt, g_texture);
    out.tv = tv_loss_grad(enhanced, g_tv, s.cfg.tv_isotropic);

    Tensor x_rec = b.F.forward(enhanced);
    Tensor g_xrec;
    out.content = content_loss_grad(x, x_rec, b.features, b.perceptual_layer,
                                    g_xrec);
    Tensor g_enh = b.F.backward(g_xrec, /*accumulate=*/true);
    g_enh *= s.cfg.content_weight;
    g_enh.axpy(s.cfg.adversarial_weight, g_color);
    g_enh.axpy(s.cfg.adversarial_weight, g_texture);
    g_enh.axpy(s.cfg.tv_weight, g_tv);
    b.G.backward(g_enh, /*accumulate=*/true);
    s.opt_g.step(b.generator_params());

    out.total = s.cfg.content_weight * out.content +
                s.cfg.adversarial_weight * (out.color + out.texture) +
                s.cfg.tv_weight * out.tv;
    ++s.step;
    for (double v : {out.content, out.color, out.texture, out.tv, out.total,
                     out.d_color, out.d_texture})
        if (!std::isfinite(v))
            throw NumericError("train_step: non-finite loss at step " +
                               std::to_string(s.step) + ": " +
                               out.log_line(s.step));
    return out;
}

void save_checkpoint(const TrainState& s, const std::string& path,
                     const UnpairedDataset* ds) {
    nlohmann::json manifest;
    manifest["kind"] = "wespe-checkpoint";
    manifest["step"] = s.step;
    manifest["config"] = s.cfg.serialize();
    manifest["config_hash"] = s.cfg.hash();
    manifest["bundle"] = s.cfg.bundle_config().to_json();
    manifest["adam_t"] = {{"g", s.opt_g.t()},
                          {"dc", s.opt_dc.t()},
                          {"dt", s.opt_dt.t()}};
    if (ds) {
        const Rng& sr = const_cast<UnpairedDataset*>(ds)->source_rng();
        const Rng& tr = const_cast<UnpairedDataset*>(ds)->target_rng();
        manifest["rng"] = {{"src_state", sr.state()},
                           {"src_inc", sr.inc()},
                           {"tgt_state", tr.state()},
                           {"tgt_inc", tr.inc()}};
    }

    std::vector<std::pair<std::string, const Tensor*>> entries;
    auto& self = const_cast<TrainState&>(s);
    auto add_group = [&](std::vector<nn::Param*> ps, nn::Adam& opt,
                         const std::string& tag) {
        for (auto* p : ps) entries.emplace_back(p->name, &p->value);
        auto& m = opt.moments_m();
        auto& v = opt.moments_v();
        for (size_t i = 0; i < m.size(); ++i) {
            entries.emplace_back("adam." + tag + ".m." + ps[i]->name, &m[i]);
            entries.emplace_back("adam." + tag + ".v." + ps[i]->name, &v[i]);
        }
    };
    add_group(self.bundle.generator_params(), self.opt_g, "g");
    add_group(self.bundle.dc_params(), self.opt_dc, "dc");
    add_group(self.bundle.dt_params(), self.opt_dt, "dt");
    save_archive(path, manifest, entries);
}

void load_checkpoint(TrainState& s, const std::string& path,
                     UnpairedDataset* ds) {
    Archive a = load_archive(path);
    if (a.manifest.value("kind", "") != "wespe-checkpoint")
        throw IoError("checkpoint: wrong kind in " + path);

    // Build a candidate state first so a bad archive leaves s untouched.
    TrainConfig cfg = TrainConfig::parse(a.manifest.at("config"));
    TrainState fresh = make_train_state(cfg);

    auto load_group = [&](std::vector<nn::Param*> ps, nn::Adam& opt,
                          const std::string& tag, long t) {
        for (auto* p : ps) p->value = a.require(p->name, p->value.shape());
        auto& m = opt.moments_m();
        auto& v = opt.moments_v();
        m.clear();
        v.clear();
        if (t > 0) {
            for (auto* p : ps) {
                m.push_back(a.require("adam." + tag + ".m." + p->name,
                                      p->value.shape()));
                v.push_back(a.require("adam." + tag + ".v." + p->name,
                                      p->value.shape()));
            }
        }
        opt.restore_t(t);
    };
    auto t = a.manifest.at("adam_t");
    load_group(fresh.bundle.generator_params(), fresh.opt_g, "g", t.at("g"));
    load_group(fresh.bundle.dc_params(), fresh.opt_dc, "dc", t.at("dc"));
    load_group(fresh.bundle.dt_params(), fresh.opt_dt, "dt", t.at("dt"));
    fresh.step = a.manifest.at("step");

    if (ds && a.manifest.contains("rng")) {
        auto r = a.manifest["rng"];
        ds->source_rng().restore(r.at("src_state"), r.at("src_inc"), false, 0.0);
        ds->target_rng().restore(r.at("tgt_state"), r.at("tgt_inc"), false, 0.0);
    }
    s = std::move(fresh);
}

Generator load_generator(const std::string& checkpoint_path) {
    Archive a = load_archive(checkpoint_path);
    if (a.manifest.value("kind", "") != "wespe-checkpoint")
        throw IoError("checkpoint: wrong kind in " + checkpoint_path);
    BundleConfig bc = BundleConfig::from_json(a.manifest.at("bundle"));
    Generator g("G", bc.generator);
    for (auto* p : g.params()) p->value = a.require(p->name, p->value.shape());
    return g;
}

std::string train(const TrainConfig& cfg,
                  const std::optional<std::string>& resume,
                  const std::function<void(long, const LossBreakdown&)>& on_step) {
    cfg.validate();
    // Dataset problems must surface before any training work.
    UnpairedDataset ds(cfg.source_dir, cfg.target_dir, cfg.patch_size, cfg.seed,
                       cfg.recursive);

    TrainState s = make_train_state(cfg);
    if (resume) load_checkpoint(s, *resume, &ds);

    fs::create_directories(cfg.checkpoint_dir);
    std::ofstream log(fs::path(cfg.checkpoint_dir) / "train.log",
                      resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("train: cannot open run log in " + cfg.checkpoint_dir);

    auto ckpt_path = [&](long step) {
        return (fs::path(cfg.checkpoint_dir) /
                ("step-" + std::to_string(step) + ".ckpt"))
            .string();
    };
    auto write_ckpt = [&](long step) {
        std::string p = ckpt_path(step);
        save_checkpoint(s, p, &ds);
        fs::copy_file(p, fs::path(cfg.checkpoint_dir) / "latest.ckpt",
                      fs::copy_options::overwrite_existing);
        return p;
    };

    std::string last = write_ckpt(s.step);  // initial (or resumed) state
    while (s.step < cfg.iterations) {
        auto [x, y] = ds.sample_patch_batch(cfg.batch_size);
        LossBreakdown lb = train_step(s, x, y);
        std::string line = lb.log_line(s.step);
        std::cout << line << "\n";
        log << line << "\n";
        log.flush();
        if (on_step) on_step(s.step, lb);
        if (s.step % cfg.checkpoint_every == 0 || s.step == cfg.iterations)
            last = write_ckpt(s.step);
    }
    if (!fs::exists(ckpt_path(s.step))) last = write_ckpt(s.step);
    return last;
}

}  // namespace wespe
