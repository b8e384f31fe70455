#pragma once

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "plcnn/cli/checkpoint.hpp"
#include "plcnn/cli/run_config.hpp"
#include "plcnn/data/synthetic.hpp"
#include "plcnn/eval/reports.hpp"
#include "plcnn/gradcam/gradcam.hpp"
#include "plcnn/gradcam/heatmap.hpp"

namespace plcnn::cli {

inline std::string key_help(const std::string& key) {
    static const std::map<std::string, std::string> help{
        {"preset", "desk64 or paper224"},
        {"data", "dataset root, one directory per class"},
        {"k", "number of cross-validation folds"},
        {"seed", "seed for initialization, folds and shuffling"},
        {"iterations", "training iterations (per fold for xval)"},
        {"batch", "minibatch size"},
        {"lr", "initial learning rate"},
        {"momentum", "SGD momentum"},
        {"weight-decay", "L2 weight decay"},
        {"halving-period", "iterations between learning-rate halvings"},
        {"augment", "on or off"},
        {"mean", "per-channel normalization mean, comma separated"},
        {"std", "per-channel normalization std, comma separated"},
        {"out", "output directory"},
        {"log-interval", "iterations between training log rows"},
        {"checkpoint-interval", "iterations between checkpoints"},
        {"fractions", "ablation train fractions, comma separated"},
        {"classes", "class count (synth, import-weights)"},
        {"per-class", "images per class (synth)"},
        {"size", "image side in pixels (synth)"}};
    const auto it = help.find(key);
    return it == help.end() ? std::string() : it->second;
}


namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 1, kIoError = 2, kNumericError = 3 };

/// Maps an in-flight exception to the process exit code and prints it.
inline int report_exception(std::exception_ptr e, std::ostream& err) {
    try {
        std::rethrow_exception(e);
    } catch (const NumericError& x) {
        err << "error: " << x.what() << '\n';
        return kNumericError;
    } catch (const IoError& x) {
        err << "error: " << x.what() << '\n';
        return kIoError;
    } catch (const fs::filesystem_error& x) {
        err << "error: " << x.what() << '\n';
        return kIoError;
    } catch (const ConfigError& x) {
        err << "error: " << x.what() << '\n';
        return kConfigError;
    } catch (const InputError& x) {
        err << "error: " << x.what() << '\n';
        return kConfigError;
    } catch (const std::exception& x) {
        err << "error: " << x.what() << '\n';
        return kConfigError;
    }
}

inline std::size_t preset_input_size(const std::string& preset) { return make_preset(preset, 2).input_dims[1]; }

inline Dataset load_for(const RunConfig& cfg, std::size_t k) {
    if (cfg.data.empty()) throw ConfigError("no dataset given (--data)");
    const std::size_t side = preset_input_size(cfg.preset);
    return load_dataset(cfg.data, {k, cfg.seed, side, side});
}

inline NetworkConfig network_for(const RunConfig& cfg, std::size_t classes) { return make_preset(cfg.preset, classes); }

inline fs::path classes_file(const fs::path& checkpoint) { return checkpoint.parent_path() / "classes.txt"; }

inline void write_classes(const fs::path& checkpoint, const std::vector<std::string>& names) {
    std::string text;
    for (const std::string& n : names) text += n + '\n';
    write_text_atomically(classes_file(checkpoint), text);
}

/// Class names from the sidecar next to the checkpoint, or the label indices when there is none.
inline std::vector<std::string> read_classes(const fs::path& checkpoint, std::size_t count) {
    std::vector<std::string> names;
    if (fs::exists(classes_file(checkpoint))) {
        std::istringstream in(read_text(classes_file(checkpoint)));
        for (std::string line; std::getline(in, line);)
            if (!line.empty()) names.push_back(line);
        if (names.size() != count)
            throw ConfigError(classes_file(checkpoint).string() + " lists " + std::to_string(names.size()) +
                              " classes, checkpoint has " + std::to_string(count));
        return names;
    }
    for (std::size_t i = 0; i < count; ++i) names.push_back(std::to_string(i));
    return names;
}

inline std::string log_csv(const std::vector<TrainLogRow>& rows) {
    std::ostringstream o;
    o << "iteration,lr,loss,accuracy\n";
    char buf[128];
    for (const TrainLogRow& r : rows) {
        std::snprintf(buf, sizeof buf, ",%.8f,%.1f\n", r.loss, r.accuracy);
        o << r.iteration << ',' << detail::shortest(static_cast<float>(r.lr)) << buf;
    }
    return o.str();
}

// --- commands ----------------------------------------------------------------

inline void cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    out << echo_config(cfg);
    const Dataset ds = load_for(cfg, 0);
    std::vector<std::size_t> train;
    if (ds.meta.has_manifest) train = manifest_split(ds.samples).train;
    else
        for (std::size_t i = 0; i < ds.samples.size(); ++i) train.push_back(i);

    const fs::path dir = cfg.out;
    const NetworkConfig net_cfg = network_for(cfg, ds.meta.class_names.size());
    Network net{net_cfg, build_network(net_cfg, cfg.seed)};
    write_text_atomically(dir / "config.txt", echo_config(cfg));
    write_classes(dir / "model.plcn", ds.meta.class_names);

    std::vector<TrainLogRow> rows;
    TrainHooks hooks;
    hooks.on_log = [&](const TrainLogRow& r) {
        rows.push_back(r);
        char buf[128];
        std::snprintf(buf, sizeof buf, "iteration %llu lr %.6g loss %.6f accuracy %.1f\n",
                      static_cast<unsigned long long>(r.iteration), r.lr, r.loss, r.accuracy);
        err << buf << std::flush;
    };
    hooks.checkpoint_interval = cfg.effective_checkpoint_interval();
    hooks.on_checkpoint = [&](std::uint64_t it, const Network& n) {
        save_checkpoint(dir / ("checkpoint-" + std::to_string(it) + ".plcn"), to_checkpoint(n, it));
        write_text_atomically(dir / "train_log.csv", log_csv(rows));
    };
    try {
        const TrainResult r = train_network(net, ds.samples, train, train_options(cfg), hooks);
        write_text_atomically(dir / "train_log.csv", log_csv(rows));
        save_checkpoint(dir / "model.plcn", to_checkpoint(net, cfg.effective_iterations()));
        char buf[128];
        std::snprintf(buf, sizeof buf, "final loss %.6f train batch accuracy %.1f\n", r.final_loss, r.final_accuracy);
        out << buf;
    } catch (const NumericError&) {
        write_text_atomically(dir / "train_log.csv", log_csv(rows));
        throw;
    }
}

inline CrossValidation cmd_xval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Dataset ds = load_for(cfg, cfg.k);
    const NetworkConfig net_cfg = network_for(cfg, ds.meta.class_names.size());
    const CrossValidation cv = cross_validate(net_cfg, ds, train_options(cfg), [&](std::size_t f, const TrainLogRow& r) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "fold %zu iteration %llu loss %.6f accuracy %.1f\n", f,
                      static_cast<unsigned long long>(r.iteration), r.loss, r.accuracy);
        err << buf << std::flush;
    });
    const fs::path dir = cfg.out;
    std::ostringstream header;
    header << "network " << network_tag(net_cfg) << '\n'
           << "folds " << cfg.k << " seed " << cfg.seed << " iterations " << cfg.effective_iterations() << '\n';
    const std::string summary = cross_validation_summary(cv, header.str());
    write_text_atomically(dir / "confusion.csv", confusion_csv(cv.aggregate.confusion));
    write_text_atomically(dir / "confidences.csv", confidences_csv(cv.aggregate.confidences, ds.meta.class_names));
    write_text_atomically(dir / "summary.txt", summary);
    out << summary;
    return cv;
}

inline std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Dataset ds = load_for(cfg, 0);
    const NetworkConfig net_cfg = network_for(cfg, ds.meta.class_names.size());
    const auto rows = split_ablation(net_cfg, ds, cfg.fractions, train_options(cfg), [&](double f, const TrainLogRow& r) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "fraction %.2f iteration %llu loss %.6f accuracy %.1f\n", f,
                      static_cast<unsigned long long>(r.iteration), r.loss, r.accuracy);
        err << buf << std::flush;
    });
    const std::string csv = ablation_csv(rows);
    write_text_atomically(fs::path(cfg.out) / "ablation.csv", csv);
    out << csv;
    return rows;
}

/// Loads one image as the network expects it: 3 channels, resized, values in [0, 1].
inline Tensor load_image_for(const NetworkConfig& cfg, const fs::path& path) {
    return resize_bilinear(replicate_channels(read_png(path), cfg.input_dims[0]), cfg.input_dims[1], cfg.input_dims[2]);
}

inline Network load_network(const fs::path& checkpoint, const std::optional<std::string>& preset) {
    Network net = network_from_checkpoint(load_checkpoint(checkpoint));
    if (preset && *preset != net.config.preset)
        throw ConfigError("checkpoint " + checkpoint.string() + " holds a " + net.config.preset + " network, not " + *preset);
    return net;
}

inline void cmd_predict(const fs::path& checkpoint, const fs::path& input, const std::optional<std::string>& preset,
                        const Normalization& norm, std::ostream& out) {
    const Network net = load_network(checkpoint, preset);
    const std::vector<std::string> names = read_classes(checkpoint, net.config.num_classes);
    std::vector<fs::path> images;
    if (fs::is_directory(input)) {
        for (const auto& e : fs::recursive_directory_iterator(input))
            if (e.is_regular_file() && detail::is_png(e.path())) images.push_back(e.path());
        std::ranges::sort(images);
        if (images.empty()) throw IoError("no PNG images under " + input.string());
    } else {
        images.push_back(input);
    }
    out << "path,predicted_class,confidence\n";
    for (const fs::path& p : images) {
        const Tensor x = normalize(load_image_for(net.config, p), norm.mean, norm.stdev);
        const Tensor logits = forward_network(x, net.config, net.params);
        const Prediction pr = predict(std::span<const float>(logits.data()));
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.8f", pr.confidence);
        out << detail::csv_field(p.generic_string()) << ',' << detail::csv_field(names[pr.label]) << ',' << buf << '\n';
    }
}

inline AttentionMap cmd_gradcam(const fs::path& checkpoint, const fs::path& image, const std::optional<std::string>& target,
                                CamLayer layer, const RunConfig& cfg, std::ostream& out) {
    const Network net = load_network(checkpoint, std::nullopt);
    const std::vector<std::string> names = read_classes(checkpoint, net.config.num_classes);
    std::optional<std::size_t> cls;
    if (target) {
        const auto it = std::ranges::find(names, *target);
        if (it != names.end()) cls = static_cast<std::size_t>(it - names.begin());
        else cls = detail::parse_number<std::size_t>("class", *target);
    }
    const Tensor base = load_image_for(net.config, image);
    const AttentionMap m = grad_cam(net, normalize(base, cfg.mean, cfg.stdev), cls, layer, true);
    const fs::path dir = cfg.out;
    render_heatmap(m.values, base, dir / "gradcam_overlay.png");
    write_png(dir / "gradcam_map.png", *m.upsampled);
    out << "class " << names[m.target_class] << " (" << m.target_class << ") layer " << to_string(layer) << '\n';
    for (std::size_t y = 0; y < m.values.h(); ++y) {
        for (std::size_t x = 0; x < m.values.w(); ++x) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%s%.3f", x ? " " : "", m.values(0, 0, y, x));
            out << buf;
        }
        out << '\n';
    }
    return m;
}

inline void cmd_synth(const RunConfig& cfg, std::ostream& out) {
    make_synthetic(cfg.out, {cfg.classes, cfg.per_class, cfg.size, cfg.size, cfg.seed});
    out << "wrote " << cfg.classes << " classes x " << cfg.per_class << " images (" << cfg.size << "x" << cfg.size
        << ") to " << cfg.out << '\n';
}

inline ImportResult cmd_import_weights(const fs::path& source, const std::optional<fs::path>& mapping_file,
                                       const RunConfig& cfg, std::ostream& out) {
    const Checkpoint src = load_checkpoint(source);
    const WeightMapping mapping = mapping_file ? parse_mapping(read_text(*mapping_file), mapping_file->string()) : WeightMapping{};
    const NetworkConfig net_cfg = network_for(cfg, cfg.classes);
    Network net{net_cfg, build_network(net_cfg, cfg.seed)};
    const ImportResult r = import_weights(net, src, mapping);
    save_checkpoint(fs::path(cfg.out) / "model.plcn", to_checkpoint(net, 0));
    out << "mapped " << r.mapped.size() << " tensors, " << r.unmapped.size() << " keep their initialization\n";
    for (const std::string& n : r.unmapped) out << "unmapped " << n << '\n';
    return r;
}

// --- argument parsing --------------------------------------------------------

/// Runs one command line (without the program name) and returns the exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Protein localization CNN: training, cross-validation, prediction and attention maps", "plcnn"};
    app.require_subcommand(1);

    std::map<std::string, std::string> values;
    std::map<CLI::App*, std::map<std::string, CLI::Option*>> options;
    std::string config_path;
    bool no_augment = false;
    auto add_settings = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "settings file of 'key = value' lines");
        for (const std::string& key : config_keys())
            options[sub][key] = sub->add_option("--" + key, values[key], key_help(key));
        sub->add_flag("--no-augment", no_augment, "train without flips and rotations");
    };

    CLI::App* train = app.add_subcommand("train", "train a network on a dataset tree");
    CLI::App* xval = app.add_subcommand("xval", "k-fold cross-validation with pooled reports");
    CLI::App* ablate = app.add_subcommand("ablate", "accuracy as the training fraction shrinks");
    CLI::App* predict_cmd = app.add_subcommand("predict", "classify an image or a directory of images");
    CLI::App* gradcam = app.add_subcommand("gradcam", "Grad-CAM attention map for one image");
    CLI::App* synth = app.add_subcommand("synth", "write a synthetic grating dataset");
    CLI::App* import = app.add_subcommand("import-weights", "initialize a network from named tensors");
    for (CLI::App* sub : {train, xval, ablate, predict_cmd, gradcam, synth, import}) add_settings(sub);

    std::string checkpoint, input, source, mapping, target, layer = "features";
    predict_cmd->add_option("checkpoint", checkpoint, "checkpoint file")->required();
    predict_cmd->add_option("path", input, "PNG image or directory")->required();
    gradcam->add_option("checkpoint", checkpoint, "checkpoint file")->required();
    gradcam->add_option("image", input, "PNG image")->required();
    CLI::Option* class_opt = gradcam->add_option("--class", target, "target class name or index (default: predicted)");
    gradcam->add_option("--layer", layer, "features, dense, residual or plain");
    import->add_option("source", source, "checkpoint-format file of named tensors")->required();
    CLI::Option* mapping_opt = import->add_option("--mapping", mapping, "lines of 'source_name target_name'");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        std::map<std::string, std::string> file_settings;
        if (!config_path.empty()) file_settings = parse_config_text(read_text(config_path), config_path);
        std::map<std::string, std::string> overrides;
        for (const auto& [key, opt] : options[sub])
            if (opt->count() > 0) overrides[key] = values[key];
        if (no_augment) overrides["augment"] = "off";
        const RunConfig cfg = resolve_config(file_settings, overrides);
        const std::optional<std::string> preset =
            overrides.count("preset") || file_settings.count("preset") ? std::optional<std::string>(cfg.preset) : std::nullopt;

        if (sub == train) cmd_train(cfg, out, err);
        else if (sub == xval) cmd_xval(cfg, out, err);
        else if (sub == ablate) cmd_ablate(cfg, out, err);
        else if (sub == predict_cmd) cmd_predict(checkpoint, input, preset, {cfg.mean, cfg.stdev}, out);
        else if (sub == gradcam)
            cmd_gradcam(checkpoint, input, class_opt->count() ? std::optional<std::string>(target) : std::nullopt,
                        cam_layer_from_string(layer), cfg, out);
        else if (sub == synth) cmd_synth(cfg, out);
        else if (sub == import)
            cmd_import_weights(source, mapping_opt->count() ? std::optional<fs::path>(mapping) : std::nullopt, cfg, out);
        return kOk;
    } catch (...) {
        return report_exception(std::current_exception(), err);
    }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace plcnn::cli
