// rootseg: synthesize, split, tune, train, segment and evaluate root images.
// Exit status: 0 success, 1 user error (bad config, inputs, divergence), 2 internal error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rootseg.hpp"

namespace fs = std::filesystem;
using namespace rootseg;

namespace {

class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--config", c.config, "key = value configuration file");
  cmd->add_option("--seed", c.seed, "global seed, overrides the config");
  auto* o = cmd->add_option("--out", c.out, "output directory");
  if (out_required) o->required();
  cmd->add_option("--set", c.overrides, "override one config key, as key=value")->take_all();
}

// Defaults, then the file, then --set, then dedicated flags (applied by the caller).
RunConfig build_config(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) {
    if (!fs::is_regular_file(c.config)) throw UserError(c.config + ": config file not found");
    apply_config_file(cfg, c.config);
  }
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void finalize(RunConfig& cfg) {
  cfg.sync_seed();
  cfg.validate();
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UserError(what + " not given");
  if (!fs::is_regular_file(path)) throw UserError(what + " '" + path + "' not found");
}

void require_dir(const std::string& path, const std::string& what) {
  if (path.empty()) throw UserError(what + " not given");
  if (!fs::is_directory(path)) throw UserError(what + " '" + path + "' is not a directory");
}

void make_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw UserError(out + ": cannot create output directory");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw UserError(path.string() + ": cannot write");
}

void dump_effective(const std::string& out, const RunConfig& cfg) {
  write_text(fs::path(out) / "effective_config.txt", dump_config(cfg));
}

DatasetManifest load_checked_manifest(const std::string& path) {
  require_file(path, "manifest");
  DatasetManifest m = load_manifest(path);
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& r : m.rows) {
    if (!fs::is_regular_file(r.image)) throw UserError("manifest image missing: " + r.image.string());
    if (!fs::is_regular_file(r.mask)) throw UserError("manifest mask missing: " + r.mask.string());
  }
  return m;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt(const Metric& m) { return m ? fmt(*m) : "nan"; }

// ---- synth

int cmd_synth(const Common& c, std::optional<int> count) {
  RunConfig cfg = build_config(c);
  if (count) cfg.synth_count = *count;
  finalize(cfg);
  make_out_dir(c.out);
  const DatasetManifest m = generate_dataset(cfg.scene, cfg.synth_count, c.out);
  try {
    dump_effective(c.out, cfg);
  } catch (...) {
    std::error_code ec;
    for (const auto& r : m.rows) {
      fs::remove(r.image, ec);
      fs::remove(r.mask, ec);
    }
    fs::remove(fs::path(c.out) / "manifest.csv", ec);
    throw;
  }
  long long roots = 0;
  for (const auto& r : m.rows) roots += r.root_pixels;
  const double pixels = static_cast<double>(m.rows.size()) * cfg.scene.height * cfg.scene.width;
  std::cout << "wrote " << m.rows.size() << " image/mask pairs to " << c.out << "\n"
            << "root pixels " << roots << " (" << fmt(100.0 * roots / pixels) << "% of all pixels)\n";
  return 0;
}

// ---- split

SplitResult split_manifest(const DatasetManifest& m, int validation_size) {
  std::vector<SplitEntry> entries;
  for (const auto& r : m.rows) entries.push_back({image_id(r), r.root_pixels});
  return split_dataset(entries, validation_size);
}

void write_split(const fs::path& path, const SplitResult& s) {
  std::ostringstream out;
  out << "id,set\n";
  for (const auto& id : s.train_ids) out << id << ",train\n";
  for (const auto& id : s.validation_ids) out << id << ",validation\n";
  write_text(path, out.str());
}

int cmd_split(const Common& c, const std::string& manifest) {
  RunConfig cfg = build_config(c);
  if (!manifest.empty()) cfg.data.manifest = manifest;
  finalize(cfg);
  const auto m = load_checked_manifest(cfg.data.manifest);
  const auto s = split_manifest(m, cfg.train.validation_size);
  make_out_dir(c.out);
  write_split(fs::path(c.out) / "split.csv", s);
  dump_effective(c.out, cfg);
  std::cout << "train " << s.train_ids.size() << ", validation " << s.validation_ids.size() << "\n";
  return 0;
}

// ---- train

std::vector<ImagePair> pairs_for(const DatasetManifest& m, const std::vector<std::string>& ids) {
  std::map<std::string, const ManifestRow*> by_id;
  for (const auto& r : m.rows) by_id[image_id(r)] = &r;
  std::vector<ImagePair> out;
  for (const auto& id : ids) out.push_back(load_pair(by_id.at(id)->image, by_id.at(id)->mask));
  return out;
}

// Log rows already written for epochs before `next_epoch`; header included.
std::string kept_log_prefix(const fs::path& log, int next_epoch) {
  std::ifstream in(log);
  std::string line, out;
  if (!std::getline(in, line)) return {};
  out = line + "\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoi(line.substr(0, line.find(','))) >= next_epoch) break;
    out += line + "\n";
  }
  return out;
}

int cmd_train(const Common& c, const std::string& manifest, const std::string& resume) {
  RunConfig cfg = build_config(c);
  if (!manifest.empty()) cfg.data.manifest = manifest;
  if (!resume.empty()) cfg.data.resume = resume;
  finalize(cfg);
  const auto m = load_checked_manifest(cfg.data.manifest);
  const auto split = split_manifest(m, cfg.train.validation_size);
  std::optional<TrainState> state;
  if (!cfg.data.resume.empty()) {
    require_file(cfg.data.resume, "resume checkpoint");
    const auto ck = net::read_checkpoint(cfg.data.resume);
    if (!(ck.arch == cfg.arch)) throw UserError(cfg.data.resume + ": architecture differs from the config");
    state = state_from_checkpoint(ck, cfg.data.resume);
  }
  const auto train = pairs_for(m, split.train_ids);
  const auto val = pairs_for(m, split.validation_ids);

  make_out_dir(c.out);
  const fs::path out(c.out);
  dump_effective(c.out, cfg);
  write_split(out / "split.csv", split);
  const fs::path log_path = out / "train_log.csv";
  std::string prefix = state ? kept_log_prefix(log_path, state->next_epoch) : std::string{};
  {
    std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
    if (prefix.empty()) write_log_header(log);
    else log << prefix;
    if (!log) throw UserError(log_path.string() + ": cannot write");
  }

  std::cout << "training on " << train.size() << " images, validating on " << val.size() << "\n";
  auto on_epoch = [&](const EpochLog& row, const TrainState& st) {
    std::ofstream log(log_path, std::ios::binary | std::ios::app);
    write_log_row(log, row);
    if (!log) throw UserError(log_path.string() + ": cannot write");
    auto last = state_checkpoint(st);
    last.metadata["input_size"] = cfg.train.input_size;
    net::write_checkpoint(out / "last.ckpt", last);
    auto best = best_model_checkpoint(st);
    best.metadata["input_size"] = cfg.train.input_size;
    net::write_checkpoint(out / "best.ckpt", best);
    std::cout << "epoch " << row.epoch << " lr " << fmt(row.lr) << " loss " << fmt(row.train_loss) << " train_f1 "
              << format_metric(row.train_f1) << " val_f1 " << format_metric(row.val_f1) << std::endl;
  };
  const TrainResult res = train_loop(train, val, cfg.arch, cfg.train, std::move(state), on_epoch);
  if (res.diverged) {
    std::cerr << "error: training diverged (non-finite loss or gradient); last good state kept in "
              << (out / "last.ckpt").string() << "\n";
    return 1;
  }
  if (res.state.best_epoch < 0) {
    // Nothing trained, e.g. max_epochs 0: still leave a usable model.
    auto best = best_model_checkpoint(res.state);
    best.metadata["input_size"] = cfg.train.input_size;
    net::write_checkpoint(out / "best.ckpt", best);
    auto last = state_checkpoint(res.state);
    last.metadata["input_size"] = cfg.train.input_size;
    net::write_checkpoint(out / "last.ckpt", last);
  }
  std::cout << "best epoch " << res.state.best_epoch << " val_f1 " << format_metric(res.state.best_val_f1) << "\n";
  return 0;
}

// ---- segment

std::vector<fs::path> list_images(const std::string& input) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(input)) return {fs::path(input)};
  require_dir(input, "input");
  for (const auto& e : fs::directory_iterator(input)) {
    const auto name = e.path().filename().string();
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    if (name.size() > 9 && name.compare(name.size() - 9, 9, "_mask.png") == 0) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw UserError(input + ": no .png images found");
  return out;
}

int cmd_segment(const Common& c, const std::string& input, const std::string& model, const std::string& frangi) {
  RunConfig cfg = build_config(c);
  if (!input.empty()) cfg.data.input = input;
  if (!model.empty()) cfg.data.model = model;
  if (!frangi.empty()) cfg.data.frangi_params = frangi;
  finalize(cfg);
  if (cfg.data.model.empty() == cfg.data.frangi_params.empty())
    throw UserError("give exactly one of --model or --frangi");
  if (cfg.data.input.empty()) throw UserError("input not given");
  if (!fs::exists(cfg.data.input)) throw UserError("input '" + cfg.data.input + "' not found");
  const auto images = list_images(cfg.data.input);

  std::optional<net::NetworkParams<float>> params;
  int input_size = cfg.train.input_size;
  FrangiParams fp;
  if (!cfg.data.model.empty()) {
    require_file(cfg.data.model, "model");
    const auto ck = net::read_checkpoint(cfg.data.model);
    params = net::get_params(ck, "", cfg.data.model);
    if (auto it = ck.metadata.find("input_size"); it != ck.metadata.end()) input_size = static_cast<int>(it->second);
    net::output_geometry(params->arch, input_size);
  } else {
    require_file(cfg.data.frangi_params, "frangi params");
    fp = read_frangi_params(cfg.data.frangi_params);
  }

  make_out_dir(c.out);
  dump_effective(c.out, cfg);
  int ok = 0;
  for (const auto& path : images) {
    RasterImage img;
    try {
      img = read_image(path.string());
    } catch (const ImageIoError& e) {
      std::cerr << "warning: skipping " << path.string() << ": " << e.what() << "\n";
      continue;
    }
    const RasterImage mask =
        params ? binarize(predict_probability(*params, img, input_size), cfg.train.threshold) : frangi_segment(img, fp);
    write_mask((fs::path(c.out) / (path.stem().string() + "_mask.png")).string(), mask);
    ++ok;
  }
  std::cout << "segmented " << ok << " of " << images.size() << " images\n";
  if (ok == 0) {
    std::cerr << "error: no image could be read\n";
    return 1;
  }
  return 0;
}

// ---- tune-frangi

int cmd_tune(const Common& c, const std::string& manifest) {
  RunConfig cfg = build_config(c);
  if (!manifest.empty()) cfg.data.manifest = manifest;
  finalize(cfg);
  const auto m = load_checked_manifest(cfg.data.manifest);
  if (std::all_of(m.rows.begin(), m.rows.end(), [](const ManifestRow& r) { return r.root_pixels == 0; }))
    throw UserError("every mask in the dataset is empty; nothing to tune against");
  const auto data = load_all(m.rows);
  make_out_dir(c.out);
  dump_effective(c.out, cfg);
  const auto t =
      tune_frangi(data, cfg.frangi, cfg.cma.max_evaluations, cfg.cma.initial_sigma, cfg.cma.population_size, cfg.seed);
  const fs::path out(c.out);
  write_text(out / "frangi_params.txt", frangi_params_text(t.params));
  std::ostringstream log;
  log << "generation,best_fitness,mean_fitness,sigma\n";
  for (std::size_t g = 0; g < t.search.history.size(); ++g) {
    const auto& h = t.search.history[g];
    log << g << "," << fmt(h.best_fitness) << "," << fmt(h.mean_fitness) << "," << fmt(h.sigma) << "\n";
  }
  write_text(out / "tuning_log.csv", log.str());
  std::cout << "initial objective " << fmt(t.initial_fitness) << ", best " << fmt(t.best_fitness) << " after "
            << t.search.evaluations_used << " evaluations\n";
  return 0;
}

// ---- evaluate

std::map<std::string, fs::path> masks_by_stem(const std::string& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (!e.is_regular_file() || name.size() <= 9 || name.compare(name.size() - 9, 9, "_mask.png") != 0) continue;
    out[name.substr(0, name.size() - 9)] = e.path();
  }
  return out;
}

int cmd_evaluate(const Common& c, const std::string& pred, const std::string& truth) {
  RunConfig cfg = build_config(c);
  if (!pred.empty()) cfg.data.pred = pred;
  if (!truth.empty()) cfg.data.truth = truth;
  finalize(cfg);
  require_dir(cfg.data.pred, "prediction directory");
  require_dir(cfg.data.truth, "truth directory");
  const auto preds = masks_by_stem(cfg.data.pred), truths = masks_by_stem(cfg.data.truth);
  std::vector<std::string> stems;
  for (const auto& [s, p] : preds) {
    if (truths.count(s)) stems.push_back(s);
    else std::cerr << "warning: no truth for prediction '" << s << "', skipped\n";
  }
  for (const auto& [s, p] : truths)
    if (!preds.count(s)) std::cerr << "warning: no prediction for truth '" << s << "', skipped\n";
  if (stems.empty()) throw UserError("no prediction/truth stems in common");

  std::vector<std::pair<RasterImage, RasterImage>> pairs;
  for (const auto& s : stems) {
    RasterImage p = read_mask(preds.at(s).string()), t = read_mask(truths.at(s).string());
    if (p.height() != t.height() || p.width() != t.width())
      throw UserError("size mismatch for '" + s + "': prediction " + std::to_string(p.height()) + "x" +
                      std::to_string(p.width()) + ", truth " + std::to_string(t.height()) + "x" +
                      std::to_string(t.width()));
    pairs.emplace_back(std::move(p), std::move(t));
  }
  make_out_dir(c.out);
  dump_effective(c.out, cfg);

  const MetricsReport rep = report(pairs);
  std::vector<double> lengths, intensities;
  std::ostringstream csv;
  csv << "image,f1,precision,recall,accuracy,root_length_px,intersections,root_intensity\n";
  for (std::size_t i = 0; i < stems.size(); ++i) {
    const auto& s = rep.per_image[i];
    const long long len = root_length_px(pairs[i].first);
    const IntersectResult li = line_intersect(pairs[i].second, cfg.grid);
    lengths.push_back(static_cast<double>(len));
    intensities.push_back(li.root_intensity);
    csv << stems[i] << "," << format_metric(s.f1) << "," << format_metric(s.precision) << ","
        << format_metric(s.recall) << "," << format_metric(s.accuracy) << "," << len << "," << li.intersections << ","
        << fmt(li.root_intensity) << "\n";
  }
  write_text(fs::path(c.out) / "evaluation.csv", csv.str());

  Metric rho, r2;
  try {
    rho = spearman(lengths, intensities);
    r2 = r_squared(lengths, intensities);
  } catch (const std::invalid_argument& e) {
    std::cerr << "warning: correlation undefined: " << e.what() << "\n";
  }
  std::ostringstream sum;
  sum << "images = " << stems.size() << "\n"
      << "rooted_images = " << rep.rooted_images << "\n"
      << "pooled_f1 = " << fmt(rep.pooled.f1) << "\n"
      << "pooled_precision = " << fmt(rep.pooled.precision) << "\n"
      << "pooled_recall = " << fmt(rep.pooled.recall) << "\n"
      << "pooled_accuracy = " << fmt(rep.pooled.accuracy) << "\n";
  const std::pair<const char*, const MeanStd*> per[] = {
      {"f1", &rep.f1}, {"precision", &rep.precision}, {"recall", &rep.recall}, {"accuracy", &rep.accuracy}};
  for (const auto& [name, ms] : per)
    sum << "mean_" << name << " = " << fmt(ms->mean) << "\n" << "sd_" << name << " = " << fmt(ms->stdev) << "\n";
  sum << "prediction_mean = " << fmt(rep.prediction_mean) << "\n"
      << "true_mean = " << fmt(rep.true_mean) << "\n"
      << "spearman_length_intensity = " << fmt(rho) << "\n"
      << "r2_length_intensity = " << fmt(r2) << "\n";
  write_text(fs::path(c.out) / "summary.txt", sum.str());
  std::cout << sum.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Root segmentation toolkit"};
  app.require_subcommand(1);

  Common common;
  std::optional<int> count;
  std::string manifest, resume, input, model, frangi, pred, truth;

  auto* synth = app.add_subcommand("synth", "generate a synthetic labelled dataset");
  add_common(synth, common);
  synth->add_option("-n,--count", count, "number of images");

  auto* split = app.add_subcommand("split", "split a dataset into train and validation ids");
  add_common(split, common);
  split->add_option("--manifest", manifest, "dataset manifest.csv");

  auto* train = app.add_subcommand("train", "train a U-Net");
  add_common(train, common);
  train->add_option("--manifest", manifest, "dataset manifest.csv");
  train->add_option("--resume", resume, "last.ckpt of an earlier run");

  auto* segment = app.add_subcommand("segment", "write <stem>_mask.png for each input image");
  add_common(segment, common);
  segment->add_option("--input", input, "image file or directory of images");
  segment->add_option("--model", model, "U-Net checkpoint");
  segment->add_option("--frangi", frangi, "Frangi parameter file");

  auto* tune = app.add_subcommand("tune-frangi", "tune Frangi parameters with CMA-ES");
  add_common(tune, common);
  tune->add_option("--manifest", manifest, "dataset manifest.csv");

  auto* evaluate = app.add_subcommand("evaluate", "score predicted masks against truth");
  add_common(evaluate, common);
  evaluate->add_option("--pred", pred, "directory of predicted <stem>_mask.png");
  evaluate->add_option("--truth", truth, "directory of truth <stem>_mask.png");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(common, count);
    if (split->parsed()) return cmd_split(common, manifest);
    if (train->parsed()) return cmd_train(common, manifest, resume);
    if (segment->parsed()) return cmd_segment(common, input, model, frangi);
    if (tune->parsed()) return cmd_tune(common, manifest);
    if (evaluate->parsed()) return cmd_evaluate(common, pred, truth);
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ImageIoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const net::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
