#include "cli.hpp"

#include "fds/analysis.hpp"
#include "fds/image.hpp"
#include "fds/parallel.hpp"
#include "fds/ply.hpp"
#include "fds/ssim.hpp"
#include "fds/strip.hpp"
#include "fds/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fds::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) {
    throw UsageError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) {
    throw UsageError(key + ": expected a finite number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError(key + ": expected true/false, got '" + v + "'");
}

std::string show(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Range {
  int lo = 0, hi = 0;
};

Range to_range(const std::string& key, const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) throw UsageError(key + ": expected a:b, got '" + v + "'");
  Range r{static_cast<int>(to_long(key, v.substr(0, colon))),
          static_cast<int>(to_long(key, v.substr(colon + 1)))};
  if (r.lo < 1 || r.hi < r.lo) throw UsageError(key + ": need 1 <= a <= b, got '" + v + "'");
  return r;
}

void add_long(OptionTable& t, const std::string& key, const std::string& help, long& ref) {
  t.add(key, help, [&ref, key](const std::string& v) { ref = to_long(key, v); },
        [&ref] { return std::to_string(ref); });
}

void add_int(OptionTable& t, const std::string& key, const std::string& help, int& ref) {
  t.add(key, help, [&ref, key](const std::string& v) { ref = static_cast<int>(to_long(key, v)); },
        [&ref] { return std::to_string(ref); });
}

void add_size(OptionTable& t, const std::string& key, const std::string& help, std::size_t& ref) {
  t.add(key, help,
        [&ref, key](const std::string& v) {
          const long n = to_long(key, v);
          if (n < 0) throw UsageError(key + " must be non-negative");
          ref = static_cast<std::size_t>(n);
        },
        [&ref] { return std::to_string(ref); });
}

void add_seed(OptionTable& t, std::uint64_t& ref) {
  t.add("seed", "random seed",
        [&ref](const std::string& v) {
          std::uint64_t out = 0;
          const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
          if (ec != std::errc{} || end != v.data() + v.size()) {
            throw UsageError("seed: expected a non-negative integer, got '" + v + "'");
          }
          ref = out;
        },
        [&ref] { return std::to_string(ref); });
}

void add_double(OptionTable& t, const std::string& key, const std::string& help, double& ref) {
  t.add(key, help, [&ref, key](const std::string& v) { ref = to_double(key, v); },
        [&ref] { return show(ref); });
}

void add_bool(OptionTable& t, const std::string& key, const std::string& help, bool& ref) {
  t.add(key, help, [&ref, key](const std::string& v) { ref = to_bool(key, v); },
        [&ref] { return ref ? std::string("true") : std::string("false"); });
}

// Binds every table key as `--key value` on `app`, with the values kept in
// `storage`; apply() then layers config file and flags over the defaults.
class BoundTable {
 public:
  BoundTable(OptionTable& table, CLI::App& app) : table_(table) {
    app.add_option("--config", config_, "key=value config file");
    for (const auto& e : table.entries()) {
      std::string names = "--" + e.key;
      if (e.key.find('_') != std::string::npos) {
        std::string dashed = e.key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        names += ",--" + dashed;
      }
      options_.push_back(app.add_option(names, storage_[e.key], e.help));
    }
  }

  void apply() {
    if (!config_.empty()) table_.load_file(config_);
    const auto& entries = table_.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (options_[i]->count() > 0) table_.set(entries[i].key, storage_[entries[i].key]);
    }
  }

 private:
  OptionTable& table_;
  std::vector<CLI::Option*> options_;
  std::string config_;
  std::map<std::string, std::string> storage_;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  return path.parent_path() / (path.stem().string() + suffix);
}

// --- strip-sweep -----------------------------------------------------------

struct StripCommand {
  StripSweepOptions opts;
  std::string m_range = "1:40", s_range = "1:20";
  std::uint64_t seed = 0;
  std::string out = "strip_sweep.csv";
  OptionTable table;

  StripCommand() {
    table.add("m_range", "Gaussian counts a:b",
              [this](const std::string& v) {
                (void)to_range("m_range", v);
                m_range = v;
              },
              [this] { return m_range; });
    table.add("s_range", "standard deviations a:b",
              [this](const std::string& v) {
                (void)to_range("s_range", v);
                s_range = v;
              },
              [this] { return s_range; });
    add_int(table, "k_colors", "stripe colors", opts.k_colors);
    add_int(table, "n", "strip length", opts.n);
    add_int(table, "iters", "maximum optimizer iterations per cell", opts.fit.max_iters);
    add_double(table, "lr", "initial learning rate", opts.fit.lr);
    add_double(table, "decay_steps", "learning-rate decay scale", opts.fit.decay_steps);
    add_double(table, "tolerance", "convergence tolerance on the loss", opts.fit.tolerance);
    add_int(table, "window", "convergence window in iterations", opts.fit.window);
    add_seed(table, seed);
  }

  int run() {
    const Range m = to_range("m_range", m_range), s = to_range("s_range", s_range);
    opts.m_min = m.lo;
    opts.m_max = m.hi;
    opts.s_min = s.lo;
    opts.s_max = s.hi;
    if (opts.k_colors < 1 || opts.n < 1 || opts.fit.max_iters < 1 || opts.fit.window < 1) {
      throw UsageError("k_colors, n, iters and window must be positive");
    }
    const auto cells = run_strip_sweep(opts);
    const std::string stamp = table.stamp("strip-sweep");
    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());

    auto heat = open_out(out_path);
    heat << stamp << "\nm,s,loss,iterations,converged\n";
    for (const auto& c : cells) {
      heat << c.m << ',' << c.s << ',' << c.result.loss << ',' << c.result.iterations << ','
           << (c.result.converged ? 1 : 0) << '\n';
    }
    const fs::path colors_path = sibling(out_path, "_colors.csv");
    auto colors = open_out(colors_path);
    colors << stamp << "\nm,s,gaussian,mean,r,g,b\n";
    for (const auto& c : cells) {
      for (std::size_t i = 0; i < c.result.gaussians.size(); ++i) {
        const auto& g = c.result.gaussians[i];
        colors << c.m << ',' << c.s << ',' << i << ',' << g.mean() << ',' << g.color.x() << ','
               << g.color.y() << ',' << g.color.z() << '\n';
      }
    }
    if (!heat || !colors) throw IoError("failed writing sweep output");
    std::cout << "wrote " << cells.size() << " cells to " << out_path.string() << " and "
              << colors_path.string() << '\n';
    return kOk;
  }
};

// --- fit2d ------------------------------------------------------------------

struct FitCommand {
  TrainConfig cfg;
  int views = 4;
  std::string image;
  std::string out_dir = "fit2d_out";
  bool no_link = false, fixed_threshold = false, vanilla_filter = false;
  OptionTable table;

  FitCommand() {
    add_long(table, "total_iters", "optimizer iterations", cfg.total_iters);
    add_long(table, "densify_interval", "iterations between densifications", cfg.densify_interval);
    add_long(table, "densify_start", "first densification iteration", cfg.densify_start);
    add_long(table, "confidence_interval", "iterations between filter passes",
             cfg.confidence_interval);
    add_long(table, "control_end", "density control stops here", cfg.control_end);
    add_long(table, "opacity_reset_interval", "iterations between opacity resets",
             cfg.opacity_reset_interval);
    add_long(table, "log_interval", "iterations between checkpoints", cfg.log_interval);
    add_size(table, "K", "neighbours for the density estimate", cfg.K);
    add_double(table, "theta", "s_a = theta * R~", cfg.theta);
    add_double(table, "grad_preset", "floor of the dynamic threshold", cfg.grad_preset);
    add_size(table, "M", "views compared by the confidence filter", cfg.M);
    add_double(table, "tau_c", "confidence deletion threshold", cfg.tau_c);
    add_double(table, "ssim_lambda", "weight of the SSIM term", cfg.ssim_lambda);
    add_seed(table, cfg.seed);
    add_size(table, "init_count", "initial Gaussians", cfg.init_count);
    add_double(table, "init_opacity", "initial opacity", cfg.init_opacity);
    add_bool(table, "link", "density-scale link", cfg.link);
    add_bool(table, "dynamic_threshold", "histogram densification threshold",
             cfg.dynamic_threshold);
    add_bool(table, "confidence_filter", "confidence filter (else large-Gaussian pruning)",
             cfg.confidence_filter);
    add_double(table, "fixed_tau_pos", "threshold when the dynamic one is off",
               cfg.fixed_threshold);
    add_double(table, "large_fraction", "pruning size as a fraction of the extent",
               cfg.large_fraction);
    add_double(table, "lr_position_init", "position rate at the start (times extent)",
               cfg.lr.position_init);
    add_double(table, "lr_position_final", "position rate at the end (times extent)",
               cfg.lr.position_final);
    add_double(table, "lr_rotation", "rotation rate", cfg.lr.rotation);
    add_double(table, "lr_scale_log", "log s_a rate", cfg.lr.scale_log);
    add_double(table, "lr_scale_rel", "s_r rate", cfg.lr.scale_rel);
    add_double(table, "lr_opacity", "opacity rate", cfg.lr.opacity);
    add_double(table, "lr_color", "color rate", cfg.lr.color);
    add_int(table, "views", "number of affine views of the image", views);
  }

  int run() {
    if (no_link) cfg.link = false;
    if (fixed_threshold) cfg.dynamic_threshold = false;
    if (vanilla_filter) cfg.confidence_filter = false;
    if (views < 1) throw UsageError("views must be positive");
    if (cfg.confidence_filter && static_cast<std::size_t>(views) < 2) {
      throw UsageError("the confidence filter needs at least two views");
    }
    cfg.validate();

    const RasterImage canonical = read_image(image);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    cfg.divergence_dump = dir / "divergence_dump.csv";
    const std::string stamp = table.stamp("fit2d") + " image=" + image;

    const auto view_set = make_views(canonical, views);
    std::mt19937_64 rng(cfg.seed);
    GaussianCloud init =
        init_from_random(cfg.init_count, canonical, cfg.K, cfg.theta, cfg.init_opacity, rng);
    const TrainResult result = train(view_set, cfg, std::move(init), [](const Checkpoint& c) {
      std::printf("iter %ld  loss %.5f  psnr %.3f  ssim %.4f  gaussians %zu\n", c.iteration,
                  c.train_loss, c.psnr, c.ssim, c.count);
      std::fflush(stdout);
    });

    write_cloud_csv(result.cloud, dir / "cloud.csv");
    write_checkpoints_csv(result.log, dir / "train_log.csv", stamp);
    write_convergence_csv(result.log, dir / "convergence.csv", stamp);
    write_events_csv(result.log, dir / "events.csv", stamp);
    write_image(render_raster(result.cloud, view_set.front()).image, dir / "render.png");
    std::cout << "wrote " << dir.string() << '\n';
    return kOk;
  }
};

// --- analyze ----------------------------------------------------------------

struct AnalyzeCommand {
  std::string cloud;
  std::size_t k = 50;
  std::size_t sample_cap = kAnalysisSampleCap;
  std::uint64_t seed = 0;
  std::string out = "analysis.csv";
  OptionTable table;

  AnalyzeCommand() {
    add_size(table, "K", "neighbours for the density estimate", k);
    add_size(table, "sample_cap", "most Gaussians analysed", sample_cap);
    add_seed(table, seed);
  }

  int run() {
    if (sample_cap < 2) throw UsageError("sample_cap must be at least 2");
    const fs::path in(cloud);
    DensityVolumeReport rep;
    std::string ext = in.extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".ply") {
      const auto records = read_ply(in);
      std::vector<Vec3> pos;
      std::vector<double> vol;
      for (const auto& r : records) {
        pos.push_back(r.position);
        vol.push_back(volume_of(r));
      }
      rep = analyze_density_volume(pos, vol, k, sample_cap, seed);
    } else {
      const GaussianCloud c = read_cloud_csv(in);
      rep = analyze_density_volume(c.positions(), areas_of(c), k, sample_cap, seed);
    }

    const std::string stamp = table.stamp("analyze") + " cloud=" + cloud;
    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    auto scatter = open_out(out_path);
    scatter << stamp << "\nindex,density,volume\n";
    for (const auto& p : rep.points) scatter << p.index << ',' << p.density << ',' << p.volume << '\n';
    const fs::path summary_path = sibling(out_path, "_summary.csv");
    auto summary = open_out(summary_path);
    summary << stamp << "\nkey,value\n"
            << "population," << rep.population << "\nsampled," << rep.points.size()
            << "\nk_eff," << rep.k_eff << "\nspearman," << rep.spearman << "\nexponent,"
            << rep.fit.exponent << "\nlog_coeff," << rep.fit.log_coeff << "\nresidual_rms,"
            << rep.fit.residual_rms << '\n';
    if (!scatter || !summary) throw IoError("failed writing analysis output");
    std::printf("gaussians %zu  sampled %zu  spearman %.4f  volume ~ %.4g * density^%.4f  "
                "log-residual rms %.4f\n",
                rep.population, rep.points.size(), rep.spearman, std::exp(rep.fit.log_coeff),
                rep.fit.exponent, rep.fit.residual_rms);
    return kOk;
  }
};

// --- metrics ----------------------------------------------------------------

struct MetricsCommand {
  std::string rendered, gt;

  int run() const {
    const RasterImage a = read_image(rendered), b = read_image(gt);
    if (a.width() != b.width() || a.height() != b.height()) {
      throw UsageError("image dimensions differ: " + std::to_string(a.width()) + "x" +
                       std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                       std::to_string(b.height()));
    }
    const double p = psnr(a, b);
    std::printf("psnr %s\nssim %.6f\n", std::isinf(p) ? "inf" : show(p).c_str(), ssim(a, b));
    return kOk;
  }
};

}  // namespace

void OptionTable::add(const std::string& key, const std::string& help, Setter set, Getter get) {
  entries_.push_back({key, help, std::move(set), std::move(get)});
}

bool OptionTable::has(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return true;
  }
  return false;
}

void OptionTable::set(const std::string& key, const std::string& value) {
  for (const auto& e : entries_) {
    if (e.key == key) {
      e.set(value);
      return;
    }
  }
  throw UsageError("unknown key '" + key + "'");
}

void OptionTable::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!has(key)) throw UsageError(path + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    set(key, trim(line.substr(eq + 1)));
  }
}

std::string OptionTable::stamp(const std::string& command) const {
  std::string out = "# fds " + command;
  for (const auto& e : entries_) out += " " + e.key + "=" + e.get();
  return out;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Density-scale linked Gaussian fitting experiments"};
  app.require_subcommand(1);

  StripCommand strip;
  auto* strip_app = app.add_subcommand("strip-sweep", "1D color-strip loss heatmap over (M, S)");
  BoundTable strip_opts(strip.table, *strip_app);
  strip_app->add_option("--out", strip.out, "heatmap CSV (colors go to <stem>_colors.csv)");

  FitCommand fit;
  auto* fit_app = app.add_subcommand("fit2d", "fit Gaussians to an image");
  BoundTable fit_opts(fit.table, *fit_app);
  fit_app->add_option("image", fit.image, "PNG or PPM image")->required();
  fit_app->add_option("--out-dir", fit.out_dir, "output directory");
  fit_app->add_flag("--no-link", fit.no_link, "leave s_a free of the density");
  fit_app->add_flag("--fixed-threshold", fit.fixed_threshold, "fixed densification threshold");
  fit_app->add_flag("--vanilla-filter", fit.vanilla_filter, "large-Gaussian pruning only");

  AnalyzeCommand analyze;
  auto* analyze_app = app.add_subcommand("analyze", "density versus volume of a cloud");
  BoundTable analyze_opts(analyze.table, *analyze_app);
  analyze_app->add_option("cloud", analyze.cloud, ".ply splat file or fit2d cloud.csv")->required();
  analyze_app->add_option("--out", analyze.out, "scatter CSV (summary goes to <stem>_summary.csv)");

  MetricsCommand metrics;
  auto* metrics_app = app.add_subcommand("metrics", "PSNR and SSIM of two images");
  metrics_app->add_option("rendered", metrics.rendered)->required();
  metrics_app->add_option("gt", metrics.gt)->required();

  int texture_size = 256;
  std::string texture_out = "texture.png";
  auto* texture_app = app.add_subcommand("make-texture", "write the built-in test picture");
  texture_app->add_option("--size", texture_size, "width and height");
  texture_app->add_option("--out", texture_out, "PNG or PPM path");

  std::vector<char*> argv;
  std::vector<std::string> copy = args;
  for (auto& a : copy) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    (void)app.exit(e);
    return kUsage;
  }

  configure_threads();
  try {
    if (*strip_app) {
      strip_opts.apply();
      return strip.run();
    }
    if (*fit_app) {
      fit_opts.apply();
      return fit.run();
    }
    if (*analyze_app) {
      analyze_opts.apply();
      return analyze.run();
    }
    if (*metrics_app) return metrics.run();
    if (*texture_app) {
      if (texture_size < 1) throw UsageError("size must be positive");
      write_image(make_test_texture(texture_size, texture_size), texture_out);
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << " (state written to divergence_dump.csv)\n";
    return kDivergence;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}

}  // namespace fds::cli
