#include "wmg/cli.hpp"

#include <chrono>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmg/checkpoint.hpp"
#include "wmg/error.hpp"
#include "wmg/log.hpp"
#include "wmg/parallel.hpp"
#include "wmg/rng.hpp"
#include "wmg/run_config.hpp"

namespace wmg {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> method;
  std::optional<std::string> out;
};

RunConfig prepare(const Options& opt, std::ostream& out) {
  RunConfig cfg = load_run_config(opt.config);
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.propagate_seed();
  }
  if (opt.threads) cfg.threads = *opt.threads;
  if (opt.method) {
    parse_method(*opt.method);
    cfg.impute.method = *opt.method;
  }
  set_thread_limit(cfg.threads);
  out << format_run_config(cfg);
  return cfg;
}

fs::path out_or(const Options& opt, const RunConfig& cfg, const std::string& configured) {
  return opt.out ? fs::path(*opt.out) : cfg.resolve(configured);
}

void ensure_parent(const fs::path& p) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
}

void require_ids_match(const DistanceMatrix& dist, const FeatureTable& table) {
  if (dist.cluster_ids != table.cluster_ids())
    throw ValidationError("distance matrix clusters do not match the feature table columns");
}

int cmd_gen(const Options& opt, std::ostream& out) {
  const RunConfig cfg = prepare(opt, out);
  const auto ds = generate_dataset(cfg.synthetic);
  auto path = [&](const std::string& configured) {
    return opt.out ? fs::path(*opt.out) / fs::path(configured).filename() : cfg.resolve(configured);
  };
  const fs::path atlas = path(cfg.paths.atlas), truth = path(cfg.paths.truth),
                 corrupted = path(cfg.paths.corrupted), labels = path(cfg.paths.labels);
  for (const auto& p : {atlas, truth, corrupted, labels}) ensure_parent(p);
  save_atlas(ds.atlas, atlas);
  save_feature_table(ds.truth, truth);
  save_feature_table(ds.corrupted, corrupted);
  save_labels(ds.labels, labels);

  std::size_t positives = 0;
  for (const int l : ds.labels.labels) positives += l == 1 ? 1 : 0;
  const double cells = static_cast<double>(ds.truth.rows() * ds.truth.cols());
  out << "subjects: " << ds.truth.rows() << "\nclusters: " << ds.truth.cols()
      << "\nmissing entries: " << ds.corrupted.missing_count() << " ("
      << format_double(static_cast<double>(ds.corrupted.missing_count()) / cells) << ")\n"
      << "fragile clusters:";
  for (const auto j : ds.fragile) out << ' ' << ds.truth.cluster_ids()[j];
  out << "\nlabel=1 count: " << positives << '\n'
      << "wrote " << atlas.string() << ", " << truth.string() << ", " << corrupted.string() << ", "
      << labels.string() << '\n';
  return 0;
}

int cmd_dist(const Options& opt, std::ostream& out) {
  const RunConfig cfg = prepare(opt, out);
  const auto atlas = load_atlas(cfg.resolve(cfg.paths.atlas));
  const auto dist = pairwise_distances(atlas, static_cast<std::size_t>(cfg.geometry.resample_points),
                                       cfg.geometry.aggregate);
  const fs::path target = out_or(opt, cfg, cfg.paths.distances);
  ensure_parent(target);
  save_distance_matrix(dist, target);
  out << "wrote " << dist.size() << "x" << dist.size() << " distance matrix to " << target.string()
      << '\n';
  return 0;
}

int cmd_train(const Options& opt, std::ostream& out) {
  RunConfig cfg = prepare(opt, out);
  if (opt.method) {
    const auto m = parse_method(*opt.method);
    if (!m.diffusion) throw ConfigError("train only supports diffusion methods");
    cfg.mask.mode = m.mode;
    cfg.mask.polarity = m.polarity;
  }
  if (cfg.mask.mode == MaskMode::geometry && cfg.paths.distances.empty())
    throw ConfigError("mask.mode=geometry needs paths.distances");
  const auto table = load_feature_table(cfg.resolve(cfg.paths.corrupted));
  std::optional<DistanceMatrix> dist;
  if (cfg.mask.mode == MaskMode::geometry) {
    dist = load_distance_matrix(cfg.resolve(cfg.paths.distances));
    require_ids_match(*dist, table);
  }
  const fs::path dir = out_or(opt, cfg, cfg.paths.checkpoint);
  const fs::path log_path = cfg.paths.train_log.empty() ? dir / "loss.csv" : cfg.resolve(cfg.paths.train_log);

  const auto started = std::chrono::steady_clock::now();
  const auto result = train(table, cfg.mask, dist ? &*dist : nullptr, cfg.denoiser, cfg.train,
                            cfg.schedule, [](int epoch, double loss) {
                              log::info("epoch ", epoch, " loss ", format_double(loss));
                            });
  save_checkpoint(result.checkpoint, dir);
  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    csv << e + 1 << ',' << format_double(result.epoch_loss[e]) << '\n';
  ensure_parent(log_path);
  write_text_file(log_path, csv.str());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  out << "trained " << result.epoch_loss.size() << " epochs, final loss "
      << format_double(result.checkpoint.training.final_loss) << "\nwrote " << dir.string() << " and "
      << log_path.string() << '\n';
  log::info("train took ", secs, " s");
  return 0;
}

int cmd_impute(const Options& opt, std::ostream& out) {
  const RunConfig cfg = prepare(opt, out);
  const auto method = parse_method(cfg.impute.method);
  const auto table = load_feature_table(cfg.resolve(cfg.paths.corrupted));
  FeatureTable imputed;
  if (method.diffusion) {
    const auto ckpt = load_checkpoint(cfg.resolve(cfg.paths.checkpoint));
    imputed = impute(ckpt, table, cfg.impute.samples, derive_seed(cfg.seed, "impute"));
  } else if (method.baseline == BaselineKind::chained) {
    imputed = impute_chained(table, cfg.chained);
  } else {
    imputed = impute_constant(table, method.baseline);
  }
  const fs::path target = out_or(opt, cfg, cfg.paths.imputed);
  ensure_parent(target);
  save_feature_table(imputed, target);
  out << "imputed " << table.missing_count() << " entries with " << method.name << "\nwrote "
      << target.string() << '\n';
  return 0;
}

int cmd_bench(const Options& opt, std::ostream& out) {
  const RunConfig cfg = prepare(opt, out);
  std::vector<MethodSpec> methods;
  bool needs_dist = false;
  for (const auto& name : cfg.methods) {
    methods.push_back(parse_method(name));
    needs_dist |= methods.back().diffusion && methods.back().mode == MaskMode::geometry;
  }
  const auto truth = load_feature_table(cfg.resolve(cfg.paths.truth));
  const auto observed = load_feature_table(cfg.resolve(cfg.paths.corrupted));
  const auto labels = align_labels(truth, load_labels(cfg.resolve(cfg.paths.labels)));
  std::optional<DistanceMatrix> dist;
  if (needs_dist) {
    if (cfg.paths.distances.empty()) throw ConfigError("geometry methods need paths.distances");
    dist = load_distance_matrix(cfg.resolve(cfg.paths.distances));
    require_ids_match(*dist, truth);
  }

  const auto started = std::chrono::steady_clock::now();
  const auto report = run_benchmark(truth, observed, labels, dist ? &*dist : nullptr, methods,
                                    cfg.benchmark());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const fs::path dir = out_or(opt, cfg, cfg.paths.report_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());

  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(format_run_config(cfg));
  meta["benchmark_seed"] = cfg.benchmark().seed;
  meta["dropped_test_entries_per_fold"] = report.dropped_per_fold;
  auto& errors = meta["errors"] = nlohmann::json::object();
  for (const auto& m : report.methods)
    for (std::size_t f = 0; f < m.errors.size(); ++f)
      if (!m.errors[f].empty()) errors[m.name + "/fold" + std::to_string(f + 1)] = m.errors[f];

  const auto text = format_report_text(report);
  write_text_file(dir / "report.csv", format_report_csv(report));
  write_text_file(dir / "report.txt", text);
  write_text_file(dir / "report.json", meta.dump(2) + "\n");
  out << text << "wrote " << (dir / "report.csv").string() << ", report.txt, report.json\n";
  log::info("benchmark took ", secs, " s");
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  log::set_level(log::level_from_env());
  CLI::App app{"White-matter feature imputation pipeline"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "run configuration (JSON)")->required();
    sub->add_option("--seed", opt.seed, "override the root seed");
    sub->add_option("--threads", opt.threads, "worker cap (0 = all cores, 1 = bit-exact serial)");
    sub->add_option("--method", opt.method, "imputation method");
    sub->add_option("--out", opt.out, "output path override");
  };
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  auto* dist = app.add_subcommand("dist", "compute the cluster distance matrix");
  auto* trn = app.add_subcommand("train", "train the diffusion imputer");
  auto* imp = app.add_subcommand("impute", "impute missing entries");
  auto* bench = app.add_subcommand("bench", "cross-validated benchmark");
  for (auto* sub : {gen, dist, trn, imp, bench}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(opt, out);
    if (dist->parsed()) return cmd_dist(opt, out);
    if (trn->parsed()) return cmd_train(opt, out);
    if (imp->parsed()) return cmd_impute(opt, out);
    return cmd_bench(opt, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace wmg
