#include "wmg/run_config.hpp"

#include <set>

#include "json.hpp"
#include "wmg/error.hpp"
#include "wmg/feature_table.hpp"
#include "wmg/rng.hpp"

namespace wmg {

namespace {

using nlohmann::json;

std::string to_string(ClusterAggregate a) { return a == ClusterAggregate::min ? "min" : "mean"; }

ClusterAggregate parse_aggregate(const std::string& s) {
  if (s == "min") return ClusterAggregate::min;
  if (s == "mean") return ClusterAggregate::mean;
  throw ConfigError("geometry.aggregate must be 'min' or 'mean', got '" + s + "'");
}

// Reads keys from one JSON object and rejects whatever was not read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "must be an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + key(it.key()) + "'");
  }

  template <class T>
  void get(const std::string& name, T& out) {
    seen_.insert(name);
    const auto it = j_.find(name);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<long long>() >= 0))
          throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key(name) + "' has the wrong type");
    }
  }

  bool has(const std::string& name) const { return j_.contains(name); }

  Section sub(const std::string& name) {
    seen_.insert(name);
    static const json empty = json::object();
    const auto it = j_.find(name);
    return Section(it == j_.end() ? empty : *it, key(name));
  }

 private:
  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }
  std::string where() const { return path_.empty() ? "config " : "config key '" + path_ + "' "; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void RunConfig::propagate_seed() {
  synthetic.seed = derive_seed(seed, "synthetic");
  mask.seed = derive_seed(seed, "mask-policy");
  train.seed = derive_seed(seed, "train");
  chained.seed = derive_seed(seed, "chained");
}

void RunConfig::validate() const {
  try {
    synthetic.validate();
    mask.validate();
    DenoiserConfig d = denoiser;
    if (d.cluster_count == 0) d.cluster_count = 1;
    d.validate();
    train.validate();
    schedule.build();
    benchmark().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (geometry.resample_points < 2) throw ConfigError("geometry.resample_points must be >= 2");
  if (impute.samples < 1) throw ConfigError("impute.samples must be >= 1");
  parse_method(impute.method);
  if (methods.empty()) throw ConfigError("evaluation.methods must not be empty");
  for (const auto& m : methods) parse_method(m);
}

BenchmarkConfig RunConfig::benchmark() const {
  BenchmarkConfig b;
  b.folds = folds;
  b.missing_fraction = missing_fraction;
  b.seed = derive_seed(seed, "benchmark");
  b.impute_samples = impute.samples;
  b.observable_ratio = mask.observable_ratio;
  b.denoiser = denoiser;
  b.train = train;
  b.schedule = schedule;
  b.chained = chained;
  b.logistic = logistic;
  return b;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  {
    Section root(j, "");
    root.get("seed", c.seed);
    root.get("threads", c.threads);
    {
      auto s = root.sub("paths");
      s.get("atlas", c.paths.atlas);
      s.get("truth", c.paths.truth);
      s.get("corrupted", c.paths.corrupted);
      s.get("labels", c.paths.labels);
      s.get("distances", c.paths.distances);
      s.get("checkpoint", c.paths.checkpoint);
      s.get("train_log", c.paths.train_log);
      s.get("imputed", c.paths.imputed);
      s.get("report_dir", c.paths.report_dir);
    }
    {
      auto s = root.sub("synthetic");
      auto& y = c.synthetic;
      s.get("n_subjects", y.n_subjects);
      s.get("n_clusters", y.n_clusters);
      s.get("streamlines_per_cluster", y.streamlines_per_cluster);
      s.get("points_per_streamline", y.points_per_streamline);
      s.get("spatial_scale", y.spatial_scale);
      s.get("value_smoothness", y.value_smoothness);
      s.get("noise_std", y.noise_std);
      s.get("noise_nugget", y.noise_nugget);
      s.get("n_fragile_clusters", y.n_fragile_clusters);
      s.get("fragile_missing_rate", y.fragile_missing_rate);
      s.get("background_missing_rate", y.background_missing_rate);
      s.get("label_sparsity", y.label_sparsity);
      s.get("label_strength", y.label_strength);
    }
    {
      auto s = root.sub("geometry");
      s.get("resample_points", c.geometry.resample_points);
      std::string agg = to_string(c.geometry.aggregate);
      s.get("aggregate", agg);
      c.geometry.aggregate = parse_aggregate(agg);
    }
    {
      auto s = root.sub("mask");
      std::string mode = to_string(c.mask.mode), pol = to_string(c.mask.polarity);
      s.get("mode", mode);
      s.get("polarity", pol);
      s.get("observable_ratio", c.mask.observable_ratio);
      c.mask.mode = parse_mask_mode(mode);
      c.mask.polarity = parse_mask_polarity(pol);
    }
    {
      auto s = root.sub("denoiser");
      s.get("layers", c.denoiser.layers);
      s.get("channels", c.denoiser.channels);
      s.get("heads", c.denoiser.heads);
      s.get("embed_dim", c.denoiser.embed_dim);
      s.get("cluster_embed_dim", c.denoiser.cluster_embed_dim);
    }
    {
      auto s = root.sub("schedule");
      std::string kind = to_string(c.schedule.kind);
      s.get("steps", c.schedule.steps);
      s.get("beta_start", c.schedule.beta_start);
      s.get("beta_end", c.schedule.beta_end);
      s.get("kind", kind);
      c.schedule.kind = parse_schedule_kind(kind);
    }
    {
      auto s = root.sub("train");
      s.get("epochs", c.train.epochs);
      s.get("batch_size", c.train.batch_size);
      s.get("learning_rate", c.train.learning_rate);
      s.get("standardize", c.train.standardize);
    }
    {
      auto s = root.sub("impute");
      s.get("method", c.impute.method);
      s.get("samples", c.impute.samples);
    }
    {
      auto s = root.sub("baselines");
      s.get("chained_sweeps", c.chained.sweeps);
      s.get("chained_ridge", c.chained.ridge);
    }
    {
      auto s = root.sub("evaluation");
      s.get("folds", c.folds);
      s.get("missing_fraction", c.missing_fraction);
      s.get("methods", c.methods);
      s.get("logistic_l2", c.logistic.l2);
      s.get("logistic_iters", c.logistic.iters);
      s.get("logistic_lr", c.logistic.lr);
    }
  }
  c.propagate_seed();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c = parse_run_config(read_text_file(path));
  c.base_dir = path.parent_path();
  return c;
}

std::string format_run_config(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["paths"] = {{"atlas", c.paths.atlas},       {"truth", c.paths.truth},
                {"corrupted", c.paths.corrupted}, {"labels", c.paths.labels},
                {"distances", c.paths.distances}, {"checkpoint", c.paths.checkpoint},
                {"train_log", c.paths.train_log}, {"imputed", c.paths.imputed},
                {"report_dir", c.paths.report_dir}};
  const auto& y = c.synthetic;
  j["synthetic"] = {{"n_subjects", y.n_subjects},
                    {"n_clusters", y.n_clusters},
                    {"streamlines_per_cluster", y.streamlines_per_cluster},
                    {"points_per_streamline", y.points_per_streamline},
                    {"spatial_scale", y.spatial_scale},
                    {"value_smoothness", y.value_smoothness},
                    {"noise_std", y.noise_std},
                    {"noise_nugget", y.noise_nugget},
                    {"n_fragile_clusters", y.n_fragile_clusters},
                    {"fragile_missing_rate", y.fragile_missing_rate},
                    {"background_missing_rate", y.background_missing_rate},
                    {"label_sparsity", y.label_sparsity},
                    {"label_strength", y.label_strength}};
  j["geometry"] = {{"resample_points", c.geometry.resample_points},
                   {"aggregate", to_string(c.geometry.aggregate)}};
  j["mask"] = {{"mode", to_string(c.mask.mode)},
               {"polarity", to_string(c.mask.polarity)},
               {"observable_ratio", c.mask.observable_ratio}};
  j["denoiser"] = {{"layers", c.denoiser.layers},
                   {"channels", c.denoiser.channels},
                   {"heads", c.denoiser.heads},
                   {"embed_dim", c.denoiser.embed_dim},
                   {"cluster_embed_dim", c.denoiser.cluster_embed_dim}};
  j["schedule"] = {{"steps", c.schedule.steps},
                   {"beta_start", c.schedule.beta_start},
                   {"beta_end", c.schedule.beta_end},
                   {"kind", to_string(c.schedule.kind)}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"standardize", c.train.standardize}};
  j["impute"] = {{"method", c.impute.method}, {"samples", c.impute.samples}};
  j["baselines"] = {{"chained_sweeps", c.chained.sweeps}, {"chained_ridge", c.chained.ridge}};
  j["evaluation"] = {{"folds", c.folds},
                     {"missing_fraction", c.missing_fraction},
                     {"methods", c.methods},
                     {"logistic_l2", c.logistic.l2},
                     {"logistic_iters", c.logistic.iters},
                     {"logistic_lr", c.logistic.lr}};
  return j.dump(2) + "\n";
}

}  // namespace wmg
