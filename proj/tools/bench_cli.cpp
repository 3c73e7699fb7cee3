#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bftt3d/benchmark.hpp"
#include "bftt3d/config.hpp"
#include "bftt3d/corruption.hpp"
#include "bftt3d/error.hpp"
#include "bftt3d/io.hpp"
#include "bftt3d/memory.hpp"
#include "bftt3d/parallel.hpp"
#include "bftt3d/pipeline.hpp"
#include "bftt3d/source_model.hpp"

namespace fs = std::filesystem;
using namespace bftt3d;

namespace {

// Flags that override fields of the TOML run config.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> severity;
  std::vector<std::string> domains;
  std::optional<double> ratio;
  std::optional<std::size_t> threads;
  std::optional<std::string> trace;
  std::optional<int> d0, k_neighbors, stages;
  std::optional<double> alpha, beta;
  std::optional<int> points, train_per_class, test_per_class;
  std::optional<std::string> subspace, kernel;
  std::optional<int> m, batch;
  std::optional<double> mu, rbf_bandwidth;
  std::optional<double> gamma, fixed_p, temperature;
  std::optional<std::string> fusion, fuse_space, aggregation;

  void add_run(CLI::App* app) {
    app->add_option("--seed", seed, "Global seed");
    app->add_option("--severity", severity, "Corruption severity 1-5");
    app->add_option("--domains", domains, "Corruption kinds to evaluate (or 'clean')")->delimiter(',');
    app->add_option("--ratio", ratio, "Prototype memory ratio in (0, 1]");
    app->add_option("--points", points, "Points per cloud");
    app->add_option("--train-per-class", train_per_class);
    app->add_option("--test-per-class", test_per_class);
    app->add_option("--temperature", temperature, "Centroid source temperature");
    add_encoder(app);
    add_adapt(app);
  }
  void add_encoder(CLI::App* app) {
    app->add_option("--d0", d0, "Base embedding width");
    app->add_option("--k", k_neighbors, "Neighbors per stage");
    app->add_option("--stages", stages);
    app->add_option("--alpha", alpha);
    app->add_option("--beta", beta);
  }
  void add_adapt(CLI::App* app) {
    app->add_option("--subspace", subspace, "tca | none");
    app->add_option("--m", m, "Subspace dimension");
    app->add_option("--mu", mu, "TCA regularizer");
    app->add_option("--kernel", kernel, "linear | rbf");
    app->add_option("--rbf-bandwidth", rbf_bandwidth, "RBF bandwidth (default: median heuristic)");
    app->add_option("--batch", batch, "Adaptation batch size");
    app->add_option("--gamma", gamma, "Activation sharpness");
    app->add_option("--fusion", fusion, "adaptive | fixed");
    app->add_option("--p", fixed_p, "Fixed fusion weight");
    app->add_option("--fuse-space", fuse_space, "probability | raw");
    app->add_option("--aggregation", aggregation, "elementwise-mean | summed");
    app->add_option("--trace", trace, "Per-sample JSONL trace");
    app->add_option("--threads", threads, "Worker cap");
  }

  void apply(RunConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (severity) cfg.severity = *severity;
    if (!domains.empty()) cfg.domains = domains;
    if (ratio) cfg.memory_ratio = *ratio;
    if (threads) cfg.threads = *threads;
    if (trace) cfg.trace_path = *trace;
    if (d0) cfg.encoder.d0 = *d0;
    if (k_neighbors) cfg.encoder.k_neighbors = *k_neighbors;
    if (stages) cfg.encoder.stages = *stages;
    if (alpha) cfg.encoder.alpha = *alpha;
    if (beta) cfg.encoder.beta = *beta;
    if (points) cfg.data.points = *points;
    if (train_per_class) cfg.data.train_per_class = *train_per_class;
    if (test_per_class) cfg.data.test_per_class = *test_per_class;
    if (subspace) cfg.subspace.method = parse_subspace_method(*subspace);
    if (kernel) cfg.subspace.kernel.kind = parse_kernel_kind(*kernel);
    if (rbf_bandwidth) cfg.subspace.kernel.rbf_bandwidth = *rbf_bandwidth;
    if (m) cfg.subspace.m = *m;
    if (mu) cfg.subspace.mu = *mu;
    if (batch) cfg.subspace.batch = *batch;
    if (gamma) cfg.fusion.gamma = *gamma;
    if (fusion) cfg.fusion.mode = parse_fusion_mode(*fusion);
    if (fixed_p) {
      cfg.fusion.fixed_p = *fixed_p;
      if (!fusion) cfg.fusion.mode = FusionMode::fixed;
    }
    if (fuse_space) cfg.fusion.space = parse_fuse_space(*fuse_space);
    if (aggregation) cfg.fusion.aggregation = parse_aggregation(*aggregation);
    if (temperature) cfg.source.temperature = *temperature;
  }
};

RunConfig resolve_config(const std::string& path, const Overrides& o) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  o.apply(cfg);
  cfg.validate();
  return cfg;
}

std::size_t threads_of(const RunConfig& cfg) {
  return cfg.threads > 0 ? std::min(cfg.threads, worker_count()) : worker_count();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << text;
}

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.pcb", i);
  return buf;
}

int cmd_gen_data(const std::string& config, const Overrides& o, const fs::path& out) {
  const RunConfig cfg = resolve_config(config, o);
  fs::create_directories(out);
  const std::size_t threads = threads_of(cfg);

  const auto train = dataset_samples(cfg, true);
  LabeledDataset train_set;
  fs::create_directories(out / "train");
  train_set.entries.resize(train.size());
  parallel_for(
      train.size(),
      [&](std::size_t i) {
        const fs::path p = out / "train" / sample_name(i);
        write_cloud(make_cloud(cfg, train[i]), p);
        train_set.entries[i] = {p, train[i].label};
      },
      threads);
  write_manifest(train_set, out / "train.jsonl");

  std::vector<std::string> domains{"clean"};
  for (const auto& d : cfg.domains) {
    if (d != "clean") domains.push_back(d);
  }
  const auto test = dataset_samples(cfg, false);
  for (const auto& d : domains) {
    LabeledDataset set;
    set.split = d == "clean" ? SplitTag::source_clean : SplitTag::target_corrupted;
    set.entries.resize(test.size());
    fs::create_directories(out / "test" / d);
    parallel_for(
        test.size(),
        [&](std::size_t i) {
          const fs::path p = out / "test" / d / sample_name(i);
          write_cloud(make_test_cloud(cfg, test[i], d, i), p);
          set.entries[i] = {p, test[i].label};
        },
        threads);
    write_manifest(set, out / ("test-" + d + ".jsonl"));
  }
  std::cout << "wrote " << train.size() << " train and " << test.size() << " x " << domains.size()
            << " test clouds to " << out.string() << "\n";
  return 0;
}

struct CorruptArgs {
  std::string kind;
  int severity = 5;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  std::string in, out, manifest, out_dir;
};

int cmd_corrupt(const CorruptArgs& a) {
  const CorruptionKind kind = parse_corruption_kind(a.kind);
  if (a.severity < 1 || a.severity > 5) throw ConfigError("severity must be in [1, 5]");
  if (!a.manifest.empty()) {
    if (a.out_dir.empty()) throw ConfigError("--manifest needs --out-dir");
    const auto in = read_manifest(a.manifest);
    LabeledDataset out;
    out.split = SplitTag::target_corrupted;
    out.entries.resize(in.entries.size());
    fs::create_directories(a.out_dir);
    parallel_for(in.entries.size(), [&](std::size_t i) {
      const fs::path p = fs::path(a.out_dir) / sample_name(i);
      write_cloud(corrupt(read_cloud(in.entries[i].path), {kind, a.severity, a.seed, i}), p);
      out.entries[i] = {p, in.entries[i].label};
    });
    write_manifest(out, fs::path(a.out_dir) / "manifest.jsonl");
    return 0;
  }
  if (a.in.empty() || a.out.empty()) throw ConfigError("corrupt needs --in and --out (or --manifest and --out-dir)");
  write_cloud(corrupt(read_cloud(a.in), {kind, a.severity, a.seed, a.index}), a.out);
  return 0;
}

int cmd_encode(const std::string& config, const Overrides& o, const std::string& manifest, const std::string& out) {
  const RunConfig cfg = resolve_config(config, o);
  const auto set = read_manifest(manifest);
  FeatureMatrix features(static_cast<Eigen::Index>(set.entries.size()),
                         static_cast<Eigen::Index>(cfg.encoder.output_dim()));
  parallel_for(
      set.entries.size(),
      [&](std::size_t i) {
        const auto& path = set.entries[i].path;
        try {
          features.row(static_cast<Eigen::Index>(i)) = encode(read_cloud(path), cfg.encoder);
        } catch (const ArgumentError& e) {
          throw ArgumentError(path.string() + ": " + e.what());
        }
      },
      threads_of(cfg));
  write_features(features, out);
  return 0;
}

std::vector<int> labels_of(const LabeledDataset& set) {
  std::vector<int> out;
  for (const auto& e : set.entries) out.push_back(e.label);
  return out;
}

int cmd_build_memory(const std::string& config, const Overrides& o, const std::string& features,
                     const std::string& manifest, double ratio, const std::string& out) {
  const RunConfig cfg = resolve_config(config, o);
  const auto feats = read_features(features);
  const auto set = read_manifest(manifest);
  if (static_cast<std::size_t>(feats.rows()) != set.entries.size()) {
    throw ConfigError("features have " + std::to_string(feats.rows()) + " rows but manifest has " +
                      std::to_string(set.entries.size()) + " entries");
  }
  const auto memory = build_memory(group_by_label(feats, labels_of(set), set.class_count), ratio, cfg.encoder.hash());
  save_memory(memory, out);
  std::cout << "memory: " << memory.size() << " prototypes, " << memory.classes() << " classes, dim "
            << memory.dim() << "\n";
  return 0;
}

SourceProvider source_from_spec(const std::string& spec, double temperature) {
  if (spec.rfind("file:", 0) == 0) return SourceProvider::from_file(read_logits(spec.substr(5)));
  if (spec.rfind("centroid:", 0) == 0) {
    const std::string rest = spec.substr(9);
    const auto split = rest.rfind(':');
    if (split == std::string::npos) throw ConfigError("--source centroid:<features>:<manifest>");
    const auto feats = read_features(rest.substr(0, split));
    const auto set = read_manifest(rest.substr(split + 1));
    if (static_cast<std::size_t>(feats.rows()) != set.entries.size()) {
      throw ConfigError("centroid source: feature rows do not match manifest entries");
    }
    return fit_centroids(group_by_label(feats, labels_of(set), set.class_count), temperature);
  }
  throw ConfigError("--source must be file:<lgt> or centroid:<features>:<manifest>");
}

struct AdaptArgs {
  std::string config, memory, features, manifest, source, out;
};

int cmd_adapt(const AdaptArgs& a, const Overrides& o) {
  const RunConfig cfg = resolve_config(a.config, o);
  const auto memory = load_memory(a.memory, cfg.encoder.hash());
  const FeatureMatrix targets = read_features(a.features);
  const auto source = source_from_spec(a.source, cfg.source.temperature);
  if (source.classes() != memory.classes()) {
    throw ConfigError("source has " + std::to_string(source.classes()) + " classes, memory has " +
                      std::to_string(memory.classes()));
  }
  std::optional<LabeledDataset> set;
  if (!a.manifest.empty()) {
    set = read_manifest(a.manifest, SplitTag::target_corrupted);
    if (set->entries.size() != static_cast<std::size_t>(targets.rows())) {
      throw ConfigError("manifest entries do not match feature rows");
    }
  }
  if (source.is_replay() && source.samples() != static_cast<std::size_t>(targets.rows())) {
    throw ConfigError("source logits have " + std::to_string(source.samples()) + " rows, expected " +
                      std::to_string(targets.rows()));
  }

  Eigen::MatrixXd source_logits(targets.rows(), static_cast<Eigen::Index>(memory.classes()));
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    const Eigen::VectorXd f = targets.row(i).transpose();
    source_logits.row(i) = source.logits_for(static_cast<std::size_t>(i), &f).transpose();
  }
  const auto result = adapt(memory, targets, source_logits, cfg.subspace, cfg.fusion);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";

  std::vector<float> values;
  for (const auto& s : result.samples) {
    for (Eigen::Index c = 0; c < s.fusion.logits.size(); ++c) values.push_back(static_cast<float>(s.fusion.logits[c]));
  }
  if (!a.out.empty()) {
    write_logits(LogitMatrix(static_cast<std::uint32_t>(result.samples.size()),
                             static_cast<std::uint32_t>(memory.classes()), std::move(values)),
                 a.out);
  }
  if (!cfg.trace_path.empty()) {
    std::ofstream trace(cfg.trace_path, std::ios::trunc);
    if (!trace) throw FormatError("cannot open trace file '" + cfg.trace_path.string() + "'");
    for (std::size_t i = 0; i < result.samples.size(); ++i) {
      const auto& s = result.samples[i];
      nlohmann::ordered_json line;
      line["index"] = i;
      if (set) line["label"] = set->entries[i].label;
      line["p"] = s.fusion.p;
      line["entropy_bf"] = s.fusion.entropy_bf;
      line["entropy_source"] = s.fusion.entropy_source;
      line["prediction"] = argmax(s.fusion.logits);
      trace << line.dump() << "\n";
    }
  }
  if (set) {
    std::size_t wrong_s = 0, wrong_bf = 0, wrong_f = 0;
    for (std::size_t i = 0; i < result.samples.size(); ++i) {
      const auto label = set->entries[i].label;
      const auto& s = result.samples[i];
      wrong_s += argmax(s.source_logits) != label;
      wrong_bf += argmax(s.bf_scores) != label;
      wrong_f += argmax(s.fusion.logits) != label;
    }
    const auto n = result.samples.size();
    std::printf("source-only %.2f%%  adaptation %.2f%%  bftt3d %.2f%%  (n=%zu)\n", error_percent(wrong_s, n),
                error_percent(wrong_bf, n), error_percent(wrong_f, n), n);
  }
  return 0;
}

void emit(const nlohmann::ordered_json& json, const std::string& text, const std::string& json_path,
          const std::string& text_path) {
  std::cout << text;
  if (!json_path.empty()) write_text(json_path, json.dump(2) + "\n");
  if (!text_path.empty()) write_text(text_path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backpropagation-free test-time adaptation for point clouds"};
  app.require_subcommand(1);

  Overrides o;
  std::string config, json_out, text_out, out_dir;

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset as PCB1 clouds plus JSONL manifests");
  gen->add_option("--config", config, "TOML run config");
  gen->add_option("--out", out_dir, "Output directory")->required();
  o.add_run(gen);

  CorruptArgs ca;
  auto* cor = app.add_subcommand("corrupt", "Corrupt one cloud or every cloud of a manifest");
  cor->add_option("--kind", ca.kind, "Corruption kind")->required();
  cor->add_option("--severity", ca.severity, "Severity 1-5");
  cor->add_option("--seed", ca.seed, "Global seed");
  cor->add_option("--index", ca.index, "Sample index (stream ordinal)");
  cor->add_option("--in", ca.in, "Input PCB1 file");
  cor->add_option("--out", ca.out, "Output PCB1 file");
  cor->add_option("--manifest", ca.manifest, "Input manifest");
  cor->add_option("--out-dir", ca.out_dir, "Output directory for --manifest");

  std::string manifest, features, out;
  auto* enc = app.add_subcommand("encode", "Encode the clouds of a manifest into an FTR1 file");
  enc->add_option("--config", config, "TOML run config");
  enc->add_option("--manifest", manifest)->required();
  enc->add_option("--out", out)->required();
  enc->add_option("--threads", o.threads, "Worker cap");
  o.add_encoder(enc);

  double ratio = 0.25;
  auto* mem = app.add_subcommand("build-memory", "Select prototypes and write a MEM1 file");
  mem->add_option("--config", config, "TOML run config (encoder section is hashed)");
  mem->add_option("--features", features)->required();
  mem->add_option("--manifest", manifest)->required();
  mem->add_option("--ratio", ratio, "Fraction kept per class");
  mem->add_option("--out", out)->required();
  o.add_encoder(mem);

  AdaptArgs aa;
  auto* ad = app.add_subcommand("adapt", "Adapt target features and fuse with source logits");
  ad->add_option("--config", aa.config, "TOML run config");
  ad->add_option("--memory", aa.memory)->required();
  ad->add_option("--features", aa.features, "Target features (FTR1)")->required();
  ad->add_option("--manifest", aa.manifest, "Target manifest; enables the error summary");
  ad->add_option("--source", aa.source, "file:<lgt> | centroid:<features>:<manifest>")->required();
  ad->add_option("--out", aa.out, "Fused outputs (LGT1)");
  ad->add_option("--temperature", o.temperature, "Centroid source temperature");
  o.add_encoder(ad);
  o.add_adapt(ad);

  auto* bench = app.add_subcommand("bench", "Run the full benchmark and print the error table");
  bench->add_option("--config", config, "TOML run config");
  bench->add_option("--json", json_out, "Write the JSON report");
  bench->add_option("--text", text_out, "Write the text table");
  o.add_run(bench);

  std::string axis;
  auto* abl = app.add_subcommand("ablate", "Sweep one axis: ratio, subspace or fusion-ratio");
  abl->add_option("--config", config, "TOML run config");
  abl->add_option("--axis", axis, "ratio | subspace | fusion-ratio")->required();
  abl->add_option("--json", json_out, "Write the JSON report");
  abl->add_option("--text", text_out, "Write the text table");
  o.add_run(abl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(config, o, out_dir);
    if (*cor) return cmd_corrupt(ca);
    if (*enc) return cmd_encode(config, o, manifest, out);
    if (*mem) return cmd_build_memory(config, o, features, manifest, ratio, out);
    if (*ad) return cmd_adapt(aa, o);
    if (*bench) {
      const auto report = run_benchmark(resolve_config(config, o));
      emit(report.to_json(), report.to_text(), json_out, text_out);
      return 0;
    }
    if (*abl) {
      const auto report = run_ablation(resolve_config(config, o), parse_ablation_axis(axis));
      emit(report.to_json(), report.to_text(), json_out, text_out);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
