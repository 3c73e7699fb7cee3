#include "bftt3d/benchmark.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "bftt3d/error.hpp"
#include "bftt3d/memory.hpp"
#include "bftt3d/parallel.hpp"
#include "bftt3d/rng.hpp"

namespace bftt3d {

namespace {

constexpr std::string_view kClean = "clean";

// Rethrows the in-flight exception with `context` prefixed, preserving its
// category (and therefore the CLI exit code).
[[noreturn]] void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(context + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError(context + ": " + e.what());
  } catch (const CorruptionError& e) {
    throw CorruptionError(context + ": " + e.what());
  } catch (const TruncationError& e) {
    throw TruncationError(context + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(context + ": " + e.what());
  }
}

std::size_t threads_for(const RunConfig& cfg) {
  return cfg.threads > 0 ? std::min(cfg.threads, worker_count()) : worker_count();
}

std::string replace_domain(std::string pattern, const std::string& domain) {
  const std::string key = "{domain}";
  for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key, pos + domain.size())) {
    pattern.replace(pos, key.size(), domain);
  }
  return pattern;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

struct DomainRun {
  std::vector<AdaptedSample> samples;
};

struct SampleRuns {
  std::map<std::string, DomainRun> domains;
  std::vector<std::string> warnings;
  std::uint64_t memory_hash_before = 0, memory_hash_after = 0;
  std::uint64_t source_hash_before = 0, source_hash_after = 0;
};

std::vector<SourceProvider> make_sources(const PreparedBenchmark& data, const RunConfig& cfg) {
  std::vector<SourceProvider> out;
  if (cfg.source.kind == SourceConfig::Kind::centroid) {
    out.push_back(fit_centroids(group_by_label(data.train_features, data.train_labels, data.class_count),
                                cfg.source.temperature));
    return out;
  }
  for (const auto& d : data.domains) {
    const auto path = replace_domain(cfg.source.logits_path, d);
    try {
      auto provider = SourceProvider::from_file(read_logits(path));
      if (provider.classes() != static_cast<std::size_t>(data.class_count)) {
        throw ConfigError("source logits have " + std::to_string(provider.classes()) + " classes, expected " +
                          std::to_string(data.class_count));
      }
      out.push_back(std::move(provider));
    } catch (...) {
      rethrow_with_context("domain " + d + ": source logits '" + path + "'");
    }
  }
  return out;
}

std::uint64_t combined_hash(const std::vector<SourceProvider>& sources) {
  std::uint64_t h = 0;
  for (const auto& s : sources) h = mix64(h ^ s.state_hash());
  return h;
}

SampleRuns run_samples(const PreparedBenchmark& data, const RunConfig& cfg) {
  SampleRuns runs;
  const PrototypeMemory memory =
      build_memory(group_by_label(data.train_features, data.train_labels, data.class_count), cfg.memory_ratio,
                   cfg.encoder.hash());
  const std::vector<SourceProvider> sources = make_sources(data, cfg);
  runs.memory_hash_before = memory.state_hash();
  runs.source_hash_before = combined_hash(sources);

  const auto n_test = static_cast<Eigen::Index>(data.test_labels.size());
  for (std::size_t di = 0; di < data.domains.size(); ++di) {
    const auto& domain = data.domains[di];
    const auto& source = sources.size() == 1 ? sources.front() : sources[di];
    const FeatureMatrix& feats = data.test_features.at(domain);
    Eigen::MatrixXd source_logits(n_test, data.class_count);
    for (Eigen::Index j = 0; j < n_test; ++j) {
      const Eigen::VectorXd f = feats.row(j).transpose();
      try {
        source_logits.row(j) =
            source.logits_for(data.test_ids[static_cast<std::size_t>(j)], &f).transpose();
      } catch (...) {
        rethrow_with_context("domain " + domain + ", sample " + std::to_string(data.test_ids[j]));
      }
    }
    try {
      auto out = adapt(memory, feats, source_logits, cfg.subspace, cfg.fusion);
      for (auto& w : out.warnings) {
        auto msg = domain + ": " + w;
        if (std::find(runs.warnings.begin(), runs.warnings.end(), msg) == runs.warnings.end()) {
          runs.warnings.push_back(std::move(msg));
        }
      }
      runs.domains[domain].samples = std::move(out.samples);
    } catch (...) {
      rethrow_with_context("domain " + domain);
    }
  }
  runs.memory_hash_after = memory.state_hash();
  runs.source_hash_after = combined_hash(sources);
  return runs;
}

ArmRow arm_from(const std::string& name, const PreparedBenchmark& data, const SampleRuns& runs,
                const std::function<Eigen::VectorXd(const AdaptedSample&)>& decide) {
  ArmRow row;
  row.name = name;
  double total = 0.0;
  for (const auto& d : data.domains) {
    const auto& samples = runs.domains.at(d).samples;
    std::size_t wrong = 0;
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (argmax(decide(samples[j])) != data.test_labels[j]) ++wrong;
    }
    const double e = error_percent(wrong, samples.size());
    row.errors[d] = e;
    total += e;
  }
  row.mean = data.domains.empty() ? 0.0 : total / static_cast<double>(data.domains.size());
  return row;
}

ArmRow source_only_arm(const PreparedBenchmark& data, const SampleRuns& runs) {
  return arm_from("source-only", data, runs, [](const AdaptedSample& s) { return s.source_logits; });
}

void write_trace(const PreparedBenchmark& data, const SampleRuns& runs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open trace file '" + path.string() + "'");
  for (const auto& d : data.domains) {
    const auto& samples = runs.domains.at(d).samples;
    for (std::size_t j = 0; j < samples.size(); ++j) {
      const auto& s = samples[j];
      nlohmann::ordered_json line;
      line["domain"] = d;
      line["index"] = data.test_ids[j];
      line["label"] = data.test_labels[j];
      line["p"] = s.fusion.p;
      line["entropy_bf"] = s.fusion.entropy_bf;
      line["entropy_source"] = s.fusion.entropy_source;
      line["prediction"] = argmax(s.fusion.logits);
      line["fused"] = std::vector<double>(s.fusion.logits.data(), s.fusion.logits.data() + s.fusion.logits.size());
      out << line.dump() << '\n';
    }
  }
}

void append_row_text(std::ostringstream& os, const ArmRow& row, const std::vector<std::string>& domains,
                     std::size_t name_width) {
  os << std::left << std::setw(static_cast<int>(name_width)) << row.name << std::right;
  for (const auto& d : domains) {
    os << ' ' << std::setw(static_cast<int>(std::max<std::size_t>(d.size(), 6))) << std::fixed
       << std::setprecision(2) << row.errors.at(d);
  }
  os << ' ' << std::setw(6) << std::fixed << std::setprecision(2) << row.mean << '\n';
}

std::string table_text(const std::vector<std::string>& domains, const std::vector<const ArmRow*>& rows) {
  std::size_t name_width = 12;
  for (const auto* r : rows) name_width = std::max(name_width, r->name.size() + 1);
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_width)) << "arm" << std::right;
  for (const auto& d : domains) os << ' ' << std::setw(static_cast<int>(std::max<std::size_t>(d.size(), 6))) << d;
  os << ' ' << std::setw(6) << "mean" << '\n';
  for (const auto* r : rows) append_row_text(os, *r, domains, name_width);
  return os.str();
}

nlohmann::ordered_json row_json(const ArmRow& row, const std::vector<std::string>& domains) {
  nlohmann::ordered_json j;
  j["name"] = row.name;
  nlohmann::ordered_json errs = nlohmann::ordered_json::object();
  for (const auto& d : domains) errs[d] = row.errors.at(d);
  j["errors"] = errs;
  j["mean"] = row.mean;
  return j;
}

}  // namespace

double error_percent(std::size_t wrong, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(wrong) / static_cast<double>(total);
}

RunConfig::RunConfig() {
  for (auto k : kAllCorruptions) domains.emplace_back(to_string(k));
}

void RunConfig::validate() const {
  encoder.validate();
  subspace.validate();
  fusion.validate();
  if (data.classes.size() < 2) throw ConfigError("need at least two classes");
  if (data.train_per_class < 1 || data.test_per_class < 1) throw ConfigError("per-class counts must be >= 1");
  if (data.points < 8) throw ConfigError("points per cloud must be >= 8");
  if (!(memory_ratio > 0.0 && memory_ratio <= 1.0)) throw ConfigError("memory ratio must be in (0, 1]");
  if (severity < 1 || severity > 5) throw ConfigError("severity must be in [1, 5]");
  if (!(source.temperature > 0.0)) throw ConfigError("source temperature must be positive");
  if (source.kind == SourceConfig::Kind::file && source.logits_path.empty()) {
    throw ConfigError("file source needs a logits path");
  }
  if (domains.empty()) throw ConfigError("domain list is empty");
  for (const auto& d : domains) {
    if (d != kClean) parse_corruption_kind(d);
  }
  if (static_cast<std::size_t>(data.points) < minimum_points(encoder)) {
    throw ConfigError("points per cloud below the encoder minimum of " + std::to_string(minimum_points(encoder)));
  }
}

std::vector<SampleRef> dataset_samples(const RunConfig& cfg, bool train) {
  std::vector<SampleRef> out;
  const int per_class = train ? cfg.data.train_per_class : cfg.data.test_per_class;
  const std::string_view split = train ? "train" : "test";
  for (std::size_t c = 0; c < cfg.data.classes.size(); ++c) {
    for (int i = 0; i < per_class; ++i) {
      CounterRng rng(cfg.seed, split, c * 1'000'003ULL + static_cast<std::uint64_t>(i));
      out.push_back({cfg.data.classes[c], static_cast<int>(c), rng.next_u64()});
    }
  }
  return out;
}

PointCloud make_cloud(const RunConfig& cfg, const SampleRef& ref) {
  return generate_instance(ref.shape, static_cast<std::size_t>(cfg.data.points), ref.instance_seed);
}

PointCloud make_test_cloud(const RunConfig& cfg, const SampleRef& ref, const std::string& domain,
                           std::size_t dataset_index) {
  auto cloud = make_cloud(cfg, ref);
  if (domain == kClean) return cloud;
  return corrupt(cloud, {parse_corruption_kind(domain), cfg.severity, cfg.seed, dataset_index});
}

PreparedBenchmark prepare_benchmark(const RunConfig& cfg) {
  cfg.validate();
  const std::size_t threads = threads_for(cfg);
  PreparedBenchmark data;
  data.class_count = static_cast<int>(cfg.data.classes.size());
  data.domains = cfg.domains;

  const auto train = dataset_samples(cfg, true);
  data.train_features.resize(static_cast<Eigen::Index>(train.size()),
                             static_cast<Eigen::Index>(cfg.encoder.output_dim()));
  parallel_for(
      train.size(),
      [&](std::size_t i) {
        try {
          data.train_features.row(static_cast<Eigen::Index>(i)) = encode(make_cloud(cfg, train[i]), cfg.encoder);
        } catch (...) {
          rethrow_with_context("train sample " + std::to_string(i));
        }
      },
      threads);
  for (const auto& s : train) data.train_labels.push_back(s.label);

  const auto test = dataset_samples(cfg, false);
  data.test_ids.resize(test.size());
  std::iota(data.test_ids.begin(), data.test_ids.end(), std::size_t{0});
  CounterRng order_rng(cfg.seed, "test-order", 0);
  for (std::size_t i = data.test_ids.size(); i > 1; --i) {
    std::swap(data.test_ids[i - 1], data.test_ids[order_rng.below(i)]);
  }
  for (auto id : data.test_ids) data.test_labels.push_back(test[id].label);

  for (const auto& d : data.domains) {
    data.test_features[d].resize(static_cast<Eigen::Index>(test.size()),
                                 static_cast<Eigen::Index>(cfg.encoder.output_dim()));
  }
  const std::size_t n_test = test.size();
  parallel_for(
      data.domains.size() * n_test,
      [&](std::size_t flat) {
        const auto& d = data.domains[flat / n_test];
        const std::size_t row = flat % n_test;
        const std::size_t id = data.test_ids[row];
        try {
          data.test_features.at(d).row(static_cast<Eigen::Index>(row)) =
              encode(make_test_cloud(cfg, test[id], d, id), cfg.encoder);
        } catch (...) {
          rethrow_with_context("domain " + d + ", sample " + std::to_string(id));
        }
      },
      threads);
  return data;
}

const ArmRow& ErrorReport::arm(const std::string& name) const {
  for (const auto& a : arms) {
    if (a.name == name) return a;
  }
  throw ArgumentError("report has no arm '" + name + "'");
}

ErrorReport evaluate(const PreparedBenchmark& data, const RunConfig& cfg) {
  cfg.validate();
  const auto runs = run_samples(data, cfg);
  ErrorReport report;
  report.domains = data.domains;
  report.arms.push_back(source_only_arm(data, runs));
  report.arms.push_back(
      arm_from("adaptation", data, runs, [](const AdaptedSample& s) { return s.bf_scores; }));
  report.arms.push_back(
      arm_from("bftt3d", data, runs, [](const AdaptedSample& s) { return s.fusion.logits; }));
  for (const auto& d : data.domains) {
    std::vector<double> ps;
    for (const auto& s : runs.domains.at(d).samples) ps.push_back(s.fusion.p);
    std::sort(ps.begin(), ps.end());
    PSummary sum;
    if (!ps.empty()) {
      sum.min = ps.front();
      sum.max = ps.back();
      sum.median = ps.size() % 2 == 1 ? ps[ps.size() / 2] : 0.5 * (ps[ps.size() / 2 - 1] + ps[ps.size() / 2]);
    }
    report.p_summary[d] = sum;
  }
  report.warnings = runs.warnings;
  report.memory_hash_before = runs.memory_hash_before;
  report.memory_hash_after = runs.memory_hash_after;
  report.source_hash_before = runs.source_hash_before;
  report.source_hash_after = runs.source_hash_after;
  if (!cfg.trace_path.empty()) write_trace(data, runs, cfg.trace_path);
  return report;
}

ErrorReport run_benchmark(const RunConfig& cfg) { return evaluate(prepare_benchmark(cfg), cfg); }

nlohmann::ordered_json ErrorReport::to_json() const {
  nlohmann::ordered_json j;
  j["domains"] = domains;
  j["arms"] = nlohmann::ordered_json::array();
  for (const auto& a : arms) j["arms"].push_back(row_json(a, domains));
  nlohmann::ordered_json ps = nlohmann::ordered_json::object();
  for (const auto& d : domains) {
    const auto& s = p_summary.at(d);
    ps[d] = {{"min", s.min}, {"median", s.median}, {"max", s.max}};
  }
  j["fusion_p"] = ps;
  j["warnings"] = warnings;
  j["state_hashes"] = {{"memory_before", hex(memory_hash_before)},
                       {"memory_after", hex(memory_hash_after)},
                       {"source_before", hex(source_hash_before)},
                       {"source_after", hex(source_hash_after)}};
  return j;
}

std::string ErrorReport::to_text() const {
  std::vector<const ArmRow*> rows;
  for (const auto& a : arms) rows.push_back(&a);
  std::ostringstream os;
  os << "classification error (%)\n" << table_text(domains, rows);
  os << "\nfusion weight p (min / median / max)\n";
  for (const auto& d : domains) {
    const auto& s = p_summary.at(d);
    os << "  " << std::left << std::setw(12) << d << std::right << std::fixed << std::setprecision(3) << s.min
       << " / " << s.median << " / " << s.max << '\n';
  }
  for (const auto& w : warnings) os << "warning: " << w << '\n';
  return os.str();
}

AblationAxis parse_ablation_axis(std::string_view name) {
  if (name == "ratio") return AblationAxis::ratio;
  if (name == "subspace") return AblationAxis::subspace;
  if (name == "fusion-ratio") return AblationAxis::fusion_ratio;
  throw ConfigError("unknown ablation axis '" + std::string(name) + "'");
}

std::string_view to_string(AblationAxis axis) noexcept {
  switch (axis) {
    case AblationAxis::ratio: return "ratio";
    case AblationAxis::subspace: return "subspace";
    case AblationAxis::fusion_ratio: return "fusion-ratio";
  }
  return "unknown";
}

AblationReport run_ablation(const PreparedBenchmark& data, const RunConfig& cfg, AblationAxis axis) {
  cfg.validate();
  AblationReport rep;
  rep.axis = axis;
  rep.domains = data.domains;
  switch (axis) {
    case AblationAxis::ratio:
      for (int pct : {25, 50, 75, 100}) {
        RunConfig c = cfg;
        c.memory_ratio = pct / 100.0;
        c.trace_path.clear();
        const auto r = evaluate(data, c);
        if (pct == 25) rep.source_only = r.arm("source-only");
        ArmRow row = r.arm("bftt3d");
        row.name = "ratio=" + std::to_string(pct) + "%";
        rep.rows.push_back(std::move(row));
      }
      break;
    case AblationAxis::subspace:
      for (auto method : {SubspaceMethod::none, SubspaceMethod::tca}) {
        RunConfig c = cfg;
        c.subspace.method = method;
        c.trace_path.clear();
        const auto r = evaluate(data, c);
        if (method == SubspaceMethod::none) rep.source_only = r.arm("source-only");
        ArmRow row = r.arm("bftt3d");
        row.name = "subspace=" + std::string(to_string(method));
        rep.rows.push_back(std::move(row));
      }
      break;
    case AblationAxis::fusion_ratio: {
      const auto runs = run_samples(data, cfg);
      rep.source_only = source_only_arm(data, runs);
      for (int k = 0; k <= 10; ++k) {
        FusionConfig f = cfg.fusion;
        f.mode = FusionMode::fixed;
        f.fixed_p = k / 10.0;
        std::ostringstream name;
        name << "p=" << std::fixed << std::setprecision(1) << f.fixed_p;
        rep.rows.push_back(
            arm_from(name.str(), data, runs, [&](const AdaptedSample& s) { return refuse(s, f).logits; }));
      }
      FusionConfig f = cfg.fusion;
      f.mode = FusionMode::adaptive;
      rep.rows.push_back(arm_from("adaptive", data, runs, [&](const AdaptedSample& s) { return refuse(s, f).logits; }));
      break;
    }
  }
  return rep;
}

AblationReport run_ablation(const RunConfig& cfg, AblationAxis axis) {
  return run_ablation(prepare_benchmark(cfg), cfg, axis);
}

nlohmann::ordered_json AblationReport::to_json() const {
  nlohmann::ordered_json j;
  j["axis"] = std::string(to_string(axis));
  j["domains"] = domains;
  j["source_only"] = row_json(source_only, domains);
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) j["rows"].push_back(row_json(r, domains));
  return j;
}

std::string AblationReport::to_text() const {
  std::vector<const ArmRow*> all{&source_only};
  for (const auto& r : rows) all.push_back(&r);
  return "ablation: " + std::string(to_string(axis)) + " (classification error %)\n" + table_text(domains, all);
}

}  // namespace bftt3d
