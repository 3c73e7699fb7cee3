#include "bftt3d/config.hpp"

#include <set>
#include <sstream>

#include <toml.hpp>

#include "bftt3d/error.hpp"

namespace bftt3d {

namespace {

class Table {
 public:
  Table(const toml::table* table, std::string prefix) : table_(table), prefix_(std::move(prefix)) {}

  void allow(std::initializer_list<std::string_view> keys) {
    if (!table_) return;
    const std::set<std::string_view> known(keys);
    for (const auto& [k, v] : *table_) {
      if (!known.contains(k.str())) throw ConfigError("unknown config key '" + name(k.str()) + "'");
    }
  }

  template <class T>
  void read(std::string_view key, T& out) const {
    const toml::node* node = find(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = node->value<bool>();
      if (!v) fail(key, "a boolean");
      out = *v;
    } else if constexpr (std::is_integral_v<T>) {
      if (!node->is_integer()) fail(key, "an integer");
      const auto v = node->as_integer()->get();
      if (v < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
          (v > 0 && static_cast<std::uint64_t>(v) > static_cast<std::uint64_t>(std::numeric_limits<T>::max()))) {
        fail(key, "an integer in range");
      }
      out = static_cast<T>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = node->value<double>();  // accepts integers too
      if (!v) fail(key, "a number");
      out = static_cast<T>(*v);
    } else {
      auto v = node->value<std::string>();
      if (!v) fail(key, "a string");
      out = *v;
    }
  }

  std::optional<std::vector<std::string>> strings(std::string_view key) const {
    const toml::node* node = find(key);
    if (!node) return std::nullopt;
    const auto* arr = node->as_array();
    if (!arr) fail(key, "an array of strings");
    std::vector<std::string> out;
    for (const auto& item : *arr) {
      auto v = item.value<std::string>();
      if (!v) fail(key, "an array of strings");
      out.push_back(*v);
    }
    return out;
  }

  std::string name(std::string_view key) const { return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key); }

 private:
  const toml::node* find(std::string_view key) const { return table_ ? table_->get(key) : nullptr; }

  [[noreturn]] void fail(std::string_view key, std::string_view want) const {
    throw ConfigError("config key '" + name(key) + "' must be " + std::string(want));
  }

  const toml::table* table_;
  std::string prefix_;
};

Table section(const toml::table& root, std::string_view key) {
  const toml::node* node = root.get(key);
  if (node && !node->is_table()) throw ConfigError("config key '" + std::string(key) + "' must be a table");
  return Table(node ? node->as_table() : nullptr, std::string(key));
}

}  // namespace

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "adaptive") return FusionMode::adaptive;
  if (name == "fixed") return FusionMode::fixed;
  throw ConfigError("unknown fusion mode '" + std::string(name) + "'");
}

std::string_view to_string(FusionMode mode) noexcept { return mode == FusionMode::adaptive ? "adaptive" : "fixed"; }

RunConfig parse_run_config(std::string_view toml_text, std::string_view source_name) {
  toml::table root;
  try {
    root = toml::parse(toml_text, source_name);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source_name << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }

  RunConfig cfg;
  Table top(&root, "");
  top.allow({"seed", "severity", "domains", "memory_ratio", "threads", "trace", "encoder", "data", "subspace",
             "fusion", "source"});
  top.read("seed", cfg.seed);
  top.read("severity", cfg.severity);
  top.read("memory_ratio", cfg.memory_ratio);
  top.read("threads", cfg.threads);
  std::string trace;
  top.read("trace", trace);
  if (!trace.empty()) cfg.trace_path = trace;
  if (auto d = top.strings("domains")) cfg.domains = *d;

  auto enc = section(root, "encoder");
  enc.allow({"d0", "alpha", "beta", "stages", "k_neighbors", "fps_ratio"});
  enc.read("d0", cfg.encoder.d0);
  enc.read("alpha", cfg.encoder.alpha);
  enc.read("beta", cfg.encoder.beta);
  enc.read("stages", cfg.encoder.stages);
  enc.read("k_neighbors", cfg.encoder.k_neighbors);
  enc.read("fps_ratio", cfg.encoder.fps_ratio);

  auto data = section(root, "data");
  data.allow({"classes", "train_per_class", "test_per_class", "points"});
  if (auto classes = data.strings("classes")) {
    cfg.data.classes.clear();
    for (const auto& c : *classes) cfg.data.classes.push_back(parse_shape_kind(c));
  }
  data.read("train_per_class", cfg.data.train_per_class);
  data.read("test_per_class", cfg.data.test_per_class);
  data.read("points", cfg.data.points);

  auto sub = section(root, "subspace");
  sub.allow({"method", "m", "mu", "kernel", "rbf_bandwidth", "batch", "center_features", "normalize_features"});
  std::string text;
  if (text.clear(), sub.read("method", text), !text.empty()) cfg.subspace.method = parse_subspace_method(text);
  sub.read("m", cfg.subspace.m);
  sub.read("mu", cfg.subspace.mu);
  if (text.clear(), sub.read("kernel", text), !text.empty()) cfg.subspace.kernel.kind = parse_kernel_kind(text);
  double bandwidth = 0.0;
  sub.read("rbf_bandwidth", bandwidth);
  if (bandwidth != 0.0) cfg.subspace.kernel.rbf_bandwidth = bandwidth;
  sub.read("batch", cfg.subspace.batch);
  sub.read("center_features", cfg.subspace.center_features);
  sub.read("normalize_features", cfg.subspace.normalize_features);

  auto fus = section(root, "fusion");
  fus.allow({"gamma", "mode", "p", "entropy_epsilon", "space", "aggregation"});
  fus.read("gamma", cfg.fusion.gamma);
  if (text.clear(), fus.read("mode", text), !text.empty()) cfg.fusion.mode = parse_fusion_mode(text);
  fus.read("p", cfg.fusion.fixed_p);
  fus.read("entropy_epsilon", cfg.fusion.entropy_epsilon);
  if (text.clear(), fus.read("space", text), !text.empty()) cfg.fusion.space = parse_fuse_space(text);
  if (text.clear(), fus.read("aggregation", text), !text.empty()) cfg.fusion.aggregation = parse_aggregation(text);

  auto src = section(root, "source");
  src.allow({"kind", "temperature", "logits"});
  if (text.clear(), src.read("kind", text), !text.empty()) {
    if (text == "centroid") {
      cfg.source.kind = SourceConfig::Kind::centroid;
    } else if (text == "file") {
      cfg.source.kind = SourceConfig::Kind::file;
    } else {
      throw ConfigError("unknown source kind '" + text + "'");
    }
  }
  src.read("temperature", cfg.source.temperature);
  src.read("logits", cfg.source.logits_path);

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = wire::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  const std::string text(bytes.begin(), bytes.end());
  auto cfg = parse_run_config(text, path.string());
  if (cfg.source.kind == SourceConfig::Kind::file) {
    const std::filesystem::path p(cfg.source.logits_path);
    if (p.is_relative()) cfg.source.logits_path = (path.parent_path() / p).string();
  }
  if (!cfg.trace_path.empty() && cfg.trace_path.is_relative()) cfg.trace_path = path.parent_path() / cfg.trace_path;
  return cfg;
}

}  // namespace bftt3d
