#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "svda/cli.hpp"
#include "svda/errors.hpp"

namespace svda::cli {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

int line_at(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Line of the key at `path`, found by walking the quoted keys in order.
int line_of(std::string_view text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    const auto hit = text.find('"' + key + '"', pos);
    if (hit == std::string_view::npos) return 0;
    pos = hit + key.size() + 2;
  }
  return line_at(text, pos);
}

class Section {
 public:
  Section(const json& node, std::vector<std::string> path, std::string_view text)
      : node_(node), path_(std::move(path)), text_(text) {
    if (!node_.is_object()) fail(path_, "expected an object");
  }

  Section child(const std::string& key) const {
    static const json kEmpty = json::object();
    used_.insert(key);
    auto p = path_;
    p.push_back(key);
    const auto it = node_.find(key);
    return Section(it == node_.end() ? kEmpty : *it, p, text_);
  }

  void number(const std::string& key, double& out) const {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) const {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      const auto value = v->get<std::int64_t>();
      if (value < -1'000'000'000 || value > 1'000'000'000) fail(key, "integer out of range");
      out = static_cast<int>(value);
    }
  }

  void unsigned64(const std::string& key, std::uint64_t& out) const {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "expected a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void integers(const std::string& key, std::vector<int>& out) const {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) fail(key, "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }

  void text(const std::string& key, std::string& out) const {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!used_.count(key)) fail(key, "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    auto p = path_;
    p.push_back(key);
    fail(p, message);
  }

 private:
  const json* find(const std::string& key) const {
    used_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& message) const {
    std::string dotted;
    for (const auto& k : path) dotted += (dotted.empty() ? "" : ".") + k;
    const int line = line_of(text_, path);
    throw Error(ErrorKind::Config, (line > 0 ? "line " + std::to_string(line) + ": " : "") +
                                       (dotted.empty() ? "" : dotted + ": ") + message);
  }

  const json& node_;
  std::vector<std::string> path_;
  std::string_view text_;
  mutable std::set<std::string> used_;
};

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::LookbackTooLarge:
    case ErrorKind::PatchOutsideDomain:
    case ErrorKind::Io:
      return kConfigError;
    case ErrorKind::DivergedLoss:
      return kTrainingError;
    case ErrorKind::BoundViolated:
      return kBoundViolation;
    default:
      return kSolverError;
  }
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, "line " + std::to_string(line_at(text, e.byte == 0 ? 0 : e.byte - 1)) +
                                       ": malformed JSON (" + e.what() + ")");
  }
  ExperimentConfig c;
  const Section root(doc, {}, text);
  int version = 0;
  root.integer("schema_version", version);
  if (version != kSchemaVersion) {
    root.fail("schema_version", "expected schema_version " + std::to_string(kSchemaVersion));
  }

  std::string mode = c.mode == Mode::Future ? "future" : "parametric";
  root.text("mode", mode);
  if (mode == "future") {
    c.mode = Mode::Future;
  } else if (mode == "parametric") {
    c.mode = Mode::Parametric;
  } else {
    root.fail("mode", "expected \"future\" or \"parametric\"");
  }

  const Section mesh = root.child("mesh");
  mesh.integer("nx", c.nx);
  mesh.integer("ny", c.ny);
  mesh.finish();

  const Section time = root.child("time");
  time.number("T", c.T);
  time.integer("K", c.K);
  time.integer("k_off", c.k_off);
  time.finish();

  const Section physics = root.child("physics");
  physics.number("mu_true", c.mu_true);
  physics.number("mu_bk", c.mu_bk);
  physics.number("mu_test", c.mu_test);
  physics.number("sigma", c.radiation.sigma);
  physics.number("epsilon", c.radiation.epsilon);
  physics.number("u_r", c.radiation.u_r);
  physics.number("u0", c.u0);
  physics.finish();

  const Section sensors = root.child("sensors");
  sensors.integer("side_count", c.side_count);
  sensors.number("halfwidth", c.halfwidth);
  sensors.finish();

  const Section reduction = root.child("reduction");
  reduction.integer("N", c.N);
  reduction.finish();

  const Section ml = root.child("ml");
  ml.integer("lookback", c.ml.lookback);
  ml.integer("hidden", c.ml.hidden_size);
  ml.integers("dense_widths", c.ml.dense_widths);
  ml.number("learning_rate", c.ml.learning_rate);
  ml.integer("epochs", c.ml.epochs);
  ml.unsigned64("seed", c.ml.seed);
  std::string output = c.ml.output == ml::OutputMode::Absolute ? "absolute" : "increment";
  ml.text("output", output);
  if (output == "absolute") {
    c.ml.output = ml::OutputMode::Absolute;
  } else if (output == "increment") {
    c.ml.output = ml::OutputMode::Increment;
  } else {
    ml.fail("output", "expected \"absolute\" or \"increment\"");
  }
  ml.finish();
  root.finish();

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const Error& e) {
    throw e.tagged(path.string());
  }
}

std::string serialize_config(const ExperimentConfig& c) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["mode"] = c.mode == Mode::Future ? "future" : "parametric";
  doc["mesh"] = {{"nx", c.nx}, {"ny", c.ny}};
  doc["time"] = {{"T", c.T}, {"K", c.K}, {"k_off", c.k_off}};
  doc["physics"] = {{"mu_true", c.mu_true},        {"mu_bk", c.mu_bk},
                    {"mu_test", c.mu_test},        {"sigma", c.radiation.sigma},
                    {"epsilon", c.radiation.epsilon}, {"u_r", c.radiation.u_r},
                    {"u0", c.u0}};
  doc["sensors"] = {{"side_count", c.side_count}, {"halfwidth", c.halfwidth}};
  doc["reduction"] = {{"N", c.N}};
  doc["ml"] = {{"lookback", c.ml.lookback},
               {"hidden", c.ml.hidden_size},
               {"dense_widths", c.ml.dense_widths},
               {"learning_rate", c.ml.learning_rate},
               {"epochs", c.ml.epochs},
               {"seed", c.ml.seed},
               {"output", c.ml.output == ml::OutputMode::Absolute ? "absolute" : "increment"}};
  return doc.dump(2) + "\n";
}

std::vector<std::string> preset_names() { return {"paper-a", "paper-b", "desk", "desk-b"}; }

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  c.ml.output = ml::OutputMode::Increment;
  if (name == "paper-a" || name == "paper-b") {
    c.nx = c.ny = 80;
  } else if (name != "desk" && name != "desk-b") {
    throw Error(ErrorKind::Config, "unknown preset \"" + std::string(name) + "\"");
  }
  if (name == "paper-b" || name == "desk-b") c.mode = Mode::Parametric;
  return c;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.nx == b.nx && a.ny == b.ny && a.T == b.T && a.K == b.K && a.k_off == b.k_off &&
         a.mu_true == b.mu_true && a.mu_bk == b.mu_bk && a.mu_test == b.mu_test &&
         a.radiation.sigma == b.radiation.sigma && a.radiation.epsilon == b.radiation.epsilon &&
         a.radiation.u_r == b.radiation.u_r && a.u0 == b.u0 && a.side_count == b.side_count &&
         a.halfwidth == b.halfwidth && a.N == b.N && a.ml.lookback == b.ml.lookback &&
         a.ml.hidden_size == b.ml.hidden_size && a.ml.dense_widths == b.ml.dense_widths &&
         a.ml.learning_rate == b.ml.learning_rate && a.ml.epochs == b.ml.epochs &&
         a.ml.seed == b.ml.seed && a.ml.output == b.ml.output && a.mode == b.mode;
}

}  // namespace svda::cli
