#include "rfgsnn/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace rfgsnn::harness {

namespace pt = boost::property_tree;

void Combination::validate() const {
  if ((gradient == GradientMethod::BP) != (perturbation == Perturbation::None))
    throw ConfigError("perturbation must be none exactly when the gradient method is BP");
}

grad::Estimator Combination::estimator() const {
  switch (perturbation) {
    case Perturbation::Global: return grad::Estimator::RFG_G;
    case Perturbation::Layerwise: return grad::Estimator::RFG_L;
    case Perturbation::None: break;
  }
  return grad::Estimator::BP;
}

std::string render(const Combination& c) {
  c.validate();
  std::string s = c.surrogate == snn::SurrogateKind::SG ? "SG" : "WSG";
  if (c.gradient == GradientMethod::BP) {
    s += "-BP";
  } else {
    s += "-RFG";
    if (!c.local_loss || c.perturbation == Perturbation::Layerwise)
      s += c.perturbation == Perturbation::Global ? "-G" : "-L";
  }
  if (c.local_loss) s += "-LL";
  return s;
}

Combination parse_combination(std::string_view name) {
  std::vector<std::string_view> parts;
  for (std::size_t start = 0;;) {
    const auto dash = name.find('-', start);
    parts.push_back(name.substr(start, dash - start));
    if (dash == std::string_view::npos) break;
    start = dash + 1;
  }
  auto bad = [&] { return ConfigError(fmt::format("invalid combination name '{}'", name)); };
  Combination c;
  std::size_t i = 0;
  if (parts[i] == "SG") c.surrogate = snn::SurrogateKind::SG;
  else if (parts[i] == "WSG") c.surrogate = snn::SurrogateKind::WSG;
  else throw bad();
  if (++i >= parts.size()) throw bad();
  if (parts[i] == "BP") {
    c.gradient = GradientMethod::BP;
    ++i;
  } else if (parts[i] == "RFG") {
    c.gradient = GradientMethod::RFG;
    c.perturbation = Perturbation::Global;
    if (++i < parts.size() && parts[i] != "LL") {
      if (parts[i] == "G") c.perturbation = Perturbation::Global;
      else if (parts[i] == "L") c.perturbation = Perturbation::Layerwise;
      else throw bad();
      ++i;
    } else if (i >= parts.size()) {
      throw bad();  // bare "SG-RFG"
    }
  } else {
    throw bad();
  }
  if (i < parts.size() && parts[i] == "LL") {
    c.local_loss = true;
    ++i;
  }
  if (i != parts.size()) throw bad();
  // SG-RFG-G-LL would not round-trip; the canonical spelling is SG-RFG-LL.
  if (render(c) != name) throw bad();
  return c;
}

std::vector<Combination> table_combinations() {
  std::vector<Combination> out;
  for (const char* n : {"SG-BP", "WSG-BP", "SG-BP-LL", "WSG-BP-LL", "SG-RFG-G", "WSG-RFG-G",
                        "SG-RFG-L", "WSG-RFG-L", "SG-RFG-LL", "WSG-RFG-LL"})
    out.push_back(parse_combination(n));
  return out;
}

void ExperimentConfig::validate() const {
  combination.validate();
  neuron.validate();
  optimizer.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  for (auto w : hidden)
    if (w == 0) throw ConfigError("hidden widths must be positive");
  if (features == 0) throw ConfigError("features must be positive");
  if (!(sigma > 0.0)) throw ConfigError("surrogate sigma must be positive");
  if (wsg_samples == 0) throw ConfigError("wsg samples must be positive");
  if (!(local_weight >= 0.0)) throw ConfigError("local_weight must be non-negative");
  if (label.find_first_of(",\n\"") != std::string::npos)
    throw ConfigError("label may not contain commas, quotes or newlines");
}

ExperimentConfig default_config(data::Task task) {
  ExperimentConfig c;
  c.task = task;
  switch (task) {
    case data::Task::MexicanHat:
      c.epochs = 200;
      c.batch_size = 256;
      c.hidden = {16, 16};
      c.sigma = 0.5;
      break;
    case data::Task::Poisson1d:
      c.epochs = 500;
      c.batch_size = 64;
      c.hidden = {32};
      c.features = 16;
      c.sigma = 0.3;
      break;
    case data::Task::DiffusionReaction:
      c.epochs = 500;
      c.batch_size = 16;
      c.hidden = {16};
      c.features = 16;
      c.sigma = 0.5;
      break;
  }
  return c;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, v));
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, v));
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');)
    out.push_back(parse_number<std::size_t>(key, trim(item)));
  return out;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

pt::ptree read_tree(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config: {}", e.message()));
  }
  return tree;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  const pt::ptree tree = read_tree(text);

  // The task decides the defaults, so read it first.
  data::Task task = data::Task::MexicanHat;
  if (auto t = tree.get_optional<std::string>("task.name")) task = data::parse_task(trim(*t));
  ExperimentConfig c = default_config(task);

  for (const auto& [section, body] : tree) {
    if (!body.data().empty())
      throw ConfigError(fmt::format("config: key '{}' outside any section", section));
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const std::string v = trim(node.data());
      if (section == "task") {
        if (key == "name") continue;
        else if (key == "label") c.label = v;
        else if (key == "epochs") c.epochs = parse_number<std::size_t>(full, v);
        else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(full, v);
        else throw ConfigError(fmt::format("config: unknown key '{}'", full));
      } else if (section == "network") {
        if (key == "hidden") c.hidden = parse_widths(full, v);
        else if (key == "features") c.features = parse_number<std::size_t>(full, v);
        else if (key == "time_steps") c.neuron.time_steps = parse_number<int>(full, v);
        else if (key == "threshold") c.neuron.threshold = parse_number<double>(full, v);
        else if (key == "leak") c.neuron.leak = parse_number<double>(full, v);
        else if (key == "detach_reset") c.neuron.detach_reset = parse_bool(full, v);
        else if (key == "local_loss") c.combination.local_loss = parse_bool(full, v);
        else if (key == "local_weight") c.local_weight = parse_number<double>(full, v);
        else throw ConfigError(fmt::format("config: unknown key '{}'", full));
      } else if (section == "surrogate") {
        if (key == "kind") {
          if (v == "SG") c.combination.surrogate = snn::SurrogateKind::SG;
          else if (v == "WSG") c.combination.surrogate = snn::SurrogateKind::WSG;
          else throw ConfigError(fmt::format("{}: expected SG or WSG, got '{}'", full, v));
        } else if (key == "sigma") {
          c.sigma = parse_number<double>(full, v);
        } else if (key == "samples") {
          c.wsg_samples = parse_number<std::size_t>(full, v);
        } else {
          throw ConfigError(fmt::format("config: unknown key '{}'", full));
        }
      } else if (section == "gradient") {
        if (key == "method") {
          if (v == "BP") c.combination.gradient = GradientMethod::BP;
          else if (v == "RFG") c.combination.gradient = GradientMethod::RFG;
          else throw ConfigError(fmt::format("{}: expected BP or RFG, got '{}'", full, v));
        } else if (key == "perturbation") {
          if (v == "none") c.combination.perturbation = Perturbation::None;
          else if (v == "G") c.combination.perturbation = Perturbation::Global;
          else if (v == "L") c.combination.perturbation = Perturbation::Layerwise;
          else throw ConfigError(fmt::format("{}: expected none, G or L, got '{}'", full, v));
        } else {
          throw ConfigError(fmt::format("config: unknown key '{}'", full));
        }
      } else if (section == "optimizer") {
        if (key == "kind") {
          if (v == "adam") c.optimizer.kind = grad::OptimizerKind::Adam;
          else if (v == "sgd") c.optimizer.kind = grad::OptimizerKind::SGD;
          else throw ConfigError(fmt::format("{}: expected adam or sgd, got '{}'", full, v));
        } else if (key == "learning_rate") {
          c.optimizer.learning_rate = parse_number<double>(full, v);
        } else if (key == "beta1") {
          c.optimizer.beta1 = parse_number<double>(full, v);
        } else if (key == "beta2") {
          c.optimizer.beta2 = parse_number<double>(full, v);
        } else if (key == "epsilon") {
          c.optimizer.epsilon = parse_number<double>(full, v);
        } else if (key == "schedule") {
          if (v == "constant") c.optimizer.schedule = grad::Schedule::Constant;
          else if (v == "cosine") c.optimizer.schedule = grad::Schedule::Cosine;
          else throw ConfigError(fmt::format("{}: expected constant or cosine, got '{}'", full, v));
        } else if (key == "final_fraction") {
          c.optimizer.final_fraction = parse_number<double>(full, v);
        } else {
          throw ConfigError(fmt::format("config: unknown key '{}'", full));
        }
      } else if (section == "seeds") {
        if (key == "seed") c.seed = parse_number<std::uint64_t>(full, v);
        else throw ConfigError(fmt::format("config: unknown key '{}'", full));
      } else {
        throw ConfigError(fmt::format("config: unknown section [{}]", section));
      }
    }
  }
  // A bare method = RFG means the global perturbation.
  if (c.combination.gradient == GradientMethod::RFG &&
      c.combination.perturbation == Perturbation::None &&
      !tree.get_optional<std::string>("gradient.perturbation"))
    c.combination.perturbation = Perturbation::Global;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", file.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const ExperimentConfig& c) {
  const auto& comb = c.combination;
  std::string hidden;
  for (auto w : c.hidden) hidden += (hidden.empty() ? "" : ",") + std::to_string(w);
  const char* pert = comb.perturbation == Perturbation::None     ? "none"
                     : comb.perturbation == Perturbation::Global ? "G"
                                                                 : "L";
  std::string s;
  s += "[task]\n";
  s += fmt::format("name = {}\n", data::task_name(c.task));
  if (!c.label.empty()) s += fmt::format("label = {}\n", c.label);
  s += fmt::format("epochs = {}\nbatch_size = {}\n\n", c.epochs, c.batch_size);
  s += "[network]\n";
  s += fmt::format("hidden = {}\nfeatures = {}\ntime_steps = {}\n", hidden, c.features,
                   c.neuron.time_steps);
  s += fmt::format("threshold = {}\nleak = {}\ndetach_reset = {}\n", num(c.neuron.threshold),
                   num(c.neuron.leak), c.neuron.detach_reset);
  s += fmt::format("local_loss = {}\nlocal_weight = {}\n\n", comb.local_loss, num(c.local_weight));
  s += "[surrogate]\n";
  s += fmt::format("kind = {}\nsigma = {}\nsamples = {}\n\n",
                   comb.surrogate == snn::SurrogateKind::SG ? "SG" : "WSG", num(c.sigma),
                   c.wsg_samples);
  s += "[gradient]\n";
  s += fmt::format("method = {}\nperturbation = {}\n\n",
                   comb.gradient == GradientMethod::BP ? "BP" : "RFG", pert);
  s += "[optimizer]\n";
  s += fmt::format("kind = {}\nlearning_rate = {}\nbeta1 = {}\nbeta2 = {}\nepsilon = {}\n",
                   c.optimizer.kind == grad::OptimizerKind::Adam ? "adam" : "sgd",
                   num(c.optimizer.learning_rate), num(c.optimizer.beta1),
                   num(c.optimizer.beta2), num(c.optimizer.epsilon));
  s += fmt::format("schedule = {}\nfinal_fraction = {}\n\n",
                   c.optimizer.schedule == grad::Schedule::Cosine ? "cosine" : "constant",
                   num(c.optimizer.final_fraction));
  s += "[seeds]\n";
  s += fmt::format("seed = {}\n", c.seed);
  return s;
}

std::string config_hash(const ExperimentConfig& cfg) {
  return data::content_hash(render_config(cfg));
}

MatrixSpec load_matrix(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot read matrix {}", file.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  const pt::ptree tree = read_tree(ss.str());

  std::optional<std::string> base, combos;
  MatrixSpec spec;
  for (const auto& [section, body] : tree) {
    if (section != "matrix") throw ConfigError(fmt::format("matrix: unknown section [{}]", section));
    for (const auto& [key, node] : body) {
      const std::string v = trim(node.data());
      if (key == "base") base = v;
      else if (key == "combinations") combos = v;
      else if (key == "data") spec.data = file.parent_path() / v;
      else if (key == "data_seed") spec.data_seed = parse_number<std::uint64_t>("matrix.data_seed", v);
      else throw ConfigError(fmt::format("matrix: unknown key '{}'", key));
    }
  }
  if (!base) throw ConfigError("matrix: missing base config");
  const ExperimentConfig proto = load_config(file.parent_path() / *base);
  if (!combos) {
    spec.runs.push_back(proto);
    return spec;
  }
  std::stringstream list(*combos);
  std::set<std::string> seen;
  for (std::string item; std::getline(list, item, ',');) {
    ExperimentConfig run = proto;
    run.label.clear();
    run.combination = parse_combination(trim(item));
    if (!seen.insert(run.name()).second)
      throw ConfigError(fmt::format("matrix: duplicate combination {}", run.name()));
    spec.runs.push_back(run);
  }
  if (spec.runs.empty()) throw ConfigError("matrix: no combinations");
  return spec;
}

}  // namespace rfgsnn::harness
