#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "rfgsnn/data/datasets.hpp"

namespace rfgsnn::data {

namespace {

constexpr const char* kTables[] = {"grids.csv", "inputs.csv", "targets.csv"};

std::string num(double v) { return fmt::format("{:.17g}", v); }

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DimensionError(fmt::format("dataset: bad number '{}'", s));
  return v;
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read {}", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", p.string()));
  out << text;
}

std::string render_grids(const Dataset& ds) {
  std::string s = "grid,index,value\n";
  for (std::size_t i = 0; i < ds.sensors.size(); ++i)
    s += fmt::format("sensor,{},{}\n", i, num(ds.sensors[i]));
  for (std::size_t a = 0; a < ds.axes.size(); ++a)
    for (std::size_t i = 0; i < ds.axes[a].size(); ++i)
      s += fmt::format("axis{},{},{}\n", a, i, num(ds.axes[a][i]));
  return s;
}

std::string render_inputs(const Dataset& ds) {
  std::vector<char> split(ds.records(), 'r');
  for (auto i : ds.test) split[i] = 'e';
  std::string s = "record,split";
  for (std::size_t j = 0; j < ds.input_size(); ++j) s += fmt::format(",in{}", j);
  s += '\n';
  for (std::size_t r = 0; r < ds.records(); ++r) {
    s += fmt::format("{},{}", r, split[r] == 'e' ? "test" : "train");
    for (double v : ds.inputs[r]) s += "," + num(v);
    s += '\n';
  }
  return s;
}

std::string render_targets(const Dataset& ds) {
  const std::size_t q = ds.grid_size();
  std::string s = "record";
  for (std::size_t j = 0; j < q; ++j) s += fmt::format(",y{}", j);
  s += '\n';
  for (std::size_t r = 0; r < ds.records(); ++r) {
    s += fmt::format("{}", r);
    for (std::size_t j = 0; j < q; ++j) s += "," + num(ds.targets[r * q + j]);
    s += '\n';
  }
  return s;
}

void put_config(boost::property_tree::ptree& t, const DataConfig& c) {
  t.put("seed", c.seed);
  t.put("sensors", c.sensors);
  t.put("mh_train", c.mh_train);
  t.put("mh_test_side", c.mh_test_side);
  t.put("mh_sigma", num(c.mh_sigma));
  t.put("poisson_functions", c.poisson_functions);
  t.put("poisson_train", c.poisson_train);
  t.put("poisson_points", c.poisson_points);
  t.put("poisson_length_scale", num(c.poisson_length_scale));
  t.put("dr_functions", c.dr_functions);
  t.put("dr_train", c.dr_train);
  t.put("dr_length_scale", num(c.dr_length_scale));
  t.put("dr_diffusion", num(c.dr_diffusion));
  t.put("dr_reaction", num(c.dr_reaction));
  t.put("dr_nx", c.dr_grid.nx);
  t.put("dr_nt", c.dr_grid.nt);
  t.put("dr_x0", num(c.dr_grid.x0));
  t.put("dr_x1", num(c.dr_grid.x1));
  t.put("dr_t_end", num(c.dr_grid.t_end));
}

DataConfig get_config(const boost::property_tree::ptree& t) {
  DataConfig c;
  c.seed = t.get<std::uint64_t>("seed");
  c.sensors = t.get<std::size_t>("sensors");
  c.mh_train = t.get<std::size_t>("mh_train");
  c.mh_test_side = t.get<std::size_t>("mh_test_side");
  c.mh_sigma = parse_double(t.get<std::string>("mh_sigma"));
  c.poisson_functions = t.get<std::size_t>("poisson_functions");
  c.poisson_train = t.get<std::size_t>("poisson_train");
  c.poisson_points = t.get<std::size_t>("poisson_points");
  c.poisson_length_scale = parse_double(t.get<std::string>("poisson_length_scale"));
  c.dr_functions = t.get<std::size_t>("dr_functions");
  c.dr_train = t.get<std::size_t>("dr_train");
  c.dr_length_scale = parse_double(t.get<std::string>("dr_length_scale"));
  c.dr_diffusion = parse_double(t.get<std::string>("dr_diffusion"));
  c.dr_reaction = parse_double(t.get<std::string>("dr_reaction"));
  c.dr_grid.nx = t.get<std::size_t>("dr_nx");
  c.dr_grid.nt = t.get<std::size_t>("dr_nt");
  c.dr_grid.x0 = parse_double(t.get<std::string>("dr_x0"));
  c.dr_grid.x1 = parse_double(t.get<std::string>("dr_x1"));
  c.dr_grid.t_end = parse_double(t.get<std::string>("dr_t_end"));
  return c;
}

}  // namespace

std::string content_hash(std::string_view bytes) {
  const std::string header = fmt::format("blob {}", bytes.size());
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size() + 1) &&  // includes the NUL
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) &&
                  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("sha1 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  const std::string tables[] = {render_grids(ds), render_inputs(ds), render_targets(ds)};
  std::string all;
  for (std::size_t i = 0; i < 3; ++i) {
    spit(dir / kTables[i], tables[i]);
    all += tables[i];
  }

  boost::property_tree::ptree meta;
  meta.put("task", std::string(task_name(ds.task)));
  meta.put("records", ds.records());
  meta.put("train", ds.train.size());
  meta.put("test", ds.test.size());
  meta.put("input_size", ds.input_size());
  meta.put("sensors", ds.sensors.size());
  std::string axes;
  for (const auto& a : ds.axes) axes += (axes.empty() ? "" : "x") + std::to_string(a.size());
  meta.put("query_grid", axes.empty() ? "none" : axes);
  meta.put("content_hash", content_hash(all));
  boost::property_tree::ptree root;
  root.add_child("dataset", meta);
  boost::property_tree::ptree cfg;
  put_config(cfg, ds.config);
  root.add_child("generator", cfg);
  boost::property_tree::write_ini((dir / "meta").string(), root);
}

Dataset read_dataset(const std::filesystem::path& dir) {
  boost::property_tree::ptree root;
  try {
    boost::property_tree::read_ini((dir / "meta").string(), root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(fmt::format("dataset meta: {}", e.what()));
  }
  Dataset ds;
  std::string all;
  std::string text[3];
  for (std::size_t i = 0; i < 3; ++i) {
    text[i] = slurp(dir / kTables[i]);
    all += text[i];
  }
  try {
    const auto& meta = root.get_child("dataset");
    ds.task = parse_task(meta.get<std::string>("task"));
    ds.config = get_config(root.get_child("generator"));
    if (content_hash(all) != meta.get<std::string>("content_hash"))
      throw DimensionError(fmt::format("dataset {}: content hash mismatch", dir.string()));
  } catch (const boost::property_tree::ptree_error& e) {
    throw Error(fmt::format("dataset meta: {}", e.what()));
  }

  std::map<std::string, std::vector<double>> grids;
  auto grid_lines = lines_of(text[0]);
  for (std::size_t i = 1; i < grid_lines.size(); ++i) {
    const auto f = split_row(grid_lines[i]);
    if (f.size() != 3) throw DimensionError("dataset: malformed grids.csv");
    grids[std::string(f[0])].push_back(parse_double(f[2]));
  }
  ds.sensors = grids["sensor"];
  for (std::size_t a = 0; grids.contains(fmt::format("axis{}", a)); ++a)
    ds.axes.push_back(grids[fmt::format("axis{}", a)]);

  auto input_lines = lines_of(text[1]);
  for (std::size_t i = 1; i < input_lines.size(); ++i) {
    const auto f = split_row(input_lines[i]);
    if (f.size() < 2) throw DimensionError("dataset: malformed inputs.csv");
    std::vector<double> row;
    for (std::size_t j = 2; j < f.size(); ++j) row.push_back(parse_double(f[j]));
    (f[1] == "test" ? ds.test : ds.train).push_back(ds.inputs.size());
    ds.inputs.push_back(std::move(row));
  }

  auto target_lines = lines_of(text[2]);
  for (std::size_t i = 1; i < target_lines.size(); ++i) {
    const auto f = split_row(target_lines[i]);
    for (std::size_t j = 1; j < f.size(); ++j) ds.targets.push_back(parse_double(f[j]));
  }
  ds.validate();
  return ds;
}

}  // namespace rfgsnn::data
