#include "rwis/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rwis {

using nlohmann::json;

namespace {

void get_if(const json& j, const char* key, auto& dest) {
  if (j.contains(key)) dest = j.at(key).get<std::decay_t<decltype(dest)>>();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  ExperimentConfig c;
  get_if(j, "model", c.model);
  get_if(j, "seed", c.seed);
  get_if(j, "workers", c.workers);
  get_if(j, "out", c.out);
  if (j.contains("kernel")) {
    const auto& k = j.at("kernel");
    get_if(k, "type", c.kernel.type);
    get_if(k, "kappa", c.kernel.kappa);
    get_if(k, "csv", c.kernel.csv);
    get_if(k, "bins", c.kernel.bins);
    get_if(k, "directions", c.kernel.directions);
  }
  if (j.contains("simulate_duet")) {
    const auto& d = j.at("simulate_duet");
    get_if(d, "t_events", c.duet_t_events);
    get_if(d, "horizons", c.duet_horizons);
    get_if(d, "trials", c.duet_trials);
    get_if(d, "lambda0", c.duet_lambda0);
    get_if(d, "max_events", c.duet_max_events);
  }
  if (j.contains("return_tail")) {
    const auto& d = j.at("return_tail");
    get_if(d, "t_grid", c.tail_t_grid);
    get_if(d, "trials", c.tail_trials);
    get_if(d, "t_max", c.tail_t_max);
  }
  if (j.contains("llt")) {
    const auto& d = j.at("llt");
    get_if(d, "t_grid", c.llt_t_grid);
    get_if(d, "initial_state", c.llt_initial_state);
  }
  if (j.contains("sigma")) {
    const auto& d = j.at("sigma");
    get_if(d, "trials", c.sigma_trials);
    get_if(d, "lambda_t", c.sigma_lambda_t);
  }
  if (j.contains("renewal")) {
    const auto& d = j.at("renewal");
    get_if(d, "task", c.renewal_task);
    get_if(d, "tail", c.renewal_tail);
    get_if(d, "t_grid", c.renewal_t_grid);
    get_if(d, "trials", c.renewal_trials);
    get_if(d, "a", c.renewal_a);
    get_if(d, "b", c.renewal_b);
    get_if(d, "lambda0", c.renewal_lambda0);
    get_if(d, "order_n", c.renewal_order_n);
    get_if(d, "z_grid", c.renewal_z_grid);
  }
  if (j.contains("mixture_test")) {
    const auto& d = j.at("mixture_test");
    get_if(d, "duet_csv", c.mixture_duet_csv);
    get_if(d, "n", c.mixture_n);
    get_if(d, "permutations", c.mixture_permutations);
    get_if(d, "pair_cap", c.mixture_pair_cap);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string format_config(const ExperimentConfig& c) {
  json j;
  j["model"] = c.model;
  j["kernel"] = {{"type", c.kernel.type},
                 {"kappa", c.kernel.kappa},
                 {"csv", c.kernel.csv},
                 {"bins", c.kernel.bins},
                 {"directions", c.kernel.directions}};
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["out"] = c.out;
  j["simulate_duet"] = {{"t_events", c.duet_t_events},
                        {"horizons", c.duet_horizons},
                        {"trials", c.duet_trials},
                        {"lambda0", c.duet_lambda0},
                        {"max_events", c.duet_max_events}};
  j["return_tail"] = {{"t_grid", c.tail_t_grid}, {"trials", c.tail_trials}, {"t_max", c.tail_t_max}};
  j["llt"] = {{"t_grid", c.llt_t_grid}, {"initial_state", c.llt_initial_state}};
  j["sigma"] = {{"trials", c.sigma_trials}, {"lambda_t", c.sigma_lambda_t}};
  j["renewal"] = {{"task", c.renewal_task},     {"tail", c.renewal_tail},
                  {"t_grid", c.renewal_t_grid}, {"trials", c.renewal_trials},
                  {"a", c.renewal_a},           {"b", c.renewal_b},
                  {"lambda0", c.renewal_lambda0}, {"order_n", c.renewal_order_n},
                  {"z_grid", c.renewal_z_grid}};
  j["mixture_test"] = {{"duet_csv", c.mixture_duet_csv},
                       {"n", c.mixture_n},
                       {"permutations", c.mixture_permutations},
                       {"pair_cap", c.mixture_pair_cap}};
  return j.dump(2) + "\n";
}

std::string format_manifest(const RunManifest& m) {
  json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["tool_version"] = kToolVersion;
  j["subcommand"] = m.subcommand;
  j["master_seed"] = m.master_seed;
  j["workers"] = m.workers;
  j["stream_rule"] = m.stream_rule;
  j["wall_time_seconds"] = m.wall_time_seconds;
  j["config"] = json::parse(format_config(m.config));
  j["outputs"] = json::array();
  for (const auto& o : m.outputs) {
    j["outputs"].push_back({{"path", o.path}, {"bytes", o.bytes}, {"fnv1a64", o.fnv1a64}});
  }
  return j.dump(2) + "\n";
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fnv1a64: cannot open '" + path + "'");
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  file_ = f;
  std::string line;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) line += ',';
    line += header[i];
  }
  line += '\n';
  std::fwrite(line.data(), 1, line.size(), f);
}

CsvWriter::~CsvWriter() { close(); }

void CsvWriter::close() {
  if (file_) {
    std::fclose(static_cast<FILE*>(file_));
    file_ = nullptr;
  }
}

void CsvWriter::row(const std::vector<double>& values) {
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += format_double(values[i]);
  }
  line += '\n';
  std::fwrite(line.data(), 1, line.size(), static_cast<FILE*>(file_));
}

void CsvWriter::raw_row(const std::string& line) {
  std::fwrite(line.data(), 1, line.size(), static_cast<FILE*>(file_));
  std::fwrite("\n", 1, 1, static_cast<FILE*>(file_));
}

}  // namespace rwis
