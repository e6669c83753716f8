#include "cqs/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace cqs {
namespace {

namespace pt = boost::property_tree;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::invalid_argument, "config [" + where + "]: " + what);
}

template <typename T>
T read(const pt::ptree& node, const std::string& section, const std::string& key) {
  try {
    return node.get_value<T>();
  } catch (const pt::ptree_error&) {
    bad(section, "bad value for '" + key + "'");
  }
}

bool read_bool(const pt::ptree& node, const std::string& section, const std::string& key) {
  const std::string v = node.get_value<std::string>();
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  bad(section, "'" + key + "' must be a boolean");
}

using Handler = std::function<void(const std::string& key, const pt::ptree& value)>;

void each_key(const pt::ptree& section, const std::string& name, const Handler& h) {
  for (const auto& [key, value] : section) {
    if (!value.empty()) bad(name, "nested key '" + key + "'");
    h(key, value);
  }
}

BackendConfig backend_section(const std::string& id, const pt::ptree& section) {
  BackendConfig b;
  b.backend_id = id;
  const std::string name = "backend." + id;
  each_key(section, name, [&](const std::string& key, const pt::ptree& v) {
    if (key == "kind") {
      b.kind = backend_kind_from_string(v.get_value<std::string>());
    } else if (key == "endpoint") {
      b.endpoint = v.get_value<std::string>();
    } else if (key == "model") {
      b.model = v.get_value<std::string>();
    } else if (key == "timeout_ms") {
      b.timeout = std::chrono::milliseconds(read<long long>(v, name, key));
    } else if (key == "max_retries") {
      b.max_retries = read<int>(v, name, key);
    } else if (key == "max_in_flight") {
      b.max_in_flight = read<int>(v, name, key);
    } else if (key == "backoff_base_ms") {
      b.backoff_base = std::chrono::milliseconds(read<long long>(v, name, key));
    } else if (key == "script") {
      b.script_path = v.get_value<std::string>();
    } else {
      bad(name, "unknown key '" + key + "'");
    }
  });
  validate_config(b);
  return b;
}

}  // namespace

AppConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::parse, std::string("config: ") + e.what());
  }
  AppConfig cfg;
  for (const auto& [section_name, section] : tree) {
    const std::string& s = section_name;
    if (section.empty() && !section.data().empty()) bad(s, "key outside any section");
    if (s.rfind("backend.", 0) == 0) {
      cfg.backends.push_back(backend_section(s.substr(8), section));
    } else if (s == "collect") {
      each_key(section, s, [&](const std::string& k, const pt::ptree& v) {
        if (k == "backend") cfg.collect.backend_id = v.get_value<std::string>();
        else if (k == "temperature") cfg.collect.temperature = read<double>(v, s, k);
        else if (k == "max_tokens") cfg.collect.max_tokens = read<int>(v, s, k);
        else if (k == "samples") cfg.samples = read<int>(v, s, k);
        else if (k == "sample_temperature") cfg.sample_temperature = read<double>(v, s, k);
        else if (k == "extra_tags") {
          std::istringstream tags(v.get_value<std::string>());
          for (std::string t; std::getline(tags, t, ',');) {
            if (!trim(t).empty()) cfg.collect.tags.push_back(canonical_tag(t));
          }
        } else bad(s, "unknown key '" + k + "'");
      });
    } else if (s == "judge") {
      each_key(section, s, [&](const std::string& k, const pt::ptree& v) {
        if (k == "backend") cfg.judge.backend_id = v.get_value<std::string>();
        else if (k == "temperature") cfg.judge.temperature = read<double>(v, s, k);
        else if (k == "prompt") {
          const std::string p = v.get_value<std::string>();
          if (p == "scoring") cfg.judge.prompt = JudgePrompt::scoring;
          else if (p == "validator") cfg.judge.prompt = JudgePrompt::validator;
          else bad(s, "prompt must be scoring or validator");
        } else bad(s, "unknown key '" + k + "'");
      });
    } else if (s == "filter") {
      each_key(section, s, [&](const std::string& k, const pt::ptree& v) {
        if (k == "score_threshold") cfg.filter.score_threshold = read<int>(v, s, k);
        else if (k == "line_tolerance") cfg.filter.line_tolerance = read<int>(v, s, k);
        else if (k == "long_function_min_lines") cfg.filter.long_function_min_lines = read<int>(v, s, k);
        else bad(s, "unknown key '" + k + "'");
      });
      validate_filter_config(cfg.filter);
    } else if (s == "filter.tags") {
      each_key(section, s, [&](const std::string& k, const pt::ptree& v) {
        const auto slash = k.find('/');
        if (slash == std::string::npos || slash == 0 || slash + 1 == k.size()) {
          bad(s, "key '" + k + "' must look like Tag/language");
        }
        cfg.filter.tag_enabled[{k.substr(0, slash), k.substr(slash + 1)}] = read_bool(v, s, k);
      });
    } else if (s == "pairs") {
      each_key(section, s, [&](const std::string& k, const pt::ptree& v) {
        if (k == "delta") cfg.delta = read<int>(v, s, k);
        else bad(s, "unknown key '" + k + "'");
      });
    } else if (s == "dpo") {
      each_key(section, s, [&](const std::string& k, const pt::ptree& v) {
        if (k == "beta") cfg.dpo.beta = read<double>(v, s, k);
        else bad(s, "unknown key '" + k + "'");
      });
    } else if (s == "curation") {
      each_key(section, s, [&](const std::string& k, const pt::ptree& v) {
        if (k == "backend") cfg.curation.backend_id = v.get_value<std::string>();
        else if (k == "temperature") cfg.curation.temperature = read<double>(v, s, k);
        else if (k == "critique_keep_threshold") cfg.curation.critique_keep_threshold = read<int>(v, s, k);
        else bad(s, "unknown key '" + k + "'");
      });
    } else if (s == "eval") {
      each_key(section, s, [&](const std::string& k, const pt::ptree& v) {
        if (k == "runs") cfg.eval_runs = read<int>(v, s, k);
        else if (k == "line_tolerance") cfg.match.line_tolerance = read<int>(v, s, k);
        else if (k == "require_file_match") cfg.match.require_file_match = read_bool(v, s, k);
        else if (k == "comparator") cfg.match.semantic_comparator = v.get_value<std::string>();
        else if (k == "overlap_threshold") cfg.match.overlap_threshold = read<double>(v, s, k);
        else if (k == "optimal") cfg.match.optimal = read_bool(v, s, k);
        else if (k == "accuracy_threshold") cfg.accuracy_threshold = read<int>(v, s, k);
        else bad(s, "unknown key '" + k + "'");
      });
    } else if (s == "service") {
      each_key(section, s, [&](const std::string& k, const pt::ptree& v) {
        if (k == "store_dir") cfg.service.store_dir = v.get_value<std::string>();
        else if (k == "host") cfg.service.host = v.get_value<std::string>();
        else if (k == "port") cfg.service.port = read<int>(v, s, k);
        else bad(s, "unknown key '" + k + "'");
      });
    } else {
      bad(s, "unknown section");
    }
  }
  std::set<std::string> ids;
  for (const auto& b : cfg.backends) {
    if (!ids.insert(b.backend_id).second) bad("backend." + b.backend_id, "defined twice");
  }
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot read config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::unique_ptr<Gateway> make_gateway(const AppConfig& cfg) {
  if (cfg.backends.empty()) return make_offline_gateway();
  auto gw = std::make_unique<Gateway>();
  for (const auto& b : cfg.backends) gw->add(b);
  return gw;
}

}  // namespace cqs
