// Command-line entry point: one subcommand per pipeline stage.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cqs/collector.hpp"
#include "cqs/config.hpp"
#include "cqs/curation.hpp"
#include "cqs/dpo.hpp"
#include "cqs/eval.hpp"
#include "cqs/judge.hpp"
#include "cqs/pref_builder.hpp"
#include "cqs/service.hpp"
#include "cqs/validator.hpp"

namespace {

using cqs::Json;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw cqs::Error(cqs::ErrorKind::io, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw cqs::Error(cqs::ErrorKind::io, "cannot write " + path);
  f << text;
  if (!f.flush()) throw cqs::Error(cqs::ErrorKind::io, "write failed for " + path);
}

std::vector<Json> read_jsonl(const std::string& path) {
  std::vector<Json> rows;
  std::istringstream in(read_file(path));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (cqs::trim(line).empty()) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw cqs::Error(cqs::ErrorKind::parse, path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string format = "json";
  cqs::AppConfig cfg;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "INI config file overriding defaults")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Base seed for sampling");
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "text"}));
}

void load(Common& c) {
  if (!c.config_path.empty()) c.cfg = cqs::load_config(c.config_path);
}

cqs::Diff load_diff(const std::string& diff_path, const std::string& meta_path, std::string diff_id) {
  cqs::DiffMeta meta;
  if (!meta_path.empty()) meta = cqs::meta_from_json(Json::parse(read_file(meta_path)));
  if (diff_id.empty()) diff_id = std::filesystem::path(diff_path).stem().string();
  return cqs::parse_unified(read_file(diff_path), meta, diff_id);
}

std::vector<cqs::Review> load_reviews(const std::string& path) {
  std::vector<cqs::Review> out;
  for (const auto& j : read_jsonl(path)) out.push_back(cqs::review_from_json(j));
  return out;
}

void print_review_text(const cqs::Review& review, std::ostream& out) {
  out << review.diff_id << ": " << review.issues.size() << " issue(s)\n";
  for (const auto& i : review.issues) {
    out << "  " << i.file << ":" << i.line << " [" << i.tag.name() << "]";
    if (i.function) out << " " << *i.function;
    out << "\n    " << i.rationale << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Code quality review pipeline"};
  app.require_subcommand(1);
  Common common;

  // review
  std::string diff_path, meta_path, diff_id, backend, review_path, scored_out, out_path, in_path;
  bool debug = false;
  auto* review = app.add_subcommand("review", "Parse, collect and validate one diff; print the final review");
  review->add_option("--diff", diff_path, "Unified diff file")->required()->check(CLI::ExistingFile);
  review->add_option("--meta", meta_path, "Diff metadata JSON")->check(CLI::ExistingFile);
  review->add_option("--diff-id", diff_id, "Diff id (default: file stem)");
  review->add_option("--backend", backend, "Backend id for collector and judge");
  review->add_flag("--debug", debug, "Include the filter audit");
  add_common(review, common);

  // collect
  int n = 0;
  double temperature = -1.0;
  auto* collect = app.add_subcommand("collect", "Sample reviews for a diff as JSONL");
  collect->add_option("--diff", diff_path)->required()->check(CLI::ExistingFile);
  collect->add_option("--meta", meta_path)->check(CLI::ExistingFile);
  collect->add_option("--diff-id", diff_id);
  collect->add_option("--n", n, "Samples (default 10)")->check(CLI::PositiveNumber);
  collect->add_option("--temperature", temperature, "Sampling temperature (default 1.0)")->check(CLI::Range(0.0, 2.0));
  collect->add_option("--backend", backend);
  add_common(collect, common);

  // judge
  std::string prompt_kind;
  auto* judge = app.add_subcommand("judge", "Score the issues of reviews; verdicts as JSONL");
  judge->add_option("--diff", diff_path)->required()->check(CLI::ExistingFile);
  judge->add_option("--meta", meta_path)->check(CLI::ExistingFile);
  judge->add_option("--diff-id", diff_id);
  judge->add_option("--review", review_path, "Review JSONL")->required()->check(CLI::ExistingFile);
  judge->add_option("--backend", backend);
  judge->add_option("--prompt", prompt_kind)->check(CLI::IsMember({"scoring", "validator"}));
  judge->add_option("--scored-out", scored_out, "Also write the scored record for `pairs`");
  add_common(judge, common);

  // validate
  int threshold = -1;
  auto* validate = app.add_subcommand("validate", "Judge and filter reviews");
  validate->add_option("--diff", diff_path)->required()->check(CLI::ExistingFile);
  validate->add_option("--meta", meta_path)->check(CLI::ExistingFile);
  validate->add_option("--diff-id", diff_id);
  validate->add_option("--review", review_path)->required()->check(CLI::ExistingFile);
  validate->add_option("--backend", backend);
  validate->add_option("--score-threshold", threshold)->check(CLI::Range(0, 10));
  add_common(validate, common);

  // pairs
  int delta = 0;
  std::string scored_path;
  auto* pairs = app.add_subcommand("pairs", "Build DPO preference pairs from scored samples");
  pairs->add_option("--scored", scored_path, "Scored JSONL")->required()->check(CLI::ExistingFile);
  pairs->add_option("--delta", delta, "Minimum score margin (default 3)")->check(CLI::PositiveNumber);
  pairs->add_option("--out", out_path, "Output JSONL")->required();
  add_common(pairs, common);

  // dpo-check
  std::string batch_path;
  double beta = 0.0;
  auto* dpo = app.add_subcommand("dpo-check", "DPO loss and gradient check over a log-prob batch");
  dpo->add_option("--batch", batch_path, "JSONL of per-token log-probs")->required()->check(CLI::ExistingFile);
  dpo->add_option("--beta", beta, "Temperature beta (default 0.1)")->check(CLI::PositiveNumber);
  add_common(dpo, common);

  // curate
  auto* curate = app.add_subcommand("curate", "Dataset curation");
  curate->require_subcommand(1);
  auto* sft = curate->add_subcommand("sft", "Rewrite human reviews into an SFT dataset");
  auto* critiques = curate->add_subcommand("critiques", "Rewrite developer feedback into judge critiques");
  for (auto* c : {sft, critiques}) {
    c->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_path)->required();
    c->add_option("--backend", backend);
    add_common(c, common);
  }

  // eval
  std::string benchmark_path, labeled_path;
  int runs = 0;
  auto* eval = app.add_subcommand("eval", "Precision and recall over a benchmark");
  eval->add_option("--benchmark", benchmark_path)->check(CLI::ExistingFile);
  eval->add_option("--runs", runs, "Runs to average (default 10)")->check(CLI::PositiveNumber);
  eval->add_option("--backend", backend);
  eval->add_option("--judge-labels", labeled_path, "Thumbs-labelled issues for judge accuracy")
      ->check(CLI::ExistingFile);
  add_common(eval, common);

  // serve
  std::string host, store;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "Run the HTTP review service");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--store", store, "Store directory");
  serve->add_option("--backend", backend);
  add_common(serve, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    load(common);
    auto& cfg = common.cfg;
    if (!backend.empty()) {
      cfg.collect.backend_id = backend;
      cfg.judge.backend_id = backend;
      cfg.curation.backend_id = backend;
    }
    const auto gateway = cqs::make_gateway(cfg);
    std::ostream& out = std::cout;

    if (*review) {
      const cqs::Diff diff = load_diff(diff_path, meta_path, diff_id);
      const cqs::Review collected = cqs::collect(*gateway, diff, cfg.collect);
      const auto v = cqs::validate(*gateway, diff, collected, cfg.filter, cfg.judge);
      if (common.format == "text") {
        print_review_text(v.final, out);
      } else {
        Json j = cqs::to_json(v.final);
        if (debug) {
          Json audit = Json::array();
          for (const auto& o : v.audit) audit.push_back(cqs::to_json(o));
          j["audit"] = audit;
        }
        out << j.dump(2) << "\n";
      }
    } else if (*collect) {
      const cqs::Diff diff = load_diff(diff_path, meta_path, diff_id);
      const int count = n > 0 ? n : cfg.samples;
      const double t = temperature >= 0 ? temperature : cfg.sample_temperature;
      const auto batch = cqs::sample_reviews(*gateway, diff, count, t, cfg.collect, common.seed);
      for (const auto& r : batch.reviews) out << cqs::to_json(r).dump() << "\n";
      for (const auto& f : batch.failures) {
        std::cerr << "sample " << f.sample_index << " failed: " << f.message << "\n";
      }
    } else if (*judge) {
      if (!prompt_kind.empty()) {
        cfg.judge.prompt = prompt_kind == "validator" ? cqs::JudgePrompt::validator : cqs::JudgePrompt::scoring;
      }
      const cqs::Diff diff = load_diff(diff_path, meta_path, diff_id);
      cqs::ScoredRecord scored{diff, {}};
      const auto reviews = load_reviews(review_path);
      for (std::size_t k = 0; k < reviews.size(); ++k) {
        const auto verdicts = cqs::judge(*gateway, diff, reviews[k], cfg.judge);
        std::vector<cqs::ScoredIssue> sample;
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
          Json row{{"sample_index", reviews[k].provenance.sample_index}, {"issue_index", i}};
          row.update(cqs::to_json(verdicts[i]));
          out << row.dump() << "\n";
          sample.push_back({reviews[k].issues[i], verdicts[i].score, reviews[k].provenance.sample_index});
        }
        scored.samples.push_back(std::move(sample));
      }
      if (!scored_out.empty()) write_file(scored_out, cqs::to_json(scored).dump() + "\n");
    } else if (*validate) {
      if (threshold >= 0) cfg.filter.score_threshold = threshold;
      const cqs::Diff diff = load_diff(diff_path, meta_path, diff_id);
      for (const auto& r : load_reviews(review_path)) {
        const auto v = cqs::validate(*gateway, diff, r, cfg.filter, cfg.judge);
        Json audit = Json::array();
        for (const auto& o : v.audit) audit.push_back(cqs::to_json(o));
        out << Json{{"final", cqs::to_json(v.final)}, {"audit", audit}}.dump() << "\n";
      }
    } else if (*pairs) {
      std::vector<cqs::ScoredRecord> records;
      for (const auto& j : read_jsonl(scored_path)) records.push_back(cqs::scored_record_from_json(j));
      const auto ds = cqs::build_dataset(records, delta > 0 ? delta : cfg.delta);
      cqs::emit_dpo_jsonl(ds.pairs, out_path);
      out << cqs::summary_json(ds).dump(2) << "\n";
    } else if (*dpo) {
      cqs::DpoConfig dc = cfg.dpo;
      if (beta > 0) dc.beta = beta;
      std::vector<cqs::SequenceLogProbs> batch;
      for (const auto& j : read_jsonl(batch_path)) batch.push_back(cqs::logprobs_from_json(j));
      const auto loss = cqs::dpo_loss(batch, dc);
      double worst = 0.0;
      Json examples = Json::array();
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto check = cqs::finite_difference_check(batch[i], dc);
        worst = std::max(worst, check.max_rel_error);
        examples.push_back(Json{{"loss", loss.per_example[i]},
                                {"z", cqs::dpo_logit(batch[i], dc)},
                                {"grad_chosen_token", -dc.beta * cqs::sigmoid_neg(cqs::dpo_logit(batch[i], dc))},
                                {"fd_max_rel_error", check.max_rel_error}});
      }
      if (common.format == "text") {
        out << "examples: " << batch.size() << "\nbeta: " << dc.beta << "\nmean loss: " << loss.mean_loss
            << "\ngradient check max relative error: " << worst << (worst < 1e-6 ? " (ok)" : " (FAILED)") << "\n";
      } else {
        out << Json{{"beta", dc.beta}, {"mean_loss", loss.mean_loss}, {"fd_max_rel_error", worst},
                    {"gradient_check", worst < 1e-6 ? "ok" : "failed"}, {"examples", examples}}
                   .dump(2)
            << "\n";
      }
      if (worst >= 1e-6) return 1;
    } else if (*sft) {
      std::vector<cqs::HumanReviewRecord> records;
      for (const auto& j : read_jsonl(in_path)) records.push_back(cqs::human_record_from_json(j));
      const auto ds = cqs::curate_sft_dataset(*gateway, records, cfg.curation);
      std::string text;
      for (const auto& row : ds.rows) text += cqs::to_json(row).dump() + "\n";
      write_file(out_path, text);
      out << cqs::summary_json(ds).dump(2) << "\n";
    } else if (*critiques) {
      std::vector<cqs::CritiqueInput> inputs;
      for (const auto& j : read_jsonl(in_path)) inputs.push_back(cqs::critique_input_from_json(j));
      const auto ds = cqs::curate_critiques(*gateway, inputs, cfg.curation);
      std::string text;
      for (const auto& s : ds.samples) text += cqs::to_json(s).dump() + "\n";
      write_file(out_path, text);
      out << cqs::summary_json(ds).dump(2) << "\n";
    } else if (*eval) {
      if (benchmark_path.empty() && labeled_path.empty()) {
        std::cerr << "eval needs --benchmark and/or --judge-labels\n";
        return 2;
      }
      Json report = Json::object();
      if (!benchmark_path.empty()) {
        const auto benchmark = cqs::parse_benchmark_jsonl(read_file(benchmark_path));
        cqs::PipelineConfig raw{cfg.collect, cfg.judge, cfg.filter, false, common.seed};
        cqs::PipelineConfig filtered = raw;
        filtered.validate = true;
        const std::vector<cqs::EvalSystem> systems = {
            {"collector", cqs::make_pipeline(*gateway, raw)},
            {"collector + validator", cqs::make_pipeline(*gateway, filtered)}};
        const auto comparator = cqs::make_comparator(cfg.match, gateway.get());
        const auto r = cqs::run_eval(systems, benchmark, runs > 0 ? runs : cfg.eval_runs, cfg.match, comparator);
        if (common.format == "text") out << cqs::render_table(r);
        report = cqs::to_json(r);
      }
      if (!labeled_path.empty()) {
        std::vector<cqs::LabeledIssue> labeled;
        for (const auto& j : read_jsonl(labeled_path)) labeled.push_back(cqs::labeled_issue_from_json(j));
        const auto acc = cqs::judge_accuracy(*gateway, cfg.judge, labeled, cfg.accuracy_threshold);
        report["judge_accuracy"] = Json{{"accuracy", acc.accuracy}, {"correct", acc.correct}, {"total", acc.total},
                                        {"up", acc.up}, {"down", acc.down}};
        if (common.format == "text") {
          out << "judge accuracy: " << acc.correct << "/" << acc.total << " (up " << acc.up << ", down " << acc.down
              << ")\n";
        }
      }
      if (common.format == "json") out << report.dump(2) << "\n";
    } else if (*serve) {
      cqs::ServiceOptions so;
      so.store_dir = store.empty() ? cfg.service.store_dir : store;
      so.collect = cfg.collect;
      so.judge = cfg.judge;
      so.filter = cfg.filter;
      cqs::Service service(*gateway, so);
      static cqs::Service* running = nullptr;
      running = &service;
      std::signal(SIGINT, [](int) {
        if (running != nullptr) running->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (running != nullptr) running->stop();
      });
      const std::string h = host.empty() ? cfg.service.host : host;
      const int p = port >= 0 ? port : cfg.service.port;
      std::cerr << "listening on " << h << ":" << p << "\n";
      service.listen(h, p);
      running = nullptr;
    }
  } catch (const cqs::Error& e) {
    std::cerr << "error (" << cqs::to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    std::cerr << "error (parse): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
