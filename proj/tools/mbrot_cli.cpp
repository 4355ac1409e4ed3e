// mbrot: minimum Bayes risk decoding with optimal-transport document utility.
//
//   mbrot decode      --input cands.jsonl --output sel.jsonl [--manifest m.json]
//   mbrot score-pair  --hyp "..." --ref "..."
//   mbrot eval-metric --hypotheses h.jsonl --references r.jsonl --human h.csv
//   mbrot dump-plan   --hyp "..." --ref "..."
//
// Exit codes: 0 ok, 2 configuration, 3 data, 4 adapter, 1 anything else.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbrot/mbrot.hpp"

namespace {

using namespace mbrot;

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kAdapter = 4 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidRange:
      return kConfig;
    case ErrorKind::DegenerateDocument:
    case ErrorKind::MissingEmbedding:
    case ErrorKind::DegenerateVariance:
    case ErrorKind::Data:
      return kData;
    case ErrorKind::AdapterUnavailable:
    case ErrorKind::AdapterRangeViolation:
      return kAdapter;
    case ErrorKind::SolverNonconvergence:
      return kOther;
  }
  return kOther;
}

int report(const std::string& kind, const std::string& message, int code) {
  nlohmann::json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << io::dump(j) << std::endl;
  return code;
}

struct Settings {
  std::string formulation = "wd";
  std::string weights = "uniform";
  double epsilon = 0.1;
  std::size_t max_iter = 10000;
  double tol = 1e-9;
  bool no_epsilon_scaling = false;
  bool exclude_kl = false;
  std::string utility = "token-f1";
  std::string embeddings;
  std::string adapter_url;
  std::string adapter_cmd;
  std::string adapter_metric = "default";
  bool adapter_symmetric = false;
  double adapter_timeout = 30.0;
  int adapter_retries = 2;
  std::size_t adapter_batch = 64;
  std::string language = "en";
  std::size_t parallelism = 1;
  std::uint64_t seed = 0;
};

WeightScheme weight_scheme(const Settings& s) {
  return s.weights == "length" ? WeightScheme::LengthProportional : WeightScheme::Uniform;
}

SentenceUtilityPtr make_sentence_utility(const Settings& s) {
  if (s.utility == "token-f1") return std::make_shared<TokenF1>(s.language);
  if (s.utility == "bleu") return std::make_shared<SentenceBleu>(s.language);
  if (s.utility == "chrf") return std::make_shared<ChrF>();
  if (s.utility == "exact") return std::make_shared<ExactMatch>();
  if (s.utility == "embedding") {
    if (s.embeddings.empty())
      throw Error(ErrorKind::Config, "--utility embedding needs --embeddings FILE");
    auto table = std::make_shared<EmbeddingTable>(EmbeddingTable::load_file(s.embeddings));
    return std::make_shared<EmbeddingCosine>(table, s.embeddings);
  }
  // adapter
  AdapterOptions o;
  o.timeout_seconds = s.adapter_timeout;
  o.retries = s.adapter_retries;
  o.batch_size = s.adapter_batch;
  std::shared_ptr<AdapterTransport> transport;
  if (!s.adapter_cmd.empty()) {
    transport = std::make_shared<StdioAdapterTransport>(s.adapter_cmd, o);
  } else if (!s.adapter_url.empty()) {
    transport = std::make_shared<HttpAdapterTransport>(s.adapter_url, o);
  } else {
    throw Error(ErrorKind::Config,
                "--utility adapter needs --adapter-url, MBROT_ADAPTER_URL or --adapter-cmd");
  }
  return std::make_shared<ExternalAdapterUtility>(transport, s.adapter_metric, o,
                                                  s.adapter_symmetric);
}

DocUtilityConfig make_config(const Settings& s) {
  DocUtilityConfig cfg;
  cfg.formulation = s.formulation == "la"   ? Formulation::LA
                    : s.formulation == "ewd" ? Formulation::EWD
                                             : Formulation::WD;
  cfg.weight_scheme = weight_scheme(s);
  cfg.sent_utility = make_sentence_utility(s);
  if (cfg.formulation == Formulation::EWD) {
    ot::EntropicParams p;
    p.epsilon = s.epsilon;
    p.max_iterations = s.max_iter;
    p.tolerance = s.tol;
    p.epsilon_scaling = !s.no_epsilon_scaling;
    cfg.entropic = p;
    cfg.include_kl_in_utility = !s.exclude_kl;
  }
  cfg.validate();
  return cfg;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Data, "cannot read '" + path + "'");
  return in;
}

/// Writes via `body` to `path`, or to stdout for "-".
template <typename Body>
void write_out(const std::string& path, Body&& body) {
  if (path == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Config, "cannot write '" + path + "'");
  body(out);
  if (!out) throw Error(ErrorKind::Config, "write to '" + path + "' failed");
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_out(path, [&](std::ostream& o) { o << io::dump(j) << '\n'; });
}

std::string text_arg(const std::string& inline_text, const std::string& file) {
  if (file.empty()) return inline_text;
  auto in = open_in(file);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MBR decoding with optimal-transport document utility", "mbrot"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "TOML file with option defaults; flags take precedence");
  app.require_subcommand(1);

  Settings s;
  auto* u = app.add_option_group("utility", "Document utility");
  u->add_option("--formulation", s.formulation, "Transport formulation")
      ->check(CLI::IsMember({"la", "wd", "ewd"}));
  u->add_option("--weights", s.weights, "Segment weights")
      ->check(CLI::IsMember({"uniform", "length"}));
  u->add_option("--epsilon", s.epsilon, "EWD entropic regularization");
  u->add_option("--max-iter", s.max_iter, "EWD Sinkhorn iteration cap");
  u->add_option("--tol", s.tol, "EWD marginal tolerance (L1)");
  u->add_flag("--no-epsilon-scaling", s.no_epsilon_scaling, "EWD: start at the target epsilon");
  u->add_flag("--exclude-kl", s.exclude_kl, "EWD: utility is 1 - transport cost only");
  u->add_option("--utility", s.utility, "Sentence utility")
      ->check(CLI::IsMember({"token-f1", "bleu", "chrf", "exact", "embedding", "adapter"}));
  u->add_option("--embeddings", s.embeddings, "JSONL {text, vector} table")
      ->check(CLI::ExistingFile);
  u->add_option("--adapter-url", s.adapter_url, "Metric adapter base URL")
      ->envname("MBROT_ADAPTER_URL");
  u->add_option("--adapter-cmd", s.adapter_cmd, "Metric adapter command (stdio protocol)");
  u->add_option("--adapter-metric", s.adapter_metric, "Metric name sent to the adapter");
  u->add_flag("--adapter-symmetric", s.adapter_symmetric,
              "Treat the adapter metric as symmetric");
  u->add_option("--adapter-timeout", s.adapter_timeout, "Seconds per request")
      ->check(CLI::PositiveNumber);
  u->add_option("--adapter-retries", s.adapter_retries)->check(CLI::NonNegativeNumber);
  u->add_option("--adapter-batch", s.adapter_batch)->check(CLI::PositiveNumber);
  u->add_option("--language", s.language, "Segmentation and tokenization language");
  u->add_option("--parallelism", s.parallelism, "Worker threads")->check(CLI::PositiveNumber);
  u->add_option("--seed", s.seed, "Recorded in the manifest; nothing is random");

  // decode
  auto* decode = app.add_subcommand("decode", "Select one candidate per instance");
  decode->fallthrough();
  std::string input = "-", output = "-", manifest_path, matrix_path;
  bool baseline = false, no_symmetry = false;
  decode->add_option("--input,-i", input, "Candidate JSONL ('-' for stdin)");
  decode->add_option("--output,-o", output, "Selection JSONL ('-' for stdout)");
  decode->add_option("--manifest", manifest_path, "Run manifest JSON");
  decode->add_option("--dump-matrix", matrix_path, "Utility matrices JSON");
  decode->add_flag("--baseline", baseline, "Whole-document MBR with the sentence utility");
  decode->add_flag("--no-symmetry", no_symmetry, "Evaluate both (i, j) and (j, i)");

  // score-pair / dump-plan
  std::string hyp, ref, hyp_file, ref_file, pair_output = "-";
  auto add_pair = [&](CLI::App* sub) {
    sub->fallthrough();
    sub->add_option("--hyp", hyp, "Hypothesis text");
    sub->add_option("--ref", ref, "Reference text");
    sub->add_option("--hyp-file", hyp_file, "Read the hypothesis from a file")
        ->check(CLI::ExistingFile);
    sub->add_option("--ref-file", ref_file, "Read the reference from a file")
        ->check(CLI::ExistingFile);
    sub->add_option("--output,-o", pair_output, "Output JSON ('-' for stdout)");
  };
  auto* score_pair = app.add_subcommand("score-pair", "Document utility of one pair");
  add_pair(score_pair);
  auto* dump_plan = app.add_subcommand("dump-plan", "Solver plan for one pair");
  add_pair(dump_plan);

  // eval-metric
  auto* evalc = app.add_subcommand("eval-metric", "System-level correlation with humans");
  evalc->fallthrough();
  std::string hyp_path, ref_path, human_path, csv_path = "-", summary_path;
  evalc->add_option("--hypotheses", hyp_path, "{system, id, text} JSONL")->required();
  evalc->add_option("--references", ref_path, "{id, text} JSONL")->required();
  evalc->add_option("--human", human_path, "system,score CSV")->required();
  evalc->add_option("--output,-o", csv_path, "system,metric_score CSV");
  evalc->add_option("--summary", summary_path, "Summary JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("Config", e.what(), kConfig);
  }

  try {
    auto cfg = make_config(s);

    if (*decode) {
      DecodeOptions options;
      options.utility = cfg;
      options.language = s.language;
      options.parallelism = s.parallelism;
      options.baseline = baseline;
      options.use_symmetry = !no_symmetry;
      options.seed = s.seed;
      std::vector<CandidateSet> sets;
      if (input == "-") {
        sets = io::read_candidate_sets(std::cin, cfg.weight_scheme, s.language);
      } else {
        auto in = open_in(input);
        sets = io::read_candidate_sets(in, cfg.weight_scheme, s.language);
      }
      auto result = run_decode(sets, options);
      write_out(output, [&](std::ostream& o) { write_selections(result, o); });
      if (!manifest_path.empty()) write_json(manifest_path, decode_manifest(result, options));
      if (!matrix_path.empty()) write_json(matrix_path, matrix_dump(result));
      for (const auto& inst : result.instances)
        for (const auto& d : inst.selection.diagnostics)
          std::cerr << "warning: instance '" << inst.id << "' pair (" << d.row << ", "
                    << d.col << ") did not converge\n";
      return kOk;
    }

    if (*score_pair || *dump_plan) {
      auto h = make_document("hyp", text_arg(hyp, hyp_file), cfg.weight_scheme, s.language);
      auto y = make_document("ref", text_arg(ref, ref_file), cfg.weight_scheme, s.language);
      if (*score_pair) {
        auto r = doc_utility(h, y, cfg);
        nlohmann::json j = {{"utility", r.value},
                            {"converged", r.converged},
                            {"config", cfg.describe()},
                            {"hypothesis_segments", h.size()},
                            {"reference_segments", y.size()}};
        write_json(pair_output, j);
      } else {
        write_json(pair_output, io::plan_json(doc_transport(h, y, cfg), cfg, h, y));
      }
      return kOk;
    }

    // eval-metric
    auto hyp_in = open_in(hyp_path);
    auto ref_in = open_in(ref_path);
    auto human_in = open_in(human_path);
    auto loaded = eval::assemble_systems(eval::read_hypotheses(hyp_in),
                                         eval::read_references(ref_in), cfg.weight_scheme,
                                         s.language);
    if (loaded.skipped)
      std::cerr << "skipped " << loaded.skipped << " unsegmentable instance(s)\n";
    auto result = run_eval(loaded, eval::read_human_scores(human_in), cfg, s.parallelism);
    write_out(csv_path, [&](std::ostream& o) { write_system_csv(result, o); });
    if (!summary_path.empty()) write_json(summary_path, eval_summary(result, cfg));
    return kOk;
  } catch (const Error& e) {
    return report(std::string(to_string(e.kind())), e.detail(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report("Internal", e.what(), kOther);
  }
}
