#include "derivscope/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "derivscope/corpus.hpp"
#include "derivscope/discrim.hpp"
#include "derivscope/errors.hpp"
#include "derivscope/gateway.hpp"
#include "derivscope/manifest.hpp"
#include "derivscope/report.hpp"
#include "derivscope/rule_analysis.hpp"
#include "derivscope/sampling.hpp"
#include "derivscope/surface_stats.hpp"
#include "derivscope/tsv.hpp"

namespace derivscope {

namespace fs = std::filesystem;

namespace {

/// Missing flags and bad combinations; reported with the subcommand synopsis.
class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::map<std::string, std::string> snapshot;  // effective flag values
};

/// One invocation: records inputs, then writes outputs and the manifest.
class Run {
 public:
  Run(std::string command, const Globals& g) : out_dir_(g.out_dir) {
    manifest_.command = std::move(command);
    manifest_.seed = g.seed;
    manifest_.config = g.snapshot;
    manifest_.started_at = utc_timestamp();
  }

  const std::string& input(const std::string& path) {
    if (!fs::is_regular_file(path)) throw DataError(fmt::format("missing input file: {}", path));
    manifest_.add_input(path);
    return path;
  }

  fs::path out_path(const std::string& name) const { return out_dir_ / name; }

  void stage(const fs::path& path, std::string contents) { staged_.emplace_back(path, std::move(contents)); }

  RunManifest& manifest() { return manifest_; }

  /// Writes every staged file, then the manifest beside the first one.
  void commit(const std::string& manifest_stem) {
    std::set<fs::path> inputs;
    for (const auto& [path, _] : manifest_.inputs) inputs.insert(fs::weakly_canonical(path));
    for (const auto& [path, _] : staged_) {
      if (inputs.count(fs::weakly_canonical(path))) {
        throw UsageError(fmt::format("output {} would overwrite an input", path.string()));
      }
    }
    fs::path dir = staged_.empty() ? out_dir_ : staged_.front().first.parent_path();
    for (const auto& [path, contents] : staged_) {
      write_file(path, contents);
      manifest_.add_output(path.string());
    }
    manifest_.finished_at = utc_timestamp();
    write_file(dir / fmt::format("manifest.{}.json", manifest_stem), manifest_.to_json().dump(2) + "\n");
  }

 private:
  static void write_file(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    out << contents;
    out.close();
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  }

  fs::path out_dir_;
  RunManifest manifest_;
  std::vector<std::pair<fs::path, std::string>> staged_;
};

template <typename F>
std::string render(F&& f) {
  std::ostringstream out;
  f(out);
  return out.str();
}

void need(const std::string& value, std::string_view flag) {
  if (value.empty()) throw UsageError(fmt::format("{} is required", flag));
}

std::map<std::int64_t, ParseResult> index_results(const std::vector<ParseResult>& results, const std::string& path) {
  std::map<std::int64_t, ParseResult> out;
  for (const auto& r : results) {
    if (!out.emplace(r.id, r).second) throw DataError(fmt::format("{}: duplicate id {}", path, r.id));
  }
  return out;
}

std::vector<Derivation> derivations_of(const std::vector<ParseResult>& results) {
  std::vector<Derivation> out;
  for (const auto& r : results) {
    if (r.derivation) out.push_back(*r.derivation);
  }
  return out;
}

std::string scores_text(const std::vector<ParallelExample>& examples) {
  std::string out;
  for (const auto& e : examples) out += (e.model_lp ? tsv::format_double(*e.model_lp) : "") + "\n";
  return out;
}

std::string sentences_text(const std::vector<Tokens>& sentences) {
  return render([&](std::ostream& o) { write_sentences(o, sentences); });
}

std::string summary_counts(const OutcomeSummary& s, RunManifest& m) {
  for (auto o : kAllOutcomes) m.counts[std::string(to_string(o))] = s.count(o);
  m.counts["sentences"] = s.total;
  return outcome_summary(s);
}

/// Examples for an analysis split: sentences, optional outputs and scores.
std::vector<ParallelExample> load_examples(Run& run, const std::string& src, const std::string& ref_text,
                                           const std::string& hyp, const std::string& scores) {
  need(src, "--src");
  need(ref_text, "--ref-text");
  need(hyp, "--hyp");
  auto examples = load_parallel(run.input(src), run.input(ref_text));
  attach_outputs(examples, read_sentences(run.input(hyp)));
  if (!scores.empty()) attach_scores(examples, read_scores(run.input(scores)));
  return examples;
}

struct RuleFlags {
  bool include_root = false;
  bool include_lexical = false;

  void add(CLI::App* sub) {
    sub->add_flag("--include-root", include_root, "count the root wrapper as a rule")->default_str("false");
    sub->add_flag("--include-lexical", include_lexical, "count lexical and punctuation rules")->default_str("false");
  }
  RuleBagOptions bag() const { return {include_root, include_lexical}; }
};

struct FitFlags {
  double c = 0.01;
  double tol = 1e-6;
  int max_iter = 1000;
  double train_fraction = 0.8;
  bool binary = false;

  void add(CLI::App* sub, bool with_solver) {
    if (with_solver) {
      sub->add_option("--c", c, "weight of the summed log-loss")->capture_default_str();
      sub->add_option("--tol", tol, "coordinate step tolerance")->capture_default_str();
      sub->add_option("--max-iter", max_iter, "maximum sweeps")->capture_default_str();
    }
    sub->add_option("--train-fraction", train_fraction, "share of rows used for training")->capture_default_str();
    sub->add_flag("--binary", binary, "rule presence instead of counts")->default_str("false");
  }
};

/// Flat key = value lines; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("missing input file: {}", path));
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected key = value", path, lineno));
    auto key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void collect_option_names(const CLI::App* app, std::set<std::string>& names) {
  for (const auto* opt : app->get_options()) {
    for (const auto& n : opt->get_lnames()) names.insert(n);
  }
  for (const auto* sub : app->get_subcommands({})) collect_option_names(sub, names);
}

std::vector<CLI::App*> selected_chain(CLI::App& app) {
  std::vector<CLI::App*> chain{&app};
  for (;;) {
    auto subs = chain.back()->get_subcommands();
    if (subs.empty()) break;
    chain.push_back(subs.front());
  }
  return chain;
}

/// Fills options absent from the command line with config-file values.
void apply_config(CLI::App& app, const std::vector<CLI::App*>& chain, const std::string& path) {
  const auto config = read_config(path);
  std::set<std::string> known;
  collect_option_names(&app, known);
  for (const auto& [key, _] : config) {
    if (!known.count(key)) throw ConfigError(fmt::format("{}: unknown key '{}'", path, key));
  }
  for (auto* level : chain) {
    for (auto* opt : level->get_options()) {
      if (opt->count() > 0 || opt->get_lnames().empty()) continue;
      auto it = config.find(opt->get_lnames().front());
      if (it == config.end()) continue;
      try {
        if (opt->get_expected_max() > 1) {
          for (const auto& v : tsv::split(it->second)) {
            std::istringstream words(v);
            for (std::string w; words >> w;) opt->add_result(w);
          }
        } else {
          opt->add_result(it->second);
        }
        opt->run_callback();
      } catch (const CLI::Error& e) {
        throw ConfigError(fmt::format("{}: key '{}': {}", path, it->first, e.what()));
      }
    }
  }
}

std::map<std::string, std::string> config_snapshot(const std::vector<CLI::App*>& chain) {
  std::map<std::string, std::string> out;
  for (const auto* level : chain) {
    for (const auto* opt : level->get_options()) {
      if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
      } else {
        value = opt->get_default_str();
      }
      out[opt->get_lnames().front()] = value;
    }
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parseability and rule-usage analysis of machine translation output", "derivscope"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "flat key = value file mirroring the flags; flags win");
  app.add_option("--seed", g.seed, "seed for every randomized step")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "directory for outputs and run manifests")->capture_default_str();

  // Shared flag vocabulary: --ref/--nmt are derivation corpora (JSON lines),
  // --src/--ref-text/--hyp are sentence files aligned by line.
  std::string src, ref_text, hyp, scores, ref, nmt, in_path, out_path;
  std::vector<std::string> in_paths;
  std::map<std::string, std::function<void()>> handlers;
  auto add_src_side = [&](CLI::App* s) {
    s->add_option("--src", src, "source sentences");
    s->add_option("--ref-text", ref_text, "reference sentences");
  };

  // filter-corpus
  std::int64_t train_size = -1, valid_size = -1, analysis_size = -1;
  auto* filter = app.add_subcommand("filter-corpus", "keep pairs with a parseable reference and split them");
  add_src_side(filter);
  filter->add_option("--ref", ref, "reference derivation corpus");
  filter->add_option("--hyp", hyp, "model outputs aligned with the corpus");
  filter->add_option("--scores", scores, "model log-probabilities aligned with the corpus");
  filter->add_option("--train-size", train_size, "training pairs");
  filter->add_option("--valid-size", valid_size, "validation pairs");
  filter->add_option("--analysis-size", analysis_size, "analysis pairs");

  // build-vocab
  std::size_t max_rank = 40000;
  auto* vocab_cmd = app.add_subcommand("build-vocab", "frequency-ranked vocabulary");
  vocab_cmd->add_option("--in", in_paths, "sentence files")->expected(1, -1);
  vocab_cmd->add_option("--max-rank", max_rank, "keep this many top-ranked tokens")->capture_default_str();
  vocab_cmd->add_option("--out", out_path, "vocabulary TSV (default <out-dir>/vocab.tsv)");

  // apply-unk
  std::string vocab_path, mode = "source", results_path;
  std::vector<std::string> classes;
  auto* unk = app.add_subcommand("apply-unk", "replace out-of-vocabulary tokens");
  unk->add_option("--in", in_path, "sentence file");
  unk->add_option("--vocab", vocab_path, "vocabulary TSV");
  unk->add_option("--mode", mode, "source (<unk>) or typed (generic_<class>)")
      ->check(CLI::IsMember({"source", "typed"}))
      ->capture_default_str();
  unk->add_option("--results", results_path, "derivation corpus of --in, for typed mode");
  unk->add_option("--classes", classes, "lexical classes eligible for generic_<class>");
  unk->add_option("--out", out_path, "output sentence file");

  // parse
  std::string backend = "toy", backend_cmd, grammar;
  std::int64_t timeout_ms = 60000;
  int workers = 1, inflight = 1;
  bool record_timing = false;
  auto* parse = app.add_subcommand("parse", "parse sentences into a derivation corpus");
  parse->add_option("--in", in_path, "sentence file");
  parse->add_option("--out", out_path, "derivation corpus (default <out-dir>/results.jsonl)");
  parse->add_option("--backend", backend, "toy or external")
      ->check(CLI::IsMember({"toy", "external"}))
      ->capture_default_str();
  parse->add_option("--cmd", backend_cmd, "external parser command line");
  parse->add_option("--grammar", grammar, "toy grammar file (default: bundled)");
  parse->add_option("--timeout-ms", timeout_ms, "per-sentence wall-clock limit")->capture_default_str();
  parse->add_option("--workers", workers, "parallel workers")->capture_default_str()->check(CLI::PositiveNumber);
  parse->add_option("--inflight", inflight, "outstanding requests per external worker")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  parse->add_flag("--record-timing", record_timing, "store wall_ms (makes output run-dependent)")->default_str("false");

  // stats
  auto* stats = app.add_subcommand("stats", "surface statistics and root conditions");
  stats->require_subcommand(1);
  std::string train_src, train_ref;
  bool exhausted_only = false;
  auto* surface = stats->add_subcommand("surface", "surface features and their correlation with parseability");
  add_src_side(surface);
  surface->add_option("--hyp", hyp, "model outputs");
  surface->add_option("--scores", scores, "model log-probabilities");
  surface->add_option("--nmt", nmt, "derivation corpus of the outputs");
  surface->add_option("--train-src", train_src, "unigram training text, source side");
  surface->add_option("--train-ref", train_ref, "unigram training text, target side");
  surface->add_flag("--exhausted-only", exhausted_only, "negatives only from exhausted search")->default_str("false");
  auto* roots = stats->add_subcommand("roots", "root-condition distribution");
  roots->add_option("--ref", ref, "reference derivation corpus");
  roots->add_option("--nmt", nmt, "output derivation corpus");

  // rules
  auto* rules = app.add_subcommand("rules", "rule usage counts and ratios");
  rules->require_subcommand(1);
  RuleFlags rule_flags;
  std::size_t top_k = 10, bucket_size = 10;
  std::int64_t min_ref_count = 1000;
  std::string counts_path;
  auto* rcount = rules->add_subcommand("count", "per-rule counts and the top-k plot data");
  rcount->add_option("--ref", ref, "reference derivation corpus");
  rcount->add_option("--nmt", nmt, "output derivation corpus");
  rcount->add_option("--top-k", top_k, "rules in the top-k plot data")->capture_default_str();
  rule_flags.add(rcount);
  auto* rratio = rules->add_subcommand("ratio", "output/reference usage ratios by rank");
  rratio->add_option("--counts", counts_path, "rule_counts.tsv from rules count");
  rratio->add_option("--min-ref-count", min_ref_count, "keep rules used more than this")->capture_default_str();
  rratio->add_option("--bucket-size", bucket_size, "ranks per dispersion bucket")->capture_default_str();

  // discrim
  auto* discrim = app.add_subcommand("discrim", "L1 logistic regression over bags of rules");
  discrim->require_subcommand(1);
  FitFlags fit_flags;
  std::string descriptions_path, model_path;
  std::size_t table_rows = 10;
  auto* dfit = discrim->add_subcommand("fit", "train and list the most discriminative rules");
  dfit->add_option("--ref", ref, "reference derivation corpus");
  dfit->add_option("--nmt", nmt, "output derivation corpus");
  dfit->add_option("--descriptions", descriptions_path, "rule<TAB>description file");
  dfit->add_option("--rows", table_rows, "rules per side in the table")->capture_default_str();
  fit_flags.add(dfit, true);
  rule_flags.add(dfit);
  auto* deval = discrim->add_subcommand("eval", "validation accuracy against the majority baseline");
  deval->add_option("--model", model_path, "model.tsv from discrim fit");
  deval->add_option("--ref", ref, "reference derivation corpus");
  deval->add_option("--nmt", nmt, "output derivation corpus");
  fit_flags.add(deval, false);
  rule_flags.add(deval);

  // sample
  auto* sample = app.add_subcommand("sample", "seeded samples for manual inspection");
  sample->require_subcommand(1);
  std::size_t max_words = 10, n = 100, max_len = 12, n_contrast = 20;
  std::string rule;
  auto* sunp = sample->add_subcommand("unparseable", "short exhaustively unparseable outputs to annotate");
  sunp->add_option("--nmt", nmt, "output derivation corpus");
  sunp->add_option("--hyp", hyp, "model outputs");
  sunp->add_option("--max-words", max_words, "keep outputs shorter than this")->capture_default_str();
  sunp->add_option("--n", n, "sample size")->capture_default_str();
  auto* scon = sample->add_subcommand("rule-contrast", "pairs where the reference uses a rule the output lacks");
  scon->add_option("--rule", rule, "rule label");
  add_src_side(scon);
  scon->add_option("--hyp", hyp, "model outputs");
  scon->add_option("--ref", ref, "reference derivation corpus");
  scon->add_option("--nmt", nmt, "output derivation corpus");
  scon->add_option("--max-len", max_len, "keep references shorter than this")->capture_default_str();
  scon->add_option("--n", n_contrast, "sample size")->capture_default_str();

  // annotate
  auto* annotate = app.add_subcommand("annotate", "grammaticality annotations");
  annotate->require_subcommand(1);
  auto* asum = annotate->add_subcommand("summarize", "shares of grammatical and agreement-fixable outputs");
  asum->add_option("--in", in_path, "completed annotation TSV");

  // report
  auto* report = app.add_subcommand("report", "all tables, plot data and the outcome summary");
  add_src_side(report);
  report->add_option("--hyp", hyp, "model outputs");
  report->add_option("--scores", scores, "model log-probabilities");
  report->add_option("--ref", ref, "reference derivation corpus");
  report->add_option("--nmt", nmt, "output derivation corpus");
  report->add_option("--train-src", train_src, "unigram training text, source side");
  report->add_option("--train-ref", train_ref, "unigram training text, target side");
  report->add_option("--descriptions", descriptions_path, "rule<TAB>description file");
  report->add_option("--top-k", top_k, "rules in the top-k plot data")->capture_default_str();
  report->add_option("--min-ref-count", min_ref_count, "ratio plot threshold")->capture_default_str();
  report->add_option("--rows", table_rows, "rules per side in the discriminative table")->capture_default_str();
  report->add_flag("--exhausted-only", exhausted_only, "negatives only from exhausted search")->default_str("false");
  fit_flags.add(report, true);
  rule_flags.add(report);

  app.failure_message(CLI::FailureMessage::help);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const auto chain = selected_chain(app);
  std::string command;
  std::string stem;
  for (std::size_t i = 1; i < chain.size(); ++i) {
    command += (i > 1 ? " " : "") + chain[i]->get_name();
    stem += (i > 1 ? "-" : "") + chain[i]->get_name();
  }

  handlers["filter-corpus"] = [&] {
    Run run(command, g);
    need(src, "--src");
    need(ref_text, "--ref-text");
    need(ref, "--ref");
    auto examples = load_parallel(run.input(src), run.input(ref_text));
    std::int64_t empty_src = 0, empty_ref = 0;
    for (const auto& e : examples) {
      empty_src += e.source.empty();
      empty_ref += e.reference.empty();
    }
    if (!hyp.empty()) attach_outputs(examples, read_sentences(run.input(hyp)));
    if (!scores.empty()) attach_scores(examples, read_scores(run.input(scores)));
    const auto results = index_results(read_results_file(run.input(ref)), ref);
    const auto filtered = filter_parseable(examples, results);
    auto size = [](std::int64_t v) { return v < 0 ? std::optional<std::size_t>() : std::optional<std::size_t>(v); };
    const auto spec = SplitSpec::with_remainder(filtered.examples.size(), size(train_size), size(valid_size),
                                                size(analysis_size), g.seed);
    const auto parts = split_indices(filtered.examples.size(), spec);
    auto& m = run.manifest();
    m.counts = {{"corpus", static_cast<std::int64_t>(examples.size())},
                {"parseable_references", static_cast<std::int64_t>(filtered.examples.size())},
                {"empty_source_lines", empty_src},
                {"empty_reference_lines", empty_ref}};
    for (const auto& [name, idx] : {std::pair<std::string, const std::vector<std::size_t>*>{"train", &parts.train},
                                    {"valid", &parts.valid},
                                    {"analysis", &parts.analysis}}) {
      const auto part = gather(filtered.examples, *idx);
      std::vector<Tokens> s, r, o;
      std::vector<ParseResult> res;
      std::string ids;
      for (std::size_t i = 0; i < part.size(); ++i) {
        s.push_back(part[i].source);
        r.push_back(part[i].reference);
        if (part[i].output) o.push_back(*part[i].output);
        auto pr = results.at(part[i].id);
        pr.id = static_cast<std::int64_t>(i);
        res.push_back(std::move(pr));
        ids += std::to_string(part[i].id) + "\n";
      }
      run.stage(run.out_path(name + ".src.txt"), sentences_text(s));
      run.stage(run.out_path(name + ".ref.txt"), sentences_text(r));
      run.stage(run.out_path(name + ".ref.jsonl"), render([&](std::ostream& os) { write_results(os, res); }));
      run.stage(run.out_path(name + ".ids"), ids);
      if (!hyp.empty()) run.stage(run.out_path(name + ".hyp.txt"), sentences_text(o));
      if (!scores.empty()) run.stage(run.out_path(name + ".scores"), scores_text(part));
      m.counts[name] = static_cast<std::int64_t>(part.size());
    }
    run.commit(stem);
  };

  handlers["build-vocab"] = [&] {
    Run run(command, g);
    if (in_paths.empty()) throw UsageError("--in is required");
    if (max_rank < 1) throw UsageError("--max-rank must be at least 1");
    std::vector<Tokens> sentences;
    std::int64_t empty = 0;
    for (const auto& p : in_paths) {
      for (auto& t : read_sentences(run.input(p))) {
        empty += t.empty();
        sentences.push_back(std::move(t));
      }
    }
    const auto vocab = build_vocab(sentences, max_rank);
    run.manifest().counts = {{"sentences", static_cast<std::int64_t>(sentences.size())},
                             {"empty_lines", empty},
                             {"vocabulary", static_cast<std::int64_t>(vocab.size())}};
    run.stage(out_path.empty() ? run.out_path("vocab.tsv") : fs::path(out_path),
              render([&](std::ostream& o) { write_vocab(o, vocab); }));
    run.commit(stem);
  };

  handlers["apply-unk"] = [&] {
    Run run(command, g);
    need(in_path, "--in");
    need(vocab_path, "--vocab");
    need(out_path, "--out");
    const auto sentences = read_sentences(run.input(in_path));
    const auto vocab = read_vocab_file(run.input(vocab_path));
    std::vector<Tokens> replaced;
    std::int64_t changed = 0;
    if (mode == "source") {
      for (const auto& s : sentences) replaced.push_back(apply_source_unk(s, vocab));
    } else {
      need(results_path, "--results");
      const auto results = index_results(read_results_file(run.input(results_path)), results_path);
      TypedUnkOptions opts;
      if (!classes.empty()) opts.classes = {classes.begin(), classes.end()};
      for (std::size_t i = 0; i < sentences.size(); ++i) {
        std::vector<std::string> lex(sentences[i].size());
        auto it = results.find(static_cast<std::int64_t>(i));
        if (it != results.end() && it->second.lexentries && it->second.lexentries->size() == lex.size()) {
          lex = *it->second.lexentries;
        }
        replaced.push_back(apply_typed_target_unk(sentences[i], vocab, lex, opts));
      }
    }
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      for (std::size_t j = 0; j < sentences[i].size(); ++j) changed += sentences[i][j] != replaced[i][j];
    }
    run.manifest().counts = {{"sentences", static_cast<std::int64_t>(sentences.size())},
                             {"replaced_tokens", changed}};
    run.stage(out_path, sentences_text(replaced));
    run.commit(stem + "." + fs::path(out_path).filename().string());
  };

  handlers["parse"] = [&] {
    Run run(command, g);
    need(in_path, "--in");
    BackendConfig cfg;
    cfg.timeout_ms = timeout_ms;
    cfg.workers = workers;
    cfg.inflight = inflight;
    if (timeout_ms < 0) throw UsageError("--timeout-ms must be non-negative");
    if (backend == "external") {
      need(backend_cmd, "--cmd");
      cfg.kind = BackendConfig::Kind::External;
      cfg.command = split_tokens(backend_cmd);
    } else if (!grammar.empty()) {
      cfg.grammar_path = run.input(grammar);
    }
    const auto sentences = read_sentences(run.input(in_path));
    const auto [results, summary] = parse_corpus(sentences, cfg);
    const fs::path target = out_path.empty() ? run.out_path("results.jsonl") : fs::path(out_path);
    out << summary_counts(summary, run.manifest());
    run.stage(target, render([&](std::ostream& o) { write_results(o, results, record_timing); }));
    run.commit(stem + "." + target.filename().string());
  };

  handlers["stats surface"] = [&] {
    Run run(command, g);
    need(nmt, "--nmt");
    need(train_src, "--train-src");
    need(train_ref, "--train-ref");
    need(scores, "--scores");
    const auto examples = load_examples(run, src, ref_text, hyp, scores);
    const auto results = read_results_file(run.input(nmt));
    const auto src_model = UnigramModel::train(read_sentences(run.input(train_src)));
    const auto ref_model = UnigramModel::train(read_sentences(run.input(train_ref)));
    const auto table = compute_features(examples, results, src_model, ref_model, {.exhausted_only = exhausted_only});
    const auto report = correlation_report(table.rows);
    run.manifest().counts = {{"examples", static_cast<std::int64_t>(examples.size())},
                             {"feature_rows", static_cast<std::int64_t>(table.rows.size())},
                             {"excluded_missing", static_cast<std::int64_t>(table.excluded_missing)},
                             {"excluded_empty", static_cast<std::int64_t>(table.excluded_empty)},
                             {"excluded_outcome", static_cast<std::int64_t>(table.excluded_outcome)}};
    run.stage(run.out_path("features.tsv"), render([&](std::ostream& o) { write_features(o, table.rows); }));
    run.stage(run.out_path("table2_correlations.tsv"), render([&](std::ostream& o) { write_correlations(o, report); }));
    run.commit(stem);
  };

  handlers["stats roots"] = [&] {
    Run run(command, g);
    need(ref, "--ref");
    need(nmt, "--nmt");
    const auto r = read_results_file(run.input(ref));
    const auto o = read_results_file(run.input(nmt));
    const auto dist = root_distribution(r, o);
    run.manifest().counts = {{"reference", static_cast<std::int64_t>(r.size())},
                             {"nmt", static_cast<std::int64_t>(o.size())}};
    run.stage(run.out_path("table1_roots.tsv"), render([&](std::ostream& os) { write_root_distribution(os, dist); }));
    run.commit(stem);
  };

  handlers["rules count"] = [&] {
    Run run(command, g);
    need(ref, "--ref");
    need(nmt, "--nmt");
    const auto r = derivations_of(read_results_file(run.input(ref)));
    const auto o = derivations_of(read_results_file(run.input(nmt)));
    const auto table = RuleTable::build(count_rules(r, rule_flags.bag()), count_rules(o, rule_flags.bag()));
    run.manifest().counts = {{"reference_derivations", static_cast<std::int64_t>(r.size())},
                             {"nmt_derivations", static_cast<std::int64_t>(o.size())},
                             {"rules", static_cast<std::int64_t>(table.rows().size())}};
    run.stage(run.out_path("rule_counts.tsv"), render([&](std::ostream& os) { write_rule_counts(os, table); }));
    run.stage(run.out_path("fig2_topk.tsv"), render([&](std::ostream& os) { write_topk(os, table, top_k); }));
    run.commit(stem);
  };

  handlers["rules ratio"] = [&] {
    Run run(command, g);
    need(counts_path, "--counts");
    std::ifstream in(run.input(counts_path));
    const auto table = read_rule_counts(in, counts_path);
    const auto points = ratio_table(table, min_ref_count);
    const auto buckets = ratio_dispersion(points, bucket_size);
    run.manifest().counts = {{"rules", static_cast<std::int64_t>(table.rows().size())},
                             {"ratio_points", static_cast<std::int64_t>(points.size())}};
    run.stage(run.out_path("fig3_ratio.tsv"), render([&](std::ostream& os) { write_ratio_points(os, points); }));
    run.stage(run.out_path("ratio_dispersion.tsv"), render([&](std::ostream& os) { write_dispersion(os, buckets); }));
    run.commit(stem);
  };

  auto rule_dataset = [&](Run& run) {
    need(ref, "--ref");
    need(nmt, "--nmt");
    const auto r = derivations_of(read_results_file(run.input(ref)));
    const auto o = derivations_of(read_results_file(run.input(nmt)));
    const auto data = vectorize(r, o, {rule_flags.bag(), fit_flags.binary});
    return split_train_val(data, fit_flags.train_fraction, g.seed);
  };

  handlers["discrim fit"] = [&] {
    Run run(command, g);
    const auto [train, val] = rule_dataset(run);
    std::map<std::string, std::string> descriptions;
    if (!descriptions_path.empty()) {
      std::ifstream in(run.input(descriptions_path));
      descriptions = read_descriptions(in, descriptions_path);
    }
    const auto model = fit(train, {fit_flags.c, fit_flags.tol, fit_flags.max_iter});
    const auto [pos, neg] = discriminative_rules(model, table_rows);
    run.manifest().counts = {{"train_rows", static_cast<std::int64_t>(train.rows())},
                             {"features", static_cast<std::int64_t>(train.cols())},
                             {"nonzero_weights", static_cast<std::int64_t>(model.nonzeros())},
                             {"iterations", model.iterations}};
    run.stage(run.out_path("model.tsv"), render([&](std::ostream& os) { write_model(os, model); }));
    run.stage(run.out_path("table3_discriminative.tsv"),
              render([&](std::ostream& os) { write_discriminative_table(os, pos, neg, descriptions); }));
    run.commit(stem);
  };

  handlers["discrim eval"] = [&] {
    Run run(command, g);
    need(model_path, "--model");
    std::ifstream in(run.input(model_path));
    const auto model = read_model(in, model_path);
    const auto [train, val] = rule_dataset(run);
    const auto e = evaluate(model, val);
    run.manifest().counts = {{"validation_rows", static_cast<std::int64_t>(e.n)}};
    out << fmt::format("accuracy {}% (majority baseline {}%) on {} rows\n", tsv::format_fixed(100 * e.accuracy, 1),
                       tsv::format_fixed(100 * e.baseline, 1), e.n);
    run.stage(run.out_path("discrim_eval.tsv"),
              fmt::format("metric\tvalue\naccuracy\t{}\nbaseline\t{}\nn\t{}\n", tsv::format_double(e.accuracy),
                          tsv::format_double(e.baseline), e.n));
    run.commit(stem);
  };

  handlers["sample unparseable"] = [&] {
    Run run(command, g);
    need(nmt, "--nmt");
    need(hyp, "--hyp");
    const auto results = read_results_file(run.input(nmt));
    const auto outputs = read_sentences(run.input(hyp));
    const auto s = sample_exhaustive_unparseable(results, outputs, max_words, n, g.seed);
    if (s.short_pool) {
      err << fmt::format("warning: only {} outputs qualified for a sample of {}\n", s.pool_size, n);
    }
    run.manifest().counts = {{"pool", static_cast<std::int64_t>(s.pool_size)},
                             {"sampled", static_cast<std::int64_t>(s.items.size())}};
    run.stage(run.out_path("annotation.tsv"),
              render([&](std::ostream& os) { write_annotations(os, annotation_template(s)); }));
    run.commit(stem);
  };

  handlers["sample rule-contrast"] = [&] {
    Run run(command, g);
    need(rule, "--rule");
    need(ref, "--ref");
    need(nmt, "--nmt");
    const auto examples = load_examples(run, src, ref_text, hyp, "");
    const auto r = index_results(read_results_file(run.input(ref)), ref);
    const auto o = index_results(read_results_file(run.input(nmt)), nmt);
    std::vector<ContrastPair> pairs;
    for (const auto& e : examples) {
      auto ri = r.find(e.id);
      if (ri == r.end() || !ri->second.derivation) continue;
      ContrastPair p{e.id, e.source, e.reference, *e.output, *ri->second.derivation, std::nullopt};
      if (auto oi = o.find(e.id); oi != o.end() && oi->second.derivation) p.output_derivation = oi->second.derivation;
      pairs.push_back(std::move(p));
    }
    const auto samples = sample_rule_contrast(rule, pairs, max_len, n_contrast, g.seed);
    run.manifest().counts = {{"pairs", static_cast<std::int64_t>(pairs.size())},
                             {"sampled", static_cast<std::int64_t>(samples.size())}};
    run.stage(run.out_path("contrast.tsv"), render([&](std::ostream& os) { write_contrast_samples(os, samples); }));
    run.commit(stem);
  };

  handlers["annotate summarize"] = [&] {
    Run run(command, g);
    need(in_path, "--in");
    std::ifstream in(run.input(in_path));
    const auto s = summarize_grammaticality(read_annotations(in, in_path));
    const auto text = render([&](std::ostream& os) { write_grammaticality_summary(os, s); });
    out << text;
    run.manifest().counts = {{"records", static_cast<std::int64_t>(s.total)},
                             {"excluded", static_cast<std::int64_t>(s.excluded)}};
    run.stage(run.out_path("grammaticality_summary.tsv"), text);
    run.commit(stem);
  };

  handlers["report"] = [&] {
    Run run(command, g);
    need(ref, "--ref");
    need(nmt, "--nmt");
    need(train_src, "--train-src");
    need(train_ref, "--train-ref");
    need(scores, "--scores");
    ReportInputs in;
    in.examples = load_examples(run, src, ref_text, hyp, scores);
    in.reference_results = read_results_file(run.input(ref));
    in.nmt_results = read_results_file(run.input(nmt));
    in.train_source = read_sentences(run.input(train_src));
    in.train_reference = read_sentences(run.input(train_ref));
    if (!descriptions_path.empty()) {
      std::ifstream d(run.input(descriptions_path));
      in.descriptions = read_descriptions(d, descriptions_path);
    }
    ReportOptions opt;
    opt.top_k = top_k;
    opt.min_ref_count = min_ref_count;
    opt.discriminative_rows = table_rows;
    opt.train_fraction = fit_flags.train_fraction;
    opt.exhausted_only = exhausted_only;
    opt.vectorize = {rule_flags.bag(), fit_flags.binary};
    opt.fit = {fit_flags.c, fit_flags.tol, fit_flags.max_iter};
    opt.seed = g.seed;
    const auto art = emit_report(in, opt);
    for (const auto& name : kReportFiles) run.stage(run.out_path(std::string(name)), art.files.at(std::string(name)));
    run.manifest().counts = art.counts;
    out << art.files.at("summary.txt");
    run.commit(stem);
  };

  try {
    if (!g.config.empty()) apply_config(app, chain, g.config);
    auto it = handlers.find(command);
    if (it == handlers.end()) throw UsageError(fmt::format("unknown command '{}'", command));
    // After config merging, so the manifest shows effective values.
    g.snapshot = config_snapshot(chain);
    it->second();
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << chain.back()->help();
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace derivscope
