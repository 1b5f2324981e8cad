#include "derivscope/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <deque>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "child_process.hpp"
#include "derivscope/errors.hpp"

namespace derivscope {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(ParseOutcome o) {
  switch (o) {
    case ParseOutcome::Parseable:
      return "parseable";
    case ParseOutcome::ResourceLimit:
      return "resource_limit";
    case ParseOutcome::ParserError:
      return "parser_error";
    case ParseOutcome::Exhausted:
      return "exhausted";
  }
  return "?";
}

ParseOutcome outcome_from_string(std::string_view name) {
  for (auto o : kAllOutcomes) {
    if (to_string(o) == name) return o;
  }
  throw DataError(fmt::format("unknown parse outcome '{}'", name));
}

void check_invariants(const ParseResult& r, std::size_t token_count) {
  if (r.derivation.has_value() != r.parseable()) {
    throw std::logic_error(fmt::format("result {}: derivation presence disagrees with outcome", r.id));
  }
  if (r.lexentries && !r.derivation) {
    throw std::logic_error(fmt::format("result {}: lexentries without a derivation", r.id));
  }
  if (r.lexentries && r.lexentries->size() != token_count) {
    throw std::logic_error(fmt::format("result {}: {} lexentries for {} tokens", r.id, r.lexentries->size(),
                                       token_count));
  }
}

double OutcomeSummary::fraction(ParseOutcome o) const {
  return total == 0 ? 0.0 : static_cast<double>(count(o)) / static_cast<double>(total);
}

OutcomeSummary summarize(const std::vector<ParseResult>& results) {
  OutcomeSummary s;
  for (const auto& r : results) ++s.counts[static_cast<std::size_t>(r.outcome)];
  s.total = static_cast<std::int64_t>(results.size());
  return s;
}

json toy_backend_parse(const ToyGrammar& grammar, std::int64_t id, std::string_view text, std::int64_t timeout_ms) {
  const Tokens tokens = split_tokens(text);
  ToyParseOptions opts;
  opts.timeout = std::chrono::milliseconds(timeout_ms);
  const ToyParse p = ToyParser(grammar).parse(tokens, opts);
  json reply{{"id", id}};
  switch (p.status) {
    case ToyParse::Status::Ok:
      reply["status"] = "ok";
      reply["root"] = p.best->root_label;
      reply["derivation"] = serialize_tree(p.best->tree);
      reply["lexentries"] = leaf_lexentries(p.best->tree);
      reply["derivation_count"] = p.derivation_count;
      break;
    case ToyParse::Status::NoParse:
      reply["status"] = "no_parse";
      break;
    case ToyParse::Status::UnknownToken:
      reply["status"] = "error";
      reply["message"] = p.message;
      break;
    case ToyParse::Status::ResourceLimit:
      reply["status"] = "resource";
      reply["message"] = p.message;
      break;
  }
  return reply;
}

ParseResult result_from_reply(std::int64_t id, const json& reply, const Tokens& tokens) {
  ParseResult r;
  r.id = id;
  auto error = [&r](std::string msg) {
    r.outcome = ParseOutcome::ParserError;
    r.derivation.reset();
    r.lexentries.reset();
    r.message = std::move(msg);
    return r;
  };
  if (!reply.is_object()) return error("malformed reply: not an object");
  auto st = reply.find("status");
  if (st == reply.end() || !st->is_string()) return error("malformed reply: missing status");
  if (auto m = reply.find("message"); m != reply.end() && m->is_string()) r.message = m->get<std::string>();
  const auto& status = st->get_ref<const std::string&>();
  if (status == "no_parse") {
    r.outcome = ParseOutcome::Exhausted;
    return r;
  }
  if (status == "resource") {
    r.outcome = ParseOutcome::ResourceLimit;
    return r;
  }
  if (status == "error") {
    r.outcome = ParseOutcome::ParserError;
    return r;
  }
  if (status != "ok") return error(fmt::format("malformed reply: unknown status '{}'", status));

  auto tree = reply.find("derivation");
  auto root = reply.find("root");
  if (tree == reply.end() || root == reply.end() || !root->is_string()) {
    return error("malformed reply: ok without derivation and root");
  }
  try {
    r.derivation = parse_derivation(*tree, root->get<std::string>());
  } catch (const DataError& e) {
    return error(fmt::format("malformed reply: {}", e.what()));
  }
  if (leaf_tokens(r.derivation->tree) != tokens) {
    return error("malformed reply: derivation leaves do not reproduce the sentence");
  }
  if (auto le = reply.find("lexentries"); le != reply.end()) {
    if (!le->is_array()) return error("malformed reply: lexentries is not an array");
    std::vector<std::string> classes;
    for (const auto& c : *le) {
      if (!c.is_string()) return error("malformed reply: non-string lexentry");
      classes.push_back(c.get<std::string>());
    }
    if (classes.size() != tokens.size()) return error("malformed reply: lexentries length mismatch");
    r.lexentries = std::move(classes);
  } else {
    r.lexentries = leaf_lexentries(r.derivation->tree);
  }
  r.outcome = ParseOutcome::Parseable;
  r.message.clear();
  return r;
}

namespace {

ParseResult forced_timeout(std::int64_t id) {
  ParseResult r;
  r.id = id;
  r.outcome = ParseOutcome::ResourceLimit;
  r.message = "timeout";
  return r;
}

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

const ToyGrammar& resolve_grammar(const BackendConfig& backend, std::optional<ToyGrammar>& storage) {
  if (backend.grammar_path.empty()) return ToyGrammar::bundled();
  storage = ToyGrammar::load(backend.grammar_path);
  return *storage;
}

ParseResult toy_parse_one(const ToyGrammar& grammar, const Tokens& text, std::int64_t id, std::int64_t timeout_ms) {
  const auto started = Clock::now();
  ParseResult r = result_from_reply(id, toy_backend_parse(grammar, id, join_tokens(text), timeout_ms), text);
  r.wall_ms = elapsed_ms(started);
  return r;
}

/// Shared state of an external-backend run.
class ExternalRun {
 public:
  ExternalRun(const std::vector<Tokens>& sentences, const BackendConfig& backend)
      : sentences_(sentences), backend_(backend), results_(sentences.size()), done_(sentences.size(), false) {}

  void run() {
    const int nworkers = std::max(1, std::min<int>(backend_.workers, static_cast<int>(sentences_.size())));
    // Launch every child up front so an unlaunchable command fails before
    // any sentence is sent.
    std::vector<std::unique_ptr<detail::ChildProcess>> children;
    for (int w = 0; w < nworkers; ++w) children.push_back(std::make_unique<detail::ChildProcess>(backend_.command));

    std::vector<std::thread> threads;
    for (int w = 0; w < nworkers; ++w) {
      threads.emplace_back([this, child = std::move(children[w])]() mutable { worker(std::move(child)); });
    }
    for (auto& t : threads) t.join();

    for (std::size_t i = 0; i < results_.size(); ++i) {
      if (!done_[i]) {
        results_[i].id = static_cast<std::int64_t>(i);
        results_[i].outcome = ParseOutcome::ParserError;
        results_[i].message = "no live backend worker";
      }
    }
  }

  std::vector<ParseResult> take() { return std::move(results_); }

 private:
  struct Pending {
    std::size_t index;
    Clock::time_point sent;
  };

  std::optional<std::size_t> next_shared() {
    const auto i = next_.fetch_add(1);
    if (i >= sentences_.size()) return std::nullopt;
    return i;
  }

  void finish(ParseResult r, std::size_t index) {
    r.id = static_cast<std::int64_t>(index);
    results_[index] = std::move(r);
    done_[index] = true;
  }

  void worker(std::unique_ptr<detail::ChildProcess> child) {
    const auto timeout = std::chrono::milliseconds(backend_.timeout_ms);
    // Replies that never come are abandoned this long after the backend's own limit.
    const auto grace = std::chrono::milliseconds(100);
    const std::size_t window = static_cast<std::size_t>(std::max(1, backend_.inflight));
    std::vector<Pending> pending;
    // Sentences replayed one at a time after a crash with several in flight.
    std::deque<std::size_t> isolate;
    Clock::time_point last_progress = Clock::now();
    bool shared_exhausted = false;

    auto respawn = [&]() -> bool {
      child->kill();
      try {
        child = std::make_unique<detail::ChildProcess>(backend_.command);
        return true;
      } catch (const ConfigError&) {
        return false;
      }
    };

    // Kill the child; a lone in-flight sentence gets the outcome, several are
    // replayed in isolation to find the culprit.
    auto fail_pending = [&](ParseOutcome outcome, const std::string& why) -> bool {
      if (pending.size() == 1) {
        ParseResult r;
        r.outcome = outcome;
        r.message = why;
        r.wall_ms = elapsed_ms(pending.front().sent);
        finish(std::move(r), pending.front().index);
      } else {
        std::vector<std::size_t> idx;
        for (const auto& p : pending) idx.push_back(p.index);
        std::sort(idx.begin(), idx.end());
        isolate.insert(isolate.begin(), idx.begin(), idx.end());
      }
      pending.clear();
      if (!respawn()) {
        for (auto i : isolate) {
          ParseResult r;
          r.outcome = ParseOutcome::ParserError;
          r.message = "backend could not be respawned";
          finish(std::move(r), i);
        }
        isolate.clear();
        return false;
      }
      last_progress = Clock::now();
      return true;
    };

    for (;;) {
      // Fill the window. Isolated replays only go out alone.
      bool broken = false;
      while (!broken) {
        std::optional<std::size_t> index;
        bool replay = false;
        if (!isolate.empty()) {
          if (!pending.empty()) break;
          index = isolate.front();
          isolate.pop_front();
          replay = true;
        } else if (pending.size() < window && !shared_exhausted) {
          index = next_shared();
          if (!index) shared_exhausted = true;
        }
        if (!index) break;
        if (backend_.timeout_ms <= 0) {
          finish(forced_timeout(0), *index);
          continue;
        }
        const json request{{"id", static_cast<std::int64_t>(*index)},
                           {"text", join_tokens(sentences_[*index])},
                           {"timeout_ms", backend_.timeout_ms}};
        const auto now = Clock::now();
        if (pending.empty()) last_progress = now;
        pending.push_back({*index, now});
        if (!child->write_line(request.dump())) broken = true;
        if (replay || pending.size() >= window) break;
      }
      if (broken) {
        if (!fail_pending(ParseOutcome::ParserError, "backend closed its input")) return;
        continue;
      }
      if (pending.empty()) {
        if (isolate.empty() && shared_exhausted) return;
        continue;
      }

      Clock::time_point deadline = Clock::time_point::max();
      for (const auto& p : pending) deadline = std::min(deadline, std::max(p.sent, last_progress) + timeout + grace);

      std::string line;
      switch (child->read_line(line, deadline)) {
        case detail::ChildProcess::ReadStatus::Timeout:
          if (!fail_pending(ParseOutcome::ResourceLimit, "timeout")) return;
          continue;
        case detail::ChildProcess::ReadStatus::Eof:
          if (!fail_pending(ParseOutcome::ParserError, "backend exited")) return;
          continue;
        case detail::ChildProcess::ReadStatus::Line:
          break;
      }
      json reply = json::parse(line, nullptr, false);
      std::optional<std::int64_t> id;
      if (reply.is_object()) {
        if (auto it = reply.find("id"); it != reply.end() && it->is_number_integer()) id = it->get<std::int64_t>();
      }
      auto match = std::find_if(pending.begin(), pending.end(), [&](const Pending& p) {
        return id && static_cast<std::int64_t>(p.index) == *id;
      });
      if (match == pending.end()) {
        // An unattributable line: blame the sole request, or isolate.
        if (pending.size() == 1) {
          ParseResult r;
          r.outcome = ParseOutcome::ParserError;
          r.message = "malformed reply";
          r.wall_ms = elapsed_ms(pending.front().sent);
          finish(std::move(r), pending.front().index);
          pending.clear();
          last_progress = Clock::now();
        } else if (!fail_pending(ParseOutcome::ParserError, "malformed reply")) {
          return;
        }
        continue;
      }
      ParseResult r = result_from_reply(*id, reply, sentences_[match->index]);
      r.wall_ms = elapsed_ms(match->sent);
      finish(std::move(r), match->index);
      pending.erase(match);
      last_progress = Clock::now();
    }
  }

  const std::vector<Tokens>& sentences_;
  const BackendConfig& backend_;
  std::vector<ParseResult> results_;
  std::vector<char> done_;  // each slot written by exactly one worker
  std::atomic<std::size_t> next_{0};
};

std::vector<ParseResult> parse_toy_corpus(const std::vector<Tokens>& sentences, const BackendConfig& backend) {
  std::optional<ToyGrammar> storage;
  const ToyGrammar& grammar = resolve_grammar(backend, storage);
  std::vector<ParseResult> results(sentences.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < sentences.size();) {
      results[i] = toy_parse_one(grammar, sentences[i], static_cast<std::int64_t>(i), backend.timeout_ms);
    }
  };
  const int nworkers = std::max(1, std::min<int>(backend.workers, static_cast<int>(sentences.size())));
  if (nworkers == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < nworkers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  return results;
}

void validate(const BackendConfig& backend) {
  if (backend.workers < 1) throw ConfigError("workers must be at least 1");
  if (backend.timeout_ms < 0) throw ConfigError("timeout must not be negative");
  if (backend.kind == BackendConfig::Kind::External && backend.command.empty()) {
    throw ConfigError("external backend needs a command");
  }
}

}  // namespace

ParseResult parse_sentence(const Tokens& text, const BackendConfig& backend, std::int64_t id) {
  validate(backend);
  if (backend.kind == BackendConfig::Kind::Toy) {
    std::optional<ToyGrammar> storage;
    return toy_parse_one(resolve_grammar(backend, storage), text, id, backend.timeout_ms);
  }
  BackendConfig single = backend;
  single.workers = 1;
  auto [results, summary] = parse_corpus({text}, single);
  results.front().id = id;
  return results.front();
}

std::pair<std::vector<ParseResult>, OutcomeSummary> parse_corpus(const std::vector<Tokens>& sentences,
                                                                 const BackendConfig& backend) {
  validate(backend);
  std::vector<ParseResult> results;
  if (backend.kind == BackendConfig::Kind::Toy) {
    results = parse_toy_corpus(sentences, backend);
  } else if (!sentences.empty()) {
    ExternalRun run(sentences, backend);
    run.run();
    results = run.take();
  }
  auto summary = summarize(results);
  return {std::move(results), summary};
}

json to_record(const ParseResult& r, bool include_timing) {
  json rec{{"id", r.id}, {"outcome", std::string(to_string(r.outcome))}};
  if (r.derivation) {
    rec["root"] = r.derivation->root_label;
    rec["tree"] = serialize_tree(r.derivation->tree);
  } else {
    rec["root"] = nullptr;
    rec["tree"] = nullptr;
  }
  if (r.lexentries) {
    rec["lexentries"] = *r.lexentries;
  } else {
    rec["lexentries"] = nullptr;
  }
  if (!r.message.empty()) rec["message"] = r.message;
  if (include_timing) rec["wall_ms"] = r.wall_ms;
  return rec;
}

ParseResult from_record(const json& rec) {
  if (!rec.is_object()) throw DataError("record is not an object");
  ParseResult r;
  auto id = rec.find("id");
  if (id == rec.end() || !id->is_number_integer()) throw DataError("record lacks an integer \"id\"");
  r.id = id->get<std::int64_t>();
  auto outcome = rec.find("outcome");
  if (outcome == rec.end() || !outcome->is_string()) throw DataError("record lacks a string \"outcome\"");
  r.outcome = outcome_from_string(outcome->get<std::string>());
  auto tree = rec.find("tree");
  const bool has_tree = tree != rec.end() && !tree->is_null();
  if (has_tree != r.parseable()) throw DataError("record tree presence disagrees with its outcome");
  if (has_tree) {
    auto root = rec.find("root");
    if (root == rec.end() || !root->is_string()) throw DataError("parseable record lacks a string \"root\"");
    r.derivation = parse_derivation(*tree, root->get<std::string>());
    if (auto le = rec.find("lexentries"); le != rec.end() && !le->is_null()) {
      r.lexentries = le->get<std::vector<std::string>>();
    } else {
      r.lexentries = leaf_lexentries(r.derivation->tree);
    }
    if (r.lexentries->size() != leaf_tokens(r.derivation->tree).size()) {
      throw DataError("record lexentries length differs from its token count");
    }
  }
  if (auto m = rec.find("message"); m != rec.end() && m->is_string()) r.message = m->get<std::string>();
  if (auto w = rec.find("wall_ms"); w != rec.end() && w->is_number()) r.wall_ms = w->get<double>();
  return r;
}

void write_results(std::ostream& out, const std::vector<ParseResult>& results, bool include_timing) {
  for (const auto& r : results) out << to_record(r, include_timing).dump() << '\n';
}

std::vector<ParseResult> read_results(std::istream& in, std::string_view source_name) {
  std::vector<ParseResult> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(from_record(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", source_name, lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", source_name, lineno, e.what()));
    }
  }
  return out;
}

std::vector<ParseResult> read_results_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path));
  return read_results(in, path);
}

}  // namespace derivscope
