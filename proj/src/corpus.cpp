#include "derivscope/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "derivscope/errors.hpp"
#include "derivscope/random.hpp"
#include "derivscope/tsv.hpp"

namespace derivscope {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path));
  return in;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::vector<Tokens> read_sentences(std::istream& in, std::string_view source_name) {
  std::vector<Tokens> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (auto bad = find_invalid_utf8(line); bad != std::string_view::npos) {
      throw DataError(fmt::format("{}:{}: invalid UTF-8 at byte {}", source_name, lineno, bad));
    }
    out.push_back(split_tokens(line));
  }
  return out;
}

std::vector<Tokens> read_sentences(const std::string& path) {
  auto in = open_input(path);
  return read_sentences(in, path);
}

void write_sentences(std::ostream& out, const std::vector<Tokens>& sentences) {
  for (const auto& s : sentences) out << join_tokens(s) << '\n';
}

std::vector<ParallelExample> align_parallel(std::vector<Tokens> source, std::vector<Tokens> target) {
  if (source.size() != target.size()) {
    throw DataError(fmt::format("alignment error: source has {} lines, target has {}", source.size(),
                                target.size()));
  }
  std::vector<ParallelExample> out(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    out[i].id = static_cast<std::int64_t>(i);
    out[i].source = std::move(source[i]);
    out[i].reference = std::move(target[i]);
  }
  return out;
}

std::vector<ParallelExample> load_parallel(const std::string& source_path, const std::string& target_path) {
  return align_parallel(read_sentences(source_path), read_sentences(target_path));
}

void attach_outputs(std::vector<ParallelExample>& examples, std::vector<Tokens> outputs) {
  if (outputs.size() != examples.size()) {
    throw DataError(fmt::format("alignment error: {} examples but {} outputs", examples.size(), outputs.size()));
  }
  for (std::size_t i = 0; i < examples.size(); ++i) examples[i].output = std::move(outputs[i]);
}

std::vector<std::optional<double>> read_scores(std::istream& in, std::string_view source_name) {
  std::vector<std::optional<double>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) {
      out.emplace_back();
      continue;
    }
    const auto last = line.find_last_not_of(" \t");
    const char* b = line.data() + first;
    const char* e = line.data() + last + 1;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
      throw DataError(fmt::format("{}:{}: not a number: '{}'", source_name, lineno, line));
    }
    if (!std::isfinite(v) || v > 0.0) {
      throw DataError(fmt::format("{}:{}: log probability must be finite and <= 0, got {}", source_name, lineno, v));
    }
    out.emplace_back(v);
  }
  return out;
}

std::vector<std::optional<double>> read_scores(const std::string& path) {
  auto in = open_input(path);
  return read_scores(in, path);
}

void attach_scores(std::vector<ParallelExample>& examples, const std::vector<std::optional<double>>& scores) {
  if (scores.size() != examples.size()) {
    throw DataError(fmt::format("alignment error: {} examples but {} scores", examples.size(), scores.size()));
  }
  for (std::size_t i = 0; i < examples.size(); ++i) examples[i].model_lp = scores[i];
}

Vocabulary::Vocabulary(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!rank_.emplace(entries_[i].token, i + 1).second) {
      throw DataError(fmt::format("duplicate vocabulary token '{}'", entries_[i].token));
    }
  }
}

bool Vocabulary::contains(std::string_view token) const { return rank_.count(std::string(token)) > 0; }

std::optional<std::size_t> Vocabulary::rank(std::string_view token) const {
  auto it = rank_.find(std::string(token));
  if (it == rank_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocab(const std::vector<Tokens>& sentences, std::size_t max_rank) {
  if (max_rank < 1) throw ConfigError("max_rank must be at least 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s) ++counts[t];
  }
  std::vector<Vocabulary::Entry> entries;
  entries.reserve(counts.size());
  for (auto& [tok, c] : counts) entries.push_back({tok, c});
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.count != b.count ? a.count > b.count : a.token < b.token;
  });
  if (entries.size() > max_rank) entries.resize(max_rank);
  return Vocabulary(std::move(entries));
}

void write_vocab(std::ostream& out, const Vocabulary& vocab) {
  std::size_t rank = 0;
  for (const auto& e : vocab.entries()) out << e.token << '\t' << e.count << '\t' << ++rank << '\n';
}

Vocabulary read_vocab(std::istream& in, std::string_view source_name) {
  std::vector<Vocabulary::Entry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const auto cols = tsv::split(line);
    Vocabulary::Entry e;
    std::int64_t rank = 0;
    if (cols.size() != 3 || cols[0].empty() || !tsv::parse_int(cols[1], e.count) || !tsv::parse_int(cols[2], rank)) {
      throw DataError(fmt::format("{}:{}: expected token<TAB>count<TAB>rank", source_name, lineno));
    }
    if (rank != static_cast<std::int64_t>(entries.size()) + 1) {
      throw DataError(fmt::format("{}:{}: rank {} out of order", source_name, lineno, rank));
    }
    e.token = cols[0];
    entries.push_back(std::move(e));
  }
  return Vocabulary(std::move(entries));
}

Vocabulary read_vocab_file(const std::string& path) {
  auto in = open_input(path);
  return read_vocab(in, path);
}

Tokens apply_source_unk(const Tokens& sentence, const Vocabulary& vocab) {
  Tokens out;
  out.reserve(sentence.size());
  for (const auto& t : sentence) out.push_back(vocab.contains(t) ? t : std::string(kUnkToken));
  return out;
}

std::string coarse_lexical_class(std::string_view lexentry, const TypedUnkOptions& options) {
  if (lexentry.empty()) return {};
  if (options.classes.count(std::string(lexentry))) return std::string(lexentry);
  static const std::pair<std::string_view, std::string_view> kPrefixes[] = {
      {"aj_", "adj"}, {"av_", "adv"}, {"n_", "noun"}, {"v_", "verb"}, {"p_", "prep"}, {"card_", "card"},
  };
  for (const auto& [prefix, cls] : kPrefixes) {
    if (lexentry.substr(0, prefix.size()) == prefix && options.classes.count(std::string(cls))) {
      return std::string(cls);
    }
  }
  return {};
}

Tokens apply_typed_target_unk(const Tokens& sentence, const Vocabulary& vocab,
                              const std::vector<std::string>& lexentries, const TypedUnkOptions& options) {
  Tokens out;
  out.reserve(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    const auto& t = sentence[i];
    if (vocab.contains(t)) {
      out.push_back(t);
      continue;
    }
    const std::string cls = i < lexentries.size() ? coarse_lexical_class(lexentries[i], options) : std::string();
    out.push_back(cls.empty() ? std::string(kUnkToken) : "generic_" + cls);
  }
  return out;
}

FilteredCorpus filter_parseable(const std::vector<ParallelExample>& examples,
                                const std::map<std::int64_t, ParseResult>& reference_results) {
  FilteredCorpus out;
  for (const auto& ex : examples) {
    auto it = reference_results.find(ex.id);
    if (it == reference_results.end()) throw DataError(fmt::format("no parse result for example {}", ex.id));
    if (!it->second.parseable()) continue;
    out.examples.push_back(ex);
    out.reference_derivations.push_back(*it->second.derivation);
  }
  return out;
}

SplitSpec SplitSpec::with_remainder(std::size_t corpus_size, std::optional<std::size_t> train,
                                    std::optional<std::size_t> valid, std::optional<std::size_t> analysis,
                                    std::uint64_t seed) {
  const int missing = !train + !valid + !analysis;
  if (missing > 1) throw ConfigError("at most one split size may be left as the remainder");
  const std::size_t given = train.value_or(0) + valid.value_or(0) + analysis.value_or(0);
  if (missing == 1) {
    if (given > corpus_size) {
      throw ConfigError(fmt::format("split sizes {} exceed the corpus size {}", given, corpus_size));
    }
    const std::size_t rest = corpus_size - given;
    if (!train) train = rest;
    if (!valid) valid = rest;
    if (!analysis) analysis = rest;
  }
  return SplitSpec{*train, *valid, *analysis, seed};
}

DatasetSplit split_indices(std::size_t n, const SplitSpec& spec) {
  if (spec.train + spec.valid + spec.analysis != n) {
    throw ConfigError(fmt::format("split sizes {}+{}+{} do not sum to the corpus size {}", spec.train, spec.valid,
                                  spec.analysis, n));
  }
  const auto perm = seeded_permutation(n, spec.seed);
  DatasetSplit out;
  out.train.assign(perm.begin(), perm.begin() + spec.train);
  out.valid.assign(perm.begin() + spec.train, perm.begin() + spec.train + spec.valid);
  out.analysis.assign(perm.begin() + spec.train + spec.valid, perm.end());
  return out;
}

ExampleSplit split_dataset(const std::vector<ParallelExample>& examples, const SplitSpec& spec) {
  const auto idx = split_indices(examples.size(), spec);
  return {gather(examples, idx.train), gather(examples, idx.valid), gather(examples, idx.analysis)};
}

}  // namespace derivscope
