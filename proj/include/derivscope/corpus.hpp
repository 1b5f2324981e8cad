#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "derivscope/derivation.hpp"
#include "derivscope/gateway.hpp"
#include "derivscope/tokens.hpp"

namespace derivscope {

inline constexpr std::string_view kUnkToken = "<unk>";

struct ParallelExample {
  std::int64_t id = 0;  // 0-based line number of origin
  Tokens source;
  Tokens reference;
  std::optional<Tokens> output;
  std::optional<double> model_lp;  // natural log, finite and <= 0

  /// An empty source or reference line; kept but flagged.
  bool has_empty_side() const { return source.empty() || reference.empty(); }
};

/// Reads a UTF-8 one-sentence-per-line file. Throws DataError on invalid
/// UTF-8 (with the line number) or when the file cannot be opened.
std::vector<Tokens> read_sentences(const std::string& path);
std::vector<Tokens> read_sentences(std::istream& in, std::string_view source_name);

void write_sentences(std::ostream& out, const std::vector<Tokens>& sentences);

/// Aligns source and target files by line number.
std::vector<ParallelExample> load_parallel(const std::string& source_path, const std::string& target_path);

/// Aligns already-read sentences; throws DataError naming both counts on mismatch.
std::vector<ParallelExample> align_parallel(std::vector<Tokens> source, std::vector<Tokens> target);

/// Attaches model outputs to examples by line.
void attach_outputs(std::vector<ParallelExample>& examples, std::vector<Tokens> outputs);

/// Scores file: one natural-log probability per line, blank means unavailable.
/// Throws DataError on unparsable, non-finite or positive values.
std::vector<std::optional<double>> read_scores(const std::string& path);
std::vector<std::optional<double>> read_scores(std::istream& in, std::string_view source_name);

void attach_scores(std::vector<ParallelExample>& examples, const std::vector<std::optional<double>>& scores);

class Vocabulary {
 public:
  struct Entry {
    std::string token;
    std::int64_t count = 0;
  };

  Vocabulary() = default;
  /// Entries must already be in rank order.
  explicit Vocabulary(std::vector<Entry> entries);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(std::string_view token) const;
  /// 1-based rank, or nullopt when absent.
  std::optional<std::size_t> rank(std::string_view token) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> rank_;
};

/// Keeps the max_rank most frequent tokens; ties by ascending token.
/// Empty sentences contribute nothing.
Vocabulary build_vocab(const std::vector<Tokens>& sentences, std::size_t max_rank = 40000);

/// TSV token<TAB>count<TAB>rank, ordered by rank.
void write_vocab(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocab(std::istream& in, std::string_view source_name);
Vocabulary read_vocab_file(const std::string& path);

Tokens apply_source_unk(const Tokens& sentence, const Vocabulary& vocab);

struct TypedUnkOptions {
  std::set<std::string> classes{"adj", "noun", "verb", "adv", "card", "prep"};
};

/// Coarse class of a lexical entry: the entry itself when it is a known class,
/// otherwise an ERG type prefix (aj_, n_, v_, av_, p_, card_) mapped to its
/// class. Empty when nothing matches.
std::string coarse_lexical_class(std::string_view lexentry, const TypedUnkOptions& options = {});

/// Out-of-vocabulary tokens become generic_<class> from their per-position
/// lexical entry, or <unk> when no usable entry exists. An empty lexentry
/// string means no information for that position.
Tokens apply_typed_target_unk(const Tokens& sentence, const Vocabulary& vocab,
                              const std::vector<std::string>& lexentries, const TypedUnkOptions& options = {});

struct FilteredCorpus {
  std::vector<ParallelExample> examples;
  std::vector<Derivation> reference_derivations;  // parallel to examples
};

/// Keeps examples whose reference parsed. Throws DataError when an id has no result.
FilteredCorpus filter_parseable(const std::vector<ParallelExample>& examples,
                                const std::map<std::int64_t, ParseResult>& reference_results);

struct SplitSpec {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t analysis = 0;
  std::uint64_t seed = 0;

  /// Sizes from a corpus size with any one part given as the remainder.
  static SplitSpec with_remainder(std::size_t corpus_size, std::optional<std::size_t> train,
                                  std::optional<std::size_t> valid, std::optional<std::size_t> analysis,
                                  std::uint64_t seed);
};

struct DatasetSplit {
  std::vector<std::size_t> train, valid, analysis;  // indices into the input
};

/// Seeded shuffle then contiguous slicing. Throws ConfigError when sizes do
/// not sum to n.
DatasetSplit split_indices(std::size_t n, const SplitSpec& spec);

template <typename T>
std::vector<T> gather(const std::vector<T>& items, const std::vector<std::size_t>& indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(items[i]);
  return out;
}

struct ExampleSplit {
  std::vector<ParallelExample> train, valid, analysis;
};

ExampleSplit split_dataset(const std::vector<ParallelExample>& examples, const SplitSpec& spec);

}  // namespace derivscope
