#include "derivscope/toy_grammar.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "derivscope/errors.hpp"
#include "toy_grammar_data.hpp"

namespace derivscope {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::optional<int> ToyGrammar::category(std::string_view name) const {
  auto it = std::find(categories_.begin(), categories_.end(), name);
  if (it == categories_.end()) return std::nullopt;
  return static_cast<int>(it - categories_.begin());
}

const std::vector<ToyGrammar::LexEntry>* ToyGrammar::lookup(std::string_view token) const {
  auto it = lexicon_.find(ascii_lower(token));
  return it == lexicon_.end() ? nullptr : &it->second;
}

ToyGrammar ToyGrammar::parse(std::string_view text) {
  ToyGrammar g;
  auto intern = [&g](const std::string& name) {
    if (auto c = g.category(name)) return *c;
    g.categories_.push_back(name);
    return static_cast<int>(g.categories_.size() - 1);
  };

  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const Tokens f = split_tokens(line);
    if (f.empty()) continue;
    auto fail = [lineno](const std::string& what) {
      return ConfigError(fmt::format("toy grammar line {}: {}", lineno, what));
    };
    if (f[0] == "start") {
      if (f.size() != 3 || (f[2] != "full" && f[2] != "fragment")) throw fail("expected 'start <cat> full|fragment'");
      g.starts_.push_back({intern(f[1]), f[2] == "full" ? Completeness::Full : Completeness::Fragment});
    } else if (f[0] == "rule") {
      // rule label lhs -> r1 [r2] weight
      if (f.size() != 6 && f.size() != 7) throw fail("expected 'rule <label> <lhs> -> <rhs>... <weight>'");
      if (f[3] != "->") throw fail("missing '->'");
      Rule r;
      r.label = f[1];
      r.lhs = intern(f[2]);
      for (std::size_t i = 4; i + 1 < f.size(); ++i) r.rhs.push_back(intern(f[i]));
      try {
        std::size_t used = 0;
        r.weight = std::stod(f.back(), &used);
        if (used != f.back().size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw fail(fmt::format("bad weight '{}'", f.back()));
      }
      g.rules_.push_back(std::move(r));
    } else if (f[0] == "lex") {
      if (f.size() != 4) throw fail("expected 'lex <token> <cat> <class>'");
      g.lexicon_[ascii_lower(f[1])].push_back({intern(f[2]), f[3]});
    } else {
      throw fail(fmt::format("unknown directive '{}'", f[0]));
    }
  }
  if (g.starts_.empty()) throw ConfigError("toy grammar declares no start category");

  // Order unary rules so every rule producing a category runs before any
  // rule consuming it. A cycle makes derivation counts infinite.
  const auto ncat = g.categories_.size();
  std::vector<std::vector<int>> parents(ncat);
  std::vector<int> indegree(ncat, 0);
  for (const auto& r : g.rules_) {
    if (r.rhs.size() == 1) {
      parents[r.rhs[0]].push_back(r.lhs);
      ++indegree[r.lhs];
    }
  }
  std::vector<int> order;
  for (std::size_t c = 0; c < ncat; ++c) {
    if (indegree[c] == 0) order.push_back(static_cast<int>(c));
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (int p : parents[order[head]]) {
      if (--indegree[p] == 0) order.push_back(p);
    }
  }
  if (order.size() != ncat) throw ConfigError("toy grammar has a cycle of unary rules");
  std::vector<std::size_t> position(ncat);
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  for (std::size_t i = 0; i < g.rules_.size(); ++i) {
    if (g.rules_[i].rhs.size() == 1) g.unary_order_.push_back(static_cast<int>(i));
  }
  std::stable_sort(g.unary_order_.begin(), g.unary_order_.end(),
                   [&](int a, int b) { return position[g.rules_[a].lhs] < position[g.rules_[b].lhs]; });
  return g;
}

ToyGrammar ToyGrammar::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open toy grammar file {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const ToyGrammar& ToyGrammar::bundled() {
  static const ToyGrammar g = parse(kBundledToyGrammar);
  return g;
}

Formality toy_formality(const Tokens& tokens) {
  if (tokens.empty()) return Formality::Informal;
  const auto first = static_cast<unsigned char>(tokens.front().front());
  const auto& last = tokens.back();
  const bool terminal = last == "." || last == "!" || last == "?";
  return (std::isupper(first) && terminal) ? Formality::Strict : Formality::Informal;
}

namespace {

struct Back {
  enum class Kind : std::uint8_t { None, Lex, Unary, Binary };
  Kind kind = Kind::None;
  int rule = -1;  // rule index, or lexical entry index for Lex
  int split = -1;
};

struct Cell {
  double score = -std::numeric_limits<double>::infinity();
  double count = 0.0;
  Back back;
};

class Chart {
 public:
  Chart(std::size_t n, std::size_t ncat) : n_(n), ncat_(ncat), cells_((n + 1) * (n + 1) * ncat) {}
  Cell& at(std::size_t i, std::size_t j, int cat) { return cells_[(i * (n_ + 1) + j) * ncat_ + cat]; }
  const Cell& at(std::size_t i, std::size_t j, int cat) const {
    return cells_[(i * (n_ + 1) + j) * ncat_ + cat];
  }

 private:
  std::size_t n_, ncat_;
  std::vector<Cell> cells_;
};

DerivationNode build_tree(const ToyGrammar& g, const Chart& chart, const Tokens& tokens, std::size_t i,
                          std::size_t j, int cat) {
  const Back& b = chart.at(i, j, cat).back;
  switch (b.kind) {
    case Back::Kind::Lex: {
      const auto& entry = (*g.lookup(tokens[i]))[b.rule];
      return DerivationNode::leaf(tokens[i], entry.lexentry);
    }
    case Back::Kind::Unary: {
      const auto& r = g.rules()[b.rule];
      return DerivationNode::rule(r.label, {build_tree(g, chart, tokens, i, j, r.rhs[0])});
    }
    case Back::Kind::Binary: {
      const auto& r = g.rules()[b.rule];
      const auto k = static_cast<std::size_t>(b.split);
      return DerivationNode::rule(
          r.label, {build_tree(g, chart, tokens, i, k, r.rhs[0]), build_tree(g, chart, tokens, k, j, r.rhs[1])});
    }
    case Back::Kind::None:
      break;
  }
  throw std::logic_error("toy parser: dangling back pointer");
}

}  // namespace

ToyParse ToyParser::parse(const Tokens& tokens, const ToyParseOptions& options) const {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  const ToyGrammar& g = *grammar_;
  ToyParse out;

  if (options.timeout.count() <= 0) {
    out.status = ToyParse::Status::ResourceLimit;
    out.message = "timeout";
    return out;
  }
  for (const auto& t : tokens) {
    if (!g.lookup(t)) {
      out.status = ToyParse::Status::UnknownToken;
      out.message = fmt::format("no lexical entry for '{}'", t);
      return out;
    }
  }
  const std::size_t n = tokens.size();
  if (n == 0) {
    out.status = ToyParse::Status::NoParse;
    return out;
  }

  const std::size_t ncat = g.categories_.size();
  Chart chart(n, ncat);
  std::size_t filled = 0;
  const auto deadline = started + options.timeout;

  auto relax = [](Cell& cell, double score, double count, Back back) {
    cell.count += count;
    if (score > cell.score) {
      cell.score = score;
      cell.back = back;
    }
  };

  for (std::size_t len = 1; len <= n; ++len) {
    for (std::size_t i = 0; i + len <= n; ++i) {
      const std::size_t j = i + len;
      if (Clock::now() >= deadline) {
        out.status = ToyParse::Status::ResourceLimit;
        out.message = "timeout";
        return out;
      }
      if (len == 1) {
        const auto& entries = *g.lookup(tokens[i]);
        for (std::size_t e = 0; e < entries.size(); ++e) {
          relax(chart.at(i, j, entries[e].category), 0.0, 1.0, {Back::Kind::Lex, static_cast<int>(e), -1});
        }
      } else {
        for (std::size_t k = i + 1; k < j; ++k) {
          for (std::size_t r = 0; r < g.rules_.size(); ++r) {
            const auto& rule = g.rules_[r];
            if (rule.rhs.size() != 2) continue;
            const Cell& left = chart.at(i, k, rule.rhs[0]);
            if (left.count == 0.0) continue;
            const Cell& right = chart.at(k, j, rule.rhs[1]);
            if (right.count == 0.0) continue;
            relax(chart.at(i, j, rule.lhs), rule.weight + left.score + right.score, left.count * right.count,
                  {Back::Kind::Binary, static_cast<int>(r), static_cast<int>(k)});
          }
        }
      }
      for (int r : g.unary_order_) {
        const auto& rule = g.rules_[r];
        const Cell& child = chart.at(i, j, rule.rhs[0]);
        if (child.count == 0.0) continue;
        relax(chart.at(i, j, rule.lhs), rule.weight + child.score, child.count, {Back::Kind::Unary, r, -1});
      }
      for (std::size_t c = 0; c < ncat; ++c) {
        if (chart.at(i, j, static_cast<int>(c)).count > 0.0) ++filled;
      }
      if (filled > options.max_chart_entries) {
        out.status = ToyParse::Status::ResourceLimit;
        out.message = "memory";
        return out;
      }
    }
  }

  const ToyGrammar::Start* best_start = nullptr;
  for (const auto& s : g.starts_) {
    const Cell& cell = chart.at(0, n, s.category);
    out.derivation_count += cell.count;
    if (cell.count > 0.0 && (!best_start || cell.score > chart.at(0, n, best_start->category).score)) {
      best_start = &s;
    }
  }
  if (!best_start) {
    out.status = ToyParse::Status::NoParse;
    return out;
  }
  const RootCondition rc{toy_formality(tokens), best_start->completeness};
  out.status = ToyParse::Status::Ok;
  out.best_score = chart.at(0, n, best_start->category).score;
  out.best = Derivation{RootLabelMap::standard().label_for(rc), rc,
                        build_tree(g, chart, tokens, 0, n, best_start->category)};
  return out;
}

}  // namespace derivscope
