#include "lrmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <unordered_map>

#include "lrmt/error.hpp"
#include "lrmt/utf8.hpp"

namespace lrmt {

namespace {

void require_nonempty(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyCorpus, "no segments to score");
}

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

// Python str.rstrip() with no argument.
std::u32string rstrip(std::u32string s) {
  while (!s.empty() && utf8::is_space(s.back())) s.pop_back();
  return s;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

std::vector<EvalPair> zip_eval_pairs(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  if (hyps.size() != refs.size()) {
    throw Error(ErrorCode::LineCountMismatch, std::to_string(hyps.size()) + " hypotheses vs " +
                                                  std::to_string(refs.size()) + " references");
  }
  std::vector<EvalPair> out;
  out.reserve(hyps.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) out.push_back({hyps[i], refs[i]});
  return out;
}

// ---- 13a ---------------------------------------------------------------------

std::string tokenize_13a(std::string_view input) {
  std::string line(input);
  line = replace_all(line, "<skipped>", "");
  line = replace_all(line, "-\n", "");
  line = replace_all(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    line = replace_all(line, "&quot;", "\"");
    line = replace_all(line, "&amp;", "&");
    line = replace_all(line, "&lt;", "<");
    line = replace_all(line, "&gt;", ">");
  }
  std::u32string s = U" " + utf8::decode(line) + U" ";

  // Symbols always split off: {|}~ [\]^_` space !"#$%& ()*+ :;<=>?@ /
  auto is_symbol = [](char32_t c) {
    return (c >= U'{' && c <= U'~') || (c >= U'[' && c <= U'`') || (c >= U' ' && c <= U'&') ||
           (c >= U'(' && c <= U'+') || (c >= U':' && c <= U'@') || c == U'/';
  };
  auto is_period_comma = [](char32_t c) { return c == U'.' || c == U','; };

  std::u32string a;
  for (char32_t c : s) {
    if (is_symbol(c)) {
      a += U' ';
      a += c;
      a += U' ';
    } else {
      a += c;
    }
  }
  // Each pass below is a left-to-right, non-overlapping two-character rewrite.
  std::u32string b;
  for (std::size_t i = 0; i < a.size();) {
    if (i + 1 < a.size() && !is_digit(a[i]) && is_period_comma(a[i + 1])) {
      b += a[i];
      b += U' ';
      b += a[i + 1];
      b += U' ';
      i += 2;
    } else {
      b += a[i++];
    }
  }
  std::u32string c;
  for (std::size_t i = 0; i < b.size();) {
    if (i + 1 < b.size() && is_period_comma(b[i]) && !is_digit(b[i + 1])) {
      c += U' ';
      c += b[i];
      c += U' ';
      c += b[i + 1];
      i += 2;
    } else {
      c += b[i++];
    }
  }
  std::u32string d;
  for (std::size_t i = 0; i < c.size();) {
    if (i + 1 < c.size() && is_digit(c[i]) && c[i + 1] == U'-') {
      d += c[i];
      d += U' ';
      d += U'-';
      d += U' ';
      i += 2;
    } else {
      d += c[i++];
    }
  }
  return join_words(utf8::split_whitespace(utf8::encode(d)));
}

// ---- BLEU --------------------------------------------------------------------

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (int n = 0; n < 4; ++n) {
    correct[n] += o.correct[n];
    total[n] += o.total[n];
  }
  sys_len += o.sys_len;
  ref_len += o.ref_len;
  return *this;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::int64_t>;

NgramCounts word_ngrams(const std::vector<std::string>& words, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++out[std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                   words.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

std::vector<std::string> bleu_words(std::string_view text) {
  const std::string stripped = utf8::encode(rstrip(utf8::decode(text)));
  return utf8::split_whitespace(tokenize_13a(stripped));
}

}  // namespace

BleuStats bleu_sentence_stats(std::string_view hypothesis, std::string_view reference) {
  const auto hyp = bleu_words(hypothesis);
  const auto ref = bleu_words(reference);
  BleuStats s;
  s.sys_len = static_cast<std::int64_t>(hyp.size());
  s.ref_len = static_cast<std::int64_t>(ref.size());
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = word_ngrams(hyp, n);
    const auto r = word_ngrams(ref, n);
    for (const auto& [ng, count] : h) {
      s.total[n - 1] += count;
      auto it = r.find(ng);
      if (it != r.end()) s.correct[n - 1] += std::min(count, it->second);
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  double bp = 1.0;
  if (s.sys_len < s.ref_len) {
    bp = s.sys_len > 0 ? std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.sys_len)) : 0.0;
  }
  if (std::all_of(s.correct.begin(), s.correct.end(), [](std::int64_t c) { return c == 0; })) return 0.0;

  std::array<double, 4> prec{0.0, 0.0, 0.0, 0.0};
  double smooth = 1.0;
  for (int n = 0; n < 4; ++n) {
    if (s.total[n] == 0) break;
    if (s.correct[n] == 0) {
      smooth *= 2.0;
      prec[n] = 100.0 / (smooth * static_cast<double>(s.total[n]));
    } else {
      prec[n] = 100.0 * static_cast<double>(s.correct[n]) / static_cast<double>(s.total[n]);
    }
  }
  double log_sum = 0.0;
  for (double p : prec) log_sum += p == 0.0 ? -9999999999.0 : std::log(p);
  return bp * std::exp(log_sum / 4.0);
}

double bleu_corpus(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  BleuStats total;
  for (const auto& p : pairs) total += bleu_sentence_stats(p.hypothesis, p.reference);
  return bleu_from_stats(total);
}

// ---- chrF --------------------------------------------------------------------

void ChrfConfig::validate() const {
  if (char_order < 1 || word_order < 0 || !(beta > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "chrF needs char_order >= 1, word_order >= 0, beta > 0");
  }
}

namespace {

bool is_chrf_punct(char32_t c) {
  static constexpr std::u32string_view kPuncts = U"!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  return kPuncts.find(c) != std::u32string_view::npos;
}

std::vector<std::u32string> chrf_words(std::string_view text) {
  std::vector<std::u32string> out;
  for (const auto& w8 : utf8::split_whitespace(text)) {
    const std::u32string w = utf8::decode(w8);
    if (w.size() == 1) {
      out.push_back(w);
    } else if (is_chrf_punct(w.back())) {
      out.push_back(w.substr(0, w.size() - 1));
      out.push_back(w.substr(w.size() - 1));
    } else if (is_chrf_punct(w.front())) {
      out.push_back(w.substr(0, 1));
      out.push_back(w.substr(1));
    } else {
      out.push_back(w);
    }
  }
  return out;
}

using StrCounts = std::unordered_map<std::u32string, std::int64_t>;

StrCounts char_ngrams(const std::u32string& s, std::size_t n) {
  StrCounts out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[s.substr(i, n)];
  return out;
}

StrCounts joined_word_ngrams(const std::vector<std::u32string>& words, std::size_t n) {
  StrCounts out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::u32string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key += U' ';
      key += words[i + k];
    }
    ++out[key];
  }
  return out;
}

void append_match(std::vector<std::int64_t>& stats, const StrCounts& hyp, const StrCounts& ref) {
  std::int64_t hyp_count = 0, match = 0, ref_count = 0;
  for (const auto& [ng, c] : hyp) {
    hyp_count += c;
    auto it = ref.find(ng);
    if (it != ref.end()) match += std::min(c, it->second);
  }
  for (const auto& kv : ref) ref_count += kv.second;
  stats.push_back(ref.empty() ? 0 : hyp_count);
  stats.push_back(ref_count);
  stats.push_back(match);
}

std::u32string strip_all_space(std::string_view text) {
  std::u32string out;
  for (char32_t c : utf8::decode(text)) {
    if (!utf8::is_space(c)) out += c;
  }
  return out;
}

}  // namespace

std::vector<std::int64_t> chrf_sentence_stats(std::string_view hypothesis, std::string_view reference,
                                              const ChrfConfig& cfg) {
  cfg.validate();
  std::vector<std::int64_t> stats;
  const auto h = strip_all_space(hypothesis);
  const auto r = strip_all_space(reference);
  for (int n = 1; n <= cfg.char_order; ++n) {
    append_match(stats, char_ngrams(h, static_cast<std::size_t>(n)), char_ngrams(r, static_cast<std::size_t>(n)));
  }
  if (cfg.word_order > 0) {
    const auto hw = chrf_words(hypothesis);
    const auto rw = chrf_words(reference);
    for (int n = 1; n <= cfg.word_order; ++n) {
      append_match(stats, joined_word_ngrams(hw, static_cast<std::size_t>(n)),
                   joined_word_ngrams(rw, static_cast<std::size_t>(n)));
    }
  }
  return stats;
}

double chrf_from_stats(const std::vector<std::int64_t>& stats, const ChrfConfig& cfg) {
  const std::size_t orders = static_cast<std::size_t>(cfg.char_order + cfg.word_order);
  if (stats.size() != 3 * orders) throw Error(ErrorCode::ShapeMismatch, "chrF statistics have the wrong length");
  const double factor = cfg.beta * cfg.beta;
  double avg_prec = 0.0, avg_rec = 0.0;
  int effective = 0;
  for (std::size_t i = 0; i < orders; ++i) {
    const auto n_hyp = stats[3 * i], n_ref = stats[3 * i + 1], n_match = stats[3 * i + 2];
    if (n_hyp > 0 && n_ref > 0) {
      avg_prec += static_cast<double>(n_match) / static_cast<double>(n_hyp);
      avg_rec += static_cast<double>(n_match) / static_cast<double>(n_ref);
      ++effective;
    }
  }
  if (effective == 0) return 0.0;
  avg_prec /= effective;
  avg_rec /= effective;
  if (avg_prec + avg_rec == 0.0) return 0.0;
  return 100.0 * (1.0 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec);
}

double chrf_corpus(const std::vector<EvalPair>& pairs, const ChrfConfig& cfg) {
  require_nonempty(pairs);
  cfg.validate();
  std::vector<std::int64_t> total(3 * static_cast<std::size_t>(cfg.char_order + cfg.word_order), 0);
  for (const auto& p : pairs) {
    const auto s = chrf_sentence_stats(p.hypothesis, p.reference, cfg);
    for (std::size_t i = 0; i < s.size(); ++i) total[i] += s[i];
  }
  return chrf_from_stats(total, cfg);
}

// ---- TER ---------------------------------------------------------------------

namespace {

constexpr int kMaxShiftSize = 10;
constexpr int kMaxShiftDist = 50;
constexpr int kBeamWidth = 25;
constexpr int kMaxShiftCandidates = 1000;
constexpr std::int64_t kInf = 10000000000000000LL;

enum : char { kOpIns = 'i', kOpDel = 'd', kOpNop = ' ', kOpSub = 's', kOpUndef = 'x' };

struct EditResult {
  std::int64_t distance;
  std::string trace;
};

// Levenshtein distance restricted to a band around the length-scaled
// diagonal; the last row is always computed in full.
EditResult beam_edit_distance(const std::vector<int>& h, const std::vector<int>& r) {
  const std::size_t nh = h.size(), nr = r.size();
  std::vector<std::vector<std::pair<std::int64_t, char>>> dist(
      nh + 1, std::vector<std::pair<std::int64_t, char>>(nr + 1, {kInf, kOpUndef}));
  for (std::size_t j = 0; j <= nr; ++j) dist[0][j] = {static_cast<std::int64_t>(j), kOpIns};

  const double ratio = nh > 0 ? static_cast<double>(nr) / static_cast<double>(nh) : 1.0;
  const std::int64_t beam =
      kBeamWidth < ratio / 2 ? static_cast<std::int64_t>(std::ceil(ratio / 2 + kBeamWidth)) : kBeamWidth;
  for (std::size_t i = 1; i <= nh; ++i) {
    const auto diag = static_cast<std::int64_t>(std::floor(static_cast<double>(i) * ratio));
    const std::int64_t min_j = std::max<std::int64_t>(0, diag - beam);
    std::int64_t max_j = std::min<std::int64_t>(static_cast<std::int64_t>(nr) + 1, diag + beam);
    if (i == nh) max_j = static_cast<std::int64_t>(nr) + 1;
    for (std::int64_t jj = min_j; jj < max_j; ++jj) {
      const auto j = static_cast<std::size_t>(jj);
      if (j == 0) {
        dist[i][0] = {dist[i - 1][0].first + 1, kOpDel};
        continue;
      }
      const bool same = h[i - 1] == r[j - 1];
      const std::pair<std::int64_t, char> ops[3] = {
          {dist[i - 1][j - 1].first + (same ? 0 : 1), same ? kOpNop : kOpSub},
          {dist[i - 1][j].first + 1, kOpDel},
          {dist[i][j - 1].first + 1, kOpIns},
      };
      for (const auto& op : ops) {
        if (dist[i][j].first > op.first) dist[i][j] = op;
      }
    }
  }
  std::string trace;
  std::size_t i = nh, j = nr;
  while (i > 0 || j > 0) {
    const char op = dist[i][j].second;
    trace += op;
    if (op == kOpSub || op == kOpNop) {
      --i;
      --j;
    } else if (op == kOpIns) {
      --j;
    } else if (op == kOpDel) {
      --i;
    } else {
      throw Error(ErrorCode::ShapeMismatch, "edit distance trace left the beam");
    }
  }
  std::reverse(trace.begin(), trace.end());
  return {dist[nh][nr].first, trace};
}

struct Alignment {
  std::vector<int> align;  // ref position -> hyp position (may be -1)
  std::vector<int> ref_err;
  std::vector<int> hyp_err;
};

// Trace as produced by beam_edit_distance with insertions and deletions
// swapped, i.e. read from the reference side.
Alignment trace_to_alignment(const std::string& inv_trace) {
  Alignment a;
  int pos_hyp = -1, pos_ref = -1;
  for (char op : inv_trace) {
    if (op == kOpIns) {
      op = kOpDel;
    } else if (op == kOpDel) {
      op = kOpIns;
    }
    switch (op) {
      case kOpNop:
      case kOpSub:
        ++pos_hyp;
        ++pos_ref;
        a.align.push_back(pos_hyp);
        a.hyp_err.push_back(op == kOpSub);
        a.ref_err.push_back(op == kOpSub);
        break;
      case kOpIns:
        ++pos_hyp;
        a.hyp_err.push_back(1);
        break;
      case kOpDel:
        ++pos_ref;
        a.align.push_back(pos_hyp);
        a.ref_err.push_back(1);
        break;
      default:
        break;
    }
  }
  return a;
}

std::vector<int> perform_shift(const std::vector<int>& w, int start, int length, int target) {
  auto seg = [&](int from, int to) {
    from = std::clamp(from, 0, static_cast<int>(w.size()));
    to = std::clamp(to, from, static_cast<int>(w.size()));
    return std::vector<int>(w.begin() + from, w.begin() + to);
  };
  std::vector<int> out;
  auto add = [&](const std::vector<int>& v) { out.insert(out.end(), v.begin(), v.end()); };
  const int n = static_cast<int>(w.size());
  if (target < start) {
    add(seg(0, target));
    add(seg(start, start + length));
    add(seg(target, start));
    add(seg(start + length, n));
  } else if (target > start + length) {
    add(seg(0, start));
    add(seg(start + length, target));
    add(seg(start, start + length));
    add(seg(target, n));
  } else {
    add(seg(0, start));
    add(seg(start + length, length + target));
    add(seg(start, start + length));
    add(seg(length + target, n));
  }
  return out;
}

int range_sum(const std::vector<int>& v, int from, int len) {
  int s = 0;
  for (int k = from; k < from + len && k < static_cast<int>(v.size()); ++k) s += v[static_cast<std::size_t>(k)];
  return s;
}

struct ShiftResult {
  std::int64_t delta;
  std::vector<int> words;
};

ShiftResult best_shift(const std::vector<int>& h, const std::vector<int>& r, int& checked) {
  const EditResult base = beam_edit_distance(h, r);
  const Alignment al = trace_to_alignment(base.trace);
  const int nh = static_cast<int>(h.size()), nr = static_cast<int>(r.size());

  bool have = false;
  std::tuple<std::int64_t, int, int, int, std::vector<int>> best;
  for (int sh = 0; sh < nh; ++sh) {
    for (int sr = 0; sr < nr; ++sr) {
      if (std::abs(sr - sh) > kMaxShiftDist) continue;
      for (int length = 1; length <= kMaxShiftSize && sh + length <= nh && sr + length <= nr; ++length) {
        if (h[static_cast<std::size_t>(sh + length - 1)] != r[static_cast<std::size_t>(sr + length - 1)]) break;
        // Candidate phrase h[sh, sh+length) == r[sr, sr+length).
        if (range_sum(al.hyp_err, sh, length) == 0) continue;
        if (range_sum(al.ref_err, sr, length) == 0) continue;
        const int a = al.align[static_cast<std::size_t>(sr)];
        if (sh <= a && a < sh + length) continue;
        int prev = -1;
        for (int offset = -1; offset < length; ++offset) {
          int idx;
          if (sr + offset == -1) {
            idx = 0;
          } else if (sr + offset < nr) {
            idx = al.align[static_cast<std::size_t>(sr + offset)] + 1;
          } else {
            break;
          }
          if (idx == prev) continue;
          prev = idx;
          std::vector<int> shifted = perform_shift(h, sh, length, idx);
          const std::int64_t gain = base.distance - beam_edit_distance(shifted, r).distance;
          auto cand = std::make_tuple(gain, length, -sh, -idx, std::move(shifted));
          ++checked;
          if (!have || cand > best) {
            best = std::move(cand);
            have = true;
          }
        }
        if (checked >= kMaxShiftCandidates) goto done;
      }
    }
  }
done:
  if (!have) return {0, h};
  return {std::get<0>(best), std::move(std::get<4>(best))};
}

}  // namespace

std::int64_t ter_edits(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  if (ref.empty()) return static_cast<std::int64_t>(hyp.size());
  // Ids follow string order so id comparisons break ties like string lists.
  std::vector<std::string> vocab(hyp.begin(), hyp.end());
  vocab.insert(vocab.end(), ref.begin(), ref.end());
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  auto ids = [&](const std::vector<std::string>& words) {
    std::vector<int> out;
    for (const auto& w : words) {
      out.push_back(static_cast<int>(std::lower_bound(vocab.begin(), vocab.end(), w) - vocab.begin()));
    }
    return out;
  };
  std::vector<int> h = ids(hyp);
  const std::vector<int> r = ids(ref);

  std::int64_t shifts = 0;
  int checked = 0;
  while (true) {
    ShiftResult s = best_shift(h, r, checked);
    if (checked >= kMaxShiftCandidates) break;
    if (s.delta <= 0) break;
    ++shifts;
    h = std::move(s.words);
  }
  return shifts + beam_edit_distance(h, r).distance;
}

TerStats ter_sentence_stats(std::string_view hypothesis, std::string_view reference) {
  auto words = [](std::string_view text) {
    if (text.empty()) return std::vector<std::string>{};
    return utf8::split_whitespace(utf8::lowercase(text));
  };
  const auto h = words(hypothesis);
  const auto r = words(reference);
  return {ter_edits(h, r), static_cast<std::int64_t>(r.size())};
}

double ter_corpus(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  std::int64_t edits = 0, ref_len = 0;
  for (const auto& p : pairs) {
    const auto s = ter_sentence_stats(p.hypothesis, p.reference);
    edits += s.edits;
    ref_len += s.ref_len;
  }
  const double rate = ref_len > 0 ? static_cast<double>(edits) / static_cast<double>(ref_len) : 1.0;
  return 100.0 * rate;
}

// ---- RIBES ---------------------------------------------------------------------

namespace {

using Words = std::vector<std::string>;

int count_occurrences(const Words& seq, const Words& ngram) {
  int count = 0;
  if (ngram.empty() || ngram.size() > seq.size()) return 0;
  for (std::size_t i = 0; i + ngram.size() <= seq.size(); ++i) {
    if (std::equal(ngram.begin(), ngram.end(), seq.begin() + static_cast<std::ptrdiff_t>(i))) ++count;
  }
  return count;
}

int first_position(const Words& seq, const Words& ngram) {
  for (std::size_t i = 0; i + ngram.size() <= seq.size(); ++i) {
    if (std::equal(ngram.begin(), ngram.end(), seq.begin() + static_cast<std::ptrdiff_t>(i))) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

}  // namespace

std::vector<int> ribes_word_alignment(const Words& ref, const Words& hyp) {
  std::vector<int> worder;
  const int hyp_len = static_cast<int>(hyp.size());
  const int ref_len = static_cast<int>(ref.size());
  for (int i = 0; i < hyp_len; ++i) {
    const auto& w = hyp[static_cast<std::size_t>(i)];
    const auto in_ref = std::count(ref.begin(), ref.end(), w);
    if (in_ref == 0) continue;
    if (in_ref == 1 && std::count(hyp.begin(), hyp.end(), w) == 1) {
      worder.push_back(static_cast<int>(std::find(ref.begin(), ref.end(), w) - ref.begin()));
      continue;
    }
    // Widen a context window until the n-gram around word i is unique in
    // both sentences; right context is tried before left.
    const int max_window = std::min(std::max(i, hyp_len - i + 1), ref_len);
    for (int window = 1; window < max_window; ++window) {
      if (i + window < hyp_len) {
        const Words ng(hyp.begin() + i, hyp.begin() + i + window + 1);
        if (count_occurrences(ref, ng) == 1 && count_occurrences(hyp, ng) == 1) {
          worder.push_back(first_position(ref, ng));
          break;
        }
      }
      if (window <= i) {
        const Words ng(hyp.begin() + (i - window), hyp.begin() + i + 1);
        if (count_occurrences(ref, ng) == 1 && count_occurrences(hyp, ng) == 1) {
          worder.push_back(first_position(ref, ng) + static_cast<int>(ng.size()) - 1);
          break;
        }
      }
    }
  }
  return worder;
}

double normalized_kendall_tau(const std::vector<int>& worder) {
  const std::size_t n = worder.size();
  if (n < 2) return 0.0;
  std::int64_t ascending = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) ascending += worder[i] < worder[j] ? 1 : 0;
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(ascending) / pairs;
}

double ribes_sentence(std::string_view hypothesis, std::string_view reference, double alpha, double beta) {
  const Words hyp = utf8::split_whitespace(hypothesis);
  const Words ref = utf8::split_whitespace(reference);
  if (hyp.empty() || ref.empty()) return 0.0;
  const auto worder = ribes_word_alignment(ref, hyp);
  double nkt;
  if (worder.size() >= 2) {
    nkt = normalized_kendall_tau(worder);
  } else {
    // One aligned word is perfectly ordered only for one-word sentences.
    nkt = worder.size() == 1 && hyp.size() == 1 && ref.size() == 1 ? 1.0 : 0.0;
  }
  const double p1 = static_cast<double>(worder.size()) / static_cast<double>(hyp.size());
  const double bp =
      std::min(1.0, std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size())));
  return nkt * std::pow(p1, alpha) * std::pow(bp, beta);
}

double ribes_corpus(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  double sum = 0.0;
  for (const auto& p : pairs) sum += ribes_sentence(p.hypothesis, p.reference);
  return sum / static_cast<double>(pairs.size());
}

MetricScores score_all(const std::vector<EvalPair>& pairs) {
  MetricScores s;
  s.bleu = bleu_corpus(pairs);
  s.chrf2 = chrf_corpus(pairs, ChrfConfig::chrf2());
  s.chrf_pp = chrf_corpus(pairs, ChrfConfig::chrf_pp());
  s.ter = ter_corpus(pairs);
  s.ribes = ribes_corpus(pairs);
  return s;
}

}  // namespace lrmt
