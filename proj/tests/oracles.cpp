#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <unicode/uchar.h>

namespace oracle {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::vector<std::string> code_points(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    const std::size_t n = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& w : v) s += (s.empty() ? "" : " ") + w;
  return s;
}

std::string rstrip(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

std::string lower(const std::string& s) {
  std::string out;
  for (const auto& cp : code_points(s)) {
    // decode, lowercase, re-encode
    const auto* b = reinterpret_cast<const unsigned char*>(cp.data());
    char32_t c = cp.size() == 1 ? b[0]
                 : cp.size() == 2 ? ((b[0] & 0x1F) << 6) | (b[1] & 0x3F)
                 : cp.size() == 3 ? ((b[0] & 0x0F) << 12) | ((b[1] & 0x3F) << 6) | (b[2] & 0x3F)
                                  : ((b[0] & 0x07) << 18) | ((b[1] & 0x3F) << 12) | ((b[2] & 0x3F) << 6) | (b[3] & 0x3F);
    c = static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else if (c < 0x800) {
      out += static_cast<char>(0xC0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
      out += static_cast<char>(0xE0 | (c >> 12));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (c >> 18));
      out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    }
  }
  return out;
}

using Ngrams = std::map<std::vector<std::string>, long>;

Ngrams count_ngrams(const std::vector<std::string>& units, std::size_t n) {
  Ngrams out;
  for (std::size_t i = 0; i + n <= units.size(); ++i) {
    out[std::vector<std::string>(units.begin() + static_cast<long>(i), units.begin() + static_cast<long>(i + n))]++;
  }
  return out;
}

long total(const Ngrams& g) {
  long t = 0;
  for (const auto& [k, c] : g) t += c;
  return t;
}

long clipped_matches(const Ngrams& hyp, const Ngrams& ref) {
  long m = 0;
  for (const auto& [k, c] : hyp) {
    auto it = ref.find(k);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

}  // namespace

std::string tok13a(const std::string& input) {
  std::string line = replace_all(input, "<skipped>", "");
  line = replace_all(line, "-\n", "");
  line = replace_all(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    line = replace_all(line, "&quot;", "\"");
    line = replace_all(line, "&amp;", "&");
    line = replace_all(line, "&lt;", "<");
    line = replace_all(line, "&gt;", ">");
  }
  line = " " + line + " ";
  static const std::regex punct(R"(([\{-\~\[-\` -\&\(-\+\:-\@\/]))");
  static const std::regex period_before(R"(([^0-9])([\.,]))");
  static const std::regex period_after(R"(([\.,])([^0-9]))");
  static const std::regex dash(R"(([0-9])(-))");
  line = std::regex_replace(line, punct, " $1 ");
  line = std::regex_replace(line, period_before, "$1 $2 ");
  line = std::regex_replace(line, period_after, " $1 $2");
  line = std::regex_replace(line, dash, "$1 $2 ");
  return join(split_ws(line));
}

double bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  long correct[4] = {0, 0, 0, 0}, tot[4] = {0, 0, 0, 0};
  long sys_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto h = split_ws(tok13a(rstrip(hyps[s])));
    const auto r = split_ws(tok13a(rstrip(refs[s])));
    sys_len += static_cast<long>(h.size());
    ref_len += static_cast<long>(r.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const Ngrams hg = count_ngrams(h, n), rg = count_ngrams(r, n);
      correct[n - 1] += clipped_matches(hg, rg);
      tot[n - 1] += total(hg);
    }
  }
  if (correct[0] + correct[1] + correct[2] + correct[3] == 0) return 0.0;
  double logsum = 0.0;
  double smooth = 1.0;
  for (int n = 0; n < 4; ++n) {
    double p;
    if (tot[n] == 0) {
      // remaining orders keep precision 0
      for (int k = n; k < 4; ++k) logsum += -9999999999.0;
      break;
    }
    if (correct[n] == 0) {
      smooth *= 2.0;
      p = 100.0 / (smooth * static_cast<double>(tot[n]));
    } else {
      p = 100.0 * static_cast<double>(correct[n]) / static_cast<double>(tot[n]);
    }
    logsum += std::log(p);
  }
  double bp = 1.0;
  if (sys_len < ref_len) bp = sys_len > 0 ? std::exp(1.0 - static_cast<double>(ref_len) / sys_len) : 0.0;
  return bp * std::exp(logsum / 4.0);
}

namespace {

const std::string kPuncts = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

std::vector<std::string> chrf_words(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& w : split_ws(s)) {
    const auto cps = code_points(w);
    auto is_p = [](const std::string& c) { return c.size() == 1 && kPuncts.find(c[0]) != std::string::npos; };
    if (cps.size() == 1) {
      out.push_back(w);
    } else if (is_p(cps.back())) {
      out.push_back(w.substr(0, w.size() - 1));
      out.push_back(cps.back());
    } else if (is_p(cps.front())) {
      out.push_back(cps.front());
      out.push_back(w.substr(1));
    } else {
      out.push_back(w);
    }
  }
  return out;
}

}  // namespace

double chrf(const std::vector<std::string>& hyps, const std::vector<std::string>& refs, int char_order,
            int word_order, double beta) {
  const int orders = char_order + word_order;
  std::vector<double> st(static_cast<std::size_t>(3 * orders), 0.0);
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    std::string hs, rs;
    for (const auto& w : split_ws(hyps[s])) hs += w;
    for (const auto& w : split_ws(refs[s])) rs += w;
    const auto hc = code_points(hs), rc = code_points(rs);
    const auto hw = chrf_words(hyps[s]), rw = chrf_words(refs[s]);
    for (int o = 0; o < orders; ++o) {
      const bool chars = o < char_order;
      const std::size_t n = static_cast<std::size_t>(chars ? o + 1 : o - char_order + 1);
      const Ngrams hg = count_ngrams(chars ? hc : hw, n);
      const Ngrams rg = count_ngrams(chars ? rc : rw, n);
      const long ref_count = total(rg);
      st[3 * static_cast<std::size_t>(o)] += ref_count > 0 ? static_cast<double>(total(hg)) : 0.0;
      st[3 * static_cast<std::size_t>(o) + 1] += static_cast<double>(ref_count);
      st[3 * static_cast<std::size_t>(o) + 2] += static_cast<double>(clipped_matches(hg, rg));
    }
  }
  const double eps = 1e-16, factor = beta * beta;
  double avg_p = 0.0, avg_r = 0.0;
  int eff = 0;
  for (int o = 0; o < orders; ++o) {
    const double nh = st[3 * o], nr = st[3 * o + 1], nm = st[3 * o + 2];
    avg_p += nh > 0 ? nm / nh : eps;
    avg_r += nr > 0 ? nm / nr : eps;
    if (nh > 0 && nr > 0) ++eff;
  }
  if (eff == 0) return 0.0;
  avg_p /= eff;
  avg_r /= eff;
  if (avg_p + avg_r == 0.0) return 0.0;
  return 100.0 * (1 + factor) * avg_p * avg_r / (factor * avg_p + avg_r);
}

namespace {

enum Op { NOP, SUB, INS, DEL };

// Levenshtein over hyp (rows) x ref (cols); ties prefer diagonal, then
// deletion of a hyp word, then insertion of a ref word.
std::pair<int, std::vector<Op>> edit_distance(const std::vector<std::string>& h, const std::vector<std::string>& r) {
  const std::size_t n = h.size(), m = r.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  std::vector<std::vector<Op>> op(n + 1, std::vector<Op>(m + 1, NOP));
  for (std::size_t j = 0; j <= m; ++j) {
    d[0][j] = static_cast<int>(j);
    op[0][j] = INS;
  }
  for (std::size_t i = 1; i <= n; ++i) {
    d[i][0] = static_cast<int>(i);
    op[i][0] = DEL;
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = h[i - 1] == r[j - 1];
      int best = d[i - 1][j - 1] + (same ? 0 : 1);
      Op bop = same ? NOP : SUB;
      if (d[i - 1][j] + 1 < best) {
        best = d[i - 1][j] + 1;
        bop = DEL;
      }
      if (d[i][j - 1] + 1 < best) {
        best = d[i][j - 1] + 1;
        bop = INS;
      }
      d[i][j] = best;
      op[i][j] = bop;
    }
  }
  std::vector<Op> trace;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const Op o = op[i][j];
    trace.push_back(o);
    if (o == NOP || o == SUB) {
      --i;
      --j;
    } else if (o == DEL) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(trace.begin(), trace.end());
  return {d[n][m], trace};
}

std::vector<std::string> perform_shift(const std::vector<std::string>& w, int start, int len, int target) {
  auto sl = [&](int a, int b) {
    a = std::clamp(a, 0, static_cast<int>(w.size()));
    b = std::clamp(b, 0, static_cast<int>(w.size()));
    return b > a ? std::vector<std::string>(w.begin() + a, w.begin() + b) : std::vector<std::string>{};
  };
  std::vector<std::vector<std::string>> parts;
  if (target < start) {
    parts = {sl(0, target), sl(start, start + len), sl(target, start), sl(start + len, static_cast<int>(w.size()))};
  } else if (target > start + len) {
    parts = {sl(0, start), sl(start + len, target), sl(start, start + len), sl(target, static_cast<int>(w.size()))};
  } else {
    parts = {sl(0, start), sl(start + len, len + target), sl(start, start + len),
             sl(len + target, static_cast<int>(w.size()))};
  }
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

struct Candidate {
  int gain, len, neg_start, neg_idx;
  std::vector<std::string> words;
};

bool better(const Candidate& a, const Candidate& b) {
  return std::tie(a.gain, a.len, a.neg_start, a.neg_idx, a.words) >
         std::tie(b.gain, b.len, b.neg_start, b.neg_idx, b.words);
}

}  // namespace

int ter_edits(const std::vector<std::string>& hyp0, const std::vector<std::string>& ref) {
  if (ref.empty()) return static_cast<int>(hyp0.size());
  std::vector<std::string> hyp = hyp0;
  int shifts = 0, checked = 0;
  for (;;) {
    const auto [pre, inv] = edit_distance(hyp, ref);
    // flip: pretend ref is rewritten into hyp
    std::map<int, int> align;
    std::vector<int> herr, rerr;
    int ph = -1, pr = -1;
    for (Op o : inv) {
      const Op f = o == INS ? DEL : o == DEL ? INS : o;
      if (f == NOP || f == SUB) {
        ++ph;
        ++pr;
        align[pr] = ph;
        herr.push_back(f == SUB);
        rerr.push_back(f == SUB);
      } else if (f == INS) {
        ++ph;
        herr.push_back(1);
      } else {
        ++pr;
        align[pr] = ph;
        rerr.push_back(1);
      }
    }
    bool have = false;
    Candidate best{};
    const int nh = static_cast<int>(hyp.size()), nr = static_cast<int>(ref.size());
    bool capped = false;
    for (int sh = 0; sh < nh && !capped; ++sh) {
      for (int sr = 0; sr < nr && !capped; ++sr) {
        if (std::abs(sr - sh) > 50) continue;
        for (int len = 1; len <= 10 && sh + len <= nh && sr + len <= nr; ++len) {
          if (hyp[sh + len - 1] != ref[sr + len - 1]) break;
          int hs = 0, rs = 0;
          for (int k = sh; k < sh + len; ++k) hs += herr[k];
          for (int k = sr; k < sr + len; ++k) rs += rerr[k];
          if (hs == 0 || rs == 0) continue;
          if (align.count(sr) && sh <= align[sr] && align[sr] < sh + len) continue;
          int prev = -1;
          for (int off = -1; off < len; ++off) {
            int idx;
            if (sr + off == -1) {
              idx = 0;
            } else if (align.count(sr + off)) {
              idx = align[sr + off] + 1;
            } else {
              break;
            }
            if (idx == prev) continue;
            prev = idx;
            auto shifted = perform_shift(hyp, sh, len, idx);
            Candidate c{pre - edit_distance(shifted, ref).first, len, -sh, -idx, std::move(shifted)};
            ++checked;
            if (!have || better(c, best)) {
              best = std::move(c);
              have = true;
            }
          }
          if (checked >= 1000) {
            capped = true;
            break;
          }
        }
      }
    }
    if (checked >= 1000) break;
    if (!have || best.gain <= 0) break;
    ++shifts;
    hyp = best.words;
  }
  return shifts + edit_distance(hyp, ref).first;
}

double ter(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  long edits = 0, len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = split_ws(lower(hyps[i])), r = split_ws(lower(refs[i]));
    edits += ter_edits(h, r);
    len += static_cast<long>(r.size());
  }
  return len > 0 ? 100.0 * static_cast<double>(edits) / static_cast<double>(len) : 100.0;
}

namespace {

std::vector<std::vector<std::string>> all_ngrams(const std::vector<std::string>& w, std::size_t max_n) {
  std::vector<std::vector<std::string>> out;
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (std::size_t i = 0; i + n <= w.size(); ++i) {
      out.emplace_back(w.begin() + static_cast<long>(i), w.begin() + static_cast<long>(i + n));
    }
  }
  return out;
}

int position_of(const std::vector<std::string>& ng, const std::vector<std::string>& ref) {
  for (std::size_t i = 0; i + ng.size() <= ref.size(); ++i) {
    if (std::equal(ng.begin(), ng.end(), ref.begin() + static_cast<long>(i))) return static_cast<int>(i);
  }
  return -1;
}

double ribes_one(const std::vector<std::string>& h, const std::vector<std::string>& r) {
  if (h.empty() || r.empty()) return 0.0;
  const auto rg = all_ngrams(r, r.size()), hg = all_ngrams(h, r.size());
  auto cnt = [](const std::vector<std::vector<std::string>>& v, const std::vector<std::string>& x) {
    return std::count(v.begin(), v.end(), x);
  };
  std::vector<int> worder;
  const int n = static_cast<int>(h.size());
  for (int i = 0; i < n; ++i) {
    const auto& w = h[static_cast<std::size_t>(i)];
    const long in_r = std::count(r.begin(), r.end(), w), in_h = std::count(h.begin(), h.end(), w);
    if (in_r == 0) continue;
    if (in_r == 1 && in_h == 1) {
      worder.push_back(position_of({w}, r));
      continue;
    }
    for (int win = 1; win < std::max(i, n - i + 1); ++win) {
      if (i + win < n) {
        std::vector<std::string> ng(h.begin() + i, h.begin() + i + win + 1);
        if (cnt(rg, ng) == 1 && cnt(hg, ng) == 1) {
          worder.push_back(position_of(ng, r));
          break;
        }
      }
      if (win <= i) {
        std::vector<std::string> ng(h.begin() + i - win, h.begin() + i + 1);
        if (cnt(rg, ng) == 1 && cnt(hg, ng) == 1) {
          worder.push_back(position_of(ng, r) + static_cast<int>(ng.size()) - 1);
          break;
        }
      }
    }
  }
  const std::size_t k = worder.size();
  double nkt;
  if (k >= 2) {
    long asc = 0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) asc += worder[a] < worder[b];
    }
    nkt = static_cast<double>(asc) / (static_cast<double>(k) * (k - 1) / 2.0);
  } else {
    nkt = (k == 1 && h.size() == 1 && r.size() == 1) ? 1.0 : 0.0;
  }
  const double p1 = static_cast<double>(k) / static_cast<double>(h.size());
  const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(h.size())));
  return nkt * std::pow(p1, 0.25) * std::pow(bp, 0.10);
}

}  // namespace

double ribes(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  double s = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) s += ribes_one(split_ws(hyps[i]), split_ws(refs[i]));
  return s / static_cast<double>(hyps.size());
}

std::vector<GoldenRow> load_golden(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<GoldenRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 8) throw std::runtime_error("bad golden line: " + line);
    rows.push_back({f[0], f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6]),
                    std::stod(f[7])});
  }
  return rows;
}

double ScalarAdam::step(double w, double g) {
  ++t;
  m = beta1 * m + (1 - beta1) * g;
  v = beta2 * v + (1 - beta2) * g * g;
  const double mhat = m / (1 - std::pow(beta1, t));
  const double vhat = v / (1 - std::pow(beta2, t));
  return w - lr * mhat / (std::sqrt(vhat) + eps);
}

double lr_linear_warmup(long step, double init, double peak, long warmup) {
  if (step >= warmup) return peak * std::sqrt(static_cast<double>(warmup) / static_cast<double>(step));
  return init + (peak - init) * static_cast<double>(step) / static_cast<double>(warmup);
}

}  // namespace oracle
