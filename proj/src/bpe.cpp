#include "lrmt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "lrmt/error.hpp"
#include "lrmt/hash.hpp"
#include "lrmt/utf8.hpp"

namespace lrmt {

namespace {

const std::vector<std::string> kBaseSpecials = {"<pad>", "<s>", "</s>", "<unk>"};

std::uint64_t pair_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

std::string byte_token(int b) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "<0x%02X>", b);
  return buf;
}

// Symbol sequences for each marker-delimited segment of `text`.
std::vector<std::vector<std::string>> pretokenize(std::string_view text) {
  std::vector<std::vector<std::string>> segments;
  if (text.empty()) return segments;
  const auto cps = utf8::decode(utf8::nfc(text));
  std::vector<std::string> cur{std::string(BpeModel::kMarker)};
  for (char32_t cp : cps) {
    if (cp == U' ') {
      segments.push_back(std::move(cur));
      cur = {std::string(BpeModel::kMarker)};
    } else {
      cur.push_back(utf8::encode(cp));
    }
  }
  segments.push_back(std::move(cur));
  return segments;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case ' ': out += "\\s"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case '\\': out += '\\'; break;
      case 's': out += ' '; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw Error(ErrorCode::FormatError, "bad escape in tokenizer file");
    }
  }
  return out;
}

// Merges every non-overlapping occurrence of (a, b), left to right.
template <typename F>
void merge_pair(std::vector<int>& syms, int a, int b, int merged, F&& on_merge) {
  std::vector<int> out;
  out.reserve(syms.size());
  for (std::size_t i = 0; i < syms.size(); ++i) {
    if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
      out.push_back(merged);
      on_merge();
      ++i;
    } else {
      out.push_back(syms[i]);
    }
  }
  syms = std::move(out);
}

}  // namespace

std::optional<int> BpeModel::special_id(std::string_view tok) const {
  auto it = special_ids_.find(std::string(tok));
  if (it == special_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> BpeModel::piece_id(std::string_view piece) const {
  auto it = piece_ids_.find(std::string(piece));
  if (it == piece_ids_.end()) return std::nullopt;
  return it->second;
}

int BpeModel::require_special(std::string_view tok) const {
  if (auto id = special_id(tok)) return *id;
  throw Error(ErrorCode::MissingLanguageTag, "tokenizer has no special token " + std::string(tok));
}

void BpeModel::rebuild_indices() {
  special_ids_.clear();
  piece_ids_.clear();
  merge_table_.clear();
  for (int i = 0; i < num_special_; ++i) special_ids_.emplace(tokens_[static_cast<std::size_t>(i)], i);
  const int first_piece = num_special_ + (byte_fallback_ ? 256 : 0);
  for (int i = first_piece; i < size(); ++i) {
    if (!piece_ids_.emplace(tokens_[static_cast<std::size_t>(i)], i).second) {
      throw Error(ErrorCode::FormatError, "duplicate piece '" + tokens_[static_cast<std::size_t>(i)] + "'");
    }
  }
  for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
    const auto& [l, r] = merges_[rank];
    const auto li = piece_id(l);
    const auto ri = piece_id(r);
    const auto out = piece_id(l + r);
    if (!li || !ri || !out) throw Error(ErrorCode::FormatError, "merge references unknown piece");
    merge_table_.emplace(pair_key(*li, *ri), std::pair{static_cast<int>(rank), *out});
  }
}

BpeModel train_bpe(const std::vector<std::string>& corpus_lines, int vocab_size,
                   const std::vector<std::string>& extra_special, bool byte_fallback) {
  BpeModel m;
  m.byte_fallback_ = byte_fallback;
  m.specials_ = kBaseSpecials;
  for (const auto& s : extra_special) {
    if (std::find(m.specials_.begin(), m.specials_.end(), s) == m.specials_.end()) m.specials_.push_back(s);
  }
  m.num_special_ = static_cast<int>(m.specials_.size());
  m.tokens_ = m.specials_;
  if (byte_fallback) {
    for (int b = 0; b < 256; ++b) m.tokens_.push_back(byte_token(b));
  }

  // Unique segments with counts; std::map keeps the visiting order fixed.
  std::map<std::vector<std::string>, std::int64_t> segment_counts;
  for (const auto& line : corpus_lines) {
    for (auto& seg : pretokenize(line)) ++segment_counts[std::move(seg)];
  }
  if (segment_counts.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot train a tokenizer on an empty corpus");

  std::set<std::string> alphabet;
  for (const auto& [seg, _] : segment_counts) alphabet.insert(seg.begin(), seg.end());
  const auto base = m.tokens_.size() + alphabet.size();
  if (vocab_size <= 0 || static_cast<std::size_t>(vocab_size) <= base) {
    throw Error(ErrorCode::VocabTooSmall, "vocab_size " + std::to_string(vocab_size) +
                                              " must exceed specials + bytes + alphabet = " + std::to_string(base));
  }
  for (const auto& c : alphabet) {
    m.piece_ids_.emplace(c, static_cast<int>(m.tokens_.size()));
    m.tokens_.push_back(c);
  }

  struct Word {
    std::vector<int> syms;
    std::int64_t freq;
  };
  std::vector<Word> words;
  words.reserve(segment_counts.size());
  for (const auto& [seg, count] : segment_counts) {
    Word w{{}, count};
    for (const auto& c : seg) w.syms.push_back(m.piece_ids_.at(c));
    words.push_back(std::move(w));
  }

  std::unordered_map<std::uint64_t, std::int64_t> counts;
  std::unordered_map<std::uint64_t, std::vector<int>> where;
  for (int wi = 0; wi < static_cast<int>(words.size()); ++wi) {
    const auto& w = words[static_cast<std::size_t>(wi)];
    for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
      const auto k = pair_key(w.syms[i], w.syms[i + 1]);
      counts[k] += w.freq;
      auto& v = where[k];
      if (v.empty() || v.back() != wi) v.push_back(wi);
    }
  }

  struct Entry {
    std::int64_t count;
    int left;
    int right;
  };
  const auto& toks = m.tokens_;
  auto lower_priority = [&toks](const Entry& x, const Entry& y) {
    if (x.count != y.count) return x.count < y.count;
    const auto& xl = toks[static_cast<std::size_t>(x.left)];
    const auto& yl = toks[static_cast<std::size_t>(y.left)];
    if (xl != yl) return xl > yl;
    return toks[static_cast<std::size_t>(x.right)] > toks[static_cast<std::size_t>(y.right)];
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> heap(lower_priority);
  for (const auto& [k, c] : counts) {
    heap.push({c, static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu)});
  }

  while (m.size() < vocab_size && !heap.empty()) {
    const Entry top = heap.top();
    heap.pop();
    const auto key = pair_key(top.left, top.right);
    auto cit = counts.find(key);
    if (cit == counts.end() || cit->second != top.count) continue;  // stale
    if (top.count < 2) break;

    const std::string merged = m.tokens_[static_cast<std::size_t>(top.left)] +
                               m.tokens_[static_cast<std::size_t>(top.right)];
    int out_id;
    if (auto it = m.piece_ids_.find(merged); it != m.piece_ids_.end()) {
      out_id = it->second;
    } else {
      out_id = m.size();
      m.tokens_.push_back(merged);
      m.piece_ids_.emplace(merged, out_id);
    }
    m.merges_.emplace_back(m.tokens_[static_cast<std::size_t>(top.left)],
                           m.tokens_[static_cast<std::size_t>(top.right)]);

    std::set<std::uint64_t> touched;
    const std::vector<int> affected = where[key];
    for (int wi : affected) {
      auto& w = words[static_cast<std::size_t>(wi)];
      bool has = false;
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        if (w.syms[i] == top.left && w.syms[i + 1] == top.right) {
          has = true;
          break;
        }
      }
      if (!has) continue;
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        const auto k = pair_key(w.syms[i], w.syms[i + 1]);
        counts[k] -= w.freq;
        touched.insert(k);
      }
      merge_pair(w.syms, top.left, top.right, out_id, [] {});
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        const auto k = pair_key(w.syms[i], w.syms[i + 1]);
        counts[k] += w.freq;
        touched.insert(k);
        auto& v = where[k];
        if (v.empty() || v.back() != wi) v.push_back(wi);
      }
    }
    for (auto k : touched) {
      const auto c = counts[k];
      if (c > 0) heap.push({c, static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu)});
    }
  }

  m.rebuild_indices();
  return m;
}

std::vector<int> BpeModel::encode_segment(const std::vector<std::string>& symbols) const {
  // Unknown characters are carried as negative indices into `unknown`.
  std::vector<std::string> unknown;
  std::vector<int> syms;
  syms.reserve(symbols.size());
  for (const auto& s : symbols) {
    if (auto id = piece_id(s)) {
      syms.push_back(*id);
    } else {
      unknown.push_back(s);
      syms.push_back(-static_cast<int>(unknown.size()));
    }
  }
  while (syms.size() > 1) {
    int best_rank = -1;
    int best_left = 0;
    int best_right = 0;
    int best_out = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      if (syms[i] < 0 || syms[i + 1] < 0) continue;
      auto it = merge_table_.find(pair_key(syms[i], syms[i + 1]));
      if (it == merge_table_.end()) continue;
      if (best_rank < 0 || it->second.first < best_rank) {
        best_rank = it->second.first;
        best_left = syms[i];
        best_right = syms[i + 1];
        best_out = it->second.second;
      }
    }
    if (best_rank < 0) break;
    merge_pair(syms, best_left, best_right, best_out, [] {});
  }
  std::vector<int> out;
  out.reserve(syms.size());
  for (int s : syms) {
    if (s >= 0) {
      out.push_back(s);
    } else if (byte_fallback_) {
      for (unsigned char b : unknown[static_cast<std::size_t>(-s - 1)]) out.push_back(num_special_ + b);
    } else {
      out.push_back(kUnk);
    }
  }
  return out;
}

std::vector<int> encode(const BpeModel& model, std::string_view text) {
  std::vector<int> out;
  for (const auto& seg : pretokenize(text)) {
    const auto ids = model.encode_segment(seg);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::string decode_tokens(const BpeModel& model, std::span<const int> ids) {
  std::string raw;
  for (int id : ids) {
    if (id < 0 || id >= model.size()) {
      throw Error(ErrorCode::IdOutOfRange, "token id " + std::to_string(id) + " outside vocabulary of " +
                                               std::to_string(model.size()));
    }
    if (model.is_special(id)) continue;
    if (model.is_byte(id)) {
      raw.push_back(static_cast<char>(id - model.num_special()));
    } else {
      raw += model.token(id);
    }
  }
  if (!utf8::is_valid(raw)) {
    // Model output can contain byte tokens that do not form valid UTF-8.
    std::string fixed;
    std::size_t i = 0;
    while (i < raw.size()) {
      std::size_t len = 1;
      const auto b = static_cast<unsigned char>(raw[i]);
      if (b >= 0xF0) len = 4;
      else if (b >= 0xE0) len = 3;
      else if (b >= 0xC0) len = 2;
      if (i + len <= raw.size() && utf8::is_valid(std::string_view(raw).substr(i, len))) {
        fixed.append(raw, i, len);
        i += len;
      } else {
        fixed += "\xEF\xBF\xBD";
        ++i;
      }
    }
    raw = std::move(fixed);
  }
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  const auto& marker = BpeModel::kMarker;
  while (i < raw.size()) {
    if (raw.compare(i, marker.size(), marker) == 0) {
      out += ' ';
      i += marker.size();
    } else {
      out += raw[i++];
    }
  }
  if (!out.empty() && out.front() == ' ') out.erase(0, 1);
  return out;
}

std::string BpeModel::serialize() const {
  std::ostringstream os;
  os << "lrmt-bpe " << kFormatVersion << "\n";
  os << "vocab_size " << size() << "\n";
  os << "byte_fallback " << (byte_fallback_ ? 1 : 0) << "\n";
  os << "marker " << kMarker << "\n";
  os << "normalization nfc\n";
  os << "specials " << num_special_ << "\n";
  for (const auto& s : specials_) os << escape(s) << "\n";
  os << "merges " << merges_.size() << "\n";
  for (const auto& [l, r] : merges_) os << escape(l) << " " << escape(r) << "\n";
  os << "vocab " << size() << "\n";
  for (const auto& t : tokens_) os << escape(t) << "\n";
  return os.str();
}

BpeModel BpeModel::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw Error(ErrorCode::FormatError, "truncated tokenizer file");
    return line;
  };
  auto field = [&](std::string_view name) -> std::string {
    const std::string l = next();
    const auto sp = l.find(' ');
    if (sp == std::string::npos || l.substr(0, sp) != name) {
      throw Error(ErrorCode::FormatError, "expected '" + std::string(name) + "' in tokenizer file, got '" + l + "'");
    }
    return l.substr(sp + 1);
  };
  BpeModel m;
  if (field("lrmt-bpe") != std::to_string(kFormatVersion)) throw Error(ErrorCode::FormatError, "unsupported tokenizer version");
  const int vocab_size = std::stoi(field("vocab_size"));
  m.byte_fallback_ = field("byte_fallback") == "1";
  if (field("marker") != kMarker) throw Error(ErrorCode::FormatError, "unexpected word marker");
  if (field("normalization") != "nfc") throw Error(ErrorCode::FormatError, "unexpected normalization");
  m.num_special_ = std::stoi(field("specials"));
  for (int i = 0; i < m.num_special_; ++i) m.specials_.push_back(unescape(next()));
  const int n_merges = std::stoi(field("merges"));
  for (int i = 0; i < n_merges; ++i) {
    const std::string l = next();
    const auto sp = l.find(' ');
    if (sp == std::string::npos) throw Error(ErrorCode::FormatError, "bad merge line");
    m.merges_.emplace_back(unescape(l.substr(0, sp)), unescape(l.substr(sp + 1)));
  }
  if (std::stoi(field("vocab")) != vocab_size) throw Error(ErrorCode::FormatError, "vocab size mismatch");
  for (int i = 0; i < vocab_size; ++i) m.tokens_.push_back(unescape(next()));
  for (int i = 0; i < m.num_special_; ++i) {
    if (m.tokens_[static_cast<std::size_t>(i)] != m.specials_[static_cast<std::size_t>(i)]) {
      throw Error(ErrorCode::FormatError, "special tokens must occupy the lowest ids");
    }
  }
  m.rebuild_indices();
  return m;
}

void BpeModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << serialize();
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string BpeModel::hash() const { return hash_hex(serialize()); }

}  // namespace lrmt
