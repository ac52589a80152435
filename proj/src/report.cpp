#include "lrmt/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "lrmt/error.hpp"
#include "lrmt/utf8.hpp"

namespace lrmt {

std::string_view regime_key(Regime r) {
  switch (r) {
    case Regime::bilingual: return "bilingual";
    case Regime::multilingual: return "multilingual";
    case Regime::multi_to_bi: return "multi_to_bi";
    case Regime::frozen_encoder: return "frozen_encoder";
    case Regime::frozen_embedding_encoder: return "frozen_embedding_encoder";
    case Regime::grouped: return "grouped";
  }
  return "?";
}

Regime parse_regime(std::string_view key) {
  for (Regime r : kAllRegimes) {
    if (regime_key(r) == key) return r;
  }
  throw Error(ErrorCode::ConfigError, "unknown regime '" + std::string(key) + "'");
}

std::string_view regime_label(Regime r) {
  switch (r) {
    case Regime::bilingual: return "Bilingual";
    case Regime::multilingual: return "Multilingual";
    case Regime::multi_to_bi: return "Multilingual Model FT on Bilingual Data";
    case Regime::frozen_encoder: return "FT with Frozen Encoder";
    case Regime::frozen_embedding_encoder: return "FT with Frozen Embedding & Encoder";
    case Regime::grouped: return "FT with Script Similarity";
  }
  return "?";
}

std::string_view regime_section(Regime r) {
  switch (r) {
    case Regime::bilingual: return "Bilingual Setup";
    case Regime::multilingual: return "Multilingual Setup";
    case Regime::multi_to_bi: return "Multilingual Model FT on Bilingual Data";
    case Regime::frozen_encoder:
    case Regime::frozen_embedding_encoder: return "Layer Freezing";
    case Regime::grouped: return "Language Grouping";
  }
  return "?";
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::bleu: return "BLEU";
    case Metric::chrf2: return "chrF2";
    case Metric::chrf_pp: return "chrF++";
    case Metric::ter: return "TER";
    case Metric::ribes: return "RIBES";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  const std::string n = utf8::lowercase(name);
  if (n == "bleu") return Metric::bleu;
  if (n == "chrf2" || n == "chrf") return Metric::chrf2;
  if (n == "chrf++" || n == "chrfpp" || n == "chrf2++") return Metric::chrf_pp;
  if (n == "ter") return Metric::ter;
  if (n == "ribes") return Metric::ribes;
  throw Error(ErrorCode::ConfigError, "unknown metric '" + std::string(name) + "'");
}

double metric_value(const MetricScores& s, Metric m) {
  switch (m) {
    case Metric::bleu: return s.bleu;
    case Metric::chrf2: return s.chrf2;
    case Metric::chrf_pp: return s.chrf_pp;
    case Metric::ter: return s.ter;
    case Metric::ribes: return s.ribes;
  }
  return 0.0;
}

bool higher_is_better(Metric m) { return m != Metric::ter; }

namespace {

constexpr std::string_view kMissing = "—";

std::string fmt(double v, Metric m) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), m == Metric::ribes ? "%.4f" : "%.2f", v);
  return buf;
}

std::string fmt_delta(double d, Metric m) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), m == Metric::ribes ? "%+.4f" : "%+.2f", d);
  return buf;
}

std::size_t width(std::string_view s) { return utf8::chars(s).size(); }

std::string pad(std::string_view s, std::size_t w) {
  std::string out(s);
  const std::size_t n = width(s);
  if (n < w) out.append(w - n, ' ');
  return out;
}

std::vector<Regime> present_rows(const ResultTable& results) {
  std::set<Regime> seen;
  for (const auto& [key, scores] : results) seen.insert(key.regime);
  std::vector<Regime> rows;
  for (Regime r : kAllRegimes) {
    if (seen.count(r)) rows.push_back(r);
  }
  return rows;
}

std::optional<double> lookup(const ResultTable& results, Regime r, Direction d, Lang l, Metric m) {
  auto it = results.find({r, d, l});
  if (it == results.end()) return std::nullopt;
  return metric_value(it->second, m);
}

constexpr std::array<Direction, 2> kDirections = {Direction::en_xx, Direction::xx_en};

std::string_view direction_block(Direction d) { return d == Direction::en_xx ? "English → Indic" : "Indic → English"; }

struct Row {
  std::string label;
  std::vector<std::string> cells;  // 8 language cells, then optional extras
};

std::string render_table(const ResultTable& results, Metric metric, const ReportOptions& opt) {
  const auto rows = present_rows(results);
  const bool with_delta = opt.baseline.has_value();

  std::vector<Row> body;
  for (Regime r : rows) {
    Row row{"  " + std::string(regime_label(r)), {}};
    double delta_sum = 0.0;
    int delta_n = 0;
    for (Direction d : kDirections) {
      for (Lang l : kIndicLangs) {
        const auto v = lookup(results, r, d, l, metric);
        if (!v) {
          row.cells.emplace_back(kMissing);
          continue;
        }
        std::string cell = fmt(*v, metric);
        if (with_delta && r != *opt.baseline) {
          if (const auto b = lookup(results, *opt.baseline, d, l, metric)) {
            cell += " (" + fmt_delta(*v - *b, metric) + ")";
            delta_sum += *v - *b;
            ++delta_n;
          }
        }
        row.cells.push_back(std::move(cell));
      }
    }
    if (with_delta) {
      if (r == *opt.baseline) {
        row.cells.emplace_back("base");
      } else {
        row.cells.push_back(delta_n > 0 ? fmt_delta(delta_sum / delta_n, metric) : std::string(kMissing));
      }
    }
    if (opt.comet_column) row.cells.emplace_back(kMissing);
    body.push_back(std::move(row));
  }

  std::vector<std::string> header;
  for (std::size_t b = 0; b < kDirections.size(); ++b) {
    for (Lang l : kIndicLangs) header.emplace_back(lang_code(l));
  }
  if (with_delta) header.push_back("Δ mean vs " + std::string(regime_label(*opt.baseline)));
  if (opt.comet_column) header.emplace_back("COMET");

  std::size_t label_w = width("Model");
  for (Regime r : rows) label_w = std::max({label_w, width(regime_label(r)) + 2, width(regime_section(r))});
  label_w += 2;
  std::vector<std::size_t> col_w(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    col_w[c] = std::max<std::size_t>(width(header[c]), 5);
    for (const auto& row : body) col_w[c] = std::max(col_w[c], width(row.cells[c]));
    col_w[c] += 2;
  }
  std::array<std::size_t, 2> block_w{};
  for (std::size_t b = 0; b < 2; ++b) {
    // The block caption must fit over its four columns.
    for (std::size_t c = 4 * b; c < 4 * b + 4; ++c) block_w[b] += col_w[c];
    const std::size_t need = width(direction_block(kDirections[b])) + 2;
    if (need > block_w[b]) {
      const std::size_t extra = (need - block_w[b] + 3) / 4;
      for (std::size_t c = 4 * b; c < 4 * b + 4; ++c) col_w[c] += extra;
      block_w[b] += 4 * extra;
    }
  }
  std::size_t total_w = label_w + 3;
  for (auto w : col_w) total_w += w;
  total_w += 3;

  std::ostringstream out;
  out << metric_name(metric) << "\n";
  out << pad("", label_w) << " | ";
  for (std::size_t b = 0; b < kDirections.size(); ++b) {
    out << pad(direction_block(kDirections[b]), block_w[b]) << (b + 1 < kDirections.size() ? " | " : "");
  }
  out << "\n" << pad("Model", label_w) << " | ";
  for (std::size_t c = 0; c < header.size(); ++c) {
    out << pad(header[c], col_w[c]);
    if (c == 3 || c == 7) out << (c + 1 < header.size() ? " | " : "");
  }
  out << "\n" << std::string(total_w, '-') << "\n";
  std::string_view section;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (regime_section(rows[i]) != section) {
      section = regime_section(rows[i]);
      out << section << "\n";
    }
    out << pad(body[i].label, label_w) << " | ";
    for (std::size_t c = 0; c < header.size(); ++c) {
      out << pad(body[i].cells[c], col_w[c]);
      if (c == 3 || c == 7) out << (c + 1 < header.size() ? " | " : "");
    }
    out << "\n";
  }
  return out.str();
}

std::string rstrip_lines(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << "\n";
  }
  return out.str();
}

}  // namespace

std::string render_report(const ResultTable& results, const ReportOptions& options) {
  std::string out;
  for (std::size_t i = 0; i < options.metrics.size(); ++i) {
    if (i > 0) out += "\n";
    out += render_table(results, options.metrics[i], options);
  }
  return rstrip_lines(out);
}

std::string render_report_tsv(const ResultTable& results, const ReportOptions& options) {
  std::ostringstream out;
  out << "metric\tregime\tdirection\tlang\tvalue\tdelta\n";
  char buf[64];
  for (Metric m : options.metrics) {
    for (const auto& [key, scores] : results) {
      const double v = metric_value(scores, m);
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out << metric_name(m) << '\t' << regime_key(key.regime) << '\t' << direction_name(key.direction) << '\t'
          << lang_code(key.lang) << '\t' << buf << '\t';
      std::optional<double> b;
      if (options.baseline && key.regime != *options.baseline) {
        b = lookup(results, *options.baseline, key.direction, key.lang, m);
      }
      if (b) {
        std::snprintf(buf, sizeof(buf), "%+.6f", v - *b);
        out << buf;
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string scores_to_tsv(const ResultTable& results) {
  std::ostringstream out;
  out << "regime\tdirection\tlang\tbleu\tchrf2\tchrfpp\tter\tribes\n";
  char buf[256];
  for (const auto& [key, s] : results) {
    std::snprintf(buf, sizeof(buf), "%.12f\t%.12f\t%.12f\t%.12f\t%.12f", s.bleu, s.chrf2, s.chrf_pp, s.ter, s.ribes);
    out << regime_key(key.regime) << '\t' << direction_name(key.direction) << '\t' << lang_code(key.lang) << '\t'
        << buf << '\n';
  }
  return out.str();
}

ResultTable scores_from_tsv(std::string_view text) {
  ResultTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 8) {
      throw Error(ErrorCode::FormatError, "scores line " + std::to_string(lineno) + ": expected 8 fields");
    }
    try {
      const CellKey key{parse_regime(f[0]), parse_direction(f[1]), parse_lang(f[2])};
      table[key] = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::FormatError, "scores line " + std::to_string(lineno) + ": bad number");
    }
  }
  return table;
}

}  // namespace lrmt
