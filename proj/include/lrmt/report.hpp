#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "lrmt/corpus.hpp"
#include "lrmt/metrics.hpp"
#include "lrmt/trainer.hpp"

namespace lrmt {

/// Rows of the comparison tables, in display order.
enum class Regime { bilingual, multilingual, multi_to_bi, frozen_encoder, frozen_embedding_encoder, grouped };

inline constexpr std::array<Regime, 6> kAllRegimes = {Regime::bilingual,      Regime::multilingual,
                                                      Regime::multi_to_bi,    Regime::frozen_encoder,
                                                      Regime::frozen_embedding_encoder, Regime::grouped};

/// Config key, e.g. "frozen_encoder".
std::string_view regime_key(Regime r);
Regime parse_regime(std::string_view key);
/// Row label, e.g. "FT with Frozen Encoder".
std::string_view regime_label(Regime r);
/// Section heading the row sits under, e.g. "Layer Freezing".
std::string_view regime_section(Regime r);

enum class Metric { bleu, chrf2, chrf_pp, ter, ribes };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::bleu, Metric::chrf2, Metric::chrf_pp, Metric::ter,
                                                      Metric::ribes};

std::string_view metric_name(Metric m);
Metric parse_metric(std::string_view name);
double metric_value(const MetricScores& s, Metric m);
/// Lower is better only for TER.
bool higher_is_better(Metric m);

struct CellKey {
  Regime regime = Regime::bilingual;
  Direction direction = Direction::en_xx;
  Lang lang = Lang::as;

  auto operator<=>(const CellKey&) const = default;
};

using ResultTable = std::map<CellKey, MetricScores>;

struct ReportOptions {
  std::vector<Metric> metrics{kAllMetrics.begin(), kAllMetrics.end()};
  // Adds per-cell deltas and a mean-delta column relative to this row.
  std::optional<Regime> baseline;
  // Labeled, always-empty COMET column.
  bool comet_column = false;
};

/// One text table per metric. Rows are the regimes present in `results`,
/// grouped under their section headings; columns are the two direction
/// blocks over as, kha, lus, mni. Missing cells show "—".
std::string render_report(const ResultTable& results, const ReportOptions& options = {});

/// Long-format TSV: metric, regime, direction, lang, value, delta.
std::string render_report_tsv(const ResultTable& results, const ReportOptions& options = {});

/// Round-trip of the TSV score files written by the experiment runner:
/// regime, direction, lang, bleu, chrf2, chrfpp, ter, ribes.
std::string scores_to_tsv(const ResultTable& results);
ResultTable scores_from_tsv(std::string_view text);

}  // namespace lrmt
