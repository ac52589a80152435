#pragma once

// Deliberately naive reference implementations used to cross-check the
// library. Nothing here calls into lrmt except for plain data types.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace oracle {

// ---- metrics ---------------------------------------------------------------

std::vector<std::string> split_ws(const std::string& s);
std::vector<std::string> code_points(const std::string& s);

// mteval-v13a via std::regex on bytes.
std::string tok13a(const std::string& line);

double bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);
double chrf(const std::vector<std::string>& hyps, const std::vector<std::string>& refs, int char_order,
            int word_order, double beta);
// Full-table Levenshtein with greedy shifts; corpus TER in percent.
double ter(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);
int ter_edits(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);
double ribes(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);

struct GoldenRow {
  std::string id, hyp, ref;
  double bleu, chrf2, chrfpp, ter, ribes;
};

std::vector<GoldenRow> load_golden(const std::filesystem::path& path);

// ---- optimisation -----------------------------------------------------------

struct ScalarAdam {
  double beta1, beta2, eps, lr;
  double m = 0.0, v = 0.0;
  int t = 0;

  double step(double w, double g);
};

double lr_linear_warmup(long step, double init, double peak, long warmup);

}  // namespace oracle
