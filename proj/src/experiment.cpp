#include "lrmt/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lrmt/bpe.hpp"
#include "lrmt/checkpoint.hpp"
#include "lrmt/hash.hpp"
#include "lrmt/metrics.hpp"
#include "lrmt/rng.hpp"
#include "lrmt/toydata.hpp"
#include "lrmt/utf8.hpp"

namespace lrmt {

namespace fs = std::filesystem;

// ---- INI -----------------------------------------------------------------------

IniData parse_ini(std::string_view text) {
  IniData ini;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = utf8::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": bad section header");
      }
      section = utf8::trim(t.substr(1, t.size() - 2));
      ini[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    }
    if (section.empty()) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": key outside any section");
    }
    ini[section][utf8::trim(t.substr(0, eq))] = utf8::trim(t.substr(eq + 1));
  }
  return ini;
}

void apply_overrides(IniData& ini, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw Error(ErrorCode::ConfigError, "override '" + o + "' is not section.key=value");
    }
    ini[utf8::trim(o.substr(0, dot))][utf8::trim(o.substr(dot + 1, eq - dot - 1))] = utf8::trim(o.substr(eq + 1));
  }
}

namespace {

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v + ",") {
    if (c == ',') {
      const std::string t = utf8::trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const IniData& ini) : ini_(ini) {}

  const std::string* find(const std::string& section, const std::string& key) {
    seen_.insert(section + "." + key);
    auto s = ini_.find(section);
    if (s == ini_.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  template <typename T>
  void get(const std::string& section, const std::string& key, T& out) {
    const std::string* v = find(section, key);
    if (v == nullptr) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        const std::string s = utf8::lowercase(*v);
        if (s == "true" || s == "yes" || s == "1" || s == "on") {
          out = true;
        } else if (s == "false" || s == "no" || s == "0" || s == "off") {
          out = false;
        } else {
          throw std::invalid_argument("bool");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        out = *v;
      } else if constexpr (std::is_floating_point_v<T>) {
        std::size_t pos = 0;
        out = static_cast<T>(std::stod(*v, &pos));
        if (pos != v->size()) throw std::invalid_argument("trailing");
      } else if constexpr (std::is_unsigned_v<T>) {
        std::size_t pos = 0;
        out = static_cast<T>(std::stoull(*v, &pos));
        if (pos != v->size()) throw std::invalid_argument("trailing");
      } else {
        std::size_t pos = 0;
        out = static_cast<T>(std::stoll(*v, &pos));
        if (pos != v->size()) throw std::invalid_argument("trailing");
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ConfigError, section + "." + key + ": cannot parse '" + *v + "'");
    }
  }

  void check_unknown() const {
    for (const auto& [section, keys] : ini_) {
      for (const auto& [key, value] : keys) {
        if (!seen_.count(section + "." + key) && !(section == "data" && key.rfind("dict.", 0) == 0)) {
          throw Error(ErrorCode::ConfigError, "unknown key " + section + "." + key);
        }
      }
    }
  }

 private:
  const IniData& ini_;
  std::set<std::string> seen_;
};

void read_schedule(Reader& r, const std::string& section, LrSchedule& lr) {
  r.get(section, "warmup_init_lr", lr.warmup_init_lr);
  r.get(section, "peak_lr", lr.peak_lr);
  r.get(section, "warmup_updates", lr.warmup_updates);
  std::string decay(decay_name(lr.decay));
  r.get(section, "decay", decay);
  lr.decay = parse_decay(decay);
}

std::string canonical_text(const IniData& ini) {
  std::string s;
  for (const auto& [section, keys] : ini) {
    for (const auto& [key, value] : keys) {
      if (section == "experiment" && key == "output_dir") continue;
      s += section + "." + key + "=" + value + "\n";
    }
  }
  return s;
}

}  // namespace

fs::path default_output_root() {
  const char* env = std::getenv("LRMT_OUTPUT_ROOT");
  return (env != nullptr && *env != '\0') ? fs::path(env) : fs::path("runs");
}

ExperimentConfig parse_experiment_config(const IniData& ini, const fs::path& base_dir) {
  ExperimentConfig c;
  Reader r(ini);
  try {
    r.get("experiment", "name", c.name);
    r.get("experiment", "seed", c.seed);
    std::string out;
    r.get("experiment", "output_dir", out);
    c.output_dir = out.empty() ? default_output_root() / c.name : fs::path(out);
    if (const auto* v = r.find("experiment", "regimes")) {
      c.regimes.clear();
      for (const auto& k : split_list(*v)) c.regimes.push_back(parse_regime(k));
    }
    std::string dir(direction_name(c.direction));
    r.get("experiment", "direction", dir);
    c.direction = parse_direction(dir);
    if (const auto* v = r.find("experiment", "languages")) {
      c.languages.clear();
      for (const auto& k : split_list(*v)) c.languages.push_back(parse_lang(k));
    }
    c.eval_languages = c.languages;
    if (const auto* v = r.find("experiment", "eval_languages")) {
      c.eval_languages.clear();
      for (const auto& k : split_list(*v)) c.eval_languages.push_back(parse_lang(k));
    }
    r.get("experiment", "allow_novel", c.allow_novel);

    std::string root = ".";
    r.get("data", "root", root);
    c.data_root = base_dir / root;
    std::string grouping;
    r.get("data", "grouping", grouping);
    c.groups = grouping.empty() ? script_groups() : load_grouping(c.data_root / grouping);
    for (Lang l : c.languages) {
      std::string dict = "dict.en-" + std::string(lang_code(l)) + ".txt";
      r.get("data", "dict." + std::string(lang_code(l)), dict);
      c.dictionaries[l] = c.data_root / dict;
    }

    r.get("bpe", "vocab_size", c.bpe_vocab_size);
    r.get("bpe", "byte_fallback", c.byte_fallback);

    r.get("model", "layers_enc", c.model.layers_enc);
    r.get("model", "layers_dec", c.model.layers_dec);
    r.get("model", "d_model", c.model.d_model);
    r.get("model", "d_ff", c.model.d_ff);
    r.get("model", "heads", c.model.heads);
    r.get("model", "dropout", c.model.dropout);
    r.get("model", "max_positions", c.model.max_positions);
    r.get("model", "shared_embeddings", c.model.shared_embeddings);
    r.get("model", "tie_output", c.model.tie_output);

    r.get("pretrain", "enabled", c.pretrain);
    r.get("pretrain", "updates", c.pretrain_updates);
    r.get("pretrain", "ras_p", c.ras.p);
    r.get("pretrain", "augment_reverse", c.ras.augment_reverse);
    c.pretrain_lr = c.train.lr;
    read_schedule(r, "pretrain", c.pretrain_lr);

    TrainConfig& t = c.train;
    r.get("finetune", "max_tokens_per_batch", t.max_tokens_per_batch);
    r.get("finetune", "accumulation", t.accumulation);
    r.get("finetune", "max_updates", t.max_updates);
    r.get("finetune", "checkpoint_interval", t.checkpoint_interval);
    r.get("finetune", "patience", t.patience);
    read_schedule(r, "finetune", t.lr);
    r.get("finetune", "beta1", t.adam.beta1);
    r.get("finetune", "beta2", t.adam.beta2);
    r.get("finetune", "eps", t.adam.eps);
    r.get("finetune", "weight_decay", t.adam.weight_decay);
    r.get("finetune", "label_smoothing", t.label_smoothing);
    r.get("finetune", "clip_norm", t.clip_norm);
    std::string crit(criterion_name(t.criterion));
    r.get("finetune", "criterion", crit);
    t.criterion = parse_criterion(crit);
    r.get("finetune", "dev_chrf", t.dev_chrf);
    r.get("finetune", "sort_window", t.sort_window);
    r.get("finetune", "save_optimizer_state", t.save_optimizer_state);
    std::string freeze(freeze_name(t.freeze.mode));
    r.get("finetune", "freeze", freeze);
    t.freeze.mode = parse_freeze(freeze);
    t.direction = c.direction;

    r.get("decode", "beam", c.beam);
    r.get("decode", "length_penalty", c.length_penalty);
    r.check_unknown();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::IoError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
  c.canonical = canonical_text(ini);
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  IniData ini = parse_ini(ss.str());
  apply_overrides(ini, overrides);
  return parse_experiment_config(ini, path.parent_path());
}

std::string ExperimentConfig::hash() const { return hash_hex(canonical); }

fs::path ExperimentConfig::corpus_path(Split split, Lang indic, Lang side) const {
  return data_root / toy_file_name(split, indic, side);
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  if (regimes.empty()) fail("no regimes selected");
  if (languages.empty()) fail("no languages selected");
  for (Lang l : languages) {
    if (l == Lang::en) fail("'en' is the pivot side and cannot be listed as a language");
  }
  for (Lang l : eval_languages) {
    if (std::find(languages.begin(), languages.end(), l) == languages.end()) {
      fail("eval language " + std::string(lang_code(l)) + " is not among the experiment languages");
    }
  }
  const bool grouped = std::find(regimes.begin(), regimes.end(), Regime::grouped) != regimes.end();
  if (grouped) {
    for (Lang l : eval_languages) {
      if (group_of(groups, l) == nullptr) fail("language " + std::string(lang_code(l)) + " belongs to no group");
    }
  }
  if (train.freeze.mode != FreezeMode::none && !allow_novel) {
    fail("finetune.freeze outside the frozen_* regimes is a novel combination; pass --allow-novel");
  }
  if (bpe_vocab_size < 1) fail("bpe.vocab_size must be positive");
  if (pretrain && pretrain_updates < 1) fail("pretrain.updates must be positive");
  if (beam < 1) fail("decode.beam must be at least 1");
  try {
    ModelConfig m = model;
    m.vocab_size = std::max(1, m.vocab_size);
    m.validate();
    train.validate();
    ras.validate();
    pretrain_lr.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }

  auto need = [](const fs::path& p) {
    if (!fs::is_regular_file(p)) throw Error(ErrorCode::DataError, "missing file " + p.string());
  };
  for (Lang l : languages) {
    for (Split s : {Split::train, Split::valid, Split::test}) {
      need(corpus_path(s, l, Lang::en));
      need(corpus_path(s, l, l));
    }
    if (pretrain && ras.p > 0.0) need(dictionaries.at(l));
  }
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::bpe: return "bpe";
    case Stage::pretrain: return "pretrain";
    case Stage::finetune: return "finetune";
    case Stage::decode: return "decode";
    case Stage::score: return "score";
    case Stage::report: return "report";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::bpe, Stage::pretrain, Stage::finetune, Stage::decode, Stage::score, Stage::report}) {
    if (stage_name(s) == name) return s;
  }
  throw Error(ErrorCode::ConfigError, "unknown stage '" + std::string(name) + "'");
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidConfig:
    case ErrorCode::UnknownLanguage:
    case ErrorCode::GroupMembershipViolation:
    case ErrorCode::VocabTooSmall:
    case ErrorCode::ConfigMismatch:
    case ErrorCode::VocabMismatch:
    case ErrorCode::IncompatibleTokenizers:
    case ErrorCode::MissingLanguageTag: return 2;
    case ErrorCode::DataError:
    case ErrorCode::IoError:
    case ErrorCode::FormatError:
    case ErrorCode::LineCountMismatch:
    case ErrorCode::EmptyLine:
    case ErrorCode::EncodingError:
    case ErrorCode::EmptyText:
    case ErrorCode::EmptyMixture:
    case ErrorCode::EmptyCorpus:
    case ErrorCode::MalformedLine:
    case ErrorCode::EmptyDictionary:
    case ErrorCode::LanguageMismatch: return 3;
    case ErrorCode::DivergedLoss:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NonFiniteGradient: return 4;
    default: return 1;
  }
}

// ---- Runner --------------------------------------------------------------------

namespace {

class Manifest {
 public:
  Manifest(fs::path dir, const ExperimentConfig& cfg, bool force) : dir_(std::move(dir)) {
    const fs::path p = dir_ / "manifest.json";
    if (!force && fs::exists(p)) {
      std::ifstream in(p);
      try {
        data_ = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception&) {
        data_ = nlohmann::json::object();
      }
    }
    if (data_.value("config_hash", std::string()) != cfg.hash()) {
      data_ = nlohmann::json::object();
      data_["stages"] = nlohmann::json::object();
    }
    data_["config_hash"] = cfg.hash();
    data_["seed"] = cfg.seed;
    data_["code_version"] = LRMT_VERSION;
    data_["name"] = cfg.name;
  }

  bool done(const std::string& key) const {
    const auto& st = data_["stages"];
    if (!st.contains(key)) return false;
    for (const auto& a : st[key]) {
      if (!fs::exists(dir_ / a.get<std::string>())) return false;
    }
    return true;
  }

  void record(const std::string& key, const std::vector<std::string>& artifacts) {
    data_["stages"][key] = artifacts;
    save();
  }

  void set(const std::string& key, const std::string& value) {
    data_[key] = value;
    save();
  }

  std::string get(const std::string& key) const { return data_.value(key, std::string()); }

 private:
  void save() const {
    const fs::path p = dir_ / "manifest.json";
    const fs::path tmp = dir_ / "manifest.json.tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
      out << data_.dump(2) << "\n";
    }
    fs::rename(tmp, p);
  }

  fs::path dir_;
  nlohmann::json data_ = nlohmann::json::object();
};

struct Corpora {
  std::map<Lang, ParallelCorpus> train, dev, test;
};

ParallelCorpus load_split(const ExperimentConfig& cfg, Lang l, Split s) {
  ParallelCorpus c =
      load_parallel_corpus(cfg.corpus_path(s, l, Lang::en), cfg.corpus_path(s, l, l), Lang::en, l, s);
  return cfg.direction == Direction::en_xx ? c : c.reversed();
}

// Fresh optimizer and update counter for a model that becomes a parent.
Checkpoint as_parent(Checkpoint c) {
  c.opt = OptState<float>();
  c.update = 0;
  c.history.clear();
  return c;
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, const RunOptions& opt)
      : cfg_(cfg), opt_(opt), out_(cfg.output_dir), manifest_(out_, cfg, opt.force) {}

  ExperimentResult run() {
    ExperimentResult res;
    res.output_dir = out_;
    if (!opt_.force && opt_.until == Stage::report && manifest_.done("report") && manifest_.done("score")) {
      res = load_experiment_result(out_);
      res.no_op = true;
      return res;
    }
    for (Lang l : cfg_.languages) {
      corpora_.train[l] = load_split(cfg_, l, Split::train);
      corpora_.dev[l] = load_split(cfg_, l, Split::valid);
      corpora_.test[l] = load_split(cfg_, l, Split::test);
    }
    stage_bpe();
    res.bpe_hash = bpe_.hash();
    model_cfg_ = cfg_.model;
    model_cfg_.vocab_size = bpe_.size();
    if (opt_.until == Stage::bpe) return res;
    stage_pretrain();
    if (opt_.until == Stage::pretrain) return res;
    stage_finetune();
    if (opt_.until == Stage::finetune) return res;
    stage_decode();
    if (opt_.until == Stage::decode) return res;
    res.scores = stage_score();
    if (opt_.until == Stage::score) return res;
    stage_report(res.scores);
    return res;
  }

 private:
  void log(const std::string& msg) const {
    if (opt_.verbose) std::cerr << "[" << cfg_.name << "] " << msg << "\n";
  }

  void stage_bpe() {
    const std::string path = "bpe.model";
    if (manifest_.done("bpe")) {
      bpe_ = BpeModel::load(out_ / path);
      return;
    }
    log("training tokenizer");
    std::vector<std::string> lines;
    for (Lang l : cfg_.languages) {
      for (const auto& p : corpora_.train.at(l).pairs) {
        lines.push_back(p.src_text);
        lines.push_back(p.tgt_text);
      }
    }
    bpe_ = train_bpe(lines, cfg_.bpe_vocab_size, all_lang_tags(), cfg_.byte_fallback);
    bpe_.save(out_ / path);
    manifest_.set("bpe_hash", bpe_.hash());
    manifest_.record("bpe", {path});
  }

  EncodedSet encode_dev(const std::vector<Lang>& langs) const {
    EncodedSet all;
    for (Lang l : langs) {
      EncodedSet e = encode_corpus(corpora_.dev.at(l), bpe_, model_cfg_.max_positions);
      all.examples.insert(all.examples.end(), e.examples.begin(), e.examples.end());
      all.references.insert(all.references.end(), e.references.begin(), e.references.end());
    }
    return all;
  }

  void stage_pretrain() {
    if (!cfg_.pretrain) return;
    const std::string path = "pretrain/parent.ckpt";
    if (manifest_.done("pretrain")) {
      parent_ = as_parent(load_checkpoint(out_ / path));
      return;
    }
    log("alignment-augmented pre-training");
    RasConfig ras = cfg_.ras;
    ras.seed = derive_seed(cfg_.seed, "ras");
    std::vector<ParallelCorpus> augmented;
    std::uint64_t index = 0;
    auto add = [&](const ParallelCorpus& c, const BilingualDictionary& dict) {
      ParallelCorpus a = c;
      a.pairs = ras_augment(c.pairs, dict, ras, index);
      index += c.pairs.size();
      augmented.push_back(std::move(a));
    };
    for (Lang l : cfg_.languages) {
      const ParallelCorpus& c = corpora_.train.at(l);
      BilingualDictionary dict;
      if (ras.p > 0.0) dict = load_dictionary(cfg_.dictionaries.at(l), Lang::en, l);
      dict.src_lang = Lang::en;
      dict.tgt_lang = l;
      const BilingualDictionary inv = dict.inverted();
      const bool en_src = c.src_lang == Lang::en;
      add(c, en_src ? dict : inv);
      if (ras.augment_reverse) add(c.reversed(), en_src ? inv : dict);
    }
    const auto mixture = build_mixture(augmented, MixtureRegime::multilingual(), derive_seed(cfg_.seed, "mix/pre"));
    TrainConfig t = cfg_.train;
    t.regime = RegimeKind::multilingual;
    t.max_updates = cfg_.pretrain_updates;
    t.checkpoint_interval = cfg_.pretrain_updates;
    t.patience = 1;
    t.lr = cfg_.pretrain_lr;
    t.freeze = FreezeSpec{};
    t.dev_chrf = false;
    t.criterion = StopCriterion::dev_loss;
    t.seed = derive_seed(cfg_.seed, "pretrain");
    t.output_dir.clear();
    auto result = run_training(encode_examples(mixture, bpe_, model_cfg_.max_positions), encode_dev(cfg_.languages),
                               bpe_, t, model_cfg_);
    result.last.provenance["regime"] = "pretrain";
    result.last.provenance["ras_p"] = std::to_string(cfg_.ras.p);
    save_checkpoint(result.last, out_ / path);
    result.log.save(out_ / "pretrain/train_log.tsv");
    parent_ = as_parent(std::move(result.last));
    manifest_.record("pretrain", {path, "pretrain/train_log.tsv"});
  }

  // Trains or reloads one fine-tuning unit and returns its best checkpoint.
  Checkpoint unit(Regime regime, const std::string& unit_name, const std::vector<Lang>& langs,
                  const Checkpoint* init, FreezeMode freeze) {
    const std::string dir = std::string(regime_key(regime)) + "/" + unit_name;
    const std::string key = "finetune/" + dir;
    const std::string ckpt = dir + "/best.ckpt";
    if (manifest_.done(key)) return load_checkpoint(out_ / ckpt);
    log("fine-tuning " + dir);

    std::vector<ParallelCorpus> corpora;
    for (Lang l : langs) corpora.push_back(corpora_.train.at(l));
    MixtureRegime mix = MixtureRegime::bilingual();
    RegimeKind kind = RegimeKind::bilingual;
    if (regime == Regime::multilingual) {
      mix = MixtureRegime::multilingual();
      kind = RegimeKind::multilingual;
    } else if (regime == Regime::grouped) {
      mix = MixtureRegime::grouped(*group_of(cfg_.groups, langs.front()));
      kind = RegimeKind::grouped;
    }
    const auto mixture = build_mixture(corpora, mix, derive_seed(cfg_.seed, "mix/" + dir));

    TrainConfig t = cfg_.train;
    t.regime = kind;
    t.seed = derive_seed(cfg_.seed, "finetune/" + dir);
    if (freeze != FreezeMode::none) t.freeze.mode = freeze;
    t.output_dir = out_ / dir / "checkpoints";
    auto result = run_training(encode_examples(mixture, bpe_, model_cfg_.max_positions), encode_dev(langs), bpe_, t,
                               model_cfg_, init);
    result.best.provenance["regime"] = std::string(regime_key(regime));
    result.best.provenance["unit"] = unit_name;
    save_checkpoint(result.best, out_ / ckpt);
    result.log.save(out_ / dir / "train_log.tsv");
    std::vector<std::string> artifacts{ckpt, dir + "/train_log.tsv"};
    for (const auto& f : result.checkpoint_files) artifacts.push_back(fs::relative(f, out_).string());
    manifest_.record(key, artifacts);
    return std::move(result.best);
  }

  bool wants(Regime r) const { return std::find(cfg_.regimes.begin(), cfg_.regimes.end(), r) != cfg_.regimes.end(); }

  void stage_finetune() {
    const Checkpoint* parent = parent_ ? &*parent_ : nullptr;
    for (Regime r : kAllRegimes) {
      if (!wants(r)) continue;
      switch (r) {
        case Regime::bilingual:
          for (Lang l : cfg_.eval_languages) models_[{r, l}] = unit(r, std::string(lang_code(l)), {l}, parent, FreezeMode::none);
          break;
        case Regime::frozen_encoder:
        case Regime::frozen_embedding_encoder: {
          const FreezeMode f =
              r == Regime::frozen_encoder ? FreezeMode::encoder : FreezeMode::encoder_and_embedding;
          for (Lang l : cfg_.eval_languages) models_[{r, l}] = unit(r, std::string(lang_code(l)), {l}, parent, f);
          break;
        }
        case Regime::multilingual:
        case Regime::multi_to_bi: {
          if (!multi_) multi_ = unit(Regime::multilingual, "all", cfg_.languages, parent, FreezeMode::none);
          if (r == Regime::multilingual) {
            for (Lang l : cfg_.eval_languages) models_[{r, l}] = *multi_;
            break;
          }
          for (Lang l : cfg_.eval_languages) {
            const Lang src = cfg_.direction == Direction::en_xx ? Lang::en : l;
            const Lang tgt = cfg_.direction == Direction::en_xx ? l : Lang::en;
            const Checkpoint init = init_bilingual_from_multilingual(as_parent(*multi_), bpe_, src, tgt);
            models_[{r, l}] = unit(r, std::string(lang_code(l)), {l}, &init, FreezeMode::none);
          }
          break;
        }
        case Regime::grouped: {
          std::map<std::string, Checkpoint> by_group;
          for (Lang l : cfg_.eval_languages) {
            const LanguageGroup* g = group_of(cfg_.groups, l);
            if (!by_group.count(g->name)) {
              std::vector<Lang> members;
              for (Lang m : cfg_.languages) {
                if (g->contains(m)) members.push_back(m);
              }
              by_group[g->name] = unit(r, g->name, members, parent, FreezeMode::none);
            }
            models_[{r, l}] = by_group.at(g->name);
          }
          break;
        }
      }
    }
  }

  std::string decode_file(Regime r, Lang l) const {
    return std::string(regime_key(r)) + "/decode." + std::string(lang_code(l)) + ".txt";
  }

  void stage_decode() {
    for (const auto& [key, ckpt] : models_) {
      const auto& [r, l] = key;
      const std::string file = decode_file(r, l);
      const std::string mkey = "decode/" + std::string(regime_key(r)) + "/" + std::string(lang_code(l));
      if (manifest_.done(mkey)) continue;
      log("decoding " + file);
      std::vector<std::vector<int>> sources;
      for (const auto& p : corpora_.test.at(l).pairs) {
        sources.push_back(encode_pair(p, bpe_, model_cfg_.max_positions).src);
      }
      write_lines(out_ / file, translate(ckpt.params, bpe_, sources, cfg_.beam, cfg_.length_penalty));
      manifest_.record(mkey, {file});
    }
  }

  ResultTable stage_score() {
    ResultTable table;
    for (const auto& [key, ckpt] : models_) {
      const auto& [r, l] = key;
      std::vector<std::string> refs;
      for (const auto& p : corpora_.test.at(l).pairs) refs.push_back(p.tgt_text);
      const auto hyps = read_lines(out_ / decode_file(r, l));
      table[{r, cfg_.direction, l}] = score_all(zip_eval_pairs(hyps, refs));
    }
    std::ofstream(out_ / "scores.tsv", std::ios::binary | std::ios::trunc) << scores_to_tsv(table);
    manifest_.record("score", {"scores.tsv"});
    return table;
  }

  void stage_report(const ResultTable& table) {
    std::ofstream(out_ / "report.txt", std::ios::binary | std::ios::trunc) << render_report(table);
    std::ofstream(out_ / "report.tsv", std::ios::binary | std::ios::trunc) << render_report_tsv(table);
    manifest_.record("report", {"report.txt", "report.tsv"});
  }

  const ExperimentConfig& cfg_;
  RunOptions opt_;
  fs::path out_;
  Manifest manifest_;
  Corpora corpora_;
  BpeModel bpe_;
  ModelConfig model_cfg_;
  std::optional<Checkpoint> parent_;
  std::optional<Checkpoint> multi_;
  std::map<std::pair<Regime, Lang>, Checkpoint> models_;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  Runner runner(cfg, options);
  return runner.run();
}

ExperimentResult load_experiment_result(const fs::path& output_dir) {
  ExperimentResult res;
  res.output_dir = output_dir;
  const fs::path m = output_dir / "manifest.json";
  std::ifstream in(m);
  if (!in) throw Error(ErrorCode::DataError, "no manifest in " + output_dir.string());
  try {
    res.bpe_hash = nlohmann::json::parse(in).value("bpe_hash", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, m.string() + ": " + e.what());
  }
  std::ifstream s(output_dir / "scores.tsv", std::ios::binary);
  if (!s) throw Error(ErrorCode::DataError, "no scores.tsv in " + output_dir.string());
  std::stringstream ss;
  ss << s.rdbuf();
  res.scores = scores_from_tsv(ss.str());
  return res;
}

ResultTable merge_results(const std::vector<ExperimentResult>& runs) {
  ResultTable merged;
  for (const auto& r : runs) {
    if (r.bpe_hash != runs.front().bpe_hash) {
      throw Error(ErrorCode::IncompatibleTokenizers, r.output_dir.string() + " uses tokenizer " + r.bpe_hash +
                                                          ", expected " + runs.front().bpe_hash);
    }
    for (const auto& [k, v] : r.scores) merged.emplace(k, v);
  }
  return merged;
}

std::string compare_regimes(const std::vector<ExperimentResult>& runs, std::optional<Regime> baseline,
                            const std::vector<Metric>& metrics) {
  ReportOptions opt;
  opt.metrics = metrics;
  opt.baseline = baseline;
  return render_report(merge_results(runs), opt);
}

}  // namespace lrmt
