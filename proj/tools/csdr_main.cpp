// csdr: semantic text-matching pipeline CLI.
//
// Subcommands: build-vocab, gen-synthetic, pretrain, finetune, evaluate,
// index, query, ablate. Every training/eval command takes a JSON config
// (--config) whose fields all have defaults; flags override the file, the
// file overrides CSDR_SEED, and CSDR_SEED overrides the built-in default.
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "csdr/checkpoint.hpp"
#include "csdr/eval.hpp"
#include "csdr/index.hpp"
#include "csdr/pipeline.hpp"
#include "csdr/synthetic.hpp"
#include "csdr/text.hpp"
#include "csdr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunPaths {
  std::string corpus;
  std::string pairs;
  std::string vocab;
  std::string checkpoint;
  std::string init_checkpoint;
  std::string docs;
  std::string index;
  std::string out_dir = "runs/run";
};

struct RunConfig {
  std::uint64_t seed = 42;
  csdr::EncoderConfig encoder;
  csdr::TrainConfig train;
  std::size_t pretrain_epochs = 10;
  csdr::FusionConfig fusion;
  bool fusion_enabled = false;
  double eval_threshold = 0.5;
  bool eval_best_threshold = false;
  double split_ratio = 0.8;
  RunPaths paths;
};

void check_keys(const json& obj, const char* section,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw UsageError(std::string("config: unknown key \"") + key + "\" in " +
                       section);
    }
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config: bad value for \"") + key + "\"");
  }
}

// flag > file > CSDR_SEED > built-in default
RunConfig load_config(const std::string& path) {
  RunConfig cfg;

  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open " + path);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("config: " + path + " is not valid JSON: " + e.what());
    }
  }
  if (!doc.is_object()) throw UsageError("config: top level must be an object");
  check_keys(doc, "top level",
             {"seed", "encoder", "train", "fusion", "eval", "paths"});

  read_field(doc, "seed", cfg.seed);
  const bool seed_in_file = doc.contains("seed");

  if (doc.contains("encoder")) {
    const json& enc = doc["encoder"];
    check_keys(enc, "encoder",
               {"embed_dim", "max_len", "dropout_p", "pooling", "use_position"});
    read_field(enc, "embed_dim", cfg.encoder.embed_dim);
    read_field(enc, "max_len", cfg.encoder.max_len);
    read_field(enc, "dropout_p", cfg.encoder.dropout_p);
    if (enc.contains("pooling")) {
      if (!enc["pooling"].is_string()) throw UsageError("config: pooling must be a string");
      cfg.encoder.pooling = csdr::pooling_from_string(enc["pooling"].get<std::string>());
    }
    read_field(enc, "use_position", cfg.encoder.use_position);
  }
  if (doc.contains("train")) {
    const json& tr = doc["train"];
    check_keys(tr, "train",
               {"batch_size", "epochs", "pretrain_epochs", "lr_peak", "lr_min",
                "warmup_fraction", "objective", "tau", "lambda"});
    read_field(tr, "batch_size", cfg.train.batch_size);
    read_field(tr, "epochs", cfg.train.epochs);
    read_field(tr, "pretrain_epochs", cfg.pretrain_epochs);
    read_field(tr, "lr_peak", cfg.train.lr_peak);
    read_field(tr, "lr_min", cfg.train.lr_min);
    read_field(tr, "warmup_fraction", cfg.train.warmup_fraction);
    if (tr.contains("objective")) {
      if (!tr["objective"].is_string()) throw UsageError("config: objective must be a string");
      cfg.train.objective =
          csdr::objective_from_string(tr["objective"].get<std::string>());
    }
    read_field(tr, "tau", cfg.train.tau);
    read_field(tr, "lambda", cfg.train.lambda);
  }
  if (doc.contains("fusion")) {
    const json& fu = doc["fusion"];
    check_keys(fu, "fusion", {"enabled", "w", "k"});
    read_field(fu, "enabled", cfg.fusion_enabled);
    read_field(fu, "w", cfg.fusion.w);
    read_field(fu, "k", cfg.fusion.k);
  }
  if (doc.contains("eval")) {
    const json& ev = doc["eval"];
    check_keys(ev, "eval", {"threshold", "best_threshold", "split_ratio"});
    read_field(ev, "threshold", cfg.eval_threshold);
    read_field(ev, "best_threshold", cfg.eval_best_threshold);
    read_field(ev, "split_ratio", cfg.split_ratio);
  }
  if (doc.contains("paths")) {
    const json& p = doc["paths"];
    check_keys(p, "paths",
               {"corpus", "pairs", "vocab", "checkpoint", "init_checkpoint",
                "docs", "index", "out_dir"});
    read_field(p, "corpus", cfg.paths.corpus);
    read_field(p, "pairs", cfg.paths.pairs);
    read_field(p, "vocab", cfg.paths.vocab);
    read_field(p, "checkpoint", cfg.paths.checkpoint);
    read_field(p, "init_checkpoint", cfg.paths.init_checkpoint);
    read_field(p, "docs", cfg.paths.docs);
    read_field(p, "index", cfg.paths.index);
    read_field(p, "out_dir", cfg.paths.out_dir);
  }

  if (!seed_in_file) {
    if (const char* env = std::getenv("CSDR_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw UsageError("CSDR_SEED is not a valid unsigned integer");
      }
    }
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

json resolved_json(const RunConfig& cfg) {
  return json{
      {"seed", cfg.seed},
      {"encoder",
       {{"embed_dim", cfg.encoder.embed_dim},
        {"max_len", cfg.encoder.max_len},
        {"dropout_p", cfg.encoder.dropout_p},
        {"pooling", csdr::pooling_to_string(cfg.encoder.pooling)},
        {"use_position", cfg.encoder.use_position}}},
      {"train",
       {{"batch_size", cfg.train.batch_size},
        {"epochs", cfg.train.epochs},
        {"pretrain_epochs", cfg.pretrain_epochs},
        {"lr_peak", cfg.train.lr_peak},
        {"lr_min", cfg.train.lr_min},
        {"warmup_fraction", cfg.train.warmup_fraction},
        {"objective", csdr::objective_to_string(cfg.train.objective)},
        {"tau", cfg.train.tau},
        {"lambda", cfg.train.lambda}}},
      {"fusion",
       {{"enabled", cfg.fusion_enabled}, {"w", cfg.fusion.w}, {"k", cfg.fusion.k}}},
      {"eval",
       {{"threshold", cfg.eval_threshold},
        {"best_threshold", cfg.eval_best_threshold},
        {"split_ratio", cfg.split_ratio}}},
      {"paths",
       {{"corpus", cfg.paths.corpus},
        {"pairs", cfg.paths.pairs},
        {"vocab", cfg.paths.vocab},
        {"checkpoint", cfg.paths.checkpoint},
        {"init_checkpoint", cfg.paths.init_checkpoint},
        {"docs", cfg.paths.docs},
        {"index", cfg.paths.index},
        {"out_dir", cfg.paths.out_dir}}},
  };
}

void require_path(const std::string& value, const char* what) {
  if (value.empty()) {
    throw UsageError(std::string("config: paths.") + what + " is required");
  }
  if (!fs::exists(value)) {
    throw UsageError(std::string("config: paths.") + what + " does not exist: " +
                     value);
  }
}

// Run directory with the resolved-config echo written up front and a FAILED
// sentinel dropped if the command dies midway.
class RunDir {
 public:
  explicit RunDir(const RunConfig& cfg) : dir_(cfg.paths.out_dir) {
    fs::create_directories(dir_);
    std::ofstream out(dir_ / "config.resolved.json",
                      std::ios::binary | std::ios::trunc);
    out << resolved_json(cfg).dump(2) << '\n';
    fs::remove(dir_ / "FAILED");  // stale sentinel from an earlier attempt
  }
  ~RunDir() {
    if (!committed_) {
      std::ofstream out(dir_ / "FAILED", std::ios::binary | std::ios::trunc);
      out << "run did not complete\n";
    }
  }
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  const fs::path& path() const { return dir_; }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  bool committed_ = false;
};

void write_history(const fs::path& path,
                   const std::vector<csdr::EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& rec : history) {
    out << json{{"epoch", rec.epoch},
                {"mean_loss", rec.mean_loss},
                {"lr_last", rec.lr_last}}
               .dump()
        << '\n';
  }
}

csdr::Vocab load_vocab_checked(const RunConfig& cfg) {
  require_path(cfg.paths.vocab, "vocab");
  return csdr::Vocab::from_file(cfg.paths.vocab);
}

int cmd_build_vocab(const std::string& corpus_path, std::size_t min_freq,
                    const std::string& out_path) {
  if (!fs::exists(corpus_path)) {
    throw UsageError("build-vocab: corpus does not exist: " + corpus_path);
  }
  const auto corpus = csdr::load_sentences(corpus_path);
  const auto vocab = csdr::build_vocab(corpus, min_freq);
  vocab.save(out_path);
  std::cout << "vocab size " << vocab.size() << "\n";
  return 0;
}

int cmd_gen_synthetic(const csdr::SyntheticSpec& spec, const std::string& out_dir) {
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  csdr::write_synthetic(csdr::gen_synthetic(spec), spec, out_dir);
  std::cout << "wrote " << out_dir << "/corpus.txt, pairs.tsv, manifest.json\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg) {
  require_path(cfg.paths.corpus, "corpus");
  const auto vocab = load_vocab_checked(cfg);
  const auto corpus = csdr::load_sentences(cfg.paths.corpus);

  RunDir run(cfg);
  csdr::TrainConfig pre = cfg.train;
  pre.objective = csdr::Objective::simcse;
  pre.epochs = cfg.pretrain_epochs;
  const auto result = csdr::pretrain_simcse(corpus, vocab, cfg.encoder, pre);

  write_history(run.path() / "history.jsonl", result.history);
  csdr::Checkpoint ckpt;
  ckpt.vocab_hash = vocab.hash();
  ckpt.config = cfg.encoder;
  ckpt.params = result.params;
  csdr::save_checkpoint(ckpt, (run.path() / "checkpoint.bin").string());
  run.commit();

  std::cout << "pretrained " << pre.epochs << " epoch(s), final mean loss "
            << result.history.back().mean_loss << "\n";
  return 0;
}

int cmd_finetune(const RunConfig& cfg) {
  require_path(cfg.paths.pairs, "pairs");
  const auto vocab = load_vocab_checked(cfg);
  const auto pairs = csdr::load_pairs(cfg.paths.pairs);

  RunDir run(cfg);
  auto [train_pairs, test_pairs] =
      csdr::split_pairs(pairs, cfg.split_ratio, cfg.seed);
  (void)test_pairs;

  csdr::EncoderParams initial;
  if (!cfg.paths.init_checkpoint.empty()) {
    require_path(cfg.paths.init_checkpoint, "init_checkpoint");
    auto init_ckpt = csdr::load_checkpoint(cfg.paths.init_checkpoint, vocab);
    initial = std::move(init_ckpt.params);
  } else {
    csdr::Rng init_rng = csdr::Rng(cfg.seed).derive(1);
    initial = csdr::init_params(vocab.size(), cfg.encoder, init_rng);
  }

  auto result = csdr::finetune(std::move(initial), train_pairs, vocab,
                               cfg.encoder, cfg.train);
  write_history(run.path() / "history.jsonl", result.history);

  csdr::Checkpoint ckpt;
  ckpt.vocab_hash = vocab.hash();
  ckpt.config = cfg.encoder;
  ckpt.params = std::move(result.params);
  if (cfg.fusion_enabled) {
    if (result.head) {
      ckpt.head = std::move(result.head);
    } else {
      csdr::TrainConfig head_cfg = cfg.train;
      head_cfg.objective = csdr::Objective::sbert_head;
      ckpt.head =
          csdr::fit_head(ckpt.params, train_pairs, vocab, cfg.encoder, head_cfg);
    }
    ckpt.store = csdr::build_store(ckpt.params, cfg.encoder, vocab, train_pairs);
  } else if (result.head) {
    ckpt.head = std::move(result.head);
  }
  csdr::save_checkpoint(ckpt, (run.path() / "checkpoint.bin").string());
  run.commit();

  std::cout << "finetuned " << cfg.train.epochs << " epoch(s) on "
            << train_pairs.size() << " pairs, final mean loss "
            << result.history.back().mean_loss << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  require_path(cfg.paths.pairs, "pairs");
  require_path(cfg.paths.checkpoint, "checkpoint");
  const auto vocab = load_vocab_checked(cfg);
  const auto pairs = csdr::load_pairs(cfg.paths.pairs);

  RunDir run(cfg);
  auto ckpt = csdr::load_checkpoint(cfg.paths.checkpoint, vocab);
  auto [train_pairs, test_pairs] =
      csdr::split_pairs(pairs, cfg.split_ratio, cfg.seed);
  (void)train_pairs;

  csdr::ModelBundle bundle;
  bundle.config = ckpt.config;
  bundle.params = std::move(ckpt.params);
  bundle.head = std::move(ckpt.head);
  bundle.store = std::move(ckpt.store);
  bundle.fusion = cfg.fusion;

  const csdr::ThresholdPolicy policy{cfg.eval_best_threshold, cfg.eval_threshold};
  const auto report = csdr::evaluate_pairs(bundle, vocab, test_pairs, policy);

  std::ofstream out(run.path() / "report.json", std::ios::binary | std::ios::trunc);
  out << csdr::report_to_json(report).dump(2) << '\n';
  run.commit();

  std::cout << std::fixed << std::setprecision(4) << "n=" << report.n
            << " threshold=" << report.threshold
            << " precision=" << report.metrics.precision
            << " recall=" << report.metrics.recall << " f1=" << report.metrics.f1
            << " accuracy=" << report.metrics.accuracy
            << " spearman=" << report.spearman_score << "\n";
  return 0;
}

int cmd_index(const RunConfig& cfg) {
  require_path(cfg.paths.docs, "docs");
  require_path(cfg.paths.checkpoint, "checkpoint");
  const auto vocab = load_vocab_checked(cfg);
  const auto docs = csdr::load_sentences(cfg.paths.docs);

  RunDir run(cfg);
  auto ckpt = csdr::load_checkpoint(cfg.paths.checkpoint, vocab);
  const auto index = csdr::build_index(docs, ckpt.params, ckpt.config, vocab);
  csdr::save_index(index, vocab.hash(), (run.path() / "index.bin").string());
  run.commit();

  std::cout << "indexed " << index.embeddings.rows << " doc(s)";
  if (!index.skipped.empty()) std::cout << ", skipped " << index.skipped.size();
  std::cout << "\n";
  return 0;
}

int cmd_query(const RunConfig& cfg, const std::string& text, std::size_t k) {
  require_path(cfg.paths.checkpoint, "checkpoint");
  require_path(cfg.paths.index, "index");
  const auto vocab = load_vocab_checked(cfg);
  auto ckpt = csdr::load_checkpoint(cfg.paths.checkpoint, vocab);
  const auto index = csdr::load_index(cfg.paths.index, vocab.hash());

  const auto hits =
      csdr::query_index(text, index, ckpt.params, ckpt.config, vocab, k);
  std::cout << std::fixed << std::setprecision(6);
  for (std::size_t r = 0; r < hits.size(); ++r) {
    // rows are stored in doc_id order, so the row of a hit is found by search
    const auto it = std::lower_bound(index.doc_ids.begin(), index.doc_ids.end(),
                                     hits[r].doc_id);
    const auto row = static_cast<std::size_t>(it - index.doc_ids.begin());
    std::cout << (r + 1) << '\t' << hits[r].score << '\t' << hits[r].doc_id
              << '\t' << index.texts[row] << "\n";
  }
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  require_path(cfg.paths.corpus, "corpus");
  require_path(cfg.paths.pairs, "pairs");
  const auto vocab = load_vocab_checked(cfg);
  const auto corpus = csdr::load_sentences(cfg.paths.corpus);
  const auto pairs = csdr::load_pairs(cfg.paths.pairs);

  RunDir run(cfg);
  csdr::PipelineConfig base;
  base.encoder = cfg.encoder;
  base.train = cfg.train;
  base.pretrain_epochs = cfg.pretrain_epochs;
  base.fusion = cfg.fusion;
  base.split_ratio = cfg.split_ratio;
  base.threshold = {cfg.eval_best_threshold, cfg.eval_threshold};
  base.seed = cfg.seed;

  const auto rows =
      csdr::run_ablation(corpus, pairs, vocab, base, csdr::ablation_grid());
  const std::string table = csdr::ablation_table_text(rows);

  {
    std::ofstream out(run.path() / "table.txt", std::ios::binary | std::ios::trunc);
    out << table;
  }
  {
    std::ofstream out(run.path() / "report.json", std::ios::binary | std::ios::trunc);
    out << csdr::ablation_to_json(rows).dump(2) << '\n';
  }
  run.commit();
  std::cout << table;
  for (const auto& row : rows) {
    if (!row.ok) return 1;  // row errors are recorded; surface in the exit code
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csdr: contrastive sentence-matching and retrieval pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string arg_out, arg_text, arg_corpus, arg_vocab_out, arg_init, arg_checkpoint;
  std::size_t arg_min_freq = 1, arg_k = 10;
  std::uint64_t arg_seed = 0;
  std::size_t arg_epochs = 0;
  std::string arg_objective;
  double arg_threshold = 0.5;
  bool arg_best_threshold = false, arg_knn = false;
  csdr::SyntheticSpec syn_spec;

  auto* build_vocab = app.add_subcommand("build-vocab", "build a vocabulary file");
  build_vocab->add_option("--corpus", arg_corpus, "sentence corpus, one per line")
      ->required();
  build_vocab->add_option("--min-freq", arg_min_freq, "minimum token frequency");
  build_vocab->add_option("--out", arg_vocab_out, "output vocab path")->required();

  auto* gen = app.add_subcommand("gen-synthetic", "generate topic-structured data");
  gen->add_option("--topics", syn_spec.topics, "number of disjoint topics");
  gen->add_option("--vocab-size", syn_spec.vocab_size, "total token count");
  gen->add_option("--pairs", syn_spec.pairs, "number of labeled pairs");
  gen->add_option("--seed", syn_spec.seed, "generator seed");
  gen->add_option("--out", arg_out, "output directory")->required();

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config");
    sub->add_option("--seed", arg_seed, "override config seed");
    sub->add_option("--out", arg_out, "override paths.out_dir");
  };

  auto* pretrain = app.add_subcommand("pretrain", "contrastive pre-training");
  add_common(pretrain);
  pretrain->add_option("--epochs", arg_epochs, "override pretrain epochs");

  auto* finetune = app.add_subcommand("finetune", "supervised fine-tuning");
  add_common(finetune);
  finetune->add_option("--epochs", arg_epochs, "override finetune epochs");
  finetune->add_option("--objective", arg_objective,
                       "cosent | cosine_pair | sbert_head");
  finetune->add_option("--init", arg_init, "initial checkpoint path");
  finetune->add_flag("--knn", arg_knn, "build the fusion head and store");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate on the held-out split");
  add_common(evaluate);
  evaluate->add_option("--checkpoint", arg_checkpoint, "checkpoint to evaluate");
  evaluate->add_option("--threshold", arg_threshold, "fixed decision threshold");
  evaluate->add_flag("--best-threshold", arg_best_threshold,
                     "search the F1-optimal threshold");

  auto* index = app.add_subcommand("index", "build the retrieval index");
  add_common(index);

  auto* query = app.add_subcommand("query", "query the retrieval index");
  add_common(query);
  query->add_option("--text", arg_text, "query text")->required();
  query->add_option("--k", arg_k, "results to return");

  auto* ablate = app.add_subcommand("ablate", "run the six-configuration grid");
  add_common(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  try {
    if (build_vocab->parsed()) {
      return cmd_build_vocab(arg_corpus, arg_min_freq, arg_vocab_out);
    }
    if (gen->parsed()) {
      return cmd_gen_synthetic(syn_spec, arg_out);
    }

    RunConfig cfg = load_config(config_path);
    CLI::App* active = nullptr;
    for (CLI::App* sub : {pretrain, finetune, evaluate, index, query, ablate}) {
      if (sub->parsed()) active = sub;
    }
    if (active && active->count("--seed") > 0) {
      cfg.seed = arg_seed;
      cfg.train.seed = arg_seed;
    }
    if (active && active->count("--out") > 0) cfg.paths.out_dir = arg_out;

    if (pretrain->parsed()) {
      if (pretrain->count("--epochs") > 0) cfg.pretrain_epochs = arg_epochs;
      return cmd_pretrain(cfg);
    }
    if (finetune->parsed()) {
      if (finetune->count("--epochs") > 0) cfg.train.epochs = arg_epochs;
      if (finetune->count("--objective") > 0) {
        cfg.train.objective = csdr::objective_from_string(arg_objective);
      }
      if (finetune->count("--init") > 0) cfg.paths.init_checkpoint = arg_init;
      if (arg_knn) cfg.fusion_enabled = true;
      return cmd_finetune(cfg);
    }
    if (evaluate->parsed()) {
      if (evaluate->count("--checkpoint") > 0) cfg.paths.checkpoint = arg_checkpoint;
      if (evaluate->count("--threshold") > 0) cfg.eval_threshold = arg_threshold;
      if (arg_best_threshold) cfg.eval_best_threshold = true;
      return cmd_evaluate(cfg);
    }
    if (index->parsed()) return cmd_index(cfg);
    if (query->parsed()) return cmd_query(cfg, arg_text, arg_k);
    if (ablate->parsed()) return cmd_ablate(cfg);
    throw UsageError("no subcommand selected");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
