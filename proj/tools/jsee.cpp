// Command-line driver: corpus conversion, statistics, training, prediction
// and scoring.

#include <cstdlib>
#include <functional>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "jsee/common.hpp"
#include "jsee/corpus.hpp"
#include "jsee/embeddings.hpp"
#include "jsee/graph.hpp"
#include "jsee/nesting.hpp"
#include "jsee/parser.hpp"
#include "jsee/scorer.hpp"
#include "jsee/synthetic.hpp"
#include "jsee/trainer.hpp"
#include "run_manifest.hpp"

namespace fs = std::filesystem;
using jsee::cli::RunManifest;

namespace {

struct Common {
  std::string manifest;
  std::string span_variant;
};

std::optional<jsee::SpanVariant> variant_flag(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return jsee::parse_span_variant(s);
}

// Unresolved corpora are resolved to the requested variant (full by default).
jsee::Corpus resolve(const jsee::Corpus& c, std::optional<jsee::SpanVariant> v) {
  if (c.variant && !v) return c;
  return jsee::select_span_variant(c, v.value_or(jsee::SpanVariant::Full));
}

std::set<std::string> parse_langs(const std::string& s) {
  std::set<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item != "en" && item != "zh" && item != "es") {
      throw jsee::Error("unsupported language '" + item + "' (expected en, zh or es)");
    }
    out.insert(item);
  }
  if (out.empty()) throw jsee::Error("--langs selects no language");
  return out;
}

jsee::Corpus filter_langs(const jsee::Corpus& c, const std::set<std::string>& langs) {
  jsee::Corpus out = c;
  out.sentences.clear();
  for (const auto& s : c.sentences) {
    if (langs.count(s.lang)) out.sentences.push_back(s);
  }
  return out;
}

std::string manifest_for_file(const Common& common, const std::string& output) {
  return common.manifest.empty() ? output + ".manifest.json" : common.manifest;
}

std::string manifest_for_dir(const Common& common, const std::string& dir) {
  return common.manifest.empty() ? (fs::path(dir) / "manifest.json").string() : common.manifest;
}

void write_text(const std::string& path, const std::string& text) {
  jsee::write_file_atomic(path, text);
}

jsee::HashEmbeddingOptions hash_options(const nlohmann::json& config) {
  jsee::HashEmbeddingOptions o;
  if (config.contains("hash_embedding")) {
    const auto& h = config.at("hash_embedding");
    o.seed = h.value("seed", o.seed);
    o.layers = h.value("layers", o.layers);
    o.dim = h.value("dim", o.dim);
    o.piece_length = h.value("piece_length", o.piece_length);
  }
  return o;
}

const std::set<std::string> kConfigKeys = {
    "batch_size", "beta_1", "beta_2", "epsilon", "decoder_learning_rate", "decoder_weight_decay",
    "encoder_learning_rate", "encoder_weight_decay", "epochs", "warmup_steps", "seed",
    "ablation_no_ent_rel", "target_matching", "query_length", "n_transformer_layers",
    "hidden_size", "n_heads", "ffn_size", "hidden_size_anchor", "hidden_size_edge_label",
    "hidden_size_edge_presence", "dropout_transformer", "dropout_transformer_attention",
    "anchor_threshold", "edge_threshold", "positional_encoding", "init_seed",
    "embedding_provider", "hash_embedding", "encoder"};

void print_scores(const jsee::ScoreReport& r, const std::string& title) {
  std::cout << jsee::format_score_table(r, title);
}

// Runs `body` and writes the manifest whatever happens.
int guarded(RunManifest& manifest, const std::string& path, const std::function<void()>& body) {
  int code = 0;
  std::string error;
  try {
    body();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    code = 1;
    error = e.what();
  }
  try {
    manifest.write(path, code, error);
  } catch (const std::exception& e) {
    spdlog::error("cannot write manifest {}: {}", path, e.what());
    code = 1;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* level = std::getenv("JSEE_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
  std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Joint entity, relation and event extraction as graph parsing"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--manifest", common.manifest, "Run manifest path (default: next to the output)");

  // convert
  auto* convert = app.add_subcommand("convert", "Convert annotations <-> graphs");
  std::string conv_in, conv_out, conv_to;
  convert->add_option("--in", conv_in, "Input corpus or graph file")->required();
  convert->add_option("--out", conv_out, "Output file")->required();
  convert->add_option("--to", conv_to, "Target format (default: the other one)")
      ->check(CLI::IsMember({"graphs", "annotations"}));
  convert->add_option("--span-variant", common.span_variant, "Entity spans for encoding")
      ->check(CLI::IsMember({"head", "full"}));

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  std::string stats_in, stats_out;
  stats->add_option("--in", stats_in, "Corpus file")->required();
  stats->add_option("--out", stats_out, "JSON report")->required();

  // nesting
  auto* nesting = app.add_subcommand("nesting", "Nesting counts");
  std::string nest_in, nest_out;
  nesting->add_option("--in", nest_in, "Corpus file")->required();
  nesting->add_option("--out", nest_out, "JSON report")->required();
  nesting->add_option("--span-variant", common.span_variant, "Entity spans")
      ->check(CLI::IsMember({"head", "full"}));

  // split
  auto* split = app.add_subcommand("split", "Document-level train/dev/test split");
  std::string split_in, split_out;
  std::uint64_t split_seed = 1;
  std::vector<double> ratios(jsee::kDefaultSplitRatios.begin(), jsee::kDefaultSplitRatios.end());
  split->add_option("--in", split_in, "Corpus file")->required();
  split->add_option("--out-dir", split_out, "Directory for train/dev/test.json")->required();
  split->add_option("--seed", split_seed, "Shuffle seed");
  split->add_option("--ratios", ratios, "Train, dev and test shares")->expected(3)->delimiter(',');

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a parser");
  std::string config_path, out_dir, dev_path, provider_spec, ablation, langs;
  std::vector<std::string> train_paths;
  std::optional<std::uint64_t> train_seed;
  std::size_t eval_every = 1;
  train_cmd->add_option("--config", config_path, "JSON config (hyperparameter names)")->required();
  train_cmd->add_option("--train", train_paths, "Training corpora (several for multilingual)")
      ->required();
  train_cmd->add_option("--dev", dev_path, "Dev corpus for model selection");
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  train_cmd->add_option("--seed", train_seed, "Overrides the config seed");
  train_cmd->add_option("--span-variant", common.span_variant, "Entity spans")
      ->check(CLI::IsMember({"head", "full"}));
  train_cmd->add_option("--ablation", ablation, "Ablation")->check(CLI::IsMember({"no-ent-rel"}));
  train_cmd->add_option("--langs", langs, "Comma-separated languages to keep");
  train_cmd->add_option("--embedding-provider", provider_spec, "hash or file:<path>");
  train_cmd->add_option("--eval-every", eval_every, "Dev evaluation interval in epochs");

  // predict
  auto* predict = app.add_subcommand("predict", "Parse a corpus with a checkpoint");
  std::string ckpt, pred_in, pred_out, pred_provider;
  predict->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  predict->add_option("--in", pred_in, "Corpus to parse")->required();
  predict->add_option("--out", pred_out, "Predicted corpus")->required();
  predict->add_option("--embedding-provider", pred_provider,
                      "hash or file:<path> (default: as recorded in the checkpoint)");
  predict->add_option("--span-variant", common.span_variant, "Entity spans of the input")
      ->check(CLI::IsMember({"head", "full"}));

  // score
  auto* score_cmd = app.add_subcommand("score", "Score predictions against gold");
  std::string pred_path, gold_path, score_out, score_ablation;
  bool nested_split = false;
  score_cmd->add_option("--pred", pred_path, "Predicted corpus")->required();
  score_cmd->add_option("--gold", gold_path, "Gold corpus")->required();
  score_cmd->add_option("--out", score_out, "JSON report")->required();
  score_cmd->add_flag("--nested-split", nested_split, "Also score nested / non-nested sentences");
  score_cmd->add_option("--span-variant", common.span_variant, "Entity spans of the gold corpus")
      ->check(CLI::IsMember({"head", "full"}));
  score_cmd->add_option("--ablation", score_ablation, "Report entities/relations as n/a")
      ->check(CLI::IsMember({"no-ent-rel"}));

  // synth
  auto* synth = app.add_subcommand("synth", "Write the synthetic or figure corpus");
  std::string synth_out, synth_langs = "en,zh,es";
  jsee::SyntheticOptions synth_opts;
  bool figures = false;
  synth->add_option("--out", synth_out, "Output corpus")->required();
  synth->add_option("--seed", synth_opts.seed, "Generator seed");
  synth->add_option("--sentences", synth_opts.sentences, "Number of sentences");
  synth->add_option("--langs", synth_langs, "Comma-separated languages");
  synth->add_flag("--figures", figures, "Write the two figure sentences instead");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  RunManifest manifest(command, args);

  try {
    if (*convert) {
      return guarded(manifest, manifest_for_file(common, conv_out), [&] {
        manifest.add_input(conv_in);
        const auto j = nlohmann::json::parse(jsee::read_file(conv_in));
        const bool is_graphs = j.contains("graphs");
        const std::string to = conv_to.empty() ? (is_graphs ? "annotations" : "graphs") : conv_to;
        if (to == "graphs") {
          if (is_graphs) throw jsee::Error("input is already a graph file");
          const auto corpus = resolve(jsee::corpus_from_json(j), variant_flag(common.span_variant));
          write_text(conv_out, jsee::to_json(jsee::encode_corpus(corpus)).dump(1) + "\n");
        } else {
          if (!is_graphs) throw jsee::Error("input is not a graph file");
          write_text(conv_out, jsee::dump_canonical(
                                   jsee::decode_corpus(jsee::graph_corpus_from_json(j))));
        }
        spdlog::info("wrote {}", conv_out);
        manifest.add_output(conv_out);
      });
    }

    if (*stats) {
      return guarded(manifest, manifest_for_file(common, stats_out), [&] {
        manifest.add_input(stats_in);
        const auto s = jsee::corpus_stats(jsee::load_corpus(stats_in));
        std::cout << jsee::format_stats_table(s);
        write_text(stats_out, jsee::to_json(s).dump(2) + "\n");
        manifest.add_output(stats_out);
      });
    }

    if (*nesting) {
      return guarded(manifest, manifest_for_file(common, nest_out), [&] {
        manifest.add_input(nest_in);
        const auto corpus = resolve(jsee::load_corpus(nest_in), variant_flag(common.span_variant));
        const auto r = jsee::count_nesting(corpus);
        std::cout << jsee::format_nesting_table(r);
        write_text(nest_out, jsee::to_json(r).dump(2) + "\n");
        manifest.add_output(nest_out);
      });
    }

    if (*split) {
      return guarded(manifest, manifest_for_dir(common, split_out), [&] {
        manifest.add_input(split_in);
        manifest.set_seed(split_seed);
        const auto parts = jsee::split_corpus(jsee::load_corpus(split_in),
                                              {ratios[0], ratios[1], ratios[2]}, split_seed);
        fs::create_directories(split_out);
        const char* names[] = {"train.json", "dev.json", "test.json"};
        for (int i = 0; i < 3; ++i) {
          const std::string p = (fs::path(split_out) / names[i]).string();
          jsee::save_corpus(parts[i], p);
          manifest.add_output(p);
          spdlog::info("{}: {} sentences", p, parts[i].sentences.size());
        }
      });
    }

    if (*train_cmd) {
      return guarded(manifest, manifest_for_dir(common, out_dir), [&] {
        manifest.set_config(config_path);
        manifest.add_input(config_path);
        const auto raw = nlohmann::json::parse(jsee::read_file(config_path));
        for (const auto& [key, value] : raw.items()) {
          if (!kConfigKeys.count(key)) spdlog::warn("unknown config key '{}' ignored", key);
        }
        nlohmann::json cfg_json = raw;
        if (train_seed) cfg_json["seed"] = *train_seed;
        if (!ablation.empty()) cfg_json["ablation_no_ent_rel"] = true;
        const jsee::TrainConfig config = jsee::train_config_from_json(cfg_json);
        manifest.set_seed(config.seed);

        const auto variant = variant_flag(common.span_variant);
        std::optional<std::set<std::string>> keep;
        if (!langs.empty()) keep = parse_langs(langs);
        std::vector<jsee::Corpus> corpora;
        for (const auto& p : train_paths) {
          manifest.add_input(p);
          auto c = resolve(jsee::load_corpus(p), variant);
          if (keep) c = filter_langs(c, *keep);
          corpora.push_back(std::move(c));
        }
        std::optional<jsee::Corpus> dev;
        if (!dev_path.empty()) {
          manifest.add_input(dev_path);
          dev = resolve(jsee::load_corpus(dev_path), variant);
          if (keep) dev = filter_langs(*dev, *keep);
        }
        const std::string spec =
            !provider_spec.empty() ? provider_spec : raw.value("embedding_provider", "hash");
        const auto provider = jsee::make_provider(spec, hash_options(raw));

        jsee::Parser parser = jsee::make_parser(config, corpora.front().ontology, *provider);
        spdlog::info("training {} parameters on {} corpora", parser.params().scalar_count(),
                     corpora.size());
        jsee::TrainOptions options;
        options.output_dir = out_dir;
        options.eval_every = eval_every;
        options.on_epoch = [](const jsee::EpochLog& e) {
          if (e.dev) {
            spdlog::info("epoch {} loss {:.4f} dev Arg-C {:.4f}{}", e.epoch, e.loss.total(),
                         (*e.dev)[jsee::Metric::ArgC].f1(), e.best ? " (best)" : "");
          } else {
            spdlog::info("epoch {} loss {:.4f}", e.epoch, e.loss.total());
          }
        };
        const auto result =
            jsee::train(parser, config, corpora, dev ? &*dev : nullptr, *provider, options);
        if (dev) spdlog::info("best epoch {} (dev Arg-C {:.4f})", result.best_epoch,
                              result.best_dev_arg_c);
        manifest.add_output(out_dir);
      });
    }

    if (*predict) {
      return guarded(manifest, manifest_for_file(common, pred_out), [&] {
        manifest.add_input(ckpt);
        manifest.add_input(pred_in);
        const auto loaded = jsee::load_checkpoint(ckpt);
        const auto provider = pred_provider.empty()
                                  ? jsee::provider_from_provenance(loaded.provenance)
                                  : jsee::make_provider(pred_provider);
        auto input = jsee::load_corpus(pred_in);
        if (!common.span_variant.empty() || !input.variant) {
          input = resolve(input, variant_flag(common.span_variant));
        }
        const auto pred = jsee::predict_corpus(*loaded.parser, input, *provider);
        jsee::save_corpus(pred, pred_out);
        spdlog::info("wrote {} predicted sentences to {}", pred.sentences.size(), pred_out);
        manifest.add_output(pred_out);
      });
    }

    if (*score_cmd) {
      return guarded(manifest, manifest_for_file(common, score_out), [&] {
        manifest.add_input(pred_path);
        manifest.add_input(gold_path);
        const auto pred = jsee::corpus_from_json(
            nlohmann::json::parse(jsee::read_file(pred_path)), "");
        const auto gold = resolve(jsee::load_corpus(gold_path), variant_flag(common.span_variant));
        const bool event_only = !score_ablation.empty() ||
                                pred.ontology.name.ends_with("+event-only");
        const auto report = jsee::score(pred.sentences, gold.sentences, !event_only);
        print_scores(report, "all sentences");
        nlohmann::ordered_json j;
        j["all"] = jsee::to_json(report);
        if (nested_split) {
          const auto parts = jsee::score_partitioned(pred.sentences, gold.sentences, !event_only);
          print_scores(parts.nested, "nested");
          print_scores(parts.non_nested, "non-nested");
          j["nested"] = jsee::to_json(parts.nested);
          j["non_nested"] = jsee::to_json(parts.non_nested);
        }
        write_text(score_out, j.dump(2) + "\n");
        manifest.add_output(score_out);
      });
    }

    if (*synth) {
      return guarded(manifest, manifest_for_file(common, synth_out), [&] {
        manifest.set_seed(synth_opts.seed);
        jsee::Corpus c;
        if (figures) {
          c = jsee::figure_corpus();
        } else {
          const auto l = parse_langs(synth_langs);
          synth_opts.langs.clear();
          for (const char* lang : {"en", "zh", "es"}) {
            if (l.count(lang)) synth_opts.langs.emplace_back(lang);
          }
          c = jsee::make_synthetic_corpus(synth_opts);
        }
        jsee::save_corpus(c, synth_out);
        manifest.add_output(synth_out);
      });
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
