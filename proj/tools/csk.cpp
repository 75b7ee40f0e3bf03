// csk: parse causal-span markup, build datasets and prompts, run an
// OpenAI-compatible model over them, and score the results.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "csk/agreement.hpp"
#include "csk/corpus.hpp"
#include "csk/evalx.hpp"
#include "csk/hash.hpp"
#include "csk/json_io.hpp"
#include "csk/llmgateway.hpp"
#include "csk/markup.hpp"
#include "csk/promptkit.hpp"
#include "csk/textsim.hpp"
#include "csk/tokenlab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("short write to " + path);
}

std::string digest_hex(const std::string& content) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(csk::fnv1a64(content)));
  return buf;
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string sanitize_id(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out;
}

// Run persistence: every command that writes results appends one record.
struct RunContext {
  std::string run_log;
  std::string command;
  json config = json::object();
  json inputs = json::array();
  json outputs = json::array();
  json report;  // null unless the command produced one

  void add_input(const std::string& path, const std::string& content) {
    inputs.push_back({{"path", path}, {"fnv1a64", digest_hex(content)}});
  }
  void add_output(const std::string& path) {
    if (path != "-") outputs.push_back(path);
  }

  void persist() {
    const std::string ts = iso_timestamp();
    std::uint64_t h = csk::fnv1a64(command);
    h = csk::fnv1a64(config.dump(), h);
    h = csk::fnv1a64(ts, h);
    const std::uint64_t h2 = csk::fnv1a64(inputs.dump(), h);
    char run_id[40];
    std::snprintf(run_id, sizeof run_id, "%08x-%04x-4%03x-%04x-%012llx",
                  static_cast<unsigned>(h >> 32),
                  static_cast<unsigned>((h >> 16) & 0xFFFF),
                  static_cast<unsigned>(h & 0xFFF),
                  static_cast<unsigned>(0x8000 | ((h2 >> 48) & 0x3FFF)),
                  static_cast<unsigned long long>(h2 & 0xFFFFFFFFFFFFull));
    json record = {{"run_id", run_id},      {"command", command},
                   {"config", config},      {"inputs", inputs},
                   {"outputs", outputs},    {"report", report},
                   {"timestamp", ts}};
    std::ofstream out(run_log, std::ios::app);
    if (!out) throw IoError("cannot append run record to " + run_log);
    out << record.dump() << "\n";
    std::cerr << "run " << run_id << " recorded in " << run_log << "\n";
  }
};

csk::markup::ParseMode parse_mode(const std::string& mode) {
  if (mode == "strict") return csk::markup::ParseMode::Strict;
  if (mode == "lenient") return csk::markup::ParseMode::Lenient;
  throw std::invalid_argument("mode must be strict or lenient");
}

std::string stem_of(const std::string& path) {
  return fs::path(path).stem().string();
}

std::vector<csk::corpus::CorpusRecord> load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return csk::jsonio::read_corpus_jsonl(in);
}

// Gold inputs may be a prepared corpus (.jsonl) or raw tagged text.
std::vector<csk::corpus::CorpusRecord> load_gold(const std::string& path) {
  if (path.ends_with(".jsonl")) return load_corpus_file(path);
  return csk::corpus::build_corpus({{stem_of(path), read_file(path)}});
}

// Shared gateway options for run-llm and eval-phrases --embedder remote.
struct GatewayOptions {
  csk::gateway::GatewayConfig cfg;
  bool fake_server = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--base-url", cfg.base_url, "OpenAI-compatible endpoint root")
        ->capture_default_str();
    cmd->add_option("--model", cfg.model_name, "model name")->capture_default_str();
    cmd->add_option("--embed-model", cfg.embed_model_name, "embeddings model name")
        ->capture_default_str();
    cmd->add_option("--api-key-env", cfg.api_key_env,
                    "environment variable holding the API key; empty sends no "
                    "Authorization header")
        ->capture_default_str();
    cmd->add_option("--temperature", cfg.temperature, "sampling temperature")
        ->capture_default_str();
    cmd->add_option("--max-tokens", cfg.max_output_tokens, "completion budget")
        ->capture_default_str();
    cmd->add_option("--timeout", cfg.timeout_seconds, "request timeout, seconds")
        ->capture_default_str();
    cmd->add_option("--max-retries", cfg.max_retries,
                    "retries for transient failures")
        ->capture_default_str();
    cmd->add_option("--max-in-flight", cfg.max_in_flight,
                    "concurrent request bound")
        ->capture_default_str();
    cmd->add_option("--cache", cfg.cache_path,
                    "append-only JSONL completion cache");
    cmd->add_flag("--fake-server", fake_server,
                  "serve requests from the built-in deterministic fake");
  }

  json to_json() const {
    return {{"base_url", cfg.base_url},
            {"model", cfg.model_name},
            {"embed_model", cfg.embed_model_name},
            {"api_key_env", cfg.api_key_env},
            {"temperature", cfg.temperature},
            {"max_tokens", cfg.max_output_tokens},
            {"timeout", cfg.timeout_seconds},
            {"max_retries", cfg.max_retries},
            {"max_in_flight", cfg.max_in_flight},
            {"cache", cfg.cache_path},
            {"fake_server", fake_server}};
  }
};

// Deterministic stand-in model: tags the first half of the target sentence
// as cause and the rest as effect. Enough to drive the pipeline end to end
// without a network.
std::string fake_extraction(const std::string& prompt) {
  std::string target = prompt;
  const auto pos = prompt.rfind("Input: ");
  if (pos != std::string::npos) target = prompt.substr(pos + 7);
  const auto end = target.find("\nOutput:");
  if (end != std::string::npos) target = target.substr(0, end);

  std::istringstream words(target);
  std::vector<std::string> tokens;
  std::string w;
  while (words >> w) tokens.push_back(w);
  if (tokens.empty()) return "";
  const std::size_t half = (tokens.size() + 1) / 2;
  std::string out = "<C>";
  for (std::size_t i = 0; i < half; ++i) {
    if (i) out += " ";
    out += tokens[i];
  }
  out += "</C>";
  if (half < tokens.size()) {
    out += " <E>";
    for (std::size_t i = half; i < tokens.size(); ++i) {
      if (i > half) out += " ";
      out += tokens[i];
    }
    out += "</E>";
  }
  return out;
}

std::unique_ptr<csk::gateway::GatewayClient> make_client(
    const GatewayOptions& opts) {
  if (opts.fake_server) {
    auto fake = std::make_shared<csk::gateway::FakeTransport>();
    fake->set_responder(fake_extraction);
    auto cfg = opts.cfg;
    cfg.api_key_env.clear();
    return std::make_unique<csk::gateway::GatewayClient>(cfg, fake);
  }
  return std::make_unique<csk::gateway::GatewayClient>(opts.cfg);
}

// ---------------------------------------------------------------------------
// parse

struct ParseArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> doc_ids;
  std::string mode = "lenient";
  std::string out = "-";
  std::string corpus_out;
};

void run_parse(const ParseArgs& args, RunContext& run) {
  const auto mode = parse_mode(args.mode);
  if (!args.doc_ids.empty() && args.doc_ids.size() != args.inputs.size()) {
    throw std::invalid_argument("--doc-id count must match --in count");
  }

  json documents = json::array();
  std::vector<csk::corpus::CorpusRecord> records;
  std::size_t diagnostics_total = 0;
  for (std::size_t i = 0; i < args.inputs.size(); ++i) {
    const std::string text = read_file(args.inputs[i]);
    run.add_input(args.inputs[i], text);
    const std::string doc_id =
        i < args.doc_ids.size() ? args.doc_ids[i] : stem_of(args.inputs[i]);
    const auto parsed = csk::corpus::parse_document(doc_id, text, mode);
    json sentences = json::array();
    for (std::size_t s = 0; s < parsed.doc.sentences.size(); ++s) {
      sentences.push_back(csk::jsonio::sentence_to_json(parsed.doc.sentences[s],
                                                        parsed.diagnostics[s]));
      diagnostics_total += parsed.diagnostics[s].size();
      csk::corpus::CorpusRecord rec;
      rec.doc_id = doc_id;
      rec.is_causal = !parsed.doc.sentences[s].phrases.empty();
      rec.sentence = parsed.doc.sentences[s];
      records.push_back(std::move(rec));
    }
    documents.push_back({{"doc_id", doc_id}, {"sentences", sentences}});
  }

  write_file(args.out, json{{"documents", documents}}.dump(2) + "\n");
  run.add_output(args.out);
  if (!args.corpus_out.empty()) {
    std::ostringstream ss;
    csk::jsonio::write_corpus_jsonl(ss, records);
    write_file(args.corpus_out, ss.str());
    run.add_output(args.corpus_out);
  }

  std::size_t causal = 0;
  for (const auto& rec : records) causal += rec.is_causal;
  run.report = {{"type", "parse_summary"},
                {"sentences", records.size()},
                {"causal_sentences", causal},
                {"diagnostics", diagnostics_total}};
  run.persist();
}

// ---------------------------------------------------------------------------
// tokens

struct TokensArgs {
  std::string input;
  std::string mode = "lenient";
  std::string out = "-";
  std::string doc_id;
};

void run_tokens(const TokensArgs& args, RunContext& run) {
  const std::string text = read_file(args.input);
  run.add_input(args.input, text);
  const std::string doc_id = args.doc_id.empty() ? stem_of(args.input) : args.doc_id;
  const auto parsed =
      csk::corpus::parse_document(doc_id, text, parse_mode(args.mode));
  std::vector<csk::tokenlab::TokenLabelSeq> sequences;
  for (const auto& sentence : parsed.doc.sentences) {
    sequences.push_back(csk::tokenlab::to_token_labels(sentence));
  }
  std::ostringstream ss;
  csk::tokenlab::write_conll(ss, sequences);
  write_file(args.out, ss.str());
  run.add_output(args.out);
  run.report = {{"type", "tokens_summary"}, {"sentences", sequences.size()}};
  run.persist();
}

// ---------------------------------------------------------------------------
// split

struct SplitArgs {
  std::string input;
  double holdout = 0.0;
  int kfold = 0;
  std::uint64_t seed = 0;
  bool group_by_doc = false;
  std::string out = "-";
};

void run_split(const SplitArgs& args, RunContext& run) {
  const std::string content = read_file(args.input);
  run.add_input(args.input, content);
  std::istringstream in(content);
  const auto records = csk::jsonio::read_corpus_jsonl(in);

  if ((args.holdout > 0.0) == (args.kfold > 0)) {
    throw std::invalid_argument("choose exactly one of --holdout or --kfold");
  }
  csk::corpus::SplitSpec spec;
  spec.seed = args.seed;
  if (args.holdout > 0.0) {
    spec.mode = csk::corpus::HoldoutMode{args.holdout};
  } else {
    spec.mode = csk::corpus::KFoldMode{args.kfold};
  }
  const auto result = args.group_by_doc
                          ? csk::corpus::split_grouped(records, spec)
                          : csk::corpus::split(records.size(), spec);
  const json manifest = csk::jsonio::split_to_json(result);
  write_file(args.out, manifest.dump(2) + "\n");
  run.add_output(args.out);
  run.report = {{"type", "split_summary"},
                {"records", records.size()},
                {"spec", manifest["spec"]}};
  run.persist();
}

// ---------------------------------------------------------------------------
// agreement

struct AgreementArgs {
  std::string file_a;
  std::string file_b;
  std::string pairing = "greedy";
  std::string mode = "lenient";
  std::string out = "-";
  std::string csv;
  bool table = false;
};

void run_agreement(const AgreementArgs& args, RunContext& run) {
  const std::string text_a = read_file(args.file_a);
  const std::string text_b = read_file(args.file_b);
  run.add_input(args.file_a, text_a);
  run.add_input(args.file_b, text_b);
  const auto mode = parse_mode(args.mode);

  const auto doc_a = csk::corpus::parse_document("a", text_a, mode);
  const auto doc_b = csk::corpus::parse_document("b", text_b, mode);

  // Annotators tag the same underlying text, so sentences are matched by
  // their normalized plain form, not by position.
  auto normalize = [](const std::string& s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        pending = !out.empty();
        continue;
      }
      if (pending) out += ' ';
      pending = false;
      out += c;
    }
    return out;
  };

  std::vector<csk::agreement::SentenceInfo> inventory;
  std::map<std::string, std::vector<std::size_t>> by_text;  // -> inventory slots
  std::vector<csk::markup::Phrase> phrases_a, phrases_b;

  for (const auto& sentence : doc_a.doc.sentences) {
    const std::string id = "s" + std::to_string(inventory.size());
    by_text[normalize(sentence.plain)].push_back(inventory.size());
    inventory.push_back({id, sentence.plain});
    for (auto p : sentence.phrases) {
      p.sentence_id = id;
      phrases_a.push_back(std::move(p));
    }
  }
  std::map<std::string, std::size_t> used;  // duplicate sentences pair in order
  std::size_t only_b = 0;
  for (const auto& sentence : doc_b.doc.sentences) {
    const std::string key = normalize(sentence.plain);
    std::string id;
    const auto it = by_text.find(key);
    std::size_t& seen = used[key];
    if (it != by_text.end() && seen < it->second.size()) {
      id = inventory[it->second[seen]].id;
      ++seen;
    } else {
      id = "s" + std::to_string(inventory.size());
      inventory.push_back({id, sentence.plain});
      ++only_b;
    }
    for (auto p : sentence.phrases) {
      p.sentence_id = id;
      phrases_b.push_back(std::move(p));
    }
  }
  if (only_b > 0) {
    std::cerr << "warning: " << only_b
              << " sentence(s) in --b have no counterpart in --a\n";
  }

  if (args.pairing != "optimal" && args.pairing != "greedy") {
    throw std::invalid_argument("--pairing must be greedy or optimal");
  }
  const auto pairing_mode = args.pairing == "optimal"
                                ? csk::agreement::PairingMode::Optimal
                                : csk::agreement::PairingMode::Greedy;
  const auto rows = csk::agreement::merge_annotations(phrases_a, phrases_b,
                                                      inventory, pairing_mode);
  const auto report = csk::agreement::compute_agreement(rows);
  const json report_json = csk::jsonio::agreement_report_to_json(report);

  write_file(args.out, report_json.dump(2) + "\n");
  run.add_output(args.out);
  if (!args.csv.empty()) {
    write_file(args.csv, csk::agreement::merged_to_csv(rows));
    run.add_output(args.csv);
  }
  if (args.table) std::cout << csk::agreement::render_tables(report);

  run.report = report_json;
  run.persist();
}

// ---------------------------------------------------------------------------
// make-prompts

struct MakePromptsArgs {
  std::string corpus;
  std::size_t shots = 10;
  std::uint64_t seed = 0;
  std::string instruction{csk::promptkit::kDefaultInstruction};
  std::string instruction_file;
  std::string manifest;
  std::string pool = "train";
  std::string targets;
  std::string out_dir = "prompts";
};

std::vector<std::size_t> partition_indices(const csk::corpus::SplitResult& split,
                                           const std::string& which,
                                           std::size_t total) {
  if (which == "all") {
    std::vector<std::size_t> all(total);
    for (std::size_t i = 0; i < total; ++i) all[i] = i;
    return all;
  }
  if (const auto* h = std::get_if<csk::corpus::HoldoutSplit>(&split.partitions)) {
    if (which == "train") return h->train;
    if (which == "test") return h->test;
  } else {
    const auto& folds = std::get<csk::corpus::FoldSplit>(split.partitions);
    if (which.rfind("fold:", 0) == 0) {
      const std::size_t f = std::stoul(which.substr(5));
      if (f >= folds.size()) throw std::invalid_argument("fold index out of range");
      return folds[f];
    }
    if (which.rfind("notfold:", 0) == 0) {  // cross-validation train side
      const std::size_t f = std::stoul(which.substr(8));
      if (f >= folds.size()) throw std::invalid_argument("fold index out of range");
      std::vector<std::size_t> rest;
      for (std::size_t k = 0; k < folds.size(); ++k) {
        if (k == f) continue;
        rest.insert(rest.end(), folds[k].begin(), folds[k].end());
      }
      return rest;
    }
    if (which == "train" || which == "test") {
      throw std::invalid_argument(
          "manifest holds k-fold partitions; use fold:<i>, notfold:<i> or all");
    }
  }
  throw std::invalid_argument("unknown partition '" + which + "'");
}

void run_make_prompts(const MakePromptsArgs& args, RunContext& run) {
  const std::string content = read_file(args.corpus);
  run.add_input(args.corpus, content);
  std::istringstream in(content);
  const auto records = csk::jsonio::read_corpus_jsonl(in);

  std::string instruction = args.instruction;
  if (!args.instruction_file.empty()) {
    instruction = read_file(args.instruction_file);
    while (!instruction.empty() &&
           (instruction.back() == '\n' || instruction.back() == '\r')) {
      instruction.pop_back();
    }
  }

  std::vector<std::size_t> pool_idx, target_idx;
  if (!args.manifest.empty()) {
    const std::string manifest_text = read_file(args.manifest);
    run.add_input(args.manifest, manifest_text);
    const auto split = csk::jsonio::split_from_json(json::parse(manifest_text));
    pool_idx = partition_indices(split, args.pool, records.size());
    target_idx = partition_indices(
        split, args.targets.empty() ? "test" : args.targets, records.size());
  } else {
    for (std::size_t i = 0; i < records.size(); ++i) {
      pool_idx.push_back(i);
      target_idx.push_back(i);
    }
  }

  fs::create_directories(args.out_dir);
  std::size_t written = 0;
  for (const std::size_t t : target_idx) {
    if (t >= records.size()) {
      throw std::invalid_argument("manifest index out of range");
    }
    const auto& target = records[t].sentence;
    csk::promptkit::PromptSpec spec;
    spec.shots = args.shots;
    spec.selection_seed = args.seed;
    spec.instruction = instruction;
    for (const std::size_t p : pool_idx) {
      if (p == t || !records[p].is_causal) continue;  // causal shots only
      spec.example_pool.push_back(records[p].sentence);
    }
    const std::string prompt = csk::promptkit::build_prompt(spec, target.plain);
    const fs::path path =
        fs::path(args.out_dir) / (sanitize_id(target.sentence_id) + ".txt");
    write_file(path.string(), prompt);
    ++written;
  }
  run.add_output(args.out_dir);
  run.config["resolved_instruction"] = instruction;
  run.report = {{"type", "prompts_summary"},
                {"prompts", written},
                {"shots", args.shots}};
  run.persist();
  std::cerr << written << " prompt(s) written to " << args.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// export-instruct

struct ExportInstructArgs {
  std::string corpus;
  std::string instruction{csk::promptkit::kDefaultListInstruction};
  std::string out = "-";
  std::string mode = "train";
  bool causal_only = false;
};

void run_export_instruct(const ExportInstructArgs& args, RunContext& run) {
  const std::string content = read_file(args.corpus);
  run.add_input(args.corpus, content);
  std::istringstream in(content);
  const auto records = csk::jsonio::read_corpus_jsonl(in);

  if (args.mode != "test" && args.mode != "train") {
    throw std::invalid_argument("--mode must be train or test");
  }
  std::vector<csk::markup::AnnotatedSentence> sentences;
  for (const auto& rec : records) {
    if (args.causal_only && !rec.is_causal) continue;
    sentences.push_back(rec.sentence);
  }
  const auto mode = args.mode == "test" ? csk::promptkit::ExportMode::Test
                                        : csk::promptkit::ExportMode::Train;
  std::string out;
  for (const auto& rec :
       csk::promptkit::export_instruct(sentences, args.instruction, mode)) {
    out += csk::promptkit::render_instruct_line(rec);
    out += "\n";
  }
  write_file(args.out, out);
  run.add_output(args.out);
  run.report = {{"type", "instruct_summary"}, {"records", sentences.size()}};
  run.persist();
}

// ---------------------------------------------------------------------------
// run-llm

struct RunLlmArgs {
  std::string prompts_dir;
  std::string out = "responses.jsonl";
  GatewayOptions gateway;
};

int run_run_llm(const RunLlmArgs& args, RunContext& run) {
  if (!fs::is_directory(args.prompts_dir)) {
    throw IoError("prompt directory " + args.prompts_dir + " does not exist");
  }
  std::vector<fs::path> prompt_files;
  for (const auto& entry : fs::directory_iterator(args.prompts_dir)) {
    if (entry.path().extension() == ".txt") prompt_files.push_back(entry.path());
  }
  std::sort(prompt_files.begin(), prompt_files.end());
  if (prompt_files.empty()) {
    throw std::invalid_argument("no .txt prompts in " + args.prompts_dir);
  }

  std::vector<std::string> prompts;
  for (const auto& path : prompt_files) {
    prompts.push_back(read_file(path.string()));
    run.add_input(path.string(), prompts.back());
  }

  const auto client = make_client(args.gateway);
  const auto results = client->complete_batch(prompts);

  std::string out;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string sid = prompt_files[i].stem().string();
    if (results[i].ok) {
      char hash[24];
      std::snprintf(hash, sizeof hash, "%016llx",
                    static_cast<unsigned long long>(
                        csk::gateway::GatewayClient::prompt_key(
                            prompts[i], client->config().model_name,
                            client->config().temperature)));
      out += json{{"sentence_id", sid},
                  {"prompt_hash", hash},
                  {"response", results[i].text}}
                 .dump() +
             "\n";
    } else {
      ++failures;
      std::cerr << "error: prompt " << sid << ": "
                << csk::gateway::error_kind_name(results[i].kind) << ": "
                << results[i].error << "\n";
    }
  }
  write_file(args.out, out);
  run.add_output(args.out);
  run.config["gateway"] = args.gateway.to_json();
  run.report = {{"type", "llm_summary"},
                {"prompts", prompts.size()},
                {"failures", failures}};
  run.persist();
  if (failures > 0) {
    std::cerr << failures << " of " << prompts.size() << " prompts failed\n";
    return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval-tokens

struct EvalTokensArgs {
  std::string gold;
  std::string pred;
  bool repair = false;
  bool include_other = false;
  std::string out = "-";
  std::string csv;
  bool table = false;
};

void run_eval_tokens(const EvalTokensArgs& args, RunContext& run) {
  const std::string gold_text = read_file(args.gold);
  const std::string pred_text = read_file(args.pred);
  run.add_input(args.gold, gold_text);
  run.add_input(args.pred, pred_text);
  std::istringstream gin(gold_text), pin(pred_text);
  const auto gold = csk::tokenlab::read_conll(gin);
  const auto pred = csk::tokenlab::read_conll(pin);
  if (gold.size() != pred.size()) {
    throw std::invalid_argument(
        "gold and prediction files hold different sentence counts (" +
        std::to_string(gold.size()) + " vs " + std::to_string(pred.size()) + ")");
  }

  csk::tokenlab::TokenLabelSeq gold_all, pred_all;
  csk::tokenlab::RepairStats repairs;
  std::size_t repaired_sentences = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    csk::tokenlab::TokenLabelSeq fixed = pred[i];
    if (gold[i].tokens.size() != pred[i].tokens.size()) {
      if (!args.repair) {
        throw std::invalid_argument(
            "sentence " + std::to_string(i) +
            " lengths differ; re-run with --repair to align them");
      }
      const auto alignment = csk::tokenlab::align(gold[i].tokens, pred[i].tokens);
      auto result =
          csk::tokenlab::project_labels(alignment, pred[i], gold[i].tokens);
      fixed = std::move(result.repaired);
      repairs.inserted_other += result.stats.inserted_other;
      repairs.dropped_pred += result.stats.dropped_pred;
      repairs.substitutions += result.stats.substitutions;
      ++repaired_sentences;
    }
    gold_all.tokens.insert(gold_all.tokens.end(), gold[i].tokens.begin(),
                           gold[i].tokens.end());
    gold_all.labels.insert(gold_all.labels.end(), gold[i].labels.begin(),
                           gold[i].labels.end());
    pred_all.tokens.insert(pred_all.tokens.end(), fixed.tokens.begin(),
                           fixed.tokens.end());
    pred_all.labels.insert(pred_all.labels.end(), fixed.labels.begin(),
                           fixed.labels.end());
  }

  const auto report =
      csk::evalx::eval_tokens(gold_all, pred_all, !args.include_other);
  json report_json = csk::jsonio::token_eval_to_json(report);
  if (repaired_sentences > 0) {
    report_json["repair"] = {{"sentences", repaired_sentences},
                             {"inserted_other", repairs.inserted_other},
                             {"dropped_pred", repairs.dropped_pred},
                             {"substitutions", repairs.substitutions}};
    std::cerr << "repaired " << repaired_sentences << " sentence(s): +"
              << repairs.inserted_other << " O tokens, -" << repairs.dropped_pred
              << " predicted tokens\n";
  }
  write_file(args.out, report_json.dump(2) + "\n");
  run.add_output(args.out);
  if (!args.csv.empty()) {
    write_file(args.csv, csk::evalx::to_csv(report));
    run.add_output(args.csv);
  }
  if (args.table) std::cout << csk::evalx::render_table(report);
  run.report = report_json;
  run.persist();
}

// ---------------------------------------------------------------------------
// eval-phrases

struct EvalPhrasesArgs {
  std::string gold;
  std::string pred;
  std::string pred_format = "tagged";
  std::string embedder = "bow";
  std::size_t bow_dim = 512;
  std::string name = "run";
  std::string out = "-";
  std::string csv;
  bool table = false;
  GatewayOptions gateway;
};

void run_eval_phrases(const EvalPhrasesArgs& args, RunContext& run) {
  const auto gold_records = load_gold(args.gold);
  run.add_input(args.gold, read_file(args.gold));
  std::vector<csk::markup::Phrase> gold_phrases;
  for (const auto& rec : gold_records) {
    for (const auto& p : rec.sentence.phrases) gold_phrases.push_back(p);
  }

  if (args.pred_format != "tagged" && args.pred_format != "instruct") {
    throw std::invalid_argument("--pred-format must be tagged or instruct");
  }
  auto parse_prediction = [&](const std::string& text, const std::string& sid) {
    return args.pred_format == "tagged"
               ? csk::promptkit::parse_tagged_output(text, sid)
               : csk::promptkit::parse_instruct_output(text, sid);
  };

  const std::string pred_text = read_file(args.pred);
  run.add_input(args.pred, pred_text);
  std::vector<csk::evalx::PredictedPhrase> predictions;
  std::size_t parse_notes = 0;
  if (args.pred.ends_with(".jsonl")) {
    std::istringstream in(pred_text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("sentence_id") ||
          !j.contains("response")) {
        throw std::invalid_argument(
            "prediction lines need sentence_id and response fields");
      }
      auto parsed = parse_prediction(j["response"].get<std::string>(),
                                     j["sentence_id"].get<std::string>());
      parse_notes += parsed.diagnostics.size();
      for (auto& p : parsed.phrases) predictions.push_back(std::move(p));
    }
  } else {
    // Plain text: line i corresponds to gold sentence i.
    std::istringstream in(pred_text);
    std::string line;
    std::size_t index = 0;
    while (std::getline(in, line)) {
      if (index >= gold_records.size()) {
        throw std::invalid_argument(
            "more prediction lines than gold sentences; use responses.jsonl "
            "for id-keyed predictions");
      }
      auto parsed =
          parse_prediction(line, gold_records[index].sentence.sentence_id);
      parse_notes += parsed.diagnostics.size();
      for (auto& p : parsed.phrases) predictions.push_back(std::move(p));
      ++index;
    }
  }
  if (parse_notes > 0) {
    std::cerr << parse_notes << " parse diagnostic(s) while reading predictions\n";
  }

  std::unique_ptr<csk::textsim::Embedder> bow;
  std::unique_ptr<csk::gateway::GatewayClient> client;
  std::unique_ptr<csk::gateway::RemoteEmbedder> remote;
  csk::textsim::Embedder* embedder = nullptr;
  if (args.embedder == "bow") {
    bow = std::make_unique<csk::textsim::BowEmbedder>(args.bow_dim);
    embedder = bow.get();
  } else if (args.embedder == "remote") {
    client = make_client(args.gateway);
    remote = std::make_unique<csk::gateway::RemoteEmbedder>(*client);
    embedder = remote.get();
  } else {
    throw std::invalid_argument("--embedder must be bow or remote");
  }

  const auto report =
      csk::evalx::eval_phrases(gold_phrases, predictions, *embedder);
  json report_json = csk::jsonio::phrase_eval_to_json(report);
  report_json["missing_label_rate"] = csk::evalx::missing_label_rate(predictions);
  report_json["run_name"] = args.name;

  write_file(args.out, report_json.dump(2) + "\n");
  run.add_output(args.out);
  if (!args.csv.empty()) {
    write_file(args.csv, csk::evalx::to_csv(report));
    run.add_output(args.csv);
  }
  if (args.table) std::cout << csk::evalx::render_table(report, args.name);
  run.report = report_json;
  run.persist();
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string run_log = "csk_runs.jsonl";
  std::string id;
  bool latest = false;
  std::string format = "md";
  std::string out = "-";
};

std::string json_table_md(const json& array_of_objects) {
  std::vector<std::string> columns;
  for (const auto& row : array_of_objects) {
    for (const auto& [key, value] : row.items()) {
      if (std::find(columns.begin(), columns.end(), key) == columns.end()) {
        columns.push_back(key);
      }
    }
  }
  std::sort(columns.begin(), columns.end());
  const auto label_it = std::find(columns.begin(), columns.end(), "label");
  if (label_it != columns.end()) {
    columns.erase(label_it);
    columns.insert(columns.begin(), "label");
  }
  std::string md = "|";
  for (const auto& c : columns) md += " " + c + " |";
  md += "\n|";
  for (std::size_t i = 0; i < columns.size(); ++i) md += " --- |";
  md += "\n";
  for (const auto& row : array_of_objects) {
    md += "|";
    for (const auto& c : columns) {
      md += " ";
      if (row.contains(c)) {
        md += row[c].is_string() ? row[c].get<std::string>() : row[c].dump();
      }
      md += " |";
    }
    md += "\n";
  }
  return md;
}

void run_report(const ReportArgs& args) {
  const std::string content = read_file(args.run_log);
  std::istringstream in(content);
  std::string line;
  json selected;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) continue;
    if (args.latest || record.value("run_id", "") == args.id) selected = record;
    if (!args.latest && !selected.is_null()) break;
  }
  if (selected.is_null()) {
    throw std::invalid_argument(args.latest ? "run log is empty"
                                            : "run id not found: " + args.id);
  }

  std::string out;
  if (args.format == "md") {
    out += "# Run " + selected.value("run_id", "") + "\n\n";
    out += "- command: " + selected.value("command", "") + "\n";
    out += "- timestamp: " + selected.value("timestamp", "") + "\n";
    out += "- config: `" + selected["config"].dump() + "`\n\n";
    const json& report = selected["report"];
    if (report.is_object()) {
      out += "## Report\n\n";
      json scalars = json::array();
      for (const auto& [key, value] : report.items()) {
        if (value.is_array()) {
          out += "### " + key + "\n\n" + json_table_md(value) + "\n";
        } else {
          scalars.push_back({{"metric", key}, {"value", value}});
        }
      }
      out += "### metrics\n\n" + json_table_md(scalars);
    }
  } else if (args.format == "csv") {
    const json& report = selected["report"];
    out += "metric,value\n";
    if (report.is_object()) {
      for (const auto& [key, value] : report.items()) {
        if (value.is_array() || value.is_object()) continue;
        out += key + "," +
               (value.is_string() ? value.get<std::string>() : value.dump()) +
               "\n";
      }
    }
  } else {
    throw std::invalid_argument("--format must be md or csv");
  }
  write_file(args.out, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csk: causal-span annotation, agreement and evaluation toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; sections name subcommands");
  std::string run_log = "csk_runs.jsonl";
  app.add_option("--run-log", run_log, "run record JSONL path")
      ->capture_default_str();

  ParseArgs parse_args;
  auto* parse_cmd = app.add_subcommand("parse", "parse tagged guideline text");
  parse_cmd->add_option("--in", parse_args.inputs, "tagged input file(s)")
      ->required();
  parse_cmd->add_option("--doc-id", parse_args.doc_ids,
                        "document id(s); default: file stem");
  parse_cmd->add_option("--mode", parse_args.mode, "strict|lenient")
      ->capture_default_str();
  parse_cmd->add_option("--out", parse_args.out, "parsed JSON ('-' = stdout)")
      ->capture_default_str();
  parse_cmd->add_option("--corpus-out", parse_args.corpus_out,
                        "also write a corpus JSONL");

  TokensArgs tokens_args;
  auto* tokens_cmd = app.add_subcommand("tokens", "export CoNLL token labels");
  tokens_cmd->add_option("--in", tokens_args.input, "tagged input file")
      ->required();
  tokens_cmd->add_option("--mode", tokens_args.mode, "strict|lenient")
      ->capture_default_str();
  tokens_cmd->add_option("--out", tokens_args.out, "TSV output")
      ->capture_default_str();
  tokens_cmd->add_option("--doc-id", tokens_args.doc_id, "document id");

  SplitArgs split_args;
  auto* split_cmd = app.add_subcommand("split", "deterministic dataset splits");
  split_cmd->add_option("--in", split_args.input, "corpus JSONL")->required();
  split_cmd->add_option("--holdout", split_args.holdout, "test fraction in (0,1)");
  split_cmd->add_option("--kfold", split_args.kfold, "number of folds (>= 2)");
  split_cmd->add_option("--seed", split_args.seed, "shuffle seed")
      ->capture_default_str();
  split_cmd->add_flag("--group-by-doc", split_args.group_by_doc,
                      "keep each document in one partition");
  split_cmd->add_option("--out", split_args.out, "manifest JSON")
      ->capture_default_str();

  AgreementArgs agreement_args;
  auto* agreement_cmd =
      app.add_subcommand("agreement", "inter-annotator agreement report");
  agreement_cmd->add_option("--a", agreement_args.file_a, "annotator A file")
      ->required();
  agreement_cmd->add_option("--b", agreement_args.file_b, "annotator B file")
      ->required();
  agreement_cmd->add_option("--pairing", agreement_args.pairing,
                            "greedy|optimal phrase pairing")
      ->capture_default_str();
  agreement_cmd->add_option("--mode", agreement_args.mode, "strict|lenient")
      ->capture_default_str();
  agreement_cmd->add_option("--out", agreement_args.out, "report JSON")
      ->capture_default_str();
  agreement_cmd->add_option("--csv", agreement_args.csv, "merged table CSV");
  agreement_cmd->add_flag("--table", agreement_args.table,
                          "print aligned tables to stdout");

  MakePromptsArgs prompts_args;
  auto* prompts_cmd = app.add_subcommand("make-prompts", "few-shot prompt files");
  prompts_cmd->add_option("--corpus", prompts_args.corpus, "corpus JSONL")
      ->required();
  prompts_cmd->add_option("--shots", prompts_args.shots, "examples per prompt")
      ->capture_default_str();
  prompts_cmd->add_option("--seed", prompts_args.seed, "shot selection seed")
      ->capture_default_str();
  prompts_cmd->add_option("--instruction", prompts_args.instruction,
                          "instruction text")
      ->capture_default_str();
  prompts_cmd->add_option("--instruction-file", prompts_args.instruction_file,
                          "read the instruction from a file");
  prompts_cmd->add_option("--manifest", prompts_args.manifest,
                          "split manifest JSON");
  prompts_cmd->add_option(
                 "--pool", prompts_args.pool,
                 "partition for examples: train|test|fold:<i>|notfold:<i>|all")
      ->capture_default_str();
  prompts_cmd->add_option("--targets", prompts_args.targets,
                          "partition to prompt for (default: test, or all "
                          "without a manifest)");
  prompts_cmd->add_option("--out-dir", prompts_args.out_dir, "output directory")
      ->capture_default_str();

  ExportInstructArgs instruct_args;
  auto* instruct_cmd =
      app.add_subcommand("export-instruct", "instruction-tuning records");
  instruct_cmd->add_option("--corpus", instruct_args.corpus, "corpus JSONL")
      ->required();
  instruct_cmd->add_option("--instruction", instruct_args.instruction,
                           "instruction text")
      ->capture_default_str();
  instruct_cmd->add_option("--out", instruct_args.out, "records file")
      ->capture_default_str();
  instruct_cmd->add_option("--mode", instruct_args.mode,
                           "train (with outputs) | test (empty outputs)")
      ->capture_default_str();
  instruct_cmd->add_flag("--causal-only", instruct_args.causal_only,
                         "skip sentences without spans");

  RunLlmArgs llm_args;
  auto* llm_cmd =
      app.add_subcommand("run-llm", "complete prompts via the gateway");
  llm_cmd->add_option("--prompts-dir", llm_args.prompts_dir, "prompt directory")
      ->required();
  llm_cmd->add_option("--out", llm_args.out, "responses JSONL")
      ->capture_default_str();
  llm_args.gateway.attach(llm_cmd);

  EvalTokensArgs evtok_args;
  auto* evtok_cmd = app.add_subcommand("eval-tokens", "token-level P/R/F1");
  evtok_cmd->add_option("--gold", evtok_args.gold, "gold CoNLL TSV")->required();
  evtok_cmd->add_option("--pred", evtok_args.pred, "predicted CoNLL TSV")
      ->required();
  evtok_cmd->add_flag("--repair", evtok_args.repair,
                      "align and project labels when lengths differ");
  evtok_cmd->add_flag("--include-other", evtok_args.include_other,
                      "include the O class in the report and macro");
  evtok_cmd->add_option("--out", evtok_args.out, "report JSON")
      ->capture_default_str();
  evtok_cmd->add_option("--csv", evtok_args.csv, "CSV export");
  evtok_cmd->add_flag("--table", evtok_args.table, "print table to stdout");

  EvalPhrasesArgs evphr_args;
  auto* evphr_cmd =
      app.add_subcommand("eval-phrases", "phrase-level similarity and label F1");
  evphr_cmd->add_option("--gold", evphr_args.gold,
                        "gold corpus (.jsonl) or tagged text")
      ->required();
  evphr_cmd->add_option("--pred", evphr_args.pred,
                        "responses.jsonl or tagged text lines")
      ->required();
  evphr_cmd->add_option("--pred-format", evphr_args.pred_format,
                        "tagged|instruct model output format")
      ->capture_default_str();
  evphr_cmd->add_option("--embedder", evphr_args.embedder, "bow|remote")
      ->capture_default_str();
  evphr_cmd->add_option("--dim", evphr_args.bow_dim, "bag-of-words dimension")
      ->capture_default_str();
  evphr_cmd->add_option("--name", evphr_args.name, "row label for the table")
      ->capture_default_str();
  evphr_cmd->add_option("--out", evphr_args.out, "report JSON")
      ->capture_default_str();
  evphr_cmd->add_option("--csv", evphr_args.csv, "CSV export");
  evphr_cmd->add_flag("--table", evphr_args.table, "print table to stdout");
  evphr_args.gateway.attach(evphr_cmd);

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "render a recorded run");
  report_cmd->add_option("--run-log", report_args.run_log, "run record JSONL")
      ->capture_default_str();
  report_cmd->add_option("--id", report_args.id, "run id to render");
  report_cmd->add_flag("--latest", report_args.latest, "render the latest run");
  report_cmd->add_option("--format", report_args.format, "md|csv")
      ->capture_default_str();
  report_cmd->add_option("--out", report_args.out, "output file ('-' = stdout)")
      ->capture_default_str();

  int exit_code = 0;
  try {
    app.parse(argc, argv);

    RunContext run;
    run.run_log = run_log;
    if (parse_cmd->parsed()) {
      run.command = "parse";
      run.config = {{"mode", parse_args.mode},
                    {"out", parse_args.out},
                    {"corpus_out", parse_args.corpus_out}};
      run_parse(parse_args, run);
    } else if (tokens_cmd->parsed()) {
      run.command = "tokens";
      run.config = {{"mode", tokens_args.mode}, {"out", tokens_args.out}};
      run_tokens(tokens_args, run);
    } else if (split_cmd->parsed()) {
      run.command = "split";
      run.config = {{"holdout", split_args.holdout},
                    {"kfold", split_args.kfold},
                    {"seed", split_args.seed},
                    {"group_by_doc", split_args.group_by_doc}};
      run_split(split_args, run);
    } else if (agreement_cmd->parsed()) {
      run.command = "agreement";
      run.config = {{"pairing", agreement_args.pairing},
                    {"mode", agreement_args.mode}};
      run_agreement(agreement_args, run);
    } else if (prompts_cmd->parsed()) {
      run.command = "make-prompts";
      run.config = {{"shots", prompts_args.shots},
                    {"seed", prompts_args.seed},
                    {"pool", prompts_args.pool},
                    {"targets", prompts_args.targets},
                    {"out_dir", prompts_args.out_dir}};
      run_make_prompts(prompts_args, run);
    } else if (instruct_cmd->parsed()) {
      run.command = "export-instruct";
      run.config = {{"instruction", instruct_args.instruction},
                    {"mode", instruct_args.mode},
                    {"causal_only", instruct_args.causal_only}};
      run_export_instruct(instruct_args, run);
    } else if (llm_cmd->parsed()) {
      run.command = "run-llm";
      run.config = {{"prompts_dir", llm_args.prompts_dir}, {"out", llm_args.out}};
      exit_code = run_run_llm(llm_args, run);
    } else if (evtok_cmd->parsed()) {
      run.command = "eval-tokens";
      run.config = {{"repair", evtok_args.repair},
                    {"include_other", evtok_args.include_other}};
      run_eval_tokens(evtok_args, run);
    } else if (evphr_cmd->parsed()) {
      run.command = "eval-phrases";
      run.config = {{"pred_format", evphr_args.pred_format},
                    {"embedder", evphr_args.embedder},
                    {"dim", evphr_args.bow_dim},
                    {"name", evphr_args.name}};
      if (evphr_args.embedder == "remote") {
        run.config["gateway"] = evphr_args.gateway.to_json();
      }
      run_eval_phrases(evphr_args, run);
    } else if (report_cmd->parsed()) {
      run_report(report_args);
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const csk::markup::ParseError& e) {
    std::cerr << "error: markup at offset " << e.offset() << ": " << e.what()
              << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const csk::gateway::GatewayError& e) {
    std::cerr << "error: gateway (" << csk::gateway::error_kind_name(e.kind())
              << "): " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
