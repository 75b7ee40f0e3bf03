#include "csk/json_io.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace csk::jsonio {

using nlohmann::json;

namespace {

markup::Label label_from_json(const json& j) {
  const auto label = markup::label_from_surface(j.get<std::string>());
  if (label) return *label;
  if (j.get<std::string>() == "O") return markup::Label::Other;
  throw std::invalid_argument("unknown label '" + j.get<std::string>() + "'");
}

markup::DiagnosticCode code_from_name(const std::string& name) {
  using markup::DiagnosticCode;
  for (DiagnosticCode c :
       {DiagnosticCode::UnclosedTag, DiagnosticCode::UnopenedClose,
        DiagnosticCode::MismatchedClose, DiagnosticCode::NestedTag,
        DiagnosticCode::UnknownTag, DiagnosticCode::EmptySpan}) {
    if (markup::diagnostic_code_name(c) == name) return c;
  }
  throw std::invalid_argument("unknown diagnostic code '" + name + "'");
}

json class_metrics_to_json(const agreement::ClassMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall},   {"f1", m.f1},
          {"support", m.support},     {"tp", m.tp},           {"fp", m.fp},
          {"fn", m.fn}};
}

json opt_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json diagnostic_to_json(const markup::Diagnostic& d) {
  return {{"severity", markup::severity_name(d.severity)},
          {"code", markup::diagnostic_code_name(d.code)},
          {"offset", d.offset},
          {"message", d.message}};
}

markup::Diagnostic diagnostic_from_json(const json& j) {
  markup::Diagnostic d;
  d.severity = j.at("severity").get<std::string>() == "error"
                   ? markup::Severity::Error
                   : markup::Severity::Warning;
  d.code = code_from_name(j.at("code").get<std::string>());
  d.offset = j.at("offset").get<std::size_t>();
  d.message = j.value("message", "");
  return d;
}

json sentence_to_json(const markup::AnnotatedSentence& sentence,
                      const std::vector<markup::Diagnostic>& diagnostics) {
  json phrases = json::array();
  for (const markup::Phrase& p : sentence.phrases) {
    phrases.push_back({{"label", markup::label_surface(p.label)},
                       {"text", p.text},
                       {"start", p.start},
                       {"end", p.end}});
  }
  json diags = json::array();
  for (const markup::Diagnostic& d : diagnostics) {
    diags.push_back(diagnostic_to_json(d));
  }
  return {{"sentence_id", sentence.sentence_id},
          {"plain", sentence.plain},
          {"phrases", phrases},
          {"diagnostics", diags}};
}

markup::AnnotatedSentence sentence_from_json(const json& j) {
  markup::AnnotatedSentence s;
  s.sentence_id = j.at("sentence_id").get<std::string>();
  s.plain = j.at("plain").get<std::string>();
  for (const json& pj : j.at("phrases")) {
    markup::Phrase p;
    p.label = label_from_json(pj.at("label"));
    p.text = pj.at("text").get<std::string>();
    p.start = pj.at("start").get<std::size_t>();
    p.end = pj.at("end").get<std::size_t>();
    p.sentence_id = s.sentence_id;
    s.phrases.push_back(std::move(p));
  }
  s.raw = markup::serialize_sentence(s);
  return s;
}

json corpus_record_to_json(const corpus::CorpusRecord& record) {
  return {{"doc_id", record.doc_id},
          {"sentence", sentence_to_json(record.sentence)},
          {"is_causal", record.is_causal}};
}

corpus::CorpusRecord corpus_record_from_json(const json& j) {
  corpus::CorpusRecord rec;
  rec.doc_id = j.at("doc_id").get<std::string>();
  rec.sentence = sentence_from_json(j.at("sentence"));
  rec.is_causal = j.at("is_causal").get<bool>();
  return rec;
}

void write_corpus_jsonl(std::ostream& out,
                        const std::vector<corpus::CorpusRecord>& records) {
  for (const corpus::CorpusRecord& rec : records) {
    out << corpus_record_to_json(rec).dump() << "\n";
  }
}

std::vector<corpus::CorpusRecord> read_corpus_jsonl(std::istream& in) {
  std::vector<corpus::CorpusRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw std::invalid_argument("corpus line " + std::to_string(line_no) +
                                  " is not valid JSON");
    }
    records.push_back(corpus_record_from_json(j));
  }
  return records;
}

json split_to_json(const corpus::SplitResult& result) {
  json spec;
  spec["seed"] = result.spec.seed;
  if (const auto* h = std::get_if<corpus::HoldoutMode>(&result.spec.mode)) {
    spec["mode"] = "holdout";
    spec["test_fraction"] = h->test_fraction;
  } else {
    spec["mode"] = "kfold";
    spec["k"] = std::get<corpus::KFoldMode>(result.spec.mode).k;
  }
  json partitions;
  if (const auto* h = std::get_if<corpus::HoldoutSplit>(&result.partitions)) {
    partitions["train"] = h->train;
    partitions["test"] = h->test;
  } else {
    partitions["folds"] = std::get<corpus::FoldSplit>(result.partitions);
  }
  return {{"spec", spec}, {"partitions", partitions}};
}

corpus::SplitResult split_from_json(const json& j) {
  corpus::SplitResult result;
  const json& spec = j.at("spec");
  result.spec.seed = spec.at("seed").get<std::uint64_t>();
  if (spec.at("mode").get<std::string>() == "holdout") {
    result.spec.mode =
        corpus::HoldoutMode{spec.at("test_fraction").get<double>()};
  } else {
    result.spec.mode = corpus::KFoldMode{spec.at("k").get<int>()};
  }
  const json& partitions = j.at("partitions");
  if (partitions.contains("folds")) {
    result.partitions = partitions.at("folds").get<corpus::FoldSplit>();
  } else {
    corpus::HoldoutSplit h;
    h.train = partitions.at("train").get<std::vector<std::size_t>>();
    h.test = partitions.at("test").get<std::vector<std::size_t>>();
    result.partitions = std::move(h);
  }
  return result;
}

json agreement_report_to_json(const agreement::AgreementReport& report) {
  json relaxed = json::array();
  for (const auto& [label, e] : report.relaxed) {
    relaxed.push_back({{"label", markup::label_surface(label)},
                       {"mean_levenshtein", e.mean_levenshtein},
                       {"mean_jaccard_distance", e.mean_jaccard_distance},
                       {"pairs", e.pairs}});
  }
  json labels = json::array();
  for (const auto& [label, m] : report.labels.classes) {
    json entry = class_metrics_to_json(m);
    entry["label"] = markup::label_surface(label);
    labels.push_back(entry);
  }
  return {{"type", "agreement"},
          {"matched_pairs", report.matched_pairs},
          {"exact_matches", report.exact_matches},
          {"relaxed", relaxed},
          {"labels", labels},
          {"macro_precision", report.labels.macro_precision},
          {"macro_recall", report.labels.macro_recall},
          {"macro_f1", report.labels.macro_f1},
          {"overall_jaccard_similarity", report.overall_jaccard_similarity},
          {"overall_mean_levenshtein", report.overall_mean_levenshtein},
          {"overall_mean_jaccard_distance", report.overall_mean_jaccard_distance},
          {"one_sided_a", report.one_sided_a},
          {"one_sided_b", report.one_sided_b}};
}

json token_eval_to_json(const evalx::TokenEvalReport& report) {
  json classes = json::array();
  for (const auto& [label, m] : report.classes) {
    json entry = class_metrics_to_json(m);
    entry["label"] = markup::label_surface(label);
    classes.push_back(entry);
  }
  return {{"type", "token_eval"},
          {"classes", classes},
          {"macro",
           {{"precision", report.macro.precision},
            {"recall", report.macro.recall},
            {"f1", report.macro.f1}}},
          {"weighted",
           {{"precision", report.weighted.precision},
            {"recall", report.weighted.recall},
            {"f1", report.weighted.f1}}},
          {"total_support", report.total_support},
          {"accuracy", report.accuracy},
          {"exclude_other", report.exclude_other}};
}

json phrase_eval_to_json(const evalx::PhraseEvalReport& report) {
  json labels = json::array();
  for (const auto& [label, m] : report.labels) {
    json entry = class_metrics_to_json(m);
    entry["label"] = markup::label_surface(label);
    labels.push_back(entry);
  }
  return {{"type", "phrase_eval"},
          {"matched_pairs", report.matched_pairs},
          {"mean_jaccard_similarity", opt_to_json(report.mean_jaccard)},
          {"mean_cosine_similarity", opt_to_json(report.mean_cosine)},
          {"mean_cosine_distance", opt_to_json(report.mean_cosine_distance)},
          {"labels", labels},
          {"macro",
           {{"precision", report.macro.precision},
            {"recall", report.macro.recall},
            {"f1", report.macro.f1}}},
          {"weighted",
           {{"precision", report.weighted.precision},
            {"recall", report.weighted.recall},
            {"f1", report.weighted.f1}}},
          {"unlabeled_predictions", report.unlabeled_predictions},
          {"unlabeled_rate", report.unlabeled_rate},
          {"unmatched_gold", report.unmatched_gold},
          {"unmatched_pred", report.unmatched_pred},
          {"total_gold", report.total_gold},
          {"total_pred", report.total_pred}};
}

json predicted_phrase_to_json(const evalx::PredictedPhrase& phrase) {
  return {{"text", phrase.text},
          {"label", phrase.label ? json(markup::label_surface(*phrase.label))
                                 : json(nullptr)},
          {"sentence_id", phrase.sentence_id},
          {"raw_source", phrase.raw_source}};
}

evalx::PredictedPhrase predicted_phrase_from_json(const json& j) {
  evalx::PredictedPhrase p;
  p.text = j.at("text").get<std::string>();
  if (j.contains("label") && !j.at("label").is_null()) {
    p.label = label_from_json(j.at("label"));
  }
  p.sentence_id = j.value("sentence_id", "");
  p.raw_source = j.value("raw_source", "");
  return p;
}

}  // namespace csk::jsonio
