#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "csk/agreement.hpp"
#include "csk/corpus.hpp"
#include "csk/evalx.hpp"
#include "csk/markup.hpp"
#include "csk/promptkit.hpp"

// JSON shapes for every file format the toolkit reads or writes. Sentences
// serialize as {sentence_id, plain, phrases, diagnostics}; the raw tagged
// form is reconstructed from plain + phrases when loading.

namespace csk::jsonio {

nlohmann::json diagnostic_to_json(const markup::Diagnostic& diagnostic);
markup::Diagnostic diagnostic_from_json(const nlohmann::json& j);

nlohmann::json sentence_to_json(const markup::AnnotatedSentence& sentence,
                                const std::vector<markup::Diagnostic>& diagnostics = {});
markup::AnnotatedSentence sentence_from_json(const nlohmann::json& j);

nlohmann::json corpus_record_to_json(const corpus::CorpusRecord& record);
corpus::CorpusRecord corpus_record_from_json(const nlohmann::json& j);

void write_corpus_jsonl(std::ostream& out,
                        const std::vector<corpus::CorpusRecord>& records);
std::vector<corpus::CorpusRecord> read_corpus_jsonl(std::istream& in);

nlohmann::json split_to_json(const corpus::SplitResult& result);
corpus::SplitResult split_from_json(const nlohmann::json& j);

nlohmann::json agreement_report_to_json(const agreement::AgreementReport& report);
nlohmann::json token_eval_to_json(const evalx::TokenEvalReport& report);
nlohmann::json phrase_eval_to_json(const evalx::PhraseEvalReport& report);

nlohmann::json predicted_phrase_to_json(const evalx::PredictedPhrase& phrase);
evalx::PredictedPhrase predicted_phrase_from_json(const nlohmann::json& j);

}  // namespace csk::jsonio
