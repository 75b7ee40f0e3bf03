#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csk/evalx.hpp"
#include "csk/markup.hpp"

// Few-shot prompt construction in the tagged-sentence format, instruction
// records for fine-tuning, and parsers that turn raw model output (tagged
// text or bracketed phrase-label lists) back into predicted phrases.

namespace csk::promptkit {

using evalx::PredictedPhrase;
using markup::AnnotatedSentence;

inline constexpr std::string_view kDefaultInstruction =
    "Mark the cause with <C></C>, effect with <E></E>, condition with "
    "<CO></CO>, action with <A></A>, signal with <S></S> in the sentence "
    "below.";

inline constexpr std::string_view kDefaultListInstruction =
    "Extract the cause, condition, effect, signal, and action from the "
    "given sentence.";

struct PromptSpec {
  std::size_t shots = 0;
  std::string instruction{kDefaultInstruction};
  std::vector<AnnotatedSentence> example_pool;
  std::uint64_t selection_seed = 0;
};

// Instruction, then `shots` examples sampled from the pool without
// replacement (seeded, order given by the sample), then the target with a
// completion cue. Byte-deterministic in (spec, target).
std::string build_prompt(const PromptSpec& spec, std::string_view target_plain);

struct InstructRecord {
  std::string instruction;
  std::string input;   // plain sentence
  std::string output;  // "['phrase-label', ...]"; empty for test records
};

enum class ExportMode { Train, Test };

std::vector<InstructRecord> export_instruct(
    const std::vector<AnnotatedSentence>& sentences, std::string_view instruction,
    ExportMode mode = ExportMode::Train);

// One-line serialization:
// ###Instruction: {i} ###Input: {in} ###Output: {out}
std::string render_instruct_line(const InstructRecord& record);

struct ParsedPrediction {
  std::vector<PredictedPhrase> phrases;
  std::vector<std::string> diagnostics;
};

// Lenient markup parse of arbitrary model output; every recovered span
// becomes a labeled phrase, text outside tags is ignored.
ParsedPrediction parse_tagged_output(std::string_view model_text,
                                     std::string_view sentence_id = {});

// Parses the bracketed list format. Items split at the last '-' followed
// by a label word; items without such a suffix yield label-less phrases.
ParsedPrediction parse_instruct_output(std::string_view model_text,
                                       std::string_view sentence_id = {});

}  // namespace csk::promptkit
