#include "csk/promptkit.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "csk/hash.hpp"

namespace csk::promptkit {

namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\n\r\f\v";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace

std::string build_prompt(const PromptSpec& spec, std::string_view target_plain) {
  if (spec.shots > spec.example_pool.size()) {
    throw std::invalid_argument("requested " + std::to_string(spec.shots) +
                                " shots from a pool of " +
                                std::to_string(spec.example_pool.size()));
  }
  std::vector<std::size_t> order(spec.example_pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  seeded_shuffle(order, spec.selection_seed);

  std::string prompt = spec.instruction;
  prompt += "\n";
  for (std::size_t k = 0; k < spec.shots; ++k) {
    const AnnotatedSentence& example = spec.example_pool[order[k]];
    prompt += "\nInput: ";
    prompt += example.plain;
    prompt += "\nOutput: ";
    prompt += markup::serialize_sentence(example);
    prompt += "\n";
  }
  prompt += "\nInput: ";
  prompt += target_plain;
  prompt += "\nOutput:";
  return prompt;
}

std::vector<InstructRecord> export_instruct(
    const std::vector<AnnotatedSentence>& sentences, std::string_view instruction,
    ExportMode mode) {
  std::vector<InstructRecord> records;
  records.reserve(sentences.size());
  for (const AnnotatedSentence& s : sentences) {
    InstructRecord rec;
    rec.instruction = std::string(instruction);
    rec.input = s.plain;
    if (mode == ExportMode::Train) {
      std::string out = "[";
      bool first = true;
      for (const markup::Phrase& p : s.phrases) {
        if (!first) out += ", ";
        first = false;
        out += "'";
        out += p.text;
        out += "-";
        out += markup::label_word(p.label);
        out += "'";
      }
      out += "]";
      rec.output = std::move(out);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string render_instruct_line(const InstructRecord& record) {
  return "###Instruction: " + record.instruction + " ###Input: " + record.input +
         " ###Output: " + record.output;
}

ParsedPrediction parse_tagged_output(std::string_view model_text,
                                     std::string_view sentence_id) {
  ParsedPrediction out;
  const markup::ParseResult parsed = markup::parse_sentence(
      model_text, markup::ParseMode::Lenient, std::string(sentence_id));
  for (const markup::Phrase& p : parsed.sentence.phrases) {
    if (p.text.empty()) continue;
    PredictedPhrase pp;
    pp.text = p.text;
    pp.label = p.label;
    pp.sentence_id = std::string(sentence_id);
    pp.raw_source = std::string(model_text);
    out.phrases.push_back(std::move(pp));
  }
  for (const markup::Diagnostic& d : parsed.diagnostics) {
    out.diagnostics.push_back(std::string(markup::diagnostic_code_name(d.code)) +
                              " at " + std::to_string(d.offset) + ": " + d.message);
  }
  return out;
}

ParsedPrediction parse_instruct_output(std::string_view model_text,
                                       std::string_view sentence_id) {
  ParsedPrediction out;
  const auto open = model_text.find('[');
  const auto close = model_text.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos ||
      close < open) {
    out.diagnostics.push_back("no bracketed list found in model output");
    return out;
  }
  const std::string_view body = model_text.substr(open + 1, close - open - 1);
  if (trim(body).empty()) return out;

  // Items are single-quoted and separated by ", "; split on the exact
  // quote-comma-quote boundary so commas inside phrases survive.
  std::vector<std::string> items;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t next = body.find("', '", pos);
    if (next == std::string_view::npos) {
      items.emplace_back(body.substr(pos));
      break;
    }
    items.emplace_back(body.substr(pos, next - pos + 1));  // keep closing quote
    pos = next + 3;  // resume at the opening quote of the next item
  }

  for (std::string& item : items) {
    std::string text = trim(item);
    if (text.size() >= 1 && text.front() == '\'') text.erase(0, 1);
    if (!text.empty() && text.back() == '\'') text.pop_back();
    text = trim(text);
    if (text.empty()) continue;

    PredictedPhrase pp;
    pp.sentence_id = std::string(sentence_id);
    pp.raw_source = std::string(model_text);

    // Label suffix: the LAST '-' whose tail is a known label word. Phrase
    // texts legitimately contain hyphens; label words never do.
    std::size_t dash = text.rfind('-');
    if (dash != std::string::npos) {
      const std::string tail = trim(text.substr(dash + 1));
      if (const auto label = markup::label_from_word(tail);
          label && *label != markup::Label::Other) {
        const std::string head = trim(text.substr(0, dash));
        if (!head.empty()) {
          pp.text = head;
          pp.label = *label;
          out.phrases.push_back(std::move(pp));
          continue;
        }
      }
    }
    pp.text = std::move(text);
    out.phrases.push_back(std::move(pp));
  }
  return out;
}

}  // namespace csk::promptkit
