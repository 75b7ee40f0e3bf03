#include "csk/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "csk/textsim.hpp"

namespace csk::agreement {

namespace {

struct Candidate {
  std::size_t a, b;
  double sim;
  double pos_gap;
  double pos_a, pos_b;
};

std::vector<std::pair<std::size_t, std::size_t>> greedy_pairs(
    std::vector<Candidate> candidates, std::size_t n_a, std::size_t n_b) {
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& x, const Candidate& y) {
              if (x.sim != y.sim) return x.sim > y.sim;
              if (x.pos_gap != y.pos_gap) return x.pos_gap < y.pos_gap;
              if (x.pos_a != y.pos_a) return x.pos_a < y.pos_a;
              return x.pos_b < y.pos_b;
            });
  std::vector<bool> used_a(n_a, false), used_b(n_b, false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const Candidate& c : candidates) {
    if (used_a[c.a] || used_b[c.b]) continue;
    used_a[c.a] = true;
    used_b[c.b] = true;
    pairs.emplace_back(c.a, c.b);
  }
  return pairs;
}

// Exact maximum-weight assignment by subset DP; per-sentence phrase counts
// are small, so exponential in one side is fine.
std::vector<std::pair<std::size_t, std::size_t>> optimal_pairs(
    const std::vector<std::vector<double>>& sim,
    const std::vector<double>& pos_a, const std::vector<double>& pos_b) {
  const std::size_t n_a = sim.size();
  const std::size_t n_b = n_a ? sim[0].size() : 0;
  if (n_b > 16 && n_a > 16) {
    throw std::invalid_argument(
        "optimal pairing supports at most 16 phrases on one side per sentence");
  }
  const bool transpose = n_b > 16;
  const std::size_t rows = transpose ? n_b : n_a;
  const std::size_t cols = transpose ? n_a : n_b;
  auto weight = [&](std::size_t r, std::size_t c) {
    return transpose ? sim[c][r] : sim[r][c];
  };

  const std::size_t masks = std::size_t{1} << cols;
  // dp[i][mask]: best total using rows [i..) with column set `mask` free.
  std::vector<std::vector<double>> dp(rows + 1, std::vector<double>(masks, 0.0));
  for (std::size_t i = rows; i-- > 0;) {
    for (std::size_t mask = 0; mask < masks; ++mask) {
      double best = dp[i + 1][mask];
      for (std::size_t c = 0; c < cols; ++c) {
        if (!(mask & (std::size_t{1} << c)) || weight(i, c) <= 0.0) continue;
        best = std::max(best, weight(i, c) + dp[i + 1][mask & ~(std::size_t{1} << c)]);
      }
      dp[i][mask] = best;
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t mask = masks - 1;
  for (std::size_t i = 0; i < rows; ++i) {
    const double target = dp[i][mask];
    // Prefer any pairing over skipping when totals tie, then the closest
    // positions, then the lowest column index.
    std::optional<std::size_t> chosen;
    double chosen_gap = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!(mask & (std::size_t{1} << c)) || weight(i, c) <= 0.0) continue;
      if (weight(i, c) + dp[i + 1][mask & ~(std::size_t{1} << c)] < target) continue;
      const double pa = transpose ? pos_b[i] : pos_a[i];
      const double pb = transpose ? pos_a[c] : pos_b[c];
      const double gap = std::abs(pa - pb);
      if (!chosen || gap < chosen_gap) {
        chosen = c;
        chosen_gap = gap;
      }
    }
    if (chosen) {
      mask &= ~(std::size_t{1} << *chosen);
      if (transpose) {
        pairs.emplace_back(*chosen, i);
      } else {
        pairs.emplace_back(i, *chosen);
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::string trim_ws(const std::string& s) {
  const char* ws = " \t\n\r\f\v";
  const std::size_t begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return {};
  const std::size_t end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

std::string display_name(Label l) {
  std::string w(markup::label_word(l));
  if (!w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

ClassMetrics finish_metrics(std::size_t tp, std::size_t fp, std::size_t fn,
                            std::size_t support) {
  ClassMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.support = support;
  m.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

std::string format_cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> pair_by_token_jaccard(
    const std::vector<std::string>& texts_a, const std::vector<double>& pos_a,
    const std::vector<std::string>& texts_b, const std::vector<double>& pos_b,
    PairingMode mode) {
  if (texts_a.size() != pos_a.size() || texts_b.size() != pos_b.size()) {
    throw std::invalid_argument("texts/positions length mismatch");
  }
  std::vector<std::vector<double>> sim(texts_a.size(),
                                       std::vector<double>(texts_b.size(), 0.0));
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < texts_a.size(); ++i) {
    for (std::size_t j = 0; j < texts_b.size(); ++j) {
      const double s = textsim::jaccard_sim(texts_a[i], texts_b[j]);
      sim[i][j] = s;
      if (s > 0.0) {
        candidates.push_back(
            {i, j, s, std::abs(pos_a[i] - pos_b[j]), pos_a[i], pos_b[j]});
      }
    }
  }
  if (mode == PairingMode::Greedy) {
    auto pairs = greedy_pairs(std::move(candidates), texts_a.size(), texts_b.size());
    std::sort(pairs.begin(), pairs.end());
    return pairs;
  }
  return optimal_pairs(sim, pos_a, pos_b);
}

std::vector<MergedRow> merge_annotations(const std::vector<Phrase>& annotator_a,
                                         const std::vector<Phrase>& annotator_b,
                                         const std::vector<SentenceInfo>& sentences,
                                         PairingMode mode) {
  std::map<std::string, std::size_t> sentence_index;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    sentence_index.emplace(sentences[i].id, i);
  }

  std::vector<std::vector<Phrase>> by_sentence_a(sentences.size());
  std::vector<std::vector<Phrase>> by_sentence_b(sentences.size());
  auto distribute = [&](const std::vector<Phrase>& phrases,
                        std::vector<std::vector<Phrase>>& buckets) {
    for (const Phrase& p : phrases) {
      const auto it = sentence_index.find(p.sentence_id);
      if (it == sentence_index.end()) {
        throw std::invalid_argument("phrase references unknown sentence '" +
                                    p.sentence_id + "'");
      }
      buckets[it->second].push_back(p);
    }
  };
  distribute(annotator_a, by_sentence_a);
  distribute(annotator_b, by_sentence_b);

  std::vector<MergedRow> rows;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    auto& pa = by_sentence_a[s];
    auto& pb = by_sentence_b[s];
    auto by_start = [](const Phrase& x, const Phrase& y) {
      return std::tie(x.start, x.end, x.label) < std::tie(y.start, y.end, y.label);
    };
    std::sort(pa.begin(), pa.end(), by_start);
    std::sort(pb.begin(), pb.end(), by_start);

    std::vector<std::string> texts_a, texts_b;
    std::vector<double> pos_a, pos_b;
    for (const Phrase& p : pa) {
      texts_a.push_back(p.text);
      pos_a.push_back(static_cast<double>(p.start));
    }
    for (const Phrase& p : pb) {
      texts_b.push_back(p.text);
      pos_b.push_back(static_cast<double>(p.start));
    }
    const auto pairs = pair_by_token_jaccard(texts_a, pos_a, texts_b, pos_b, mode);

    std::vector<bool> used_a(pa.size(), false), used_b(pb.size(), false);
    struct Keyed {
      std::size_t start;
      int side;  // 0 two-sided, 1 a-only, 2 b-only
      MergedRow row;
    };
    std::vector<Keyed> keyed;
    for (const auto& [i, j] : pairs) {
      used_a[i] = true;
      used_b[j] = true;
      MergedRow row{sentences[s].id, sentences[s].text, pa[i], pb[j]};
      keyed.push_back({pa[i].start, 0, std::move(row)});
    }
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (used_a[i]) continue;
      MergedRow row{sentences[s].id, sentences[s].text, pa[i], std::nullopt};
      keyed.push_back({pa[i].start, 1, std::move(row)});
    }
    for (std::size_t j = 0; j < pb.size(); ++j) {
      if (used_b[j]) continue;
      MergedRow row{sentences[s].id, sentences[s].text, std::nullopt, pb[j]};
      keyed.push_back({pb[j].start, 2, std::move(row)});
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& x, const Keyed& y) {
      return std::tie(x.start, x.side) < std::tie(y.start, y.side);
    });
    for (Keyed& k : keyed) rows.push_back(std::move(k.row));
  }
  return rows;
}

std::map<Label, RelaxedEntry> relaxed_report(const std::vector<MergedRow>& rows) {
  std::map<Label, RelaxedEntry> report;
  for (const MergedRow& row : rows) {
    if (!row.two_sided()) continue;
    RelaxedEntry& e = report[row.phrase_a->label];
    e.mean_levenshtein +=
        textsim::levenshtein_norm(row.phrase_a->text, row.phrase_b->text);
    e.mean_jaccard_distance +=
        textsim::jaccard_dist(row.phrase_a->text, row.phrase_b->text);
    ++e.pairs;
  }
  for (auto& [label, e] : report) {
    e.mean_levenshtein /= static_cast<double>(e.pairs);
    e.mean_jaccard_distance /= static_cast<double>(e.pairs);
  }
  return report;
}

std::size_t exact_matches(const std::vector<MergedRow>& rows) {
  std::size_t count = 0;
  for (const MergedRow& row : rows) {
    if (row.two_sided() &&
        trim_ws(row.phrase_a->text) == trim_ws(row.phrase_b->text)) {
      ++count;
    }
  }
  return count;
}

LabelAgreement label_agreement(const std::vector<MergedRow>& rows) {
  std::map<Label, std::size_t> tp, fp, fn, support;
  for (const MergedRow& row : rows) {
    if (!row.two_sided()) continue;
    const Label a = row.phrase_a->label;
    const Label b = row.phrase_b->label;
    ++support[a];
    if (a == b) {
      ++tp[a];
    } else {
      ++fn[a];  // A chose a, B did not
      ++fp[b];  // B chose b, A did not
    }
  }
  LabelAgreement out;
  for (Label l : markup::kAllLabels) {
    const std::size_t t = tp.count(l) ? tp[l] : 0;
    const std::size_t f_p = fp.count(l) ? fp[l] : 0;
    const std::size_t f_n = fn.count(l) ? fn[l] : 0;
    if (t + f_p + f_n == 0) continue;  // label absent from all pairs
    out.classes[l] = finish_metrics(t, f_p, f_n, support.count(l) ? support[l] : 0);
  }
  if (!out.classes.empty()) {
    for (const auto& [l, m] : out.classes) {
      out.macro_precision += m.precision;
      out.macro_recall += m.recall;
      out.macro_f1 += m.f1;
    }
    const auto n = static_cast<double>(out.classes.size());
    out.macro_precision /= n;
    out.macro_recall /= n;
    out.macro_f1 /= n;
  }
  return out;
}

double overall_agreement(const std::vector<MergedRow>& rows) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (const MergedRow& row : rows) {
    if (!row.two_sided()) continue;
    sum += textsim::jaccard_sim(row.phrase_a->text, row.phrase_b->text);
    ++pairs;
  }
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

AgreementReport compute_agreement(const std::vector<MergedRow>& rows) {
  AgreementReport report;
  report.relaxed = relaxed_report(rows);
  report.exact_matches = agreement::exact_matches(rows);
  report.labels = label_agreement(rows);
  report.overall_jaccard_similarity = overall_agreement(rows);
  for (const MergedRow& row : rows) {
    if (row.two_sided()) {
      ++report.matched_pairs;
      report.overall_mean_levenshtein +=
          textsim::levenshtein_norm(row.phrase_a->text, row.phrase_b->text);
      report.overall_mean_jaccard_distance +=
          textsim::jaccard_dist(row.phrase_a->text, row.phrase_b->text);
    } else if (row.phrase_a) {
      ++report.one_sided_a;
    } else {
      ++report.one_sided_b;
    }
  }
  if (report.matched_pairs > 0) {
    report.overall_mean_levenshtein /= static_cast<double>(report.matched_pairs);
    report.overall_mean_jaccard_distance /=
        static_cast<double>(report.matched_pairs);
  }
  return report;
}

std::string render_tables(const AgreementReport& report) {
  std::string out;
  out += "Relaxed match (matched pairs: " + std::to_string(report.matched_pairs) +
         ")\n";
  out += "           Levenshtein distance  Jaccard distance\n";
  for (const auto& [label, e] : report.relaxed) {
    char line[96];
    std::snprintf(line, sizeof line, "%-11s%-22s%s\n", display_name(label).c_str(),
                  format_cell(e.mean_levenshtein).c_str(),
                  format_cell(e.mean_jaccard_distance).c_str());
    out += line;
  }
  char avg[96];
  std::snprintf(avg, sizeof avg, "%-11s%-22s%s\n", "Average",
                format_cell(report.overall_mean_levenshtein).c_str(),
                format_cell(report.overall_mean_jaccard_distance).c_str());
  out += avg;

  out += "\nLabel agreement (annotator A as reference)\n";
  out += "           Precision  Recall  F1-score\n";
  for (const auto& [label, m] : report.labels.classes) {
    char line[96];
    std::snprintf(line, sizeof line, "%-11s%-11s%-8s%s\n",
                  display_name(label).c_str(), format_cell(m.precision).c_str(),
                  format_cell(m.recall).c_str(), format_cell(m.f1).c_str());
    out += line;
  }
  char macro[96];
  std::snprintf(macro, sizeof macro, "%-11s%-11s%-8s%s\n", "Macro",
                format_cell(report.labels.macro_precision).c_str(),
                format_cell(report.labels.macro_recall).c_str(),
                format_cell(report.labels.macro_f1).c_str());
  out += macro;

  out += "\nExact matches: " + std::to_string(report.exact_matches) + " / " +
         std::to_string(report.matched_pairs) + "\n";
  char overall[64];
  std::snprintf(overall, sizeof overall, "Overall Jaccard similarity: %.2f\n",
                report.overall_jaccard_similarity);
  out += overall;
  out += "Unpaired phrases: annotator A " + std::to_string(report.one_sided_a) +
         ", annotator B " + std::to_string(report.one_sided_b) + "\n";
  return out;
}

namespace {

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += "\"\"";
    else quoted += c;
  }
  quoted += "\"";
  return quoted;
}

}  // namespace

std::string merged_to_csv(const std::vector<MergedRow>& rows) {
  std::string out = "sentence_id,sentence,phrase_a,label_a,phrase_b,label_b\n";
  for (const MergedRow& row : rows) {
    out += csv_quote(row.sentence_id) + "," + csv_quote(row.sentence_text) + ",";
    out += row.phrase_a ? csv_quote(row.phrase_a->text) : "";
    out += ",";
    out += row.phrase_a ? std::string(markup::label_surface(row.phrase_a->label)) : "";
    out += ",";
    out += row.phrase_b ? csv_quote(row.phrase_b->text) : "";
    out += ",";
    out += row.phrase_b ? std::string(markup::label_surface(row.phrase_b->label)) : "";
    out += "\n";
  }
  return out;
}

}  // namespace csk::agreement
