#pragma once

// File formats. Everything line-oriented is JSONL; doubles are written in
// shortest round-trip form so a write/read cycle is bit-exact.
//
// Record file     line 1: {"type":"header","family":{"sizes":[..],"labels":[..]},
//                          "corpus_name":"..","window_hint":40}
//                 then one profile per line:
//                 {"context_id":"..","position":0,"entropies":[..],
//                  "surprisals":[..]?, "true_asymptote":x?}
// Curve file      line 1: {"type":"header","family":{..}}
//                 then {"context_id","position","kind","K","z","b","q","g",
//                       "a_half","a":[..],"loss"} per curve
// Trace file      {"step","method","d_RE","raw_threshold","effective_threshold",
//                  "kept_count","sampled_token"} per step
// Logit stream    JSONL {"expert":[..],"amateur":[..]?,"context_id"?,"position"?}
//                 or the framed binary form written by write_logits_binary.

#include "resid/decay.hpp"
#include "resid/detect.hpp"
#include "resid/dist.hpp"
#include "resid/metrics.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace resid::io {

struct RecordHeader {
  ModelFamilySpec family;
  std::string corpus_name;
  int window_hint = 40;
};

struct RecordSet {
  RecordHeader header;
  std::vector<EntropyProfile> profiles;
  // Present for oracle-generated suites only; parallel to `profiles`.
  std::vector<std::optional<double>> true_asymptotes;
};

RecordSet parse_records(std::istream& in, const std::string& source);
RecordSet read_records(const std::filesystem::path& path);
void write_records(std::ostream& out, const RecordSet& records);

struct CurveRecord {
  std::string context_id;
  std::int64_t position = 0;
  DecayCurve curve;
  double loss = 0.0;
};

struct CurveSet {
  ModelFamilySpec family;
  std::vector<CurveRecord> curves;  // canonical order: (context_id, position)
};

nlohmann::json to_json(const CurveRecord& c);
CurveRecord curve_from_json(const nlohmann::json& j);
CurveSet parse_curves(std::istream& in, const std::string& source);
CurveSet read_curves(const std::filesystem::path& path);
void write_curves(std::ostream& out, const CurveSet& curves);

struct LogitStep {
  LogitVector expert;
  std::optional<LogitVector> amateur;
  std::optional<std::string> context_id;
  std::optional<std::int64_t> position;
};

// Binary layout (little-endian): "RLOG", u32 version (1), u32 vocab,
// u32 has_amateur, u64 steps, then per step vocab float32 expert logits
// followed by vocab float32 amateur logits when has_amateur is 1.
std::vector<LogitStep> read_logits(const std::filesystem::path& path);
void write_logits_binary(const std::filesystem::path& path, const std::vector<LogitStep>& steps);

nlohmann::json trace_json(std::size_t step, const ThresholdDecision& decision, TokenId token);

// Corpus JSONL: {"prompt_id":"..","tokens":[..]} per generation.
metrics::Corpus read_corpus(const std::filesystem::path& path);

// Score rows from CSV (header method,model,prompt_type,metric,value) or JSONL.
std::vector<metrics::ScoreRow> read_scores(const std::filesystem::path& path);

struct SpanLabel {
  std::string context_id;
  std::int64_t start = 0;
  std::int64_t end = 0;
  detect::Label label = detect::Label::factual;
};

// Labels JSONL: {"context_id":"..","start":0,"end":5,"label":"factual"|"nonfactual"}.
std::vector<SpanLabel> read_labels(const std::filesystem::path& path);

struct FeatureRow {
  std::string context_id;
  detect::Label label = detect::Label::factual;
  detect::DetectionFeatureVector features;
};

void write_feature_table(std::ostream& out, const std::vector<FeatureRow>& rows);

// Shortest round-trip text for a double; "nan"/"inf" never appear in JSON
// outputs because every writer validates first.
std::string format_double(double v);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace resid::io
