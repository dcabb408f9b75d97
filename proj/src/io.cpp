#include "resid/io.hpp"

#include "resid/error.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace resid::io {

using nlohmann::json;

namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw UsageError("cannot open " + path.string());
  return in;
}

// Runs `fn` and rewrites any library or validation error so that it names
// the offending line. Data problems keep their category.
template <class Fn>
auto at_line(const std::string& source, std::size_t line, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError(where(source, line) + e.what());
  } catch (const InvalidDistribution& e) {
    throw DataError(where(source, line) + e.what());
  } catch (const ParameterError& e) {
    throw DataError(where(source, line) + e.what());
  } catch (const Error& e) {
    throw FormatError(where(source, line) + e.what());
  } catch (const json::out_of_range& e) {
    // 406 is a numeric literal that overflows double: a value problem, not syntax.
    if (e.id == 406) throw DataError(where(source, line) + e.what());
    throw FormatError(where(source, line) + e.what());
  } catch (const json::exception& e) {
    throw FormatError(where(source, line) + e.what());
  }
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::vector<double> finite_array(const json& j, const char* field) {
  if (!j.is_array()) throw FormatError(std::string("'") + field + "' must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError(std::string("'") + field + "' holds a non-numeric value");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw DataError(std::string("'") + field + "' holds a non-finite value");
    out.push_back(x);
  }
  return out;
}

double finite_number(const json& j, const char* field) {
  if (!j.contains(field)) throw FormatError(std::string("missing field '") + field + "'");
  const auto& v = j.at(field);
  if (!v.is_number()) throw DataError(std::string("'") + field + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw DataError(std::string("'") + field + "' is not finite");
  return x;
}

json family_json(const ModelFamilySpec& family) {
  json j;
  j["sizes"] = family.sizes;
  j["labels"] = family.labels;
  return j;
}

ModelFamilySpec family_from_json(const json& j) {
  ModelFamilySpec family;
  family.sizes = finite_array(j.at("sizes"), "sizes");
  if (j.contains("labels")) family.labels = j.at("labels").get<std::vector<std::string>>();
  family.validate();
  return family;
}

json header_line(const std::string& source, std::size_t line, const std::string& text) {
  return at_line(source, line, [&] {
    json h = json::parse(text);
    if (!h.is_object() || h.value("type", "") != "header" || !h.contains("family")) {
      throw FormatError("first line must be a header object with a family");
    }
    return h;
  });
}

}  // namespace

std::string format_double(double v) {
  return json(v).dump();
}

RecordSet parse_records(std::istream& in, const std::string& source) {
  RecordSet out;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    if (!have_header) {
      const json h = header_line(source, line, text);
      at_line(source, line, [&] {
        out.header.family = family_from_json(h.at("family"));
        out.header.corpus_name = h.value("corpus_name", "");
        out.header.window_hint = h.value("window_hint", 40);
        if (out.header.window_hint < 1) throw FormatError("window_hint must be >= 1");
      });
      have_header = true;
      continue;
    }
    at_line(source, line, [&] {
      const json j = json::parse(text);
      EntropyProfile p;
      p.context_id = j.at("context_id").get<std::string>();
      p.position = j.value("position", std::int64_t{0});
      p.entropies = finite_array(j.at("entropies"), "entropies");
      if (p.entropies.size() != out.header.family.size()) {
        throw FormatError("profile " + p.context_id + " has " + std::to_string(p.entropies.size()) +
                          " entropies but the header family has " +
                          std::to_string(out.header.family.size()) + " sizes");
      }
      if (j.contains("surprisals") && !j.at("surprisals").is_null()) {
        p.surprisals = finite_array(j.at("surprisals"), "surprisals");
      }
      p.validate(out.header.family);
      std::optional<double> truth;
      if (j.contains("true_asymptote")) truth = finite_number(j, "true_asymptote");
      out.profiles.push_back(std::move(p));
      out.true_asymptotes.push_back(truth);
    });
  }
  if (!have_header) throw FormatError(source + ": missing header line");
  return out;
}

RecordSet read_records(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_records(in, path.string());
}

void write_records(std::ostream& out, const RecordSet& records) {
  records.header.family.validate();
  json h;
  h["type"] = "header";
  h["family"] = family_json(records.header.family);
  h["corpus_name"] = records.header.corpus_name;
  h["window_hint"] = records.header.window_hint;
  out << h.dump() << '\n';
  for (std::size_t i = 0; i < records.profiles.size(); ++i) {
    const auto& p = records.profiles[i];
    p.validate(records.header.family);
    json j;
    j["context_id"] = p.context_id;
    j["position"] = p.position;
    j["entropies"] = p.entropies;
    if (p.surprisals) j["surprisals"] = *p.surprisals;
    if (i < records.true_asymptotes.size() && records.true_asymptotes[i]) {
      j["true_asymptote"] = *records.true_asymptotes[i];
    }
    out << j.dump() << '\n';
  }
}

json to_json(const CurveRecord& c) {
  c.curve.validate();
  json j;
  j["context_id"] = c.context_id;
  j["position"] = c.position;
  j["kind"] = std::string(to_string(c.curve.kind));
  j["K"] = c.curve.degree();
  j["z"] = c.curve.z;
  j["b"] = c.curve.b;
  j["q"] = c.curve.q;
  j["g"] = c.curve.g;
  j["a_half"] = c.curve.a_half;
  j["a"] = c.curve.a;
  j["loss"] = c.loss;
  return j;
}

CurveRecord curve_from_json(const json& j) {
  CurveRecord c;
  c.context_id = j.at("context_id").get<std::string>();
  c.position = j.value("position", std::int64_t{0});
  c.curve.kind = parse_curve_kind(j.at("kind").get<std::string>());
  c.curve.z = finite_number(j, "z");
  c.curve.b = finite_number(j, "b");
  c.curve.q = finite_number(j, "q");
  c.curve.g = finite_number(j, "g");
  c.curve.a_half = j.contains("a_half") ? finite_number(j, "a_half") : 0.0;
  if (j.contains("a")) c.curve.a = finite_array(j.at("a"), "a");
  if (j.contains("K") && j.at("K").get<std::size_t>() != c.curve.a.size()) {
    throw FormatError("K does not match the length of 'a'");
  }
  c.loss = j.contains("loss") ? finite_number(j, "loss") : 0.0;
  c.curve.validate();
  return c;
}

CurveSet parse_curves(std::istream& in, const std::string& source) {
  CurveSet out;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    if (!have_header) {
      const json h = header_line(source, line, text);
      at_line(source, line, [&] { out.family = family_from_json(h.at("family")); });
      have_header = true;
      continue;
    }
    out.curves.push_back(at_line(source, line, [&] { return curve_from_json(json::parse(text)); }));
  }
  if (!have_header) throw FormatError(source + ": missing header line");
  return out;
}

CurveSet read_curves(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_curves(in, path.string());
}

void write_curves(std::ostream& out, const CurveSet& curves) {
  curves.family.validate();
  json h;
  h["type"] = "header";
  h["family"] = family_json(curves.family);
  out << h.dump() << '\n';
  for (const auto& c : curves.curves) out << to_json(c).dump() << '\n';
}

namespace {

constexpr std::array<char, 4> kLogitMagic = {'R', 'L', 'O', 'G'};

template <class T>
T read_le(std::istream& in, const std::string& source) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw FormatError(source + ": truncated logit stream");
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    std::uint32_t bits = 0;
    for (std::size_t i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    std::memcpy(&value, &bits, sizeof(value));
  } else {
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

template <class T>
void write_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if constexpr (std::is_floating_point_v<T>) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &value, sizeof(bits));
    for (std::size_t i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  } else {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<double> read_frame(std::istream& in, std::uint32_t vocab, const std::string& source,
                               std::uint64_t step) {
  std::vector<double> v(vocab);
  for (auto& x : v) {
    x = read_le<float>(in, source);
    if (!std::isfinite(x)) {
      throw DataError(source + ": step " + std::to_string(step) + " holds a non-finite logit");
    }
  }
  return v;
}

std::vector<LogitStep> read_binary_logits(std::istream& in, const std::string& source) {
  in.seekg(4);
  const auto version = read_le<std::uint32_t>(in, source);
  if (version != 1) throw FormatError(source + ": unsupported logit stream version " + std::to_string(version));
  const auto vocab = read_le<std::uint32_t>(in, source);
  const auto has_amateur = read_le<std::uint32_t>(in, source);
  const auto steps = read_le<std::uint64_t>(in, source);
  if (vocab == 0) throw FormatError(source + ": vocabulary size is zero");
  if (has_amateur > 1) throw FormatError(source + ": bad amateur flag");
  std::vector<LogitStep> out;
  for (std::uint64_t s = 0; s < steps; ++s) {
    LogitStep step{LogitVector(read_frame(in, vocab, source, s)), std::nullopt, std::nullopt, std::nullopt};
    if (has_amateur) step.amateur = LogitVector(read_frame(in, vocab, source, s));
    out.push_back(std::move(step));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(source + ": trailing bytes after last frame");
  return out;
}

}  // namespace

std::vector<LogitStep> read_logits(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  const std::string source = path.string();
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (in && magic == kLogitMagic) return read_binary_logits(in, source);
  in.clear();
  in.seekg(0);

  std::vector<LogitStep> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    out.push_back(at_line(source, line, [&] {
      const json j = json::parse(text);
      LogitStep step{LogitVector(finite_array(j.at("expert"), "expert")), std::nullopt, std::nullopt,
                     std::nullopt};
      if (step.expert.size() == 0) throw FormatError("empty expert logits");
      if (j.contains("amateur") && !j.at("amateur").is_null()) {
        step.amateur = LogitVector(finite_array(j.at("amateur"), "amateur"));
        if (step.amateur->size() != step.expert.size()) throw FormatError("expert and amateur lengths differ");
      }
      if (j.contains("context_id")) step.context_id = j.at("context_id").get<std::string>();
      if (j.contains("position")) step.position = j.at("position").get<std::int64_t>();
      return step;
    }));
  }
  return out;
}

void write_logits_binary(const std::filesystem::path& path, const std::vector<LogitStep>& steps) {
  const std::uint32_t vocab = steps.empty() ? 1 : static_cast<std::uint32_t>(steps.front().expert.size());
  const bool has_amateur = !steps.empty() && steps.front().amateur.has_value();
  for (const auto& s : steps) {
    if (s.expert.size() != vocab) throw ShapeError("logit frames differ in vocabulary size");
    if (s.amateur.has_value() != has_amateur) throw ShapeError("amateur logits must be present in every frame or none");
    if (s.amateur && s.amateur->size() != vocab) throw ShapeError("expert and amateur lengths differ");
  }
  std::ostringstream out(std::ios::binary);
  out.write(kLogitMagic.data(), 4);
  write_le<std::uint32_t>(out, 1);
  write_le<std::uint32_t>(out, vocab);
  write_le<std::uint32_t>(out, has_amateur ? 1 : 0);
  write_le<std::uint64_t>(out, steps.size());
  for (const auto& s : steps) {
    for (double v : s.expert.values()) write_le<float>(out, static_cast<float>(v));
    if (s.amateur) {
      for (double v : s.amateur->values()) write_le<float>(out, static_cast<float>(v));
    }
  }
  write_file_atomic(path, out.str());
}

json trace_json(std::size_t step, const ThresholdDecision& decision, TokenId token) {
  json j;
  j["step"] = step;
  j["method"] = std::string(to_string(decision.trace.method));
  j["d_RE"] = decision.trace.d_re;
  j["raw_threshold"] = decision.trace.raw_threshold;
  j["effective_threshold"] = decision.effective_threshold;
  j["kept_count"] = decision.kept_count();
  j["sampled_token"] = token;
  return j;
}

metrics::Corpus read_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  metrics::Corpus corpus;
  std::map<std::string, std::size_t> index;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    at_line(source, line, [&] {
      const json j = json::parse(text);
      const auto id = j.at("prompt_id").get<std::string>();
      auto tokens = j.at("tokens").get<metrics::Sequence>();
      if (tokens.empty()) throw DataError("empty generation for prompt " + id);
      auto [it, inserted] = index.emplace(id, corpus.prompts.size());
      if (inserted) corpus.prompts.push_back({id, {}});
      corpus.prompts[it->second].generations.push_back(std::move(tokens));
    });
  }
  return corpus;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

double parse_value(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError("'" + s + "' is not a number");
  }
  if (used != s.size()) throw DataError("'" + s + "' is not a number");
  if (!std::isfinite(v)) throw DataError("non-finite value '" + s + "'");
  return v;
}

}  // namespace

std::vector<metrics::ScoreRow> read_scores(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  std::vector<metrics::ScoreRow> rows;
  std::string text;
  std::size_t line = 0;
  std::vector<std::string> columns;
  bool jsonl = false;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    if (columns.empty() && !jsonl) {
      if (text.front() == '{') {
        jsonl = true;
      } else {
        columns = split_csv(text);
        for (const char* need : {"method", "model", "prompt_type", "metric", "value"}) {
          if (std::find(columns.begin(), columns.end(), need) == columns.end()) {
            throw FormatError(where(source, line) + "CSV header lacks column '" + need + "'");
          }
        }
        continue;
      }
    }
    rows.push_back(at_line(source, line, [&] {
      metrics::ScoreRow r;
      if (jsonl) {
        const json j = json::parse(text);
        r.method = j.at("method").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.prompt_type = j.at("prompt_type").get<std::string>();
        r.metric = j.at("metric").get<std::string>();
        r.value = finite_number(j, "value");
        return r;
      }
      const auto fields = split_csv(text);
      if (fields.size() != columns.size()) throw FormatError("expected " + std::to_string(columns.size()) + " fields");
      for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] == "method") r.method = fields[c];
        else if (columns[c] == "model") r.model = fields[c];
        else if (columns[c] == "prompt_type") r.prompt_type = fields[c];
        else if (columns[c] == "metric") r.metric = fields[c];
        else if (columns[c] == "value") r.value = parse_value(fields[c]);
      }
      return r;
    }));
  }
  return rows;
}

std::vector<SpanLabel> read_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  std::vector<SpanLabel> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    out.push_back(at_line(source, line, [&] {
      const json j = json::parse(text);
      SpanLabel s;
      s.context_id = j.at("context_id").get<std::string>();
      s.start = j.at("start").get<std::int64_t>();
      s.end = j.at("end").get<std::int64_t>();
      if (s.end <= s.start) throw DataError("span range is empty");
      const auto& l = j.at("label");
      s.label = detect::parse_label(l.is_string() ? l.get<std::string>() : std::to_string(l.get<int>()));
      return s;
    }));
  }
  return out;
}

void write_feature_table(std::ostream& out, const std::vector<FeatureRow>& rows) {
  out << "context_id,label";
  for (auto name : detect::kFeatureNames) out << ',' << name;
  out << '\n';
  for (const auto& r : rows) {
    out << r.context_id << ',' << detect::to_string(r.label);
    for (auto name : detect::kFeatureNames) {
      out << ',';
      if (auto v = detect::feature(r.features, name)) out << format_double(*v);
    }
    out << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::out | std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot move output into place at " + path.string());
  }
}

}  // namespace resid::io
