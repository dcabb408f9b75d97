#include "resid/decay.hpp"
#include "resid/detect.hpp"
#include "resid/error.hpp"
#include "resid/io.hpp"
#include "resid/metrics.hpp"
#include "resid/oracle.hpp"
#include "resid/sampler.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace {

using namespace resid;
using nlohmann::json;
using CurveKey = std::pair<std::string, std::int64_t>;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("'" + item + "' is not a number");
    }
    if (used != item.size()) throw UsageError("'" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

std::map<CurveKey, const io::CurveRecord*> index_curves(const io::CurveSet& curves) {
  std::map<CurveKey, const io::CurveRecord*> index;
  for (const auto& c : curves.curves) {
    if (!index.emplace(CurveKey{c.context_id, c.position}, &c).second) {
      throw DataError("duplicate curve for " + c.context_id + "@" + std::to_string(c.position));
    }
  }
  return index;
}

const DecayCurve& curve_for(const std::map<CurveKey, const io::CurveRecord*>& index,
                            const EntropyProfile& p) {
  auto it = index.find({p.context_id, p.position});
  if (it == index.end()) {
    throw DataError("no curve for " + p.context_id + "@" + std::to_string(p.position));
  }
  return it->second->curve;
}

void require_same_family(const ModelFamilySpec& a, const ModelFamilySpec& b) {
  if (a.sizes != b.sizes) throw FormatError("records and curves were produced for different model families");
}

std::string dump_lines(const std::vector<json>& lines) {
  std::string out;
  for (const auto& j : lines) {
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string records;
  std::string out;
  std::string kind = "fp";
  std::size_t degree = 10;
  int restarts = 8;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int window = 1;
  int max_iter = 500;
  double tol = 1e-8;
};

int run_fit(const FitArgs& a) {
  const CurveKind kind = parse_curve_kind(a.kind);
  FitConfig base;
  base.num_restarts = a.restarts;
  base.max_iterations = a.max_iter;
  base.loss_tolerance = a.tol;
  try {
    base.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  if (a.threads < 1) throw UsageError("--threads must be >= 1");
  if (kind == CurveKind::fractional_polynomial && a.degree < 1) throw UsageError("--K must be >= 1");

  const io::RecordSet records = io::read_records(a.records);
  std::vector<EntropyProfile> profiles =
      a.window > 1 ? smooth_profiles(records.profiles, a.window) : records.profiles;
  std::sort(profiles.begin(), profiles.end(), [](const EntropyProfile& x, const EntropyProfile& y) {
    return std::tie(x.context_id, x.position) < std::tie(y.context_id, y.position);
  });
  for (std::size_t i = 1; i < profiles.size(); ++i) {
    if (profiles[i].context_id == profiles[i - 1].context_id && profiles[i].position == profiles[i - 1].position) {
      throw DataError("duplicate profile " + profiles[i].context_id + "@" + std::to_string(profiles[i].position));
    }
  }

  io::CurveSet out;
  out.family = records.header.family;
  out.curves.resize(profiles.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(a.threads);
  auto worker = [&](unsigned id) {
    try {
      for (std::size_t i = next++; i < profiles.size(); i = next++) {
        FitConfig cfg = base;
        cfg.rng_seed = derive_seed(a.seed, profiles[i].context_id, profiles[i].position);
        auto r = fit_curve(profiles[i], out.family, kind, a.degree, cfg);
        out.curves[i] = io::CurveRecord{profiles[i].context_id, profiles[i].position, std::move(r.curve), r.loss};
      }
    } catch (...) {
      failures[id] = std::current_exception();
      next = profiles.size();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < a.threads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::ostringstream text;
  io::write_curves(text, out);
  io::write_file_atomic(a.out, text.str());
  std::cout << "fitted " << out.curves.size() << " curves -> " << a.out << '\n';
  return 0;
}

// ---- decode ----------------------------------------------------------------

struct DecodeArgs {
  std::string curves;
  std::string logits;
  std::string method = "real";
  double p = 0.9;
  double k = 40;
  double T = 1.0;
  std::optional<double> tau;
  double eta = 0.0009;
  double typical_mass = 0.95;
  double alpha = 0.3;
  std::string terminal;
  std::uint64_t seed = 0;
  std::string out;
  std::string trace;
};

int run_decode(const DecodeArgs& a) {
  SamplerConfig cfg;
  cfg.method = parse_method(a.method);
  cfg.t_p = a.p;
  cfg.t_k = a.k;
  cfg.real_temperature = a.T;
  cfg.tau = a.tau;
  cfg.eta = a.eta;
  cfg.typical_mass = a.typical_mass;
  cfg.cd_alpha = a.alpha;
  for (double t : parse_list(a.terminal)) {
    if (t < 0 || t != std::floor(t)) throw UsageError("terminal tokens must be non-negative integers");
    cfg.terminal_tokens.insert(static_cast<TokenId>(t));
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  const bool needs_curve = cfg.method == Method::real || cfg.method == Method::real_cd ||
                           cfg.method == Method::real_top_k || cfg.method == Method::real_f;
  if (needs_curve && a.curves.empty()) throw UsageError("--curves is required for method " + a.method);
  std::optional<io::CurveSet> curves;
  if (!a.curves.empty()) curves = io::read_curves(a.curves);
  const auto steps = io::read_logits(a.logits);
  if (steps.empty()) throw DataError(a.logits + ": no logit frames");

  std::map<CurveKey, const io::CurveRecord*> index;
  if (curves) index = index_curves(*curves);
  // Frames tagged with context_id/position use that curve; untagged frames
  // use the single curve in the file, or the i-th curve in file order.
  auto curve_at = [&](std::size_t i, const io::LogitStep& s) -> const DecayCurve* {
    if (!needs_curve) return nullptr;
    if (s.context_id) {
      auto it = index.find({*s.context_id, s.position.value_or(0)});
      if (it == index.end()) throw DataError("no curve for logit step " + std::to_string(i));
      return &it->second->curve;
    }
    if (curves->curves.size() == 1) return &curves->curves.front().curve;
    if (i >= curves->curves.size()) throw DataError("logit step " + std::to_string(i) + " has no matching curve");
    return &curves->curves[i].curve;
  };

  DecodeState state(a.seed);
  std::vector<json> tokens;
  std::vector<json> traces;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    StepInputs in{s.expert, s.amateur ? &*s.amateur : nullptr, curve_at(i, s),
                  curves ? &curves->family : nullptr};
    auto r = [&] {
      try {
        return decode_step(cfg, in, state);
      } catch (const ConfigError& e) {
        throw DataError("logit step " + std::to_string(i) + ": " + e.what());
      }
    }();
    tokens.push_back(json{{"step", i}, {"token", r.token}});
    traces.push_back(io::trace_json(i, r.decision, r.token));
  }

  if (a.out.empty()) {
    for (const auto& t : tokens) std::cout << t.dump() << '\n';
  } else {
    io::write_file_atomic(a.out, dump_lines(tokens));
  }
  if (!a.trace.empty()) io::write_file_atomic(a.trace, dump_lines(traces));
  return 0;
}

// ---- oracle ----------------------------------------------------------------

struct OracleGenerateArgs {
  std::size_t contexts = 500;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::size_t vocab = 256;
  std::size_t max_support = 32;
  double mix_rate = 1.0;
  double s_ref = 16.0;
  std::string out;
};

int run_oracle_generate(const OracleGenerateArgs& a) {
  if (!(a.noise >= 0.0)) throw UsageError("--noise must be >= 0");
  oracle::MixtureSuiteConfig cfg;
  cfg.vocab_size = a.vocab;
  cfg.max_support = a.max_support;
  cfg.mix_rate = a.mix_rate;
  cfg.s_ref = a.s_ref;
  const auto suite = oracle::generate_profiles(cfg, a.contexts, a.noise, a.seed);
  io::RecordSet rs;
  rs.header.family = cfg.family;
  rs.header.corpus_name = "mixture-oracle";
  for (const auto& op : suite) {
    rs.profiles.push_back(op.profile);
    rs.true_asymptotes.emplace_back(op.true_asymptote);
  }
  std::ostringstream text;
  io::write_records(text, rs);
  io::write_file_atomic(a.out, text.str());
  std::cout << "wrote " << suite.size() << " oracle profiles -> " << a.out << '\n';
  return 0;
}

struct OracleScoreArgs {
  std::string records;
  std::string curves;
  std::string out;
  double ae_tol = 0.1;
  double last_tol = 0.02;
};

int run_oracle_score(const OracleScoreArgs& a) {
  const auto records = io::read_records(a.records);
  const auto curves = io::read_curves(a.curves);
  require_same_family(records.header.family, curves.family);
  const auto index = index_curves(curves);
  const double s_n = records.header.family.largest();

  std::vector<json> rows;
  std::size_t ae_ok = 0;
  std::size_t last_ok = 0;
  double ae_sum = 0.0;
  for (std::size_t i = 0; i < records.profiles.size(); ++i) {
    const auto& p = records.profiles[i];
    if (!records.true_asymptotes[i]) {
      throw DataError(p.context_id + "@" + std::to_string(p.position) + " has no true_asymptote");
    }
    const DecayCurve& c = curve_for(index, p);
    const double ae_err = std::abs(c.asymptote() - *records.true_asymptotes[i]);
    const double last_err = std::abs(c.eval(s_n) - p.entropies.back());
    ae_ok += ae_err <= a.ae_tol;
    last_ok += last_err <= a.last_tol;
    ae_sum += ae_err;
    rows.push_back(json{{"context_id", p.context_id},
                        {"position", p.position},
                        {"true_asymptote", *records.true_asymptotes[i]},
                        {"fitted_asymptote", c.asymptote()},
                        {"asymptote_error", ae_err},
                        {"last_size_error", last_err}});
  }
  const auto n = static_cast<double>(rows.size());
  json summary{{"type", "summary"},
               {"contexts", rows.size()},
               {"mean_asymptote_error", rows.empty() ? 0.0 : ae_sum / n},
               {"asymptote_within_tol", rows.empty() ? 0.0 : static_cast<double>(ae_ok) / n},
               {"last_size_within_tol", rows.empty() ? 0.0 : static_cast<double>(last_ok) / n},
               {"asymptote_tol", a.ae_tol},
               {"last_size_tol", a.last_tol}};
  if (!a.out.empty()) {
    rows.push_back(summary);
    io::write_file_atomic(a.out, dump_lines(rows));
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

struct OracleTheoremArgs {
  std::size_t cases = 10000;
  std::string temps = "0.5,1,2";
  std::uint64_t seed = 0;
};

int run_oracle_theorem(const OracleTheoremArgs& a) {
  const auto temps = parse_list(a.temps);
  if (temps.empty()) throw UsageError("--temps needs at least one value");
  for (double t : temps) {
    if (!(t > 0.0)) throw UsageError("temperatures must be > 0");
  }
  const auto r = oracle::theorem_sweep(a.cases, temps, a.seed);
  std::printf("%zu cases x %zu temperatures: %zu violations (min margin %.3g)\n", r.cases, temps.size(),
              r.violations, r.min_margin);
  return r.violations == 0 ? 0 : 1;
}

struct OracleDetectArgs {
  std::size_t spans = 200;
  std::size_t tokens = 6;
  std::uint64_t seed = 0;
  std::string records;
  std::string labels;
};

int run_oracle_detect_suite(const OracleDetectArgs& a) {
  oracle::DetectionSuiteConfig cfg;
  cfg.spans = a.spans;
  cfg.tokens_per_span = a.tokens;
  const auto suite = oracle::generate_detection_suite(cfg, a.seed);
  io::RecordSet rs;
  rs.header.family = cfg.family;
  rs.header.corpus_name = "detection-oracle";
  std::vector<json> labels;
  for (const auto& span : suite) {
    for (const auto& p : span.profiles) {
      rs.profiles.push_back(p);
      rs.true_asymptotes.emplace_back();
    }
    labels.push_back(json{{"context_id", span.context_id},
                          {"start", span.begin},
                          {"end", span.end},
                          {"label", std::string(detect::to_string(span.label))}});
  }
  std::ostringstream text;
  io::write_records(text, rs);
  io::write_file_atomic(a.records, text.str());
  io::write_file_atomic(a.labels, dump_lines(labels));
  std::cout << "wrote " << suite.size() << " labeled spans\n";
  return 0;
}

// ---- metrics ---------------------------------------------------------------

std::string fmt(const std::optional<double>& v) {
  return v ? io::format_double(*v) : std::string();
}

int run_metrics_diversity(const std::string& corpus_path, int n, int rep_n) {
  const auto corpus = io::read_corpus(corpus_path);
  json out{{"prompts", corpus.prompts.size()}};
  out["dist_" + std::to_string(n)] = metrics::distinct_n(corpus, n);
  out["rep_" + std::to_string(rep_n)] = metrics::repetition_ratio(corpus, rep_n);
  std::cout << out.dump() << '\n';
  return 0;
}

int run_metrics_regression(const std::string& records_path, const std::string& curves_path,
                           const std::string& target) {
  const auto records = io::read_records(records_path);
  const auto curves = io::read_curves(curves_path);
  require_same_family(records.header.family, curves.family);
  const auto index = index_curves(curves);
  std::vector<double> predicted;
  std::vector<double> actual;
  for (std::size_t i = 0; i < records.profiles.size(); ++i) {
    const auto& p = records.profiles[i];
    const DecayCurve& c = curve_for(index, p);
    if (target == "asymptote") {
      if (!records.true_asymptotes[i]) throw DataError(p.context_id + " has no true_asymptote");
      predicted.push_back(c.asymptote());
      actual.push_back(*records.true_asymptotes[i]);
    } else {
      predicted.push_back(c.eval(records.header.family.largest()));
      actual.push_back(p.entropies.back());
    }
  }
  const auto rep = metrics::regression_report(predicted, actual);
  json out{{"n", predicted.size()}, {"mse", rep.mse}, {"mean_l1", rep.mean_l1}};
  out["pearson_r"] = rep.pearson_r ? json(*rep.pearson_r) : json(nullptr);
  out["r2"] = rep.r2 ? json(*rep.r2) : json(nullptr);
  std::cout << out.dump() << '\n';
  return 0;
}

int run_metrics_aggregate(const std::string& scores_path, const std::string& out_path) {
  const auto rows = io::read_scores(scores_path);
  const auto agg = metrics::minmax_aggregate(rows);
  std::string text = "model,method,agg_factuality,agg_diversity\n";
  for (const auto& a : agg) {
    text += a.model + "," + a.method + "," + fmt(a.factuality) + "," + fmt(a.diversity) + "\n";
  }
  if (out_path.empty()) {
    std::cout << text;
  } else {
    io::write_file_atomic(out_path, text);
  }
  return 0;
}

// ---- detect ----------------------------------------------------------------

struct DetectArgs {
  std::string records;
  std::string curves;
  std::string labels;
  std::string mode = "mean";
  std::string out;
};

int run_detect(const DetectArgs& a) {
  detect::Aggregation mode = detect::Aggregation::mean;
  if (a.mode == "first_token") {
    mode = detect::Aggregation::first_token;
  } else if (a.mode != "mean") {
    throw UsageError("--mode must be mean or first_token");
  }
  const auto records = io::read_records(a.records);
  const auto curves = io::read_curves(a.curves);
  require_same_family(records.header.family, curves.family);
  const auto labels = io::read_labels(a.labels);
  const auto index = index_curves(curves);
  const auto& family = records.header.family;

  std::map<std::string, std::vector<const EntropyProfile*>> by_context;
  for (const auto& p : records.profiles) by_context[p.context_id].push_back(&p);

  std::vector<io::FeatureRow> rows;
  for (const auto& l : labels) {
    detect::LabeledSpan span{l.context_id, l.start, l.end, l.label, {}};
    std::vector<DecayCurve> span_curves;
    auto it = by_context.find(l.context_id);
    if (it != by_context.end()) {
      for (const EntropyProfile* p : it->second) {
        if (p->position >= l.start && p->position < l.end) {
          span.profiles.push_back(*p);
          span_curves.push_back(curve_for(index, *p));
        }
      }
    }
    if (span.profiles.size() != static_cast<std::size_t>(l.end - l.start)) {
      throw DataError("span " + l.context_id + " [" + std::to_string(l.start) + ", " + std::to_string(l.end) +
                      ") is not fully covered by records");
    }
    rows.push_back({l.context_id, l.label, detect::extract_features(span, span_curves, family, mode)});
  }

  std::vector<detect::Label> y;
  for (const auto& r : rows) y.push_back(r.label);
  json report = json::object();
  for (auto name : detect::kFeatureNames) {
    std::vector<double> values;
    for (const auto& r : rows) {
      if (auto v = detect::feature(r.features, name)) values.push_back(*v);
    }
    if (values.size() != rows.size() || rows.empty()) {
      report[std::string(name)] = nullptr;
      continue;
    }
    const auto s = detect::score_feature(values, y, true);
    report[std::string(name)] = json{{"auc", s.auc ? json(*s.auc) : json(nullptr)}, {"accuracy", s.accuracy}};
  }

  if (!a.out.empty()) {
    std::ostringstream table;
    io::write_feature_table(table, rows);
    io::write_file_atomic(a.out, table.str());
  }
  std::cout << report.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual-entropy tooling: decay-curve fitting, adaptive sampling, oracles, metrics, detection"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an entropy decay curve per profile");
  fit_cmd->add_option("--records", fit.records, "Record file (JSONL)")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fit.out, "Curve file to write")->required();
  fit_cmd->add_option("--kind", fit.kind, "Curve family")->check(CLI::IsMember({"fp", "exp", "logistic"}));
  fit_cmd->add_option("--K", fit.degree, "Fractional polynomial degree");
  fit_cmd->add_option("--restarts", fit.restarts, "Random restarts per profile");
  fit_cmd->add_option("--seed", fit.seed, "Base random seed");
  fit_cmd->add_option("--threads", fit.threads, "Worker threads");
  fit_cmd->add_option("--window", fit.window, "Centered smoothing window over positions (odd)");
  fit_cmd->add_option("--max-iter", fit.max_iter, "Iteration cap per restart");
  fit_cmd->add_option("--tol", fit.tol, "Loss improvement tolerance");

  DecodeArgs dec;
  auto* dec_cmd = app.add_subcommand("decode", "Sample tokens from a logit stream");
  dec_cmd->add_option("--logits", dec.logits, "Logit stream (JSONL or binary)")->required()->check(CLI::ExistingFile);
  dec_cmd->add_option("--curves", dec.curves, "Curve file")->check(CLI::ExistingFile);
  dec_cmd->add_option("--method", dec.method, "top_p, top_k, temperature, eta, typical, factual, real, real_cd, real_top_k, real_f, cd");
  dec_cmd->add_option("--p", dec.p, "Top-p threshold");
  dec_cmd->add_option("--k", dec.k, "Top-k size");
  dec_cmd->add_option("--T", dec.T, "REAL temperature");
  dec_cmd->add_option("--tau", dec.tau, "Softmax temperature");
  dec_cmd->add_option("--eta", dec.eta, "Eta-sampling parameter");
  dec_cmd->add_option("--typical-mass", dec.typical_mass, "Typical-sampling mass");
  dec_cmd->add_option("--alpha", dec.alpha, "Contrastive plausibility ratio");
  dec_cmd->add_option("--terminal", dec.terminal, "Comma-separated sentence-terminal token ids");
  dec_cmd->add_option("--seed", dec.seed, "Sampling seed");
  dec_cmd->add_option("--out", dec.out, "Token output (JSONL); stdout when omitted");
  dec_cmd->add_option("--trace", dec.trace, "Decision trace output (JSONL)");

  auto* oracle_cmd = app.add_subcommand("oracle", "Synthetic suites with known ground truth");
  oracle_cmd->require_subcommand(1);

  OracleGenerateArgs gen;
  auto* gen_cmd = oracle_cmd->add_subcommand("generate", "Write mixture-oracle entropy records");
  gen_cmd->add_option("--contexts", gen.contexts, "Number of contexts");
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise sd on entropies");
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--vocab", gen.vocab, "Vocabulary size");
  gen_cmd->add_option("--max-support", gen.max_support, "Largest ideal support");
  gen_cmd->add_option("--mix-rate", gen.mix_rate, "Decay rate of the uniform mixture weight");
  gen_cmd->add_option("--s-ref", gen.s_ref, "Log-size where the mixture weight reaches 1");
  gen_cmd->add_option("--out", gen.out, "Record file to write")->required();

  OracleScoreArgs score;
  auto* score_cmd = oracle_cmd->add_subcommand("score", "Compare fitted curves with oracle truth");
  score_cmd->add_option("--records", score.records, "Oracle record file")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--curves", score.curves, "Curve file")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--out", score.out, "Per-context report (JSONL)");
  score_cmd->add_option("--ae-tol", score.ae_tol, "Asymptote tolerance (nats)");
  score_cmd->add_option("--last-tol", score.last_tol, "Largest-size tolerance (nats)");

  OracleTheoremArgs thm;
  auto* thm_cmd = oracle_cmd->add_subcommand("theorem", "Check the truncation bound on random separable cases");
  thm_cmd->add_option("--cases", thm.cases, "Number of random cases");
  thm_cmd->add_option("--temps", thm.temps, "Comma-separated temperatures");
  thm_cmd->add_option("--seed", thm.seed, "Random seed");

  OracleDetectArgs ds;
  auto* ds_cmd = oracle_cmd->add_subcommand("detect-suite", "Write a labeled synthetic detection suite");
  ds_cmd->add_option("--spans", ds.spans, "Number of spans");
  ds_cmd->add_option("--tokens", ds.tokens, "Tokens per span");
  ds_cmd->add_option("--seed", ds.seed, "Random seed");
  ds_cmd->add_option("--records", ds.records, "Record file to write")->required();
  ds_cmd->add_option("--labels", ds.labels, "Label file to write")->required();

  auto* metrics_cmd = app.add_subcommand("metrics", "Diversity, regression and aggregate reports");
  metrics_cmd->require_subcommand(1);
  std::string corpus;
  int dist_n = 2;
  int rep_n = 4;
  auto* div_cmd = metrics_cmd->add_subcommand("diversity", "Dist-n and repetition ratio of a corpus");
  div_cmd->add_option("--corpus", corpus, "Corpus file (JSONL)")->required()->check(CLI::ExistingFile);
  div_cmd->add_option("--n", dist_n, "n-gram order for Dist-n");
  div_cmd->add_option("--rep-n", rep_n, "n-gram order for repetition");

  std::string reg_records, reg_curves, reg_target = "last";
  auto* reg_cmd = metrics_cmd->add_subcommand("regression", "Regression metrics of fitted curves");
  reg_cmd->add_option("--records", reg_records, "Record file")->required()->check(CLI::ExistingFile);
  reg_cmd->add_option("--curves", reg_curves, "Curve file")->required()->check(CLI::ExistingFile);
  reg_cmd->add_option("--target", reg_target, "last (largest-model entropy) or asymptote (oracle truth)")
      ->check(CLI::IsMember({"last", "asymptote"}));

  std::string scores, agg_out;
  auto* agg_cmd = metrics_cmd->add_subcommand("aggregate", "Max-min aggregated factuality and diversity");
  agg_cmd->add_option("--scores", scores, "Score table (CSV or JSONL)")->required()->check(CLI::ExistingFile);
  agg_cmd->add_option("--out", agg_out, "CSV output; stdout when omitted");

  DetectArgs det;
  auto* det_cmd = app.add_subcommand("detect", "Span features and their detection scores");
  det_cmd->add_option("--records", det.records, "Record file with surprisals")->required()->check(CLI::ExistingFile);
  det_cmd->add_option("--curves", det.curves, "Curve file")->required()->check(CLI::ExistingFile);
  det_cmd->add_option("--labels", det.labels, "Label file (JSONL)")->required()->check(CLI::ExistingFile);
  det_cmd->add_option("--mode", det.mode, "mean or first_token");
  det_cmd->add_option("--out", det.out, "Feature table (CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*dec_cmd) return run_decode(dec);
    if (*gen_cmd) return run_oracle_generate(gen);
    if (*score_cmd) return run_oracle_score(score);
    if (*thm_cmd) return run_oracle_theorem(thm);
    if (*ds_cmd) return run_oracle_detect_suite(ds);
    if (*div_cmd) return run_metrics_diversity(corpus, dist_n, rep_n);
    if (*reg_cmd) return run_metrics_regression(reg_records, reg_curves, reg_target);
    if (*agg_cmd) return run_metrics_aggregate(scores, agg_out);
    if (*det_cmd) return run_detect(det);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
