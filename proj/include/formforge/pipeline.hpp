#pragma once

// prune -> context -> prompt -> LLM -> extract -> insert/submit, for every
// (form, model, variant, repetition) of a run.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"

#include "formforge/cassette.hpp"
#include "formforge/context.hpp"
#include "formforge/engine.hpp"
#include "formforge/evaluator.hpp"
#include "formforge/extractor.hpp"
#include "formforge/form_model.hpp"
#include "formforge/http_provider.hpp"
#include "formforge/prompt.hpp"
#include "formforge/pruner.hpp"
#include "formforge/trial.hpp"
#include "formforge/webdriver.hpp"

namespace formforge {

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Corpus

inline constexpr std::string_view kFormModelSuffix = ".form.json";

inline bool is_form_model_file(const std::filesystem::path& p) {
  auto name = p.filename().string();
  return name.size() > kFormModelSuffix.size() &&
         name.compare(name.size() - kFormModelSuffix.size(), kFormModelSuffix.size(), kFormModelSuffix) == 0;
}

inline std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// Every *.form.json in `dir`, sorted by file name.
inline std::vector<FormModel> load_corpus(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw CorpusError("corpus directory not found: " + dir);
  std::vector<FormModel> out;
  for (const auto& p : sorted_entries(dir)) {
    if (!std::filesystem::is_regular_file(p) || !is_form_model_file(p)) continue;
    try {
      out.push_back(load_form_model(p.string()));
    } catch (const ModelError& e) {
      throw CorpusError(e.what());
    }
  }
  if (out.empty()) throw CorpusError("corpus has no *.form.json files: " + dir);
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (out[i].id == out[k].id) throw CorpusError("duplicate form id '" + out[i].id + "' in " + dir);
  return out;
}

struct CorpusIssue {
  std::string path;
  std::string message;
};

inline std::vector<CorpusIssue> validate_corpus(const std::string& dir) {
  std::vector<CorpusIssue> issues;
  if (!std::filesystem::is_directory(dir)) return {{dir, "not a directory"}};
  for (const auto& p : sorted_entries(dir)) {
    if (!std::filesystem::is_regular_file(p) || !is_form_model_file(p)) {
      issues.push_back({p.string(), "skipped: not a *.form.json form model"});
      continue;
    }
    try {
      load_form_model(p.string());
    } catch (const ModelError& e) {
      issues.push_back({p.string(), e.field_path().empty() ? e.message() : e.field_path() + ": " + e.message()});
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Deterministic mock model

namespace pipeline_detail {

/// Field descriptors recovered from a test-generation prompt: parsed from the
/// HTML for RH-P prompts, read back from the sentences otherwise.
inline std::vector<FieldDescriptor> fields_in_prompt(const std::string& prompt) {
  auto form_at = prompt.find("<form");
  if (form_at != std::string::npos) {
    auto end = prompt.find("</form>", form_at);
    auto markup = prompt.substr(form_at, end == std::string::npos ? std::string::npos : end + 7 - form_at);
    try {
      auto forms = find_forms(parse_html(markup));
      if (!forms.empty()) return parse_fields(prune_form(forms.front()));
    } catch (const ParseFailure&) {
    }
    return {};
  }
  // "Element k is a <tag>." starts a field; "The <name> is '<value>'." adds to it.
  std::vector<FieldDescriptor> out;
  std::string_view text(prompt);
  std::size_t i = 0;
  while (i < text.size()) {
    auto rest = text.substr(i);
    if (rest.rfind("Element ", 0) == 0) {
      auto is_a = rest.find(" is a ");
      auto dot = is_a == std::string_view::npos ? is_a : rest.find('.', is_a);
      auto num = rest.substr(8, is_a == std::string_view::npos ? 0 : is_a - 8);
      if (dot != std::string_view::npos && !num.empty() &&
          std::all_of(num.begin(), num.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        out.push_back({std::string(rest.substr(is_a + 6, dot - is_a - 6)), {}});
        i += dot + 1;
        continue;
      }
    } else if (!out.empty() && rest.rfind("The ", 0) == 0) {
      auto is = rest.find(" is '");
      auto name = rest.substr(4, is == std::string_view::npos ? 0 : is - 4);
      if (!name.empty() && name.find_first_of(".'") == std::string_view::npos) {
        auto v0 = is + 5;
        auto close = rest.find("'.", v0);
        while (close != std::string_view::npos && close + 2 < rest.size() && rest[close + 2] != ' ')
          close = rest.find("'.", close + 1);
        if (close != std::string_view::npos) {
          out.back().properties.emplace_back(std::string(name), std::string(rest.substr(v0, close - v0)));
          i += close + 2;
          continue;
        }
      }
    }
    ++i;
  }
  return out;
}

inline std::string mock_value(const FieldDescriptor& f) {
  auto type = f.property("type") ? to_lower(*f.property("type")) : std::string();
  if (f.tag == "select") return f.property("value") ? *f.property("value") : "";
  if (type == "checkbox" || type == "radio") return "true";
  if (type == "number" || type == "range") return "1";
  if (type == "date") return "2024-01-15";
  if (type == "datetime-local") return "2024-01-15T12:30";
  if (type == "time") return "12:30";
  if (type == "email") return "user@example.com";
  if (type == "password") return "Passw0rd!";
  if (type == "tel") return "5550100";
  if (type == "url") return "https://example.com";
  return "mock-text";
}

}  // namespace pipeline_detail

/// Offline stand-in for an LLM. Answers the field-parsing prompt with the
/// deterministic parser's JSON and test-generation prompts with a triple-quoted
/// array holding one plausible value per identifiable field.
inline AttemptResult mock_reply(const LlmRequest& req) {
  const auto& prompt = req.prompt;
  if (prompt.rfind(kFieldParseInstruction, 0) == 0) {
    auto markup = prompt.substr(kFieldParseInstruction.size());
    try {
      auto forms = find_forms(parse_html(trim(markup)));
      if (forms.empty()) return std::string("[]");
      return fields_to_json(parse_fields(prune_form(forms.front()))).dump();
    } catch (const ParseFailure&) {
      return std::string("I could not read that HTML.");
    }
  }
  std::vector<std::string> entries;
  for (const auto& f : pipeline_detail::fields_in_prompt(prompt)) {
    if (f.tag == "button" || f.tag == "option") continue;
    auto type = f.property("type") ? to_lower(*f.property("type")) : std::string();
    if (type == "submit" || type == "button" || type == "hidden" || type == "reset") continue;
    std::string key;
    if (auto id = f.property("id"); id && is_identifier(*id))
      key = "#" + *id;
    else if (auto name = f.property("name"); name && !name->empty() && is_identifier(f.tag))
      key = to_string(Selector::attr_match(f.tag, "name", *name));
    else
      continue;
    entries.push_back(key + "=" + pipeline_detail::mock_value(f));
  }
  nlohmann::json arr = entries;
  return "\"\"\"" + arr.dump() + "\"\"\"";
}

inline std::shared_ptr<MockProvider> make_mock_provider() {
  return std::make_shared<MockProvider>([](const LlmRequest& req, int) { return mock_reply(req); });
}

// ---------------------------------------------------------------------------
// Run configuration

enum class RunMode { Simulate, Replay, Live };

inline std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::Simulate: return "simulate";
    case RunMode::Replay: return "replay";
    case RunMode::Live: return "live";
  }
  return "?";
}

inline std::optional<RunMode> run_mode(std::string_view s) {
  for (auto m : {RunMode::Simulate, RunMode::Replay, RunMode::Live})
    if (iequals(to_string(m), s)) return m;
  return std::nullopt;
}

struct RunConfig {
  std::string corpus_dir;
  std::vector<ModelId> models;
  std::vector<PromptVariant> variants{PromptVariant::RH_P, PromptVariant::LH_P, PromptVariant::PH_P};
  int repetitions = 3;
  RunMode mode = RunMode::Simulate;
  std::vector<ProviderConfig> providers;
  std::vector<std::string> cassettes;  // replay mode
  std::string record_path;             // optional: record every LLM exchange
  std::string log_path = "trials.jsonl";
  std::vector<std::string> forms;  // optional filter by form id
  unsigned workers = 0;            // 0: number of forms
  Millis timeout{60'000};
  int max_retries = 0;
  std::optional<unsigned long> seed;
  LiveOptions live;
};

inline void validate(const RunConfig& cfg) {
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (cfg.models.empty()) throw ConfigError("no models configured");
  if (cfg.variants.empty()) throw ConfigError("no prompt variants configured");
  if (cfg.corpus_dir.empty()) throw ConfigError("no corpus directory configured");
  if (cfg.timeout <= Millis(0)) throw ConfigError("timeout must be positive");
  if (cfg.max_retries < 0) throw ConfigError("max_retries must be nonnegative");
  if (cfg.mode == RunMode::Replay && cfg.cassettes.empty()) throw ConfigError("replay mode needs at least one cassette");
  if (cfg.mode == RunMode::Live && cfg.live.webdriver_url.empty())
    throw ConfigError("live mode needs a WebDriver endpoint");
}

/// Paths inside the file are taken relative to the file's directory.
inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object: " + path);
  auto base = std::filesystem::path(path).parent_path();
  auto rel = [&](const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (base / p).lexically_normal().string();
  };
  RunConfig c;
  try {
    if (j.contains("corpus")) c.corpus_dir = rel(j["corpus"].get<std::string>());
    for (const auto& m : j.value("models", nlohmann::json::array())) c.models.push_back(ModelId::parse(m.get<std::string>()));
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j["variants"]) {
        auto pv = prompt_variant(v.get<std::string>());
        if (!pv) throw ConfigError("unknown variant " + v.get<std::string>());
        c.variants.push_back(*pv);
      }
    }
    c.repetitions = j.value("repetitions", 3);
    if (j.contains("mode")) {
      auto m = run_mode(j["mode"].get<std::string>());
      if (!m) throw ConfigError("unknown mode " + j["mode"].get<std::string>());
      c.mode = *m;
    }
    c.providers = parse_gateway_config(j);
    for (const auto& p : j.value("cassettes", nlohmann::json::array())) c.cassettes.push_back(rel(p.get<std::string>()));
    if (j.contains("record")) c.record_path = j["record"].get<std::string>();
    if (j.contains("log")) c.log_path = j["log"].get<std::string>();
    c.forms = j.value("forms", std::vector<std::string>{});
    c.workers = j.value("workers", 0u);
    c.timeout = Millis(j.value("timeout_ms", 60'000));
    c.max_retries = j.value("max_retries", 0);
    if (j.contains("seed")) c.seed = j["seed"].get<unsigned long>();
    if (j.contains("webdriver")) c.live.webdriver_url = j["webdriver"].get<std::string>();
    if (j.contains("deadline_ms")) c.live.deadline = Millis(j["deadline_ms"].get<long>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

/// Gateway for the configured mode. "mock" is always available; replay
/// routes every request through the cassettes.
inline std::shared_ptr<LlmGateway> make_gateway(const RunConfig& cfg,
                                                std::shared_ptr<Clock> clock = std::make_shared<SystemClock>()) {
  auto gw = std::make_shared<LlmGateway>(std::move(clock));
  auto wrap = [&](std::shared_ptr<Provider> p) -> std::shared_ptr<Provider> {
    if (cfg.record_path.empty()) return p;
    return std::make_shared<RecordingProvider>(std::move(p), cfg.record_path);
  };
  gw->add_provider("mock", wrap(make_mock_provider()));
  for (const auto& p : cfg.providers) gw->add_provider(p.name, wrap(std::make_shared<HttpProvider>(p)), p.rate_limit);
  if (cfg.mode == RunMode::Replay) {
    Cassette cassette;
    for (const auto& path : cfg.cassettes) cassette.add_file(path);
    gw->add_provider("replay", std::make_shared<ReplayProvider>(std::move(cassette)));
    gw->route_all_to("replay");
  }
  return gw;
}

// ---------------------------------------------------------------------------
// Trials

using TargetFactory = std::function<std::unique_ptr<FormTarget>(const FormModel&)>;

inline TargetFactory simulator_factory() {
  return [](const FormModel& m) { return std::make_unique<FormSimulator>(m); };
}

inline TargetFactory live_factory(LiveOptions opts) {
  return [opts](const FormModel& m) -> std::unique_ptr<FormTarget> {
    if (m.url.empty()) throw ConfigError("form '" + m.id + "' has no url for live mode");
    return std::make_unique<WebDriverTarget>(m.url, m.submit_selector, opts);
  };
}

struct TrialSpec {
  const FormModel* form;
  ModelId model;
  PromptVariant variant;
  int repetition;
};

struct TrialOptions {
  Millis timeout{60'000};
  int max_retries = 0;
};

inline std::string form_location(const FormModel& f) { return f.url.empty() ? f.source_path : f.url; }

inline FormMeta form_meta(const FormModel& form, const std::vector<FieldDescriptor>& fields) {
  return {form.app.empty() ? form.id : form.app, form.title, fields.size(), form.category};
}

/// Context for the variants that need no LLM call (RH-P, PH-P).
inline ContextString offline_context(const PrunedForm& pruned, PromptVariant variant) {
  if (variant == PromptVariant::RH_P) return build_raw_context(pruned);
  if (variant == PromptVariant::PH_P) return fields_to_sentences(parse_fields(pruned), ContextOrigin::Parser);
  throw std::invalid_argument("LH-P context needs an LLM");
}

/// The test-generation prompt a trial sends for RH-P or PH-P.
inline std::string offline_prompt(const FormModel& form, PromptVariant variant) {
  auto pruned = prune_form(form.form);
  auto bundle = build_prompt(variant, offline_context(pruned, variant), form_meta(form, parse_fields(pruned)));
  return bundle.value().concatenated;
}

inline TrialRecord run_trial(const TrialSpec& t, LlmGateway& gateway, const TargetFactory& targets,
                             const TrialOptions& opt = {}) {
  const auto& form = *t.form;
  TrialRecord rec;
  rec.url_or_path = form_location(form);
  rec.form_id = form.id;
  rec.model = t.model;
  rec.variant = t.variant;
  rec.prompt_version = kPromptVersion;
  rec.repetition = t.repetition;
  rec.category = form.category;

  auto fail = [&](FailureReason reason, std::string detail) {
    rec.outcome = SubmissionOutcome::failed(reason, std::move(detail));
    rec.stage = owner_stage(reason);
    rec.timestamp = utc_timestamp();
    return rec;
  };

  auto pruned = prune_form(form.form);
  rec.form_markup_hash = sha256_hex(pruned.markup);
  auto fields = parse_fields(pruned);

  ContextString context;
  switch (t.variant) {
    case PromptVariant::RH_P:
    case PromptVariant::PH_P: context = offline_context(pruned, t.variant); break;
    case PromptVariant::LH_P: {
      auto c = build_llm_context(pruned, gateway, t.model, opt.timeout, opt.max_retries);
      if (!c) {
        const auto& e = c.error();
        if (!e.llm_reply.empty()) rec.context_reply = e.llm_reply;
        if (e.kind == ContextError::Kind::Transport)
          return fail(FailureReason::ConnectionError, "context: " + e.detail);
        return fail(FailureReason::FormatError, "context: " + e.detail);
      }
      context = std::move(c.value());
      rec.context_reply = context.llm_reply;
      break;
    }
  }

  auto bundle = build_prompt(t.variant, context, form_meta(form, fields));
  if (!bundle) throw Error("prompt: " + bundle.error().detail);  // unreachable: origin follows variant
  rec.prompt_text = bundle->concatenated;

  auto reply = gateway.complete(LlmRequest{t.model, rec.prompt_text, opt.timeout, opt.max_retries});
  if (!reply) {
    const auto& e = reply.error();
    return fail(FailureReason::ConnectionError, std::string(to_string(e.kind)) + ": " + e.message);
  }
  rec.reply_text = reply->text;

  auto assign = extract_assignments(rec.reply_text, PairPolicy::Keep);
  if (!assign) {
    const auto& e = assign.error();
    return fail(FailureReason::FormatError, std::string(to_string(e.kind)) + ": " + e.detail);
  }
  rec.assignments = assign.value();

  auto target = targets(form);
  rec.outcome = insert_and_submit(*rec.assignments, *target);
  if (!rec.outcome.success()) rec.stage = Stage::Submit;
  rec.timestamp = utc_timestamp();
  return rec;
}

struct RunSummary {
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::map<Stage, std::size_t> by_stage;
  FailureHistogram failures;

  std::string str() const {
    std::string out = "trials: " + std::to_string(trials) + "\nsucceeded: " + std::to_string(successes) +
                      "\nfailed: " + std::to_string(trials - successes) + "\n";
    for (const auto& [stage, n] : by_stage) out += "  failed at " + std::string(to_string(stage)) + ": " + std::to_string(n) + "\n";
    for (const auto& [reason, n] : failures.counts) {
      char pct[32];
      std::snprintf(pct, sizeof pct, "%.2f", failures.percent(reason));
      out += "  " + std::string(to_string(reason)) + ": " + std::to_string(n) + " (" + pct + "%)\n";
    }
    return out;
  }
};

/// Runs every trial and appends the records to `log` in canonical order
/// (form, model, variant, repetition) whatever the execution order.
inline RunSummary run_pipeline(const RunConfig& cfg, LlmGateway& gateway, const TargetFactory& targets,
                               const std::function<void(const TrialRecord&)>& sink) {
  validate(cfg);
  auto corpus = load_corpus(cfg.corpus_dir);
  if (!cfg.forms.empty()) {
    std::erase_if(corpus, [&](const FormModel& f) {
      return std::find(cfg.forms.begin(), cfg.forms.end(), f.id) == cfg.forms.end();
    });
    if (corpus.empty()) throw CorpusError("no corpus form matches the form filter");
  }

  std::vector<TrialSpec> specs;
  for (const auto& form : corpus)
    for (const auto& m : cfg.models)
      for (auto v : cfg.variants)
        for (int rep = 1; rep <= cfg.repetitions; ++rep) specs.push_back({&form, m, v, rep});

  std::vector<std::size_t> order(specs.size());
  std::iota(order.begin(), order.end(), 0);
  if (cfg.seed) {
    std::mt19937_64 rng(*cfg.seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<std::optional<TrialRecord>> done(specs.size());
  std::size_t next_commit = 0;
  std::mutex mu;
  std::exception_ptr failure;
  RunSummary summary;

  auto commit_ready = [&] {
    while (next_commit < done.size() && done[next_commit]) {
      const auto& r = *done[next_commit];
      sink(r);
      ++summary.trials;
      if (r.outcome.success())
        ++summary.successes;
      else if (r.stage)
        ++summary.by_stage[*r.stage];
      done[next_commit].reset();
      ++next_commit;
    }
  };

  std::atomic<std::size_t> cursor{0};
  TrialOptions opt{cfg.timeout, cfg.max_retries};
  auto worker = [&] {
    while (true) {
      auto k = cursor.fetch_add(1);
      if (k >= order.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        auto rec = run_trial(specs[order[k]], gateway, targets, opt);
        std::lock_guard lock(mu);
        summary.failures.failed += rec.outcome.success() ? 0 : 1;
        if (!rec.outcome.success() && rec.outcome.reason) ++summary.failures.counts[*rec.outcome.reason];
        done[order[k]] = std::move(rec);
        commit_ready();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  unsigned n = cfg.workers ? cfg.workers : static_cast<unsigned>(corpus.size());
  n = std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(specs.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return summary;
}

inline RunSummary run_pipeline(const RunConfig& cfg) {
  validate(cfg);
  auto gateway = make_gateway(cfg);
  auto targets = cfg.mode == RunMode::Live ? live_factory(cfg.live) : simulator_factory();
  TrialLogWriter log(cfg.log_path);
  return run_pipeline(cfg, *gateway, targets, [&](const TrialRecord& r) { log.append(r); });
}

// ---------------------------------------------------------------------------
// Scripted reply fixtures: one form, one scripted reply (or gateway error) per
// model, and the expected outcome of each trial.

struct FixtureRow {
  std::string method;  // display name, e.g. "GPT-4"
  ModelId model;
  std::string reply;
  std::optional<GatewayError::Kind> error;
  std::optional<FailureReason> expected;  // nullopt: success
};

struct Fixture {
  std::string form;  // form model id
  std::vector<FixtureRow> rows;
};

inline Fixture load_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open fixture: " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error("fixture is not JSON: " + path);
  Fixture f;
  try {
    f.form = j.at("form").get<std::string>();
    for (const auto& r : j.at("rows")) {
      FixtureRow row;
      row.method = r.at("method").get<std::string>();
      row.model = ModelId::parse(r.at("model").get<std::string>());
      row.reply = r.value("reply", "");
      if (r.contains("error")) {
        row.error = gateway_error_kind(r["error"].get<std::string>());
        if (!row.error) throw Error("unknown error kind in row " + row.method);
      }
      auto expected = r.at("expected").get<std::string>();
      if (expected != "success") {
        row.expected = failure_reason(expected);
        if (!row.expected) throw Error("unknown expected outcome '" + expected + "'");
      }
      f.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return f;
}

/// Cassette entries that replay the fixture's replies for `form` under `variant`.
inline std::vector<CassetteEntry> fixture_cassette(const Fixture& fx, const FormModel& form, PromptVariant variant,
                                                   const std::string& recorded_at) {
  auto prompt = offline_prompt(form, variant);
  std::vector<CassetteEntry> out;
  for (const auto& row : fx.rows) {
    auto e = make_cassette_entry(LlmRequest{row.model, prompt}, row.error ? "" : row.reply, row.error);
    e.recorded_at = recorded_at;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace formforge
