// formforge command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "formforge/formforge.hpp"

using namespace formforge;

namespace {

struct Globals {
  std::string config;
  std::string log;
  std::string mode;
  std::optional<unsigned long> seed;
};

std::string slurp(const std::string& path) {
  if (path.empty() || path == "-") {
    return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A form model file gives its markup and meta; anything else is HTML whose
// first form is used.
struct InputForm {
  HtmlElement form;
  FormMeta meta;
};

InputForm read_form(const std::string& path) {
  if (!path.empty() && is_form_model_file(path)) {
    auto m = load_form_model(path);
    auto fields = parse_fields(prune_form(m.form));
    return {m.form, form_meta(m, fields)};
  }
  auto doc = parse_html(slurp(path));
  auto forms = find_forms(doc);
  if (forms.empty()) throw Error("no <form> element in input");
  return {forms.front(), {}};
}

PromptVariant variant_arg(const std::string& s) {
  auto v = prompt_variant(s);
  if (!v) throw ConfigError("unknown variant '" + s + "' (RH-P, LH-P, PH-P)");
  return *v;
}

RunConfig base_config(const Globals& g) {
  RunConfig cfg;
  if (!g.config.empty()) cfg = load_run_config(g.config);
  if (!g.log.empty()) cfg.log_path = g.log;
  if (!g.mode.empty()) {
    auto m = run_mode(g.mode);
    if (!m) throw ConfigError("unknown mode '" + g.mode + "' (simulate, replay, live)");
    cfg.mode = *m;
  }
  if (g.seed) cfg.seed = g.seed;
  return cfg;
}

std::string log_path(const Globals& g) {
  if (!g.log.empty()) return g.log;
  if (!g.config.empty()) return load_run_config(g.config).log_path;
  return "trials.jsonl";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"formforge: generate, run and evaluate web-form tests with LLMs"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "run configuration (JSON)");
  app.add_option("--log", g.log, "trial log (JSON lines)");
  app.add_option("--mode", g.mode, "simulate | replay | live");
  app.add_option("--seed", g.seed, "shuffle trial execution order");

  // prune
  auto* prune = app.add_subcommand("prune", "prune form attributes to the whitelist");
  std::string prune_in, whitelist;
  prune->add_option("input", prune_in, "HTML or *.form.json file (default stdin)");
  prune->add_option("--whitelist", whitelist, "comma-separated attribute names");

  // context
  auto* context = app.add_subcommand("context", "print the context string for a form");
  std::string ctx_in, ctx_variant = "parser", ctx_model = "mock/mock";
  context->add_option("input", ctx_in, "HTML or *.form.json file (default stdin)");
  context->add_option("--variant", ctx_variant, "raw | parser | llm")->check(CLI::IsMember({"raw", "parser", "llm"}));
  context->add_option("--model", ctx_model, "provider/model used by the llm variant");

  // prompt
  auto* prompt = app.add_subcommand("prompt", "print the test-generation prompt for a form");
  std::string pr_in, pr_variant = "PH-P", pr_meta, pr_model = "mock/mock";
  prompt->add_option("input", pr_in, "HTML or *.form.json file (default stdin)");
  prompt->add_option("--variant", pr_variant, "RH-P | LH-P | PH-P");
  prompt->add_option("--meta", pr_meta, R"(JSON {"app", "title", "elements", "category"})");
  prompt->add_option("--model", pr_model, "provider/model used for LH-P context");

  // extract
  auto* extract = app.add_subcommand("extract", "extract selector=value pairs from a reply on stdin");
  bool keep_malformed = false;
  extract->add_flag("--keep-malformed", keep_malformed, "report unparseable entries instead of failing");

  // run
  auto* run = app.add_subcommand("run", "run every (form, model, variant, repetition) trial");
  std::string run_corpus;
  std::vector<std::string> run_models, run_variants;
  int run_reps = 0;
  unsigned run_workers = 0;
  run->add_option("--corpus", run_corpus, "form model directory");
  run->add_option("--model", run_models, "provider/model (repeatable)");
  run->add_option("--variant", run_variants, "prompt variant (repeatable)");
  run->add_option("--repetitions", run_reps, "repetitions per (form, model, variant)");
  run->add_option("--workers", run_workers, "worker threads (default: number of forms)");

  // eval
  auto* eval = app.add_subcommand("eval", "SSR groups, failure reasons and method comparisons");
  std::string group_by = "model,variant";
  std::size_t exact_max = kDefaultExactMax;
  bool per_trial = false;
  std::vector<std::string> compare;
  eval->add_option("--group-by", group_by, "subset of model,variant,category");
  eval->add_option("--exact-max", exact_max, "largest combined sample for the exact U test");
  eval->add_flag("--per-trial", per_trial, "one sample value per trial instead of per form");
  eval->add_option("--compare", compare, "A,B with methods as provider/model@VARIANT (repeatable)");

  // report
  auto* rep = app.add_subcommand("report", "SSR table for a trial log");
  std::string format = "markdown";
  rep->add_option("--format", format, "markdown | csv | json")->check(CLI::IsMember({"markdown", "csv", "json"}));

  // validate
  auto* val = app.add_subcommand("validate", "check a corpus directory");
  std::string val_dir;
  val->add_option("dir", val_dir, "corpus directory (default: from --config)");

  // cassette
  auto* cas = app.add_subcommand("cassette", "write replay cassette entries for a reply fixture");
  std::string cas_fixture, cas_corpus, cas_variant = "PH-P", cas_out, cas_at = "1970-01-01T00:00:00Z";
  cas->add_option("fixture", cas_fixture, "fixture JSON")->required();
  cas->add_option("--corpus", cas_corpus, "form model directory")->required();
  cas->add_option("--variant", cas_variant, "prompt variant of the recorded prompts");
  cas->add_option("--out", cas_out, "cassette path (default stdout)");
  cas->add_option("--recorded-at", cas_at, "timestamp written into each entry");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prune) {
      std::vector<HtmlElement> forms;
      if (!prune_in.empty() && is_form_model_file(prune_in)) {
        forms.push_back(read_form(prune_in).form);
      } else {
        forms = find_forms(parse_html(slurp(prune_in)));
        if (forms.empty()) throw Error("no <form> element in input");
      }
      auto wl = whitelist.empty() ? AttributeWhitelist::defaults() : AttributeWhitelist::parse(whitelist);
      for (const auto& f : forms) std::cout << prune_form(f, wl).markup << "\n";
    } else if (*context) {
      auto in = read_form(ctx_in);
      auto pruned = prune_form(in.form);
      if (ctx_variant == "raw") {
        std::cout << build_raw_context(pruned).text << "\n";
      } else if (ctx_variant == "parser") {
        std::cout << fields_to_sentences(parse_fields(pruned)).text << "\n";
      } else {
        auto cfg = base_config(g);
        auto gw = make_gateway(cfg);
        auto c = build_llm_context(pruned, *gw, ModelId::parse(ctx_model), cfg.timeout, cfg.max_retries);
        if (!c) throw Error("context: " + std::string(to_string(c.error().kind)) + ": " + c.error().detail);
        std::cout << c->text << "\n";
      }
    } else if (*prompt) {
      auto in = read_form(pr_in);
      auto variant = variant_arg(pr_variant);
      auto pruned = prune_form(in.form);
      auto fields = parse_fields(pruned);
      auto meta = in.meta;
      if (meta.element_count == 0) meta.element_count = fields.size();
      if (!pr_meta.empty()) {
        auto j = nlohmann::json::parse(pr_meta, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ConfigError("--meta must be a JSON object");
        meta.app_name = j.value("app", meta.app_name);
        meta.form_title = j.value("title", meta.form_title);
        meta.element_count = j.value("elements", meta.element_count);
        if (j.contains("category")) {
          auto c = form_category(j["category"].get<std::string>());
          if (!c) throw ConfigError("unknown category in --meta");
          meta.category = *c;
        }
      }
      ContextString ctx;
      if (variant == PromptVariant::LH_P) {
        auto cfg = base_config(g);
        auto gw = make_gateway(cfg);
        auto c = build_llm_context(pruned, *gw, ModelId::parse(pr_model), cfg.timeout, cfg.max_retries);
        if (!c) throw Error("context: " + std::string(to_string(c.error().kind)) + ": " + c.error().detail);
        ctx = c.value();
      } else {
        ctx = offline_context(pruned, variant);
      }
      std::cout << build_prompt(variant, ctx, meta).value().concatenated << "\n";
    } else if (*extract) {
      auto reply = slurp("-");
      auto r = extract_assignments(reply, keep_malformed ? PairPolicy::Keep : PairPolicy::Reject);
      if (!r) {
        std::cerr << "FormatError: " << to_string(r.error().kind) << ": " << r.error().detail << "\n";
        return 3;
      }
      for (const auto& a : r->pairs)
        std::cout << nlohmann::ordered_json{{"selector", to_string(a.selector)}, {"value", a.value}}.dump() << "\n";
      for (const auto& m : r->malformed) std::cout << nlohmann::ordered_json{{"malformed", m}}.dump() << "\n";
    } else if (*run) {
      auto cfg = base_config(g);
      if (!run_corpus.empty()) cfg.corpus_dir = run_corpus;
      if (!run_models.empty()) {
        cfg.models.clear();
        for (const auto& m : run_models) cfg.models.push_back(ModelId::parse(m));
      }
      if (!run_variants.empty()) {
        cfg.variants.clear();
        for (const auto& v : run_variants) cfg.variants.push_back(variant_arg(v));
      }
      if (run_reps != 0) cfg.repetitions = run_reps;
      if (run_workers != 0) cfg.workers = run_workers;
      auto summary = run_pipeline(cfg);
      std::cout << summary.str();
    } else if (*eval) {
      auto records = read_trial_log(log_path(g));
      auto by = GroupBy::parse(group_by);
      for (const auto& row : compute_ssr(records, by)) {
        std::string key;
        for (const auto* part : {&row.key.model, &row.key.variant, &row.key.category})
          if (!part->empty()) key += (key.empty() ? "" : " ") + *part;
        std::cout << (key.empty() ? "all" : key) << ": " << row.cell.success << "/" << row.cell.total() << " "
                  << report_detail::fixed2(row.cell.rate()) << "%\n";
      }
      auto h = classify_failures(records);
      for (const auto& [reason, n] : h.counts)
        std::cout << to_string(reason) << ": " << n << " (" << report_detail::fixed2(h.percent(reason)) << "%)\n";
      CompareOptions opt{per_trial, exact_max, 0.05};
      for (const auto& c : compare) {
        auto parts = split(c, ',');
        if (parts.size() != 2) throw ConfigError("--compare expects A,B");
        auto a = MethodKey::parse(trim(parts[0])), b = MethodKey::parse(trim(parts[1]));
        auto s = compare_methods(records, a, b, opt);
        char line[256];
        std::snprintf(line, sizeof line, "p=%.4g A12=%.4f (%s, n=%zu/%zu)", s.p_value, s.a12,
                      s.mode == UMode::Exact ? "exact" : "approx", s.x_count, s.y_count);
        std::cout << a.str() << " vs " << b.str() << ": " << to_string(s.verdict) << " " << line << "\n";
      }
    } else if (*rep) {
      auto records = read_trial_log(log_path(g));
      auto fmt = format == "csv" ? ReportFormat::Csv : format == "json" ? ReportFormat::Json : ReportFormat::Markdown;
      std::cout << report(records, fmt);
    } else if (*val) {
      auto dir = val_dir;
      if (dir.empty()) dir = base_config(g).corpus_dir;
      if (dir.empty()) throw ConfigError("validate needs a corpus directory");
      auto issues = validate_corpus(dir);
      for (const auto& i : issues) std::cout << i.path << ": " << i.message << "\n";
      std::cout << issues.size() << " issue(s)\n";
      if (!issues.empty()) return 1;
    } else if (*cas) {
      auto fx = load_fixture(cas_fixture);
      auto corpus = load_corpus(cas_corpus);
      auto it = std::find_if(corpus.begin(), corpus.end(), [&](const FormModel& f) { return f.id == fx.form; });
      if (it == corpus.end()) throw CorpusError("fixture form '" + fx.form + "' is not in the corpus");
      std::ostringstream out;
      for (const auto& e : fixture_cassette(fx, *it, variant_arg(cas_variant), cas_at)) out << to_json(e).dump() << "\n";
      if (cas_out.empty()) {
        std::cout << out.str();
      } else {
        std::ofstream f(cas_out, std::ios::binary | std::ios::trunc);
        if (!f || !(f << out.str())) throw Error("cannot write " + cas_out);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
