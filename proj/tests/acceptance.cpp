// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

#include "stub_webdriver.hpp"
#include "support.hpp"

using namespace formforge;
using namespace fftest;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Result {
  bool pass;
  std::string detail;
};

Result pruning_golden() {
  auto t0 = Clock::now();
  auto pruned = prune_form(first_form(kBeforePruning));
  double ms = ms_since(t0);
  bool same = pruned.markup == normalize_markup(kAfterPruning);
  char buf[160];
  std::snprintf(buf, sizeof buf, "markup %s, %.3f ms", same ? "matches" : "differs", ms);
  return {same && ms < 10.0, buf};
}

Result ssr_arithmetic() {
  auto t0 = Clock::now();
  auto records = ssr_reference_records();
  auto rows = compute_ssr(records);
  auto rep = build_report(records);
  double ms = ms_since(t0);
  const PromptVariant vs[3] = {PromptVariant::RH_P, PromptVariant::LH_P, PromptVariant::PH_P};
  int checked = 0, bad = 0;
  auto check = [&](double got, double want) {
    ++checked;
    if (std::fabs(got - want) > 0.01) ++bad;
  };
  for (const auto& want : ssr_reference())
    for (int v = 0; v < 3; ++v)
      for (const auto& row : rows)
        if (row.key.model == want.model && row.key.variant == to_string(vs[v])) check(row.cell.rate(), want.pct[v]);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) check(rep.rows[i].avg_rate, ssr_reference()[i].avg_pct);
  for (int v = 0; v < 3; ++v) check(rep.average.rate[v], kSsrReferenceVariantAvg[v]);
  check(rep.average.avg_rate, kSsrReferenceOverallAvg);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d/%d percentages within 0.01, %.1f ms", checked - bad, checked, ms);
  return {bad == 0 && checked == 33 + 11 + 4 && ms < 1000, buf};
}

Result a12_oracle() {
  std::mt19937 rng(1001);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    auto draw = [&] {
      std::vector<double> v(1 + rng() % 12);
      int levels = 1 + static_cast<int>(rng() % 8);
      for (auto& x : v) x = static_cast<double>(rng() % levels);
      return v;
    };
    auto xs = draw(), ys = draw();
    worst = std::max(worst, std::fabs(vargha_delaney_a12(xs, ys) - pairwise_a12(xs, ys)));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "1000 pairs, max |diff| %.2e", worst);
  return {worst <= 1e-12, buf};
}

Result u_test_oracle() {
  std::mt19937 rng(2002);
  double worst_exact = 0;
  int cases = 0;
  for (std::size_t m = 1; m < 10; ++m)
    for (std::size_t n = 1; m + n <= 10; ++n)
      for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> xs(m), ys(n);
        int levels = 2 + static_cast<int>(rng() % 6);
        for (auto& x : xs) x = static_cast<double>(rng() % levels);
        for (auto& y : ys) y = static_cast<double>(rng() % levels);
        worst_exact = std::max(worst_exact,
                               std::fabs(mann_whitney_u(xs, ys, UMode::Exact).p_value - enumerated_u_pvalue(xs, ys)));
        ++cases;
      }
  double worst_approx = 0;
  for (int i = 0; i < 200; ++i) {
    std::uniform_real_distribution<double> d(0, 1);
    std::vector<double> xs(8), ys(8);
    for (auto& x : xs) x = d(rng);
    for (auto& y : ys) y = d(rng);
    worst_approx = std::max(worst_approx, std::fabs(mann_whitney_u(xs, ys, UMode::Exact).p_value -
                                                    mann_whitney_u(xs, ys, UMode::Approx).p_value));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "exact vs enumeration %d cases max %.2e; approx vs exact 200 pairs max %.4f", cases,
                worst_exact, worst_approx);
  return {worst_exact <= 1e-9 && worst_approx <= 0.02, buf};
}

Result replay_fixture_rows(const std::string& name) {
  auto fx = load_fixture(data_path("fixtures/" + name + ".json"));
  auto records = replay_fixture(name + ".json", name + ".jsonl");
  int match = 0;
  std::string misses;
  for (std::size_t i = 0; i < fx.rows.size() && i < records.size(); ++i) {
    const auto& r = records[i];
    bool ok = fx.rows[i].expected ? (!r.outcome.success() && r.outcome.reason == fx.rows[i].expected)
                                  : r.outcome.success();
    ok = ok && r.model == fx.rows[i].model;
    if (ok)
      ++match;
    else
      misses += " " + fx.rows[i].method;
  }
  return {match == 11 && records.size() == 11,
          name + " " + std::to_string(match) + "/11 rows" + (misses.empty() ? "" : ", mismatched:" + misses)};
}

Result selector_property() {
  std::mt19937 rng(7007);
  int agree = 0;
  for (int i = 0; i < 10000; ++i) {
    auto form = random_form(rng);
    auto sel = random_selector(rng);
    if (resolve(sel, form) == scan_resolve(sel, form)) ++agree;
  }
  return {agree == 10000, std::to_string(agree) + "/10000 cases agree"};
}

Result extraction_fuzz() {
  std::mt19937 rng(8008);
  const std::vector<std::string> pieces{R"(""")", "[", "]", "\"", "'", ",", "=", "#a", ".b", "input[name=", "\\"};
  int typed = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    int n = std::uniform_int_distribution<int>(0, 64)(rng);
    for (int k = 0; k < n; ++k)
      s += rng() % 3 ? std::string(1, static_cast<char>(rng() % 256)) : pick(pieces, rng);
    bool ok = true;
    for (auto policy : {PairPolicy::Reject, PairPolicy::Keep}) {
      try {
        auto r = extract_assignments(s, policy);
        if (r) {
          for (const auto& p : r->pairs) ok = ok && parse_selector(to_string(p.selector)) == p.selector;
        } else {
          auto k = r.error().kind;
          ok = ok && (k == ExtractError::Kind::NoBlock || k == ExtractError::Kind::BadArray ||
                      k == ExtractError::Kind::BadPair);
        }
      } catch (...) {
        ok = false;
      }
    }
    typed += ok;
  }
  return {typed == 10000, std::to_string(typed) + "/10000 inputs gave typed results"};
}

Result replay_determinism() {
  auto cfg = load_run_config(data_path("replay.json"));
  auto dir = std::filesystem::temp_directory_path() / ("formforge-acc-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  std::string logs[2];
  std::size_t trials = 0;
  for (int k = 0; k < 2; ++k) {
    auto path = dir / ("run" + std::to_string(k) + ".jsonl");
    std::filesystem::remove(path);
    cfg.log_path = path.string();
    cfg.seed = k == 0 ? std::nullopt : std::optional<unsigned long>(99);
    trials = run_pipeline(cfg).trials;
    for (auto r : read_trial_log(cfg.log_path)) {
      r.timestamp.clear();
      logs[k] += to_json(r).dump() + "\n";
    }
  }
  std::filesystem::remove_all(dir);
  bool same = !logs[0].empty() && logs[0] == logs[1];
  return {same, std::to_string(trials) + " trials per run, logs " + (same ? "identical" : "differ") +
                    " modulo timestamps"};
}

Result webdriver_protocol() {
  StubWebDriver stub({{"#username", "e-user"}, {"#password", "e-pass"}, {"#submit", "e-submit"}}, "e-submit");
  auto login = load_form_model(data_path("corpus/login.form.json"));
  LiveOptions opts;
  opts.webdriver_url = stub.endpoint();
  opts.deadline = Millis(2000);
  opts.poll_interval = Millis(20);
  SubmissionOutcome outcome;
  {
    WebDriverTarget target(login.url, login.submit_selector, opts);
    auto a = extract_assignments(R"("""["#username=JohnDoe", "#password=Secret123'"]""")");
    outcome = insert_and_submit(a.value(), target);
  }
  // Expected wire sequence: per pair one find-element then one send-keys, then
  // the submit control is found and clicked.
  std::vector<std::string> seq;
  for (const auto& q : stub.requests()) {
    if (q.method == "POST" && q.path == "/session/s1/element")
      seq.push_back("find " + q.body.value("using", "") + " " + q.body.value("value", ""));
    else if (q.method == "POST" && q.path.size() > 6 && q.path.ends_with("/value"))
      seq.push_back("keys " + q.path.substr(q.path.find("/element/") + 9) + " " + q.body.value("text", ""));
    else if (q.method == "POST" && q.path.ends_with("/click"))
      seq.push_back("click " + q.path.substr(q.path.find("/element/") + 9));
  }
  const std::vector<std::string> want{"find css selector #username",  "keys e-user/value JohnDoe",
                                      "find css selector #password",  "keys e-pass/value Secret123'",
                                      "find css selector #submit",    "click e-submit/click"};
  bool ok = seq == want && outcome.success();
  std::string got;
  for (const auto& s : seq) got += (got.empty() ? "" : " | ") + s;
  return {ok, std::to_string(seq.size()) + " protocol calls" + (ok ? " in expected order" : ": " + got)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"pruning golden", pruning_golden},
      {"SSR arithmetic", ssr_arithmetic},
      {"A12 oracle", a12_oracle},
      {"U-test oracle", u_test_oracle},
      {"login replay", [] { return replay_fixture_rows("login"); }},
      {"reservation and booking replay",
       [] {
         auto a = replay_fixture_rows("reservation"), b = replay_fixture_rows("booking");
         return Result{a.pass && b.pass, a.detail + "; " + b.detail};
       }},
      {"selector resolution", selector_property},
      {"extraction fuzz", extraction_fuzz},
      {"replay determinism", replay_determinism},
      {"WebDriver protocol", webdriver_protocol},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += !r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << r.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
