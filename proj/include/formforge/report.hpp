#pragma once

// Model x variant SSR table with averages and best performer, per-category
// table and failure histogram, rendered as markdown, CSV or JSON.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "formforge/evaluator.hpp"

namespace formforge {

struct SsrTableRow {
  std::string label;
  std::vector<std::optional<SsrCell>> cells;  // one per SsrReport::variants entry
  // Means over the row's populated cells; rate is pooled (mean # / mean total).
  double avg_success = 0, avg_failure = 0, avg_rate = 0;
  std::string best;
};

struct AverageRow {
  std::vector<double> success, failure, rate;  // per variant, mean over models
  double avg_success = 0, avg_failure = 0, avg_rate = 0;
  std::string best;
};

struct CategoryRow {
  std::string category;
  std::vector<std::optional<SsrCell>> cells;
  SsrCell total;
};

struct SsrReport {
  std::size_t trials = 0;
  std::vector<PromptVariant> variants;
  std::vector<SsrTableRow> rows;
  AverageRow average;
  std::vector<CategoryRow> categories;
  FailureHistogram failures;
};

namespace report_detail {

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// Variants with the highest rate, joined by '&'; "--" when every rate is zero.
inline std::string best_of(const std::vector<PromptVariant>& variants, const std::vector<std::optional<double>>& rates) {
  double top = -1;
  for (const auto& r : rates)
    if (r) top = std::max(top, *r);
  if (top <= 0) return "--";
  std::string out;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    if (!rates[i] || std::fabs(*rates[i] - top) > 1e-9) continue;
    if (!out.empty()) out += '&';
    out += to_string(variants[i]);
  }
  return out;
}

}  // namespace report_detail

inline SsrReport build_report(const std::vector<TrialRecord>& records) {
  SsrReport rep;
  rep.trials = records.size();
  rep.failures = classify_failures(records);
  if (records.empty()) return rep;

  for (auto v : {PromptVariant::RH_P, PromptVariant::LH_P, PromptVariant::PH_P})
    for (const auto& r : records)
      if (r.variant == v) {
        rep.variants.push_back(v);
        break;
      }
  auto vindex = [&](PromptVariant v) {
    return static_cast<std::size_t>(std::find(rep.variants.begin(), rep.variants.end(), v) - rep.variants.begin());
  };
  const auto nv = rep.variants.size();

  for (const auto& row : compute_ssr(records, {true, true, false})) {
    auto it = std::find_if(rep.rows.begin(), rep.rows.end(), [&](const auto& t) { return t.label == row.key.model; });
    if (it == rep.rows.end()) {
      rep.rows.push_back({row.key.model, std::vector<std::optional<SsrCell>>(nv), 0, 0, 0, {}});
      it = rep.rows.end() - 1;
    }
    it->cells[vindex(*prompt_variant(row.key.variant))] = row.cell;
  }

  for (auto& row : rep.rows) {
    double s = 0, f = 0;
    int n = 0;
    std::vector<std::optional<double>> rates(nv);
    for (std::size_t i = 0; i < nv; ++i) {
      if (!row.cells[i]) continue;
      s += static_cast<double>(row.cells[i]->success);
      f += static_cast<double>(row.cells[i]->failure);
      rates[i] = row.cells[i]->rate();
      ++n;
    }
    row.avg_success = s / n;
    row.avg_failure = f / n;
    row.avg_rate = 100.0 * s / (s + f);
    row.best = report_detail::best_of(rep.variants, rates);
  }

  auto& avg = rep.average;
  avg.success.assign(nv, 0);
  avg.failure.assign(nv, 0);
  avg.rate.assign(nv, 0);
  std::vector<std::optional<double>> rates(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    int n = 0;
    for (const auto& row : rep.rows) {
      if (!row.cells[i]) continue;
      avg.success[i] += static_cast<double>(row.cells[i]->success);
      avg.failure[i] += static_cast<double>(row.cells[i]->failure);
      ++n;
    }
    avg.success[i] /= n;
    avg.failure[i] /= n;
    avg.rate[i] = 100.0 * avg.success[i] / (avg.success[i] + avg.failure[i]);
    rates[i] = avg.rate[i];
    avg.avg_success += avg.success[i] / static_cast<double>(nv);
    avg.avg_failure += avg.failure[i] / static_cast<double>(nv);
  }
  avg.avg_rate = 100.0 * avg.avg_success / (avg.avg_success + avg.avg_failure);
  avg.best = report_detail::best_of(rep.variants, rates);

  for (auto c : {FormCategory::Authentication, FormCategory::Profile, FormCategory::ContentManagement,
                 FormCategory::Search, FormCategory::Transaction, FormCategory::Unknown}) {
    CategoryRow row{std::string(to_string(c)), std::vector<std::optional<SsrCell>>(nv), {}};
    bool any = false;
    for (const auto& r : records) {
      if (r.category != c) continue;
      any = true;
      auto& cell = row.cells[vindex(r.variant)];
      if (!cell) cell = SsrCell{};
      cell->add(r.outcome.success());
      row.total.add(r.outcome.success());
    }
    if (any) rep.categories.push_back(std::move(row));
  }
  return rep;
}

inline std::string render_markdown(const SsrReport& rep) {
  using report_detail::fixed2;
  std::ostringstream out;
  out << "# SSR report\n\n";
  if (rep.trials == 0) {
    out << "No trials recorded.\n";
    return out.str();
  }
  out << "Trials: " << rep.trials << "\n\n## SSR by model and prompt variant\n\n| Model |";
  for (auto v : rep.variants) out << ' ' << to_string(v) << " # | " << to_string(v) << " !# | " << to_string(v) << " % |";
  out << " Average # | Average !# | Average % | Best Performer |\n|---|";
  for (std::size_t i = 0; i < rep.variants.size() * 3 + 3; ++i) out << "---:|";
  out << "---|\n";
  for (const auto& row : rep.rows) {
    out << "| " << row.label << " |";
    for (const auto& c : row.cells) {
      if (c)
        out << ' ' << c->success << " | " << c->failure << " | " << fixed2(c->rate()) << "% |";
      else
        out << " - | - | - |";
    }
    out << ' ' << fixed2(row.avg_success) << " | " << fixed2(row.avg_failure) << " | " << fixed2(row.avg_rate)
        << "% | " << row.best << " |\n";
  }
  out << "| Average |";
  for (std::size_t i = 0; i < rep.variants.size(); ++i)
    out << ' ' << fixed2(rep.average.success[i]) << " | " << fixed2(rep.average.failure[i]) << " | "
        << fixed2(rep.average.rate[i]) << "% |";
  out << ' ' << fixed2(rep.average.avg_success) << " | " << fixed2(rep.average.avg_failure) << " | "
      << fixed2(rep.average.avg_rate) << "% | " << rep.average.best << " |\n";

  out << "\n## SSR by form category\n\n| Category |";
  for (auto v : rep.variants) out << ' ' << to_string(v) << " # | " << to_string(v) << " !# | " << to_string(v) << " % |";
  out << " Total # | Total !# | Total % |\n|---|";
  for (std::size_t i = 0; i < rep.variants.size() * 3 + 3; ++i) out << "---:|";
  out << '\n';
  for (const auto& row : rep.categories) {
    out << "| " << row.category << " |";
    for (const auto& c : row.cells) {
      if (c)
        out << ' ' << c->success << " | " << c->failure << " | " << fixed2(c->rate()) << "% |";
      else
        out << " - | - | - |";
    }
    out << ' ' << row.total.success << " | " << row.total.failure << " | " << fixed2(row.total.rate()) << "% |\n";
  }

  out << "\n## Failure reasons\n\n";
  if (rep.failures.empty()) {
    out << "No failed trials.\n";
  } else {
    out << "| Reason | Count | % |\n|---|---:|---:|\n";
    for (const auto& [reason, n] : rep.failures.counts)
      out << "| " << to_string(reason) << " | " << n << " | " << fixed2(rep.failures.percent(reason)) << "% |\n";
  }
  return out.str();
}

inline std::string render_csv(const SsrReport& rep) {
  using report_detail::fixed2;
  std::ostringstream out;
  out << "section,model,variant,category,reason,success,failure,rate\n";
  if (rep.trials == 0) {
    out << "note,,,,,,,no trials\n";
    return out.str();
  }
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (const auto& row : rep.rows) {
    for (std::size_t i = 0; i < rep.variants.size(); ++i) {
      if (!row.cells[i]) continue;
      const auto& c = *row.cells[i];
      out << "ssr," << quote(row.label) << ',' << to_string(rep.variants[i]) << ",,," << c.success << ','
          << c.failure << ',' << fixed2(c.rate()) << '\n';
    }
    out << "ssr_average," << quote(row.label) << ",,,," << fixed2(row.avg_success) << ','
        << fixed2(row.avg_failure) << ',' << fixed2(row.avg_rate) << '\n';
    out << "best_performer," << quote(row.label) << ',' << row.best << ",,,,,\n";
  }
  for (std::size_t i = 0; i < rep.variants.size(); ++i)
    out << "variant_average,," << to_string(rep.variants[i]) << ",,," << fixed2(rep.average.success[i]) << ','
        << fixed2(rep.average.failure[i]) << ',' << fixed2(rep.average.rate[i]) << '\n';
  out << "overall_average,,,,," << fixed2(rep.average.avg_success) << ',' << fixed2(rep.average.avg_failure) << ','
      << fixed2(rep.average.avg_rate) << '\n';
  for (const auto& row : rep.categories)
    out << "category,,," << row.category << ",," << row.total.success << ',' << row.total.failure << ','
        << fixed2(row.total.rate()) << '\n';
  for (const auto& [reason, n] : rep.failures.counts)
    out << "failure,,,," << to_string(reason) << ",," << n << ',' << fixed2(rep.failures.percent(reason)) << '\n';
  return out.str();
}

inline nlohmann::ordered_json render_json(const SsrReport& rep) {
  nlohmann::ordered_json j;
  j["trials"] = rep.trials;
  if (rep.trials == 0) {
    j["note"] = "no trials";
    return j;
  }
  auto cell_json = [](const SsrCell& c) {
    return nlohmann::ordered_json{{"success", c.success}, {"failure", c.failure}, {"rate", c.rate()}};
  };
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : rep.rows) {
    nlohmann::ordered_json r;
    r["model"] = row.label;
    for (std::size_t i = 0; i < rep.variants.size(); ++i)
      r[std::string(to_string(rep.variants[i]))] = row.cells[i] ? cell_json(*row.cells[i]) : nullptr;
    r["average"] = {{"success", row.avg_success}, {"failure", row.avg_failure}, {"rate", row.avg_rate}};
    r["best_performer"] = row.best;
    rows.push_back(r);
  }
  j["ssr"] = rows;
  nlohmann::ordered_json avg;
  for (std::size_t i = 0; i < rep.variants.size(); ++i)
    avg[std::string(to_string(rep.variants[i]))] = {
        {"success", rep.average.success[i]}, {"failure", rep.average.failure[i]}, {"rate", rep.average.rate[i]}};
  avg["average"] = {{"success", rep.average.avg_success},
                    {"failure", rep.average.avg_failure},
                    {"rate", rep.average.avg_rate}};
  avg["best_performer"] = rep.average.best;
  j["average"] = avg;
  auto cats = nlohmann::ordered_json::array();
  for (const auto& row : rep.categories) {
    nlohmann::ordered_json r;
    r["category"] = row.category;
    for (std::size_t i = 0; i < rep.variants.size(); ++i)
      r[std::string(to_string(rep.variants[i]))] = row.cells[i] ? cell_json(*row.cells[i]) : nullptr;
    r["total"] = cell_json(row.total);
    cats.push_back(r);
  }
  j["by_category"] = cats;
  auto fails = nlohmann::ordered_json::object();
  for (const auto& [reason, n] : rep.failures.counts)
    fails[std::string(to_string(reason))] = {{"count", n}, {"percent", rep.failures.percent(reason)}};
  j["failures"] = fails;
  return j;
}

enum class ReportFormat { Markdown, Csv, Json };

inline std::string report(const std::vector<TrialRecord>& records, ReportFormat fmt) {
  auto rep = build_report(records);
  switch (fmt) {
    case ReportFormat::Markdown: return render_markdown(rep);
    case ReportFormat::Csv: return render_csv(rep);
    case ReportFormat::Json: return render_json(rep).dump(2) + "\n";
  }
  return {};
}

}  // namespace formforge
