#pragma once

// Trial records and the append-only JSON-lines trial log.

#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "formforge/engine.hpp"
#include "formforge/gateway.hpp"
#include "formforge/prompt.hpp"

namespace formforge {

struct TrialRecord {
  std::string url_or_path;
  std::string form_id;
  std::string form_markup_hash;
  ModelId model;
  PromptVariant variant = PromptVariant::PH_P;
  std::string prompt_text;
  std::string prompt_version;
  std::optional<std::string> context_reply;  // LH-P parsing reply
  std::string reply_text;
  std::optional<TestAssignment> assignments;
  SubmissionOutcome outcome;
  std::optional<Stage> stage;  // stage that failed the trial
  int repetition = 1;
  FormCategory category = FormCategory::Unknown;
  std::string timestamp;

  bool operator==(const TrialRecord&) const = default;
};

inline nlohmann::ordered_json to_json(const TrialRecord& r) {
  nlohmann::ordered_json j;
  j["url_or_path"] = r.url_or_path;
  j["form_id"] = r.form_id;
  j["form_markup_hash"] = r.form_markup_hash;
  j["model"] = r.model.str();
  j["variant"] = to_string(r.variant);
  j["prompt_text"] = r.prompt_text;
  j["prompt_version"] = r.prompt_version;
  j["context_reply"] = r.context_reply ? nlohmann::ordered_json(*r.context_reply) : nullptr;
  j["reply_text"] = r.reply_text;
  if (r.assignments) {
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& a : r.assignments->pairs) pairs.push_back({{"selector", to_string(a.selector)}, {"value", a.value}});
    j["assignments"] = {{"pairs", pairs}, {"malformed", r.assignments->malformed}};
  } else {
    j["assignments"] = nullptr;
  }
  nlohmann::ordered_json out;
  out["status"] = r.outcome.success() ? "success" : "failed";
  out["reason"] = r.outcome.reason ? nlohmann::ordered_json(to_string(*r.outcome.reason)) : nullptr;
  out["stage"] = r.stage ? nlohmann::ordered_json(to_string(*r.stage)) : nullptr;
  out["detail"] = r.outcome.detail;
  j["outcome"] = out;
  j["repetition"] = r.repetition;
  j["category"] = to_string(r.category);
  j["timestamp"] = r.timestamp;
  return j;
}

inline TrialRecord trial_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& what) { return Error("trial record: " + what); };
  TrialRecord r;
  try {
    r.url_or_path = j.at("url_or_path").get<std::string>();
    r.form_id = j.value("form_id", "");
    r.form_markup_hash = j.at("form_markup_hash").get<std::string>();
    r.model = ModelId::parse(j.at("model").get<std::string>());
    auto v = prompt_variant(j.at("variant").get<std::string>());
    if (!v) throw bad("unknown variant");
    r.variant = *v;
    r.prompt_text = j.at("prompt_text").get<std::string>();
    r.prompt_version = j.value("prompt_version", "");
    if (j.contains("context_reply") && j["context_reply"].is_string())
      r.context_reply = j["context_reply"].get<std::string>();
    r.reply_text = j.at("reply_text").get<std::string>();
    if (j.contains("assignments") && !j["assignments"].is_null()) {
      TestAssignment a;
      a.raw_reply = r.reply_text;
      for (const auto& p : j["assignments"].at("pairs")) {
        auto sel = parse_selector(p.at("selector").get<std::string>());
        if (!sel) throw bad("bad selector " + p.at("selector").get<std::string>());
        a.pairs.push_back({*sel, p.at("value").get<std::string>()});
      }
      if (j["assignments"].contains("malformed"))
        a.malformed = j["assignments"]["malformed"].get<std::vector<std::string>>();
      r.assignments = std::move(a);
    }
    const auto& out = j.at("outcome");
    auto status = out.at("status").get<std::string>();
    if (status == "success") {
      r.outcome = SubmissionOutcome::ok(out.value("detail", ""));
    } else if (status == "failed") {
      auto reason = failure_reason(out.at("reason").get<std::string>());
      if (!reason) throw bad("unknown failure reason");
      r.outcome = SubmissionOutcome::failed(*reason, out.value("detail", ""));
    } else {
      throw bad("unknown status " + status);
    }
    if (out.contains("stage") && out["stage"].is_string()) {
      auto st = stage_from_string(out["stage"].get<std::string>());
      if (!st) throw bad("unknown stage");
      r.stage = st;
    }
    r.repetition = j.at("repetition").get<int>();
    auto cat = form_category(j.at("category").get<std::string>());
    if (!cat) throw bad("unknown category");
    r.category = *cat;
    r.timestamp = j.value("timestamp", "");
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
  return r;
}

/// Serializes appends from concurrent workers; each record is one flushed line.
class TrialLogWriter {
 public:
  explicit TrialLogWriter(const std::string& path, bool truncate = false)
      : out_(path, truncate ? std::ios::trunc | std::ios::binary : std::ios::app | std::ios::binary) {
    if (!out_) throw Error("cannot open trial log: " + path);
  }

  void append(const TrialRecord& r) {
    std::lock_guard lock(mu_);
    out_ << to_json(r).dump() << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

inline std::vector<TrialRecord> read_trial_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trial log: " + path);
  std::vector<TrialRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(path + ":" + std::to_string(lineno) + ": not JSON");
    try {
      out.push_back(trial_from_json(j));
    } catch (const Error& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_trial_log(const std::vector<TrialRecord>& records, const std::string& path) {
  TrialLogWriter w(path, true);
  for (const auto& r : records) w.append(r);
}

}  // namespace formforge
