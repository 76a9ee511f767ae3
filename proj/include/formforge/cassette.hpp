#pragma once

// Record/replay of chat completions as JSON lines:
//   {"key", "model", "prompt_sha", "reply_text", "recorded_at"[, "error"]}
// An entry with "error" (e.g. "timeout") replays as that gateway failure.

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <string>

#include "json.hpp"

#include "formforge/gateway.hpp"

namespace formforge {

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static constexpr char hexdig[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hexdig[digest[i] >> 4];
    out += hexdig[digest[i] & 0xF];
  }
  return out;
}

inline std::string cassette_key(const ModelId& model, std::string_view prompt) {
  return sha256_hex(model.str() + "\n" + std::string(prompt));
}

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct CassetteEntry {
  std::string key;
  std::string model;
  std::string prompt_sha;
  std::string reply_text;
  std::string recorded_at;
  std::optional<GatewayError::Kind> error;

  bool operator==(const CassetteEntry&) const = default;
};

inline nlohmann::ordered_json to_json(const CassetteEntry& e) {
  nlohmann::ordered_json j;
  j["key"] = e.key;
  j["model"] = e.model;
  j["prompt_sha"] = e.prompt_sha;
  j["reply_text"] = e.reply_text;
  j["recorded_at"] = e.recorded_at;
  if (e.error) j["error"] = to_lower(to_string(*e.error));
  return j;
}

inline CassetteEntry cassette_entry_from_json(const nlohmann::json& j) {
  CassetteEntry e;
  e.key = j.at("key").get<std::string>();
  e.model = j.value("model", "");
  e.prompt_sha = j.value("prompt_sha", "");
  e.reply_text = j.value("reply_text", "");
  e.recorded_at = j.value("recorded_at", "");
  if (j.contains("error") && !j["error"].is_null()) {
    auto kind = gateway_error_kind(j["error"].get<std::string>());
    if (!kind) throw Error("unknown cassette error kind: " + j["error"].get<std::string>());
    e.error = kind;
  }
  return e;
}

inline CassetteEntry make_cassette_entry(const LlmRequest& req, std::string reply_text,
                                         std::optional<GatewayError::Kind> error = std::nullopt) {
  return {cassette_key(req.model, req.prompt), req.model.str(), sha256_hex(req.prompt), std::move(reply_text),
          utc_timestamp(), error};
}

inline void append_cassette_entry(const CassetteEntry& e, const std::string& path) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot open cassette for append: " + path);
  out << to_json(e).dump() << '\n';
}

inline void record_cassette(const LlmRequest& req, const LlmReply& reply, const std::string& path) {
  append_cassette_entry(make_cassette_entry(req, reply.text), path);
}

inline void record_cassette_error(const LlmRequest& req, const GatewayError& err, const std::string& path) {
  append_cassette_entry(make_cassette_entry(req, {}, err.kind), path);
}

/// Entries by key. A later entry for the same key replaces an earlier one.
class Cassette {
 public:
  Cassette() = default;

  static Cassette load(const std::string& path) {
    Cassette c;
    c.add_file(path);
    return c;
  }

  void add_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open cassette: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object())
        throw Error(path + ":" + std::to_string(lineno) + ": cassette line is not a JSON object");
      try {
        add(cassette_entry_from_json(j));
      } catch (const nlohmann::json::exception& e) {
        throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void add(CassetteEntry e) { entries_[e.key] = std::move(e); }

  const CassetteEntry* find(const LlmRequest& req) const {
    auto it = entries_.find(cassette_key(req.model, req.prompt));
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, CassetteEntry> entries_;
};

inline Expected<LlmReply, GatewayError> replay_cassette(const LlmRequest& req, const Cassette& cassette) {
  const auto* e = cassette.find(req);
  if (!e) return GatewayError{GatewayError::Kind::CassetteMiss, "no cassette entry for " + req.model.str(), 1};
  if (e->error) return GatewayError{*e->error, "recorded " + to_lower(to_string(*e->error)), 1};
  return LlmReply{e->reply_text, Millis(0), 1};
}

inline Expected<LlmReply, GatewayError> replay_cassette(const LlmRequest& req, const std::string& path) {
  return replay_cassette(req, Cassette::load(path));
}

class ReplayProvider final : public Provider {
 public:
  explicit ReplayProvider(Cassette cassette) : cassette_(std::move(cassette)) {}

  AttemptResult attempt(const LlmRequest& req) override {
    auto r = replay_cassette(req, cassette_);
    if (!r) return r.error();
    return std::move(r.value().text);
  }

 private:
  Cassette cassette_;
};

/// Forwards to another provider and appends every outcome to a cassette file.
class RecordingProvider final : public Provider {
 public:
  RecordingProvider(std::shared_ptr<Provider> inner, std::string path)
      : inner_(std::move(inner)), path_(std::move(path)) {}

  AttemptResult attempt(const LlmRequest& req) override {
    auto r = inner_->attempt(req);
    std::lock_guard lock(mu_);
    if (r)
      append_cassette_entry(make_cassette_entry(req, r.value()), path_);
    else
      append_cassette_entry(make_cassette_entry(req, {}, r.error().kind), path_);
    return r;
  }

 private:
  std::shared_ptr<Provider> inner_;
  std::string path_;
  std::mutex mu_;
};

}  // namespace formforge
