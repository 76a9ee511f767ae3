#pragma once

// Provider-agnostic chat-completion client. Providers only perform single
// attempts; the gateway owns retries, backoff and per-provider rate limits.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "formforge/common.hpp"

namespace formforge {

using Millis = std::chrono::milliseconds;

struct ModelId {
  std::string provider;
  std::string model;

  bool operator==(const ModelId&) const = default;
  auto operator<=>(const ModelId&) const = default;

  std::string str() const { return provider + "/" + model; }

  /// "provider/model"; the model part may itself contain '/'.
  static ModelId parse(std::string_view s) {
    auto slash = s.find('/');
    if (slash == std::string_view::npos || slash == 0 || slash + 1 == s.size())
      throw Error("model id must look like provider/model: " + std::string(s));
    return {std::string(s.substr(0, slash)), std::string(s.substr(slash + 1))};
  }
};

struct LlmRequest {
  ModelId model;
  std::string prompt;
  Millis timeout{60'000};
  int max_retries = 0;
};

struct LlmReply {
  std::string text;
  Millis latency{0};
  int attempt_count = 1;
};

struct GatewayError {
  enum class Kind { Timeout, Transport, Auth, RateLimited, CassetteMiss };
  Kind kind;
  std::string message;
  int attempt_count = 1;
};

inline std::string_view to_string(GatewayError::Kind k) {
  switch (k) {
    case GatewayError::Kind::Timeout: return "Timeout";
    case GatewayError::Kind::Transport: return "Transport";
    case GatewayError::Kind::Auth: return "Auth";
    case GatewayError::Kind::RateLimited: return "RateLimited";
    case GatewayError::Kind::CassetteMiss: return "CassetteMiss";
  }
  return "?";
}

inline std::optional<GatewayError::Kind> gateway_error_kind(std::string_view s) {
  for (auto k : {GatewayError::Kind::Timeout, GatewayError::Kind::Transport, GatewayError::Kind::Auth,
                 GatewayError::Kind::RateLimited, GatewayError::Kind::CassetteMiss})
    if (iequals(to_string(k), s)) return k;
  return std::nullopt;
}

inline bool is_transient(GatewayError::Kind k) {
  return k == GatewayError::Kind::Timeout || k == GatewayError::Kind::Transport ||
         k == GatewayError::Kind::RateLimited;
}

using AttemptResult = Expected<std::string, GatewayError>;

// ---------------------------------------------------------------------------
// Clocks

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() const = 0;
  virtual void sleep_for(Millis d) = 0;
};

class SystemClock final : public Clock {
 public:
  time_point now() const override { return std::chrono::steady_clock::now(); }
  void sleep_for(Millis d) override { std::this_thread::sleep_for(d); }
};

/// Time only moves when someone sleeps. Used to test backoff and rate limits.
class VirtualClock final : public Clock {
 public:
  time_point now() const override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void sleep_for(Millis d) override {
    std::lock_guard lock(mu_);
    now_ += d;
    slept_ += d;
  }
  Millis total_slept() const {
    std::lock_guard lock(mu_);
    return slept_;
  }

 private:
  mutable std::mutex mu_;
  time_point now_{};
  Millis slept_{0};
};

// ---------------------------------------------------------------------------
// Rate limiting

struct RateLimit {
  int requests = 0;  // 0 disables limiting
  Millis interval{60'000};
};

/// Sliding-window limiter: within any window of length `interval` at most
/// `requests` acquisitions succeed. Callers block (on the clock) until a slot frees.
class RateLimiter {
 public:
  RateLimiter(RateLimit limit, std::shared_ptr<Clock> clock) : limit_(limit), clock_(std::move(clock)) {}

  void acquire() {
    if (limit_.requests <= 0) return;
    std::lock_guard lock(mu_);
    while (true) {
      auto now = clock_->now();
      while (!recent_.empty() && recent_.front() + limit_.interval <= now) recent_.pop_front();
      if (static_cast<int>(recent_.size()) < limit_.requests) {
        recent_.push_back(now);
        return;
      }
      auto wait = recent_.front() + limit_.interval - now;
      clock_->sleep_for(std::chrono::duration_cast<Millis>(wait) + Millis(1));
    }
  }

 private:
  RateLimit limit_;
  std::shared_ptr<Clock> clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> recent_;
};

// ---------------------------------------------------------------------------
// Providers

class Provider {
 public:
  virtual ~Provider() = default;
  /// One network round trip (or its simulation). No retries here.
  virtual AttemptResult attempt(const LlmRequest& req) = 0;
};

/// Deterministic in-process provider driven by a responder function.
class MockProvider final : public Provider {
 public:
  using Responder = std::function<AttemptResult(const LlmRequest&, int call_index)>;

  explicit MockProvider(Responder responder) : responder_(std::move(responder)) {}

  /// One scripted outcome per call; the last step repeats once the script runs out.
  static std::shared_ptr<MockProvider> scripted(std::vector<AttemptResult> steps) {
    if (steps.empty()) throw std::invalid_argument("mock script must not be empty");
    return std::make_shared<MockProvider>(
        [steps = std::move(steps)](const LlmRequest&, int i) {
          return steps[std::min<std::size_t>(static_cast<std::size_t>(i), steps.size() - 1)];
        });
  }

  static std::shared_ptr<MockProvider> fixed(std::string text) {
    return scripted({AttemptResult(std::move(text))});
  }

  AttemptResult attempt(const LlmRequest& req) override {
    int index;
    {
      std::lock_guard lock(mu_);
      index = calls_++;
    }
    return responder_(req, index);
  }

  int calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  Responder responder_;
  mutable std::mutex mu_;
  int calls_ = 0;
};

// ---------------------------------------------------------------------------
// Gateway

struct BackoffPolicy {
  Millis initial{500};
  double factor = 2.0;
  Millis max{30'000};
};

class LlmGateway {
 public:
  explicit LlmGateway(std::shared_ptr<Clock> clock = std::make_shared<SystemClock>(), BackoffPolicy backoff = {})
      : clock_(std::move(clock)), backoff_(backoff) {}

  void add_provider(const std::string& name, std::shared_ptr<Provider> provider, RateLimit limit = {}) {
    std::lock_guard lock(mu_);
    entries_[name] = Entry{std::move(provider), std::make_shared<RateLimiter>(limit, clock_)};
  }

  /// Sends every request to one provider regardless of ModelId::provider
  /// (replay mode routes everything through the cassette).
  void route_all_to(std::string name) {
    std::lock_guard lock(mu_);
    route_all_ = std::move(name);
  }

  bool has_provider(const std::string& name) const {
    std::lock_guard lock(mu_);
    return entries_.count(name) != 0;
  }

  Clock& clock() { return *clock_; }

  Expected<LlmReply, GatewayError> complete(const LlmRequest& req) {
    if (req.timeout <= Millis(0)) throw std::invalid_argument("LlmRequest timeout must be positive");
    if (req.max_retries < 0) throw std::invalid_argument("LlmRequest max_retries must be nonnegative");
    Entry entry;
    {
      std::lock_guard lock(mu_);
      auto name = route_all_.empty() ? req.model.provider : route_all_;
      auto it = entries_.find(name);
      if (it == entries_.end())
        return GatewayError{GatewayError::Kind::Transport, "no provider configured for '" + name + "'", 1};
      entry = it->second;
    }

    Millis delay = backoff_.initial;
    for (int attempt = 1;; ++attempt) {
      entry.limiter->acquire();
      auto start = clock_->now();
      auto result = entry.provider->attempt(req);
      auto latency = std::chrono::duration_cast<Millis>(clock_->now() - start);
      if (result) return LlmReply{std::move(result.value()), latency, attempt};

      auto err = std::move(result.error());
      err.attempt_count = attempt;
      if (!is_transient(err.kind) || attempt > req.max_retries) return err;
      clock_->sleep_for(delay);
      delay = std::min(backoff_.max, Millis(static_cast<Millis::rep>(static_cast<double>(delay.count()) * backoff_.factor)));
    }
  }

 private:
  struct Entry {
    std::shared_ptr<Provider> provider;
    std::shared_ptr<RateLimiter> limiter;
  };

  std::shared_ptr<Clock> clock_;
  BackoffPolicy backoff_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
  std::string route_all_;
};

}  // namespace formforge
