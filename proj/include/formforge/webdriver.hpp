#pragma once

// Live form target over the W3C WebDriver wire protocol. Insertion is
// find element (css selector) + send keys per pair, then a click on the submit
// control; any URL or page-source change before the deadline counts as a
// server response.

#include <memory>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "formforge/engine.hpp"
#include "formforge/gateway.hpp"
#include "formforge/http_provider.hpp"

namespace formforge {

inline constexpr std::string_view kWebElementKey = "element-6066-11e4-a52e-4f735466cecf";

class WebDriverClient {
 public:
  explicit WebDriverClient(const std::string& endpoint, Millis timeout = Millis(30'000))
      : url_(split_url(endpoint)), cli_(url_.origin) {
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
    cli_.set_connection_timeout(secs);
    cli_.set_read_timeout(secs);
  }

  struct Response {
    int status;
    nlohmann::json body;
  };

  Response post(const std::string& path, const nlohmann::json& body) {
    return wrap(cli_.Post(url_.path + path, body.dump(), "application/json"), "POST " + path);
  }
  Response get(const std::string& path) { return wrap(cli_.Get(url_.path + path), "GET " + path); }
  Response del(const std::string& path) { return wrap(cli_.Delete(url_.path + path), "DELETE " + path); }

 private:
  ParsedUrl url_;
  httplib::Client cli_;

  static Response wrap(const httplib::Result& res, const std::string& what) {
    if (!res) throw EngineError(EngineError::Kind::SessionLost, what + ": " + httplib::to_string(res.error()));
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) j = nlohmann::json::object();
    return {res->status, std::move(j)};
  }
};

struct LiveOptions {
  std::string webdriver_url = "http://127.0.0.1:9515";
  std::string browser = "chrome";
  Millis deadline{10'000};
  Millis poll_interval{100};
};

class WebDriverTarget final : public FormTarget {
 public:
  WebDriverTarget(std::string page_url, Selector submit, LiveOptions opts = {},
                  std::shared_ptr<Clock> clock = std::make_shared<SystemClock>())
      : opts_(std::move(opts)), client_(opts_.webdriver_url), submit_(std::move(submit)), clock_(std::move(clock)) {
    nlohmann::json caps = {{"capabilities", {{"alwaysMatch", {{"browserName", opts_.browser}}}}}};
    auto r = client_.post("/session", caps);
    if (r.status != 200 || !r.body.contains("value") || !r.body["value"].contains("sessionId"))
      throw EngineError(EngineError::Kind::Protocol, "new session failed: HTTP " + std::to_string(r.status));
    session_ = r.body["value"]["sessionId"].get<std::string>();
    auto nav = client_.post(base() + "/url", {{"url", page_url}});
    if (nav.status != 200)
      throw EngineError(EngineError::Kind::Protocol, "navigation failed: HTTP " + std::to_string(nav.status));
  }

  ~WebDriverTarget() override {
    try {
      client_.del(base());
    } catch (...) {
    }
  }

  WebDriverTarget(const WebDriverTarget&) = delete;
  WebDriverTarget& operator=(const WebDriverTarget&) = delete;

  std::optional<ElementRef> find(const Selector& sel) override { return find_css(to_css(sel)); }

  std::optional<ElementRef> find_by_name(const std::string& name) override {
    std::string escaped;
    for (char c : name) {
      if (c == '"' || c == '\\') escaped += '\\';
      escaped += c;
    }
    return find_css("[name=\"" + escaped + "\"]");
  }

  bool fill(const ElementRef& el, const std::string& value) override {
    auto r = client_.post(base() + "/element/" + el + "/value", {{"text", value}});
    return r.status == 200;
  }

  SubmissionOutcome submit() override {
    auto before_url = value_string(client_.get(base() + "/url"));
    auto before_src = value_string(client_.get(base() + "/source"));
    auto button = find(submit_);
    if (!button) return SubmissionOutcome::failed(FailureReason::ContentRejected, "submit control not found");
    auto click = client_.post(base() + "/element/" + *button + "/click", nlohmann::json::object());
    if (click.status != 200)
      return SubmissionOutcome::failed(FailureReason::ContentRejected,
                                       "submit click failed: HTTP " + std::to_string(click.status));

    auto start = clock_->now();
    while (true) {
      auto url = value_string(client_.get(base() + "/url"));
      if (url != before_url) return SubmissionOutcome::ok("navigated to " + url);
      auto src = value_string(client_.get(base() + "/source"));
      if (src != before_src) return SubmissionOutcome::ok("page content changed");
      if (clock_->now() - start >= opts_.deadline) break;
      clock_->sleep_for(opts_.poll_interval);
    }
    return SubmissionOutcome::failed(FailureReason::ContentRejected, "no server response within deadline");
  }

  const std::string& session_id() const { return session_; }

 private:
  LiveOptions opts_;
  WebDriverClient client_;
  Selector submit_;
  std::shared_ptr<Clock> clock_;
  std::string session_;

  std::string base() const { return "/session/" + session_; }

  static std::string value_string(const WebDriverClient::Response& r) {
    if (r.body.contains("value") && r.body["value"].is_string()) return r.body["value"].get<std::string>();
    return {};
  }

  std::optional<ElementRef> find_css(const std::string& css) {
    auto r = client_.post(base() + "/element", {{"using", "css selector"}, {"value", css}});
    if (r.status == 404) return std::nullopt;
    if (r.status != 200)
      throw EngineError(EngineError::Kind::Protocol, "find element failed: HTTP " + std::to_string(r.status));
    const auto& v = r.body.value("value", nlohmann::json::object());
    if (!v.contains(kWebElementKey)) throw EngineError(EngineError::Kind::Protocol, "find element: no element id");
    return v[std::string(kWebElementKey)].get<std::string>();
  }
};

}  // namespace formforge
