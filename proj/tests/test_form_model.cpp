#include <gtest/gtest.h>

#include "support.hpp"

using namespace formforge;
using namespace fftest;

namespace {

const char* kLoginMarkup = R"(<form>
  <input type="text" id="username" name="emailId" required>
  <input type="password" id="password" name="password" required>
  <input type="checkbox" id="exampleCheck1">
  <button type="submit" id="submit">Login</button>
</form>)";

nlohmann::json email_login_json() {
  auto j = nlohmann::json::parse(R"({
    "id": "login-email", "title": "Login", "category": "authentication",
    "fields": [
      {"selector_hint": "#username", "required": true,
       "validation": {"kind": "pattern", "regex": "^[^@\\s]+@[^@\\s]+\\.[^@\\s]+$"}},
      {"selector_hint": "#password", "required": true, "validation": {"kind": "nonempty"}},
      {"selector_hint": "#exampleCheck1", "required": false}
    ],
    "submit": "#submit"})");
  j["markup"] = kLoginMarkup;
  return j;
}

SubmissionOutcome submit_reply(const FormModel& m, const std::string& reply) {
  auto a = extract_assignments(reply, PairPolicy::Keep);
  EXPECT_TRUE(a);
  FormSimulator sim(m);
  return insert_and_submit(a.value(), sim);
}

ModelError schema_error(nlohmann::json j) {
  try {
    form_model_from_json(j, "t.form.json");
  } catch (const ModelError& e) {
    return e;
  }
  ADD_FAILURE() << "no ModelError";
  return ModelError(ModelError::Kind::Io, "", "");
}

}  // namespace

TEST(FormModel, BundledLogin) {
  auto m = load_form_model(data_path("corpus/login.form.json"));
  EXPECT_EQ(m.id, "login");
  EXPECT_EQ(m.category, FormCategory::Authentication);
  ASSERT_EQ(m.fields.size(), 3u);
  EXPECT_EQ(m.fields[0].id, "username");
  EXPECT_TRUE(m.fields[0].required);
  EXPECT_FALSE(m.fields[2].required);
  EXPECT_EQ(m.submit_selector, Selector::id("submit"));
}

TEST(FormModel, SchemaErrors) {
  auto j = email_login_json();
  j.erase("fields");
  auto e = schema_error(j);
  EXPECT_EQ(e.kind(), ModelError::Kind::Schema);
  EXPECT_EQ(e.file(), "t.form.json");

  j = email_login_json();
  j["fields"][1]["selector_hint"] = "#username";
  EXPECT_EQ(schema_error(j).kind(), ModelError::Kind::Schema);

  j = email_login_json();
  j["submit"] = "#nope";
  EXPECT_EQ(schema_error(j).kind(), ModelError::Kind::Schema);

  j = email_login_json();
  j["fields"][0]["validation"] = {{"kind", "one_of"}, {"options", {"a"}}};
  EXPECT_EQ(schema_error(j).field_path(), "fields[0].validation.kind");

  j = email_login_json();
  j["fields"][1]["selector_hint"] = "#ghost";
  EXPECT_EQ(schema_error(j).field_path(), "fields[1].selector_hint");

  EXPECT_THROW(load_form_model("/nonexistent/x.form.json"), ModelError);
}

TEST(FormModel, Rules) {
  ValidationRule numeric;
  numeric.kind = ValidationRule::Kind::Numeric;
  numeric.min = 1;
  numeric.max = 20;
  EXPECT_EQ(check_rule(numeric, "4"), "");
  EXPECT_NE(check_rule(numeric, "0"), "");
  EXPECT_NE(check_rule(numeric, "four"), "");
  ValidationRule dt;
  dt.kind = ValidationRule::Kind::Datetime;
  dt.format = "%Y-%m-%dT%H:%M";
  EXPECT_EQ(check_rule(dt, "2022-12-25T18:30"), "");
  EXPECT_NE(check_rule(dt, "2022-02-30T18:30"), "");
  EXPECT_NE(check_rule(dt, "Time"), "");
  ValidationRule ne;
  ne.kind = ValidationRule::Kind::Nonempty;
  EXPECT_NE(check_rule(ne, "  "), "");
}

TEST(Simulator, EmailLoginSucceedsWithGptFourPairs) {
  auto m = form_model_from_json(email_login_json());
  auto ok = submit_reply(m, R"("""["#username=john.doe@example.com", "#password=StrongPassword123!", "#exampleCheck1=true"]""")");
  EXPECT_TRUE(ok.success()) << ok.detail;
}

TEST(Simulator, PlaceholderTextIsRejected) {
  auto m = form_model_from_json(email_login_json());
  auto bad = submit_reply(m, R"("""["#username=Your Email Address", "#password=Your Password", "#exampleCheck1=Re-member Me"]""")");
  EXPECT_FALSE(bad.success());
  EXPECT_EQ(bad.reason, FailureReason::ContentRejected);
}

TEST(Simulator, EmptyAssignmentFailsRequiredFields) {
  auto m = form_model_from_json(email_login_json());
  auto r = submit_reply(m, R"("""[]""")");
  EXPECT_EQ(r.reason, FailureReason::ContentRejected);
  EXPECT_NE(r.detail.find("required"), std::string::npos);
}

TEST(Simulator, BrowserLikeFills) {
  auto m = load_form_model(data_path("corpus/reservation.form.json"));
  FormSimulator sim(m);
  auto fill = [&](const char* sel, const char* v) { return sim.fill(*sim.find(*parse_selector(sel)), v); };
  EXPECT_TRUE(fill("#person", "number"));
  EXPECT_EQ(sim.value_of("person"), "");
  EXPECT_TRUE(fill("#time", "2023-04-01T18:30'"));
  EXPECT_EQ(sim.value_of("time"), "2023-04-01T18:30");
  EXPECT_FALSE(fill("select[name=tableType]", "Choose table type"));
  EXPECT_EQ(sim.value_of("tableType"), "NORMAL");
  EXPECT_TRUE(fill("#tableType", "VIP"));
  EXPECT_EQ(sim.value_of("tableType"), "VIP");
  EXPECT_TRUE(fill("#message", "hi"));
  EXPECT_TRUE(fill("#message", " there"));
  EXPECT_EQ(sim.value_of("message"), "hi there");
  EXPECT_THROW(sim.value_of("nope"), std::out_of_range);
}

TEST(Simulator, HiddenAndDisabledRejectInput) {
  auto m = load_form_model(data_path("corpus/booking.form.json"));
  FormSimulator sim(m);
  auto hidden = sim.find_by_name("scheduleID");
  ASSERT_TRUE(hidden);
  EXPECT_FALSE(sim.fill(*hidden, "1"));
}

TEST(Simulator, RadioGroupsAndCheckboxes) {
  auto j = nlohmann::json::parse(R"({
    "id": "prefs", "title": "Prefs", "category": "profile",
    "markup": "<form><input type=radio name=size value=S><input type=radio name=size value=L><input type=checkbox id=agree name=agree><button>Save</button></form>",
    "fields": [
      {"selector_hint": "input[name=size]", "required": true, "validation": {"kind": "one_of", "options": ["S", "L"]}},
      {"selector_hint": "#agree", "required": true}
    ],
    "submit": "button"})");
  auto m = form_model_from_json(j);
  FormSimulator sim(m);
  EXPECT_EQ(sim.submit().reason, FailureReason::ContentRejected);
  TestAssignment a;
  a.pairs = {{Selector::attr_match("input", "value", "L"), "true"}, {Selector::id("agree"), "true"}};
  EXPECT_TRUE(insert_and_submit(a, sim).success());
}

TEST(InsertAndSubmit, CountsWhatWasSkipped) {
  auto m = load_form_model(data_path("corpus/login.form.json"));
  TestAssignment a;
  a.pairs = {{Selector::id("username"), "JohnDoe"},
             {Selector::id("password"), "Secret123'"},
             {Selector::id("ghost"), "x"},
             {Selector::id("submit"), "go"}};
  a.malformed = {"not a pair"};
  FormSimulator sim(m);
  auto r = insert_and_submit(a, sim);
  EXPECT_TRUE(r.success()) << r.detail;
  EXPECT_NE(r.detail.find("1 selector(s) unresolved"), std::string::npos);
  EXPECT_NE(r.detail.find("1 value(s) not accepted"), std::string::npos);
  EXPECT_NE(r.detail.find("1 malformed entry"), std::string::npos);
}

TEST(InsertAndSubmit, BareKeyFallsBackToName) {
  auto m = load_form_model(data_path("corpus/login.form.json"));
  FormSimulator sim(m);
  TestAssignment a;
  a.pairs = {{Selector::tag("emailId"), "someone"}, {Selector::tag("password"), "pw"}};
  EXPECT_TRUE(insert_and_submit(a, sim).success());
  EXPECT_EQ(sim.value_of("username"), "someone");
}

TEST(Engine, OwnerStages) {
  EXPECT_EQ(owner_stage(FailureReason::FormatError), Stage::Extract);
  EXPECT_EQ(owner_stage(FailureReason::ContentRejected), Stage::Submit);
  EXPECT_EQ(owner_stage(FailureReason::ConnectionError), Stage::Gateway);
  EXPECT_EQ(failure_reason("ContentRejected"), FailureReason::ContentRejected);
}
