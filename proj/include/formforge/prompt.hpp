#pragma once

// Five-part test-generation prompt: global, task, note, instruction, objective.

#include <string>

#include "formforge/common.hpp"
#include "formforge/context.hpp"

namespace formforge {

inline constexpr std::string_view kPromptVersion = "prompt-v1";

enum class PromptVariant { RH_P, LH_P, PH_P };

inline std::string_view to_string(PromptVariant v) {
  switch (v) {
    case PromptVariant::RH_P: return "RH-P";
    case PromptVariant::LH_P: return "LH-P";
    case PromptVariant::PH_P: return "PH-P";
  }
  return "?";
}

inline std::optional<PromptVariant> prompt_variant(std::string_view s) {
  for (auto v : {PromptVariant::RH_P, PromptVariant::LH_P, PromptVariant::PH_P})
    if (iequals(to_string(v), s)) return v;
  return std::nullopt;
}

inline ContextOrigin origin_for(PromptVariant v) {
  switch (v) {
    case PromptVariant::RH_P: return ContextOrigin::Raw;
    case PromptVariant::LH_P: return ContextOrigin::Llm;
    case PromptVariant::PH_P: return ContextOrigin::Parser;
  }
  return ContextOrigin::Raw;
}

enum class FormCategory { Authentication, Profile, ContentManagement, Search, Transaction, Unknown };

inline std::string_view to_string(FormCategory c) {
  switch (c) {
    case FormCategory::Authentication: return "authentication";
    case FormCategory::Profile: return "profile";
    case FormCategory::ContentManagement: return "content_management";
    case FormCategory::Search: return "search";
    case FormCategory::Transaction: return "transaction";
    case FormCategory::Unknown: return "unknown";
  }
  return "unknown";
}

inline std::optional<FormCategory> form_category(std::string_view s) {
  for (auto c : {FormCategory::Authentication, FormCategory::Profile, FormCategory::ContentManagement,
                 FormCategory::Search, FormCategory::Transaction, FormCategory::Unknown})
    if (iequals(to_string(c), s)) return c;
  return std::nullopt;
}

struct FormMeta {
  std::string app_name;
  std::string form_title;
  std::size_t element_count = 0;
  FormCategory category = FormCategory::Unknown;
};

struct PromptBundle {
  std::string global;
  std::string task;
  std::string note;
  std::string instruction;
  std::string objective;
  PromptVariant variant = PromptVariant::PH_P;
  std::string concatenated;
};

struct PromptError {
  enum class Kind { VariantMismatch };
  Kind kind = Kind::VariantMismatch;
  std::string detail;
};

namespace prompt_text {

inline std::string global(const FormMeta& m) {
  return "You are an expert in web-form testing. The web application under test is named '" + m.app_name +
         "'. The web form under test is titled '" + m.form_title + "', contains " +
         std::to_string(m.element_count) + " elements and belongs to the " + std::string(to_string(m.category)) +
         " category.";
}

inline constexpr std::string_view kTaskHtml =
    "Your task is to generate a test input for each element of the web form. Please analyze the "
    "structure of the HTML code of the web form below and infer a valid value for every element "
    "that accepts input.\nHTML code of the web form:\n";

inline constexpr std::string_view kTaskContext =
    "Your task is to generate a test input for each element of the web form. Please analyze the "
    "contextual information in natural language below, which describes the elements of the web "
    "form, and infer a valid value for every element that accepts input.\nContextual information:\n";

inline constexpr std::string_view kNote =
    "Note: keep the answer short. Do not explain the answer and do not output intermediate steps.";

inline constexpr std::string_view kInstruction =
    "Give the answer as an array of key-value pairs in this format: "
    "[\"key1=val1\", \"key2=val2\", \"input[name=key3]=val3\", ..., \"keyN=valN\"]. "
    "Each key is the selector of a web-form element (#id for ID selectors, .className for class "
    "selectors, or tag[attribute=value]) and each value is the test input for that element. "
    "Enclose the array in a pair of triple quotation marks (\"\"\").";

inline constexpr std::string_view kObjective =
    "Strictly follow the format above. The generated values must be accepted when the web form "
    "is submitted.";

}  // namespace prompt_text

inline Expected<PromptBundle, PromptError> build_prompt(PromptVariant variant, const ContextString& context,
                                                        const FormMeta& meta) {
  if (context.origin != origin_for(variant))
    return PromptError{PromptError::Kind::VariantMismatch,
                       std::string(to_string(variant)) + " needs a " + std::string(to_string(origin_for(variant))) +
                           " context, got " + std::string(to_string(context.origin))};
  PromptBundle b;
  b.variant = variant;
  b.global = prompt_text::global(meta);

  b.task = std::string(variant == PromptVariant::RH_P ? prompt_text::kTaskHtml : prompt_text::kTaskContext) +
           context.text;
  b.note = prompt_text::kNote;
  b.instruction = prompt_text::kInstruction;
  b.objective = prompt_text::kObjective;
  b.concatenated = b.global + "\n\n" + b.task + "\n\n" + b.note + "\n\n" + b.instruction + "\n\n" + b.objective;
  return b;
}

}  // namespace formforge
