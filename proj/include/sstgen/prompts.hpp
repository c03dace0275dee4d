#pragma once

// Prompt templates for fine-tuning records, label prediction, rewriting, RAG
// augmentation, landmark choice and chain-of-thought labeling. The wording is
// kept byte-for-byte stable: transcripts are keyed by a digest of the prompt.

#include <string>
#include <string_view>
#include <vector>

#include "sstgen/common.hpp"

namespace sstgen::prompts {

struct LabeledReference {
  std::string text;
  std::vector<std::string> labels;  // display form
};

inline std::string bracket(const std::vector<std::string>& labels) { return "[" + join(labels, ", ") + "]"; }

/// Fine-tuning instruction and prediction prompt share one template; the
/// training record's output is the bracketed label list that follows.
inline std::string label_prompt(std::string_view subject, std::string_view document) {
  std::string p = "Assign tags for the following ";
  p += subject;
  p += " Document:\n\n";
  p += document;
  p += "\n\nAnswer:";
  return p;
}

inline std::string rewrite(std::string_view document) {
  std::string p =
      "*Task Description: Rewrite the following text in English, maintaing the original meaning but using different "
      "words and sentence structures. The new version should be clear and concise, and it should not alter the core "
      "message of the original text.\n\n"
      "*Original Text:\n";
  p += document;
  p += "\n\nRewritten Text:";
  return p;
}

inline std::string format_labeled(const std::vector<LabeledReference>& refs) {
  std::string out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (i) out += "\n\n";
    out += "Content: " + refs[i].text + "\nLabel: " + bracket(refs[i].labels);
  }
  return out;
}

inline std::string format_unlabeled(const std::vector<std::string>& docs) {
  std::string out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i) out += "\n\n";
    out += "Content: " + docs[i];
  }
  return out;
}

inline constexpr std::string_view kRagPrimaryMarker = "*Primary Document for Augmentation:\n";
inline constexpr std::string_view kRagLabeledMarker = "*Reference Labeled Documents:\n";
inline constexpr std::string_view kRagUnlabeledMarker = "*Reference Unlabeled Documents:\n";

inline std::string rag_augment(std::string_view label_listing, const std::vector<LabeledReference>& labeled,
                               const std::vector<std::string>& unlabeled, std::string_view primary) {
  std::string p =
      "*Task Description:\n"
      "You are provided with a set of similar documents, some of which are labeled and others are not. Your task is "
      "to generate a sample document based on the primary document, using both the labeled and unlabeled documents as "
      "references.\n\n"
      "*List of  Available Labels:\n";
  p += label_listing;
  p += "\n\n";
  p += kRagLabeledMarker;
  p += format_labeled(labeled);
  p += "\n\n";
  p += kRagUnlabeledMarker;
  p += format_unlabeled(unlabeled);
  p += "\n\n";
  p += kRagPrimaryMarker;
  p += primary;
  p +=
      "\n\n*Task:\n"
      "Using the labeled and unlabeled documents as a guide, create a new document based on the primary document and "
      "assign it the appropriate labels from the available list.\n\n"
      "*Document Format:\n"
      "Content:\n"
      "Label: [Your assigned label]\n\n"
      "*Generated Example:\n";
  return p;
}

inline constexpr std::string_view kClusterDocsMarker = "Documents in the cluster:\n\n";

/// Documents are numbered from 1 ("1-. ...").
inline std::string choose_landmark(const std::vector<std::string>& docs) {
  std::string p =
      "You have been provided with a set of similar documents, each indexed by a number. Your task is to identify the "
      "most representative example from this cluster of documents. Please carefully analyze the given documents and "
      "select one document that best captures the common essence and characteristics of the samples. The selection "
      "should emphasize the representativeness and relevance of the chosen sample to the category, so that it can "
      "serve as a reference for labeling the entire cluster.\n\n";
  p += kClusterDocsMarker;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    p += std::to_string(i + 1) + "-. " + docs[i] + "\n\n";
  }
  p +=
      "Please choose one document that could best serve as a reference for labeling the entire cluster, and return "
      "only the index number of your selection, in format such as [0], [1], etc.\n\n"
      "Answer:\n";
  return p;
}

inline constexpr std::string_view kCotTargetMarker = "*Target Document for Prediction:\n";

inline std::string cot_label(std::string_view label_listing, const std::vector<LabeledReference>& labeled,
                             std::string_view target) {
  std::string p =
      "*Task Description: You are provided with a set of similar documents. Your task is to predict the label for the "
      "target document, using the labeled document examples as references.\n\n"
      "*List of  Available Labels:\n";
  p += label_listing;
  p += "\n\n";
  p += kRagLabeledMarker;
  p += format_labeled(labeled);
  p += "\n";
  p += kCotTargetMarker;
  p += target;
  p +=
      "\n\n*Task:\n"
      "Predict the label for the target document. Please provide your reasoning before asssigning the label.\n\n"
      "*Format:\n"
      "Thought: [Your thoughts]\n"
      "Label: [Your assigned label]\n\n"
      "Answer:\n";
  return p;
}

}  // namespace sstgen::prompts
