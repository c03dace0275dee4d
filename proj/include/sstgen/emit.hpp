#pragma once

#include <json.hpp>

#include <filesystem>
#include <regex>
#include <string>
#include <vector>

#include "sstgen/augment.hpp"
#include "sstgen/common.hpp"
#include "sstgen/corpus.hpp"
#include "sstgen/landmark.hpp"
#include "sstgen/prompts.hpp"

namespace sstgen {

struct FineTuneRecord {
  std::string instruction;
  std::string input;
  std::string output;

  bool operator==(const FineTuneRecord&) const = default;
};

inline std::string record_line(const FineTuneRecord& r) {
  nlohmann::ordered_json j;
  j["instruction"] = r.instruction;
  j["input"] = r.input;
  j["output"] = r.output;
  return j.dump();
}

inline std::string default_subject(const std::string& dataset) {
  if (to_lower(dataset) == "wos") return "Web of Science paper abstract";
  return "Reuters news";
}

inline std::string build_predict_prompt(const std::string& text, const std::string& subject) {
  if (trim(text).empty()) fail(ErrorKind::invalid_input, "cannot build a prompt for empty text");
  return prompts::label_prompt(subject, text);
}

/// Orders labels for output: catalog casing restored, and under the
/// hierarchical scheme domains come before areas. Labels outside the
/// catalog pass through unchanged.
inline std::vector<std::string> output_labels(const std::vector<std::string>& labels, LabelScheme scheme,
                                              const LabelCatalog* catalog) {
  std::vector<std::string> shown;
  for (const auto& l : labels) {
    if (l.find_first_of("[],") != std::string::npos) {
      fail(ErrorKind::invalid_input, "label '" + l + "' contains a reserved character ([ ] ,)");
    }
    const auto n = normalize_label(l);
    if (n.empty()) continue;
    shown.push_back(catalog && catalog->contains(n) ? catalog->display(n) : n);
  }
  if (scheme == LabelScheme::hierarchical_2 && catalog) {
    std::stable_partition(shown.begin(), shown.end(), [&](const std::string& l) { return catalog->is_domain(l); });
  }
  return shown;
}

inline FineTuneRecord build_train_record(const std::string& text, const std::vector<std::string>& labels,
                                         const std::string& subject, LabelScheme scheme,
                                         const LabelCatalog* catalog = nullptr) {
  auto shown = output_labels(labels, scheme, catalog);
  if (shown.empty()) fail(ErrorKind::invalid_input, "training record needs at least one label");
  return {build_predict_prompt(text, subject), "", prompts::bracket(shown)};
}

inline std::size_t emit_jsonl(const std::vector<FineTuneRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) out += record_line(r) + "\n";
  write_file(path, out);
  return records.size();
}

inline std::vector<FineTuneRecord> read_records(const std::filesystem::path& path) {
  std::vector<FineTuneRecord> out;
  auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(ln + 1) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[ln]);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, where + e.what());
    }
    if (!j.is_object() || j.size() != 3 || !j.contains("instruction") || !j.contains("input") || !j.contains("output")) {
      fail(ErrorKind::parse, where + "expected exactly instruction/input/output");
    }
    out.push_back({j["instruction"], j["input"], j["output"]});
  }
  return out;
}

/// Checks the output field against the bracketed-list contract.
inline bool valid_output(const std::string& output) {
  static const std::regex contract(R"(^\[[^\[\]]+(, [^\[\]]+)*\]$)");
  return std::regex_match(output, contract);
}

// ---------------------------------------------------------------------------
// building parts

inline std::vector<FineTuneRecord> records_from_samples(const std::vector<AugmentedSample>& samples,
                                                        const std::string& subject, LabelScheme scheme,
                                                        const LabelCatalog* catalog) {
  std::vector<FineTuneRecord> out;
  for (const auto& s : samples) {
    if (s.status != SampleStatus::ok || s.labels.empty() || trim(s.text).empty()) continue;
    out.push_back(build_train_record(s.text, s.labels, subject, scheme, catalog));
  }
  return out;
}

inline std::vector<FineTuneRecord> records_from_landmarks(const LandmarkSet& landmarks, const Corpus& corpus,
                                                          const std::string& subject, LabelScheme scheme,
                                                          const LabelCatalog* catalog) {
  std::vector<FineTuneRecord> out;
  for (const auto& e : landmarks.entries()) {
    if (e.status != LandmarkStatus::labeled) continue;
    const auto* d = corpus.find(e.doc_id);
    if (!d) fail(ErrorKind::invalid_input, "landmark document '" + e.doc_id + "' not in corpus");
    out.push_back(build_train_record(d->text, e.labels, subject, scheme, catalog));
  }
  return out;
}

// ---------------------------------------------------------------------------
// mixing

struct DatasetPart {
  std::string name;
  LabelScheme scheme = LabelScheme::multi_label;
  std::vector<FineTuneRecord> records;
};

struct DatasetManifest {
  std::vector<std::pair<std::string, std::size_t>> parts;
  LabelScheme scheme = LabelScheme::multi_label;
  std::string subject;
  std::uint64_t seed = 0;
  std::string output;
  std::size_t total = 0;

  nlohmann::json to_json() const {
    nlohmann::json p = nlohmann::json::array();
    for (const auto& [name, count] : parts) p.push_back({{"source", name}, {"count", count}});
    return {{"parts", p}, {"scheme", sstgen::to_string(scheme)}, {"subject", subject},
            {"seed", seed}, {"output", output},                  {"total", total}};
  }

  static DatasetManifest from_json(const nlohmann::json& j) {
    DatasetManifest m;
    for (const auto& p : j.at("parts")) m.parts.emplace_back(p.at("source"), p.at("count"));
    m.scheme = parse_scheme(j.at("scheme"));
    m.subject = j.value("subject", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.output = j.value("output", "");
    m.total = j.value("total", std::size_t{0});
    return m;
  }
};

struct CombinedDataset {
  std::vector<FineTuneRecord> records;
  DatasetManifest manifest;
};

/// Concatenates the parts in order, then shuffles with the seed.
inline CombinedDataset combine_datasets(const std::vector<DatasetPart>& parts, std::uint64_t seed,
                                        const std::string& subject = {}) {
  if (parts.empty()) fail(ErrorKind::invalid_input, "combine_datasets needs at least one part");
  CombinedDataset out;
  out.manifest.scheme = parts.front().scheme;
  out.manifest.seed = seed;
  out.manifest.subject = subject;
  for (const auto& p : parts) {
    if (p.scheme != out.manifest.scheme) {
      fail(ErrorKind::invalid_input, "part '" + p.name + "' uses scheme " + to_string(p.scheme) + ", expected " +
                                         to_string(out.manifest.scheme));
    }
    out.records.insert(out.records.end(), p.records.begin(), p.records.end());
    out.manifest.parts.emplace_back(p.name, p.records.size());
  }
  auto rng = make_rng(seed, 0xc0b1);
  shuffle(out.records, rng);
  out.manifest.total = out.records.size();
  return out;
}

inline std::filesystem::path manifest_path_for(const std::filesystem::path& jsonl) {
  return jsonl.string() + ".manifest.json";
}

/// Writes the records and a manifest beside them.
inline void write_dataset(const CombinedDataset& ds, const std::filesystem::path& path) {
  emit_jsonl(ds.records, path);
  auto m = ds.manifest;
  m.output = path.string();
  write_file(manifest_path_for(path), m.to_json().dump(2) + "\n");
}

/// Writes one part with a single-part manifest, so later mixing can check
/// its scheme.
inline void write_part(const DatasetPart& part, const std::string& subject, const std::filesystem::path& path) {
  emit_jsonl(part.records, path);
  DatasetManifest m;
  m.parts.emplace_back(part.name, part.records.size());
  m.scheme = part.scheme;
  m.subject = subject;
  m.output = path.string();
  m.total = part.records.size();
  write_file(manifest_path_for(path), m.to_json().dump(2) + "\n");
}

/// Reads a part file; its scheme comes from the sidecar manifest when one
/// exists, otherwise `fallback`.
inline DatasetPart read_part(const std::filesystem::path& path, LabelScheme fallback) {
  DatasetPart p;
  p.name = path.filename().string();
  p.scheme = fallback;
  p.records = read_records(path);
  if (std::filesystem::exists(manifest_path_for(path))) {
    auto m = DatasetManifest::from_json(nlohmann::json::parse(read_file(manifest_path_for(path))));
    p.scheme = m.scheme;
    if (m.total != p.records.size()) {
      fail(ErrorKind::invalid_input, path.string() + ": manifest count " + std::to_string(m.total) +
                                         " differs from " + std::to_string(p.records.size()) + " lines");
    }
  }
  return p;
}

}  // namespace sstgen
