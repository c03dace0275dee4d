#pragma once

#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "sstgen/catalogs.hpp"
#include "sstgen/common.hpp"

namespace sstgen {

enum class Split { train, validation, test };
enum class LabelScheme { multi_label, hierarchical_2 };
enum class CorpusFormat { jsonl, csv };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation" || s == "val") return Split::validation;
  if (s == "test") return Split::test;
  fail(ErrorKind::invalid_input, "unknown split '" + s + "'");
}

inline std::string to_string(LabelScheme s) {
  return s == LabelScheme::multi_label ? "multi_label" : "hierarchical_2";
}

inline LabelScheme parse_scheme(const std::string& s) {
  if (s == "multi_label") return LabelScheme::multi_label;
  if (s == "hierarchical_2" || s == "hierarchical") return LabelScheme::hierarchical_2;
  fail(ErrorKind::invalid_input, "unknown label scheme '" + s + "'");
}

/// Canonical label form: lowercase, trimmed, inner whitespace collapsed.
inline std::string normalize_label(std::string_view raw) { return to_lower(collapse_whitespace(raw)); }

/// Ingestion-time text normalization: newlines to spaces, runs of spaces collapsed.
inline std::string normalize_text(std::string_view raw) { return collapse_whitespace(raw); }

// ---------------------------------------------------------------------------

/// The set of admissible labels. Lookups are case/space-insensitive; the
/// catalog remembers each label's display form so emitted records keep the
/// original casing ("CS", "Machine learning").
class LabelCatalog {
 public:
  LabelCatalog() = default;

  void add(std::string_view label) {
    auto key = normalize_label(label);
    if (key.empty()) fail(ErrorKind::invalid_input, "empty label in catalog");
    if (!display_.count(key)) {
      display_.emplace(key, trim(label));
      order_.push_back(key);
    }
  }

  void add_domain(std::string_view domain, const std::vector<std::string>& areas) {
    add(domain);
    auto& slot = hierarchy_[normalize_label(domain)];
    for (const auto& a : areas) {
      add(a);
      slot.push_back(normalize_label(a));
    }
    domain_order_.push_back(normalize_label(domain));
  }

  bool contains(std::string_view label) const { return display_.count(normalize_label(label)) > 0; }
  bool empty() const { return display_.empty(); }
  std::size_t size() const { return display_.size(); }
  bool hierarchical() const { return !hierarchy_.empty(); }

  bool is_domain(std::string_view label) const { return hierarchy_.count(normalize_label(label)) > 0; }

  bool is_area_of(std::string_view domain, std::string_view area) const {
    auto it = hierarchy_.find(normalize_label(domain));
    if (it == hierarchy_.end()) return false;
    auto key = normalize_label(area);
    return std::find(it->second.begin(), it->second.end(), key) != it->second.end();
  }

  /// Display form for a label; throws if it is not in the catalog.
  const std::string& display(std::string_view label) const {
    auto it = display_.find(normalize_label(label));
    if (it == display_.end()) fail(ErrorKind::invalid_input, "label not in catalog: '" + std::string(label) + "'");
    return it->second;
  }

  /// Normalized labels in insertion order.
  const std::vector<std::string>& labels() const { return order_; }
  const std::vector<std::string>& domains() const { return domain_order_; }
  const std::vector<std::string>& areas_of(std::string_view domain) const {
    static const std::vector<std::string> none;
    auto it = hierarchy_.find(normalize_label(domain));
    return it == hierarchy_.end() ? none : it->second;
  }

  /// Label list as shown to the generator: comma separated for flat catalogs,
  /// one "Domain: X / Area: a, b, ..." block per domain for hierarchies.
  std::string prompt_listing() const {
    std::string out;
    if (!hierarchical()) {
      for (std::size_t i = 0; i < order_.size(); ++i) {
        if (i) out += ", ";
        out += display_.at(order_[i]);
      }
      return out;
    }
    for (std::size_t d = 0; d < domain_order_.size(); ++d) {
      if (d) out += "\n";
      out += "Domain: " + display_.at(domain_order_[d]) + "\nArea: ";
      const auto& areas = hierarchy_.at(domain_order_[d]);
      for (std::size_t i = 0; i < areas.size(); ++i) {
        if (i) out += ", ";
        out += display_.at(areas[i]);
      }
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["labels"] = nlohmann::json::array();
    for (const auto& k : order_) j["labels"].push_back(display_.at(k));
    if (hierarchical()) {
      nlohmann::json h = nlohmann::json::object();
      for (const auto& d : domain_order_) {
        auto arr = nlohmann::json::array();
        for (const auto& a : hierarchy_.at(d)) arr.push_back(display_.at(a));
        h[display_.at(d)] = arr;
      }
      j["hierarchy"] = h;
    }
    return j;
  }

  static LabelCatalog from_json(const nlohmann::json& j) {
    LabelCatalog c;
    if (!j.is_object() || !j.contains("labels") || !j["labels"].is_array()) {
      fail(ErrorKind::parse, "label catalog needs a \"labels\" array");
    }
    // Hierarchy first so domain order follows the file.
    if (j.contains("hierarchy")) {
      const auto& h = j["hierarchy"];
      if (!h.is_object()) fail(ErrorKind::parse, "catalog \"hierarchy\" must be an object");
      // nlohmann::json objects iterate in key order; honour the labels array order for domains.
      std::vector<std::string> domains;
      for (const auto& l : j["labels"]) {
        if (h.contains(l.get<std::string>())) domains.push_back(l.get<std::string>());
      }
      for (auto it = h.begin(); it != h.end(); ++it) {
        if (std::find(domains.begin(), domains.end(), it.key()) == domains.end()) domains.push_back(it.key());
      }
      for (const auto& d : domains) c.add_domain(d, h.at(d).get<std::vector<std::string>>());
    }
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) fail(ErrorKind::parse, "catalog labels must be strings");
      c.add(l.get<std::string>());
    }
    return c;
  }

  static LabelCatalog load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, path.string() + ": " + e.what());
    }
    return from_json(j);
  }

  static LabelCatalog reuters() {
    LabelCatalog c;
    for (auto t : catalogs::kReutersTopics) c.add(t);
    return c;
  }

  static LabelCatalog wos() {
    LabelCatalog c;
    for (const auto& d : catalogs::kWosDomains) {
      std::vector<std::string> areas(d.areas, d.areas + d.area_count);
      c.add_domain(d.name, areas);
    }
    return c;
  }

 private:
  std::map<std::string, std::string> display_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<std::string>> hierarchy_;
  std::vector<std::string> domain_order_;
};

// ---------------------------------------------------------------------------

struct Document {
  std::string id;
  std::string text;
  std::vector<std::string> gold_labels;  // normalized, importance order
  std::optional<Split> split;
  bool labels_hidden = false;  // set for the training split
};

struct SplitRatios {
  double train = 0.5;
  double validation = 0.3;
  double test = 0.2;
};

class Corpus {
 public:
  std::string name;
  LabelScheme scheme = LabelScheme::multi_label;

  Corpus() = default;
  Corpus(std::string name_, std::vector<Document> docs, LabelScheme scheme_ = LabelScheme::multi_label)
      : name(std::move(name_)), scheme(scheme_) {
    for (auto& d : docs) add(std::move(d));
  }

  void add(Document doc) {
    if (doc.text.empty()) fail(ErrorKind::invalid_input, "document '" + doc.id + "' has empty text");
    if (!index_.emplace(doc.id, docs_.size()).second) {
      fail(ErrorKind::invalid_input, "duplicate document id '" + doc.id + "'");
    }
    docs_.push_back(std::move(doc));
  }

  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const std::vector<Document>& documents() const { return docs_; }
  const Document& operator[](std::size_t i) const { return docs_.at(i); }
  Document& mutable_doc(std::size_t i) { return docs_.at(i); }

  const Document* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &docs_[it->second];
  }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::size_t> indices_in(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < docs_.size(); ++i) {
      if (docs_[i].split == s) out.push_back(i);
    }
    return out;
  }

  /// Subset of the corpus restricted to one split, document order preserved.
  Corpus subset(Split s) const {
    Corpus c;
    c.name = name;
    c.scheme = scheme;
    c.ratios = ratios;
    for (auto i : indices_in(s)) c.add(docs_[i]);
    return c;
  }

  /// Gold labels as visible to the pipeline. Hidden training labels come back
  /// empty unless the caller explicitly reveals them.
  const std::vector<std::string>& visible_labels(std::size_t i, bool reveal_gold = false) const {
    static const std::vector<std::string> none;
    const auto& d = docs_.at(i);
    return (d.labels_hidden && !reveal_gold) ? none : d.gold_labels;
  }

  /// Labels not present in the catalog (empty means the corpus is consistent).
  std::vector<std::string> unknown_labels(const LabelCatalog& catalog) const {
    std::set<std::string> bad;
    for (const auto& d : docs_) {
      for (const auto& l : d.gold_labels) {
        if (!catalog.contains(l)) bad.insert(l);
      }
    }
    return {bad.begin(), bad.end()};
  }

  std::optional<SplitRatios> ratios;

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// ingestion

namespace detail {

inline Document make_document(std::string id, std::string_view text, const std::vector<std::string>& labels,
                              std::optional<Split> split, const std::string& where) {
  Document d;
  d.id = std::move(id);
  if (d.id.empty()) fail(ErrorKind::parse, where + ": empty id");
  d.text = normalize_text(text);
  if (d.text.empty()) fail(ErrorKind::invalid_input, where + ": empty text for id '" + d.id + "'");
  for (const auto& l : labels) {
    auto n = normalize_label(l);
    if (!n.empty()) d.gold_labels.push_back(std::move(n));
  }
  d.split = split;
  d.labels_hidden = split == Split::train;
  return d;
}

// RFC 4180: fields separated by commas, optionally double-quoted; quotes
// inside quoted fields are doubled; quoted fields may span lines.
struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

inline std::vector<CsvRecord> parse_csv(std::string_view data, const std::string& source) {
  std::vector<CsvRecord> records;
  CsvRecord cur;
  std::string field;
  bool quoted = false, field_started = false, after_quote = false;
  std::size_t line = 1;
  cur.line = 1;
  auto end_field = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    field_started = after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(cur.fields.size() == 1 && cur.fields[0].empty())) records.push_back(std::move(cur));
    cur = CsvRecord{};
    cur.line = line;
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      ++line;
      end_record();
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else {
      if (after_quote) fail(ErrorKind::parse, source + ":" + std::to_string(line) + ": text after closing quote");
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) fail(ErrorKind::parse, source + ":" + std::to_string(cur.line) + ": unterminated quoted field");
  if (field_started || !cur.fields.empty()) end_record();
  return records;
}

}  // namespace detail

inline Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, std::string name = {}) {
  Corpus corpus;
  corpus.name = name.empty() ? path.stem().string() : std::move(name);
  const std::string source = path.string();
  if (format == CorpusFormat::jsonl) {
    auto lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      const auto& line = lines[ln];
      if (trim(line).empty()) continue;
      const std::string where = source + ":" + std::to_string(ln + 1);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, where + ": " + e.what());
      }
      if (!j.is_object() || !j.contains("id") || !j.contains("text")) {
        fail(ErrorKind::parse, where + ": record needs \"id\" and \"text\"");
      }
      std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
      if (!j["text"].is_string()) fail(ErrorKind::parse, where + ": \"text\" must be a string");
      std::vector<std::string> labels;
      if (j.contains("labels") && !j["labels"].is_null()) {
        if (!j["labels"].is_array()) fail(ErrorKind::parse, where + ": \"labels\" must be an array");
        for (const auto& l : j["labels"]) {
          if (!l.is_string()) fail(ErrorKind::parse, where + ": labels must be strings");
          labels.push_back(l.get<std::string>());
        }
      }
      std::optional<Split> split;
      if (j.contains("split") && j["split"].is_string()) split = parse_split(j["split"].get<std::string>());
      auto doc = detail::make_document(std::move(id), j["text"].get<std::string>(), labels, split, where);
      if (corpus.find(doc.id)) fail(ErrorKind::invalid_input, where + ": duplicate id '" + doc.id + "'");
      corpus.add(std::move(doc));
    }
  } else {
    auto records = detail::parse_csv(read_file(path), source);
    if (records.empty()) fail(ErrorKind::parse, source + ": missing CSV header");
    const auto& header = records.front().fields;
    auto col = [&](const std::string& n) -> std::optional<std::size_t> {
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == n) return i;
      }
      return std::nullopt;
    };
    auto id_col = col("id"), text_col = col("text"), labels_col = col("labels"), split_col = col("split");
    if (!id_col || !text_col) fail(ErrorKind::parse, source + ":1: CSV header needs id,text columns");
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& rec = records[r];
      const std::string where = source + ":" + std::to_string(rec.line);
      if (rec.fields.size() != header.size()) {
        fail(ErrorKind::parse, where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                   std::to_string(rec.fields.size()));
      }
      std::vector<std::string> labels;
      if (labels_col && !rec.fields[*labels_col].empty()) labels = split(rec.fields[*labels_col], ';');
      std::optional<Split> sp;
      if (split_col && !trim(rec.fields[*split_col]).empty()) sp = parse_split(trim(rec.fields[*split_col]));
      auto doc = detail::make_document(rec.fields[*id_col], rec.fields[*text_col], labels, sp, where);
      if (corpus.find(doc.id)) fail(ErrorKind::invalid_input, where + ": duplicate id '" + doc.id + "'");
      corpus.add(std::move(doc));
    }
  }
  return corpus;
}

inline CorpusFormat corpus_format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

inline nlohmann::json document_to_json(const Document& d, bool include_hidden_labels = true) {
  nlohmann::json j{{"id", d.id}, {"text", d.text}};
  if (!d.labels_hidden || include_hidden_labels) j["labels"] = d.gold_labels;
  if (d.split) j["split"] = to_string(*d.split);
  return j;
}

inline void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    out += document_to_json(d).dump();
    out += '\n';
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// splits

/// Per-split sizes by largest remainder: each differs from its exact fraction
/// by less than one document and they sum to n.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& r) {
  const std::array<double, 3> exact{r.train * n, r.validation * n, r.test * n};
  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = static_cast<std::size_t>(std::floor(exact[i] + 1e-9));
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return exact[a] - std::floor(exact[a]) > exact[b] - std::floor(exact[b]);
  });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

/// Seeded uniform (unstratified) split. Training gold labels stay in memory
/// but are flagged hidden.
inline Corpus split_corpus(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0) {
    fail(ErrorKind::invalid_input, "split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    fail(ErrorKind::invalid_input, "split ratios must sum to 1");
  }
  if (corpus.size() < 3) fail(ErrorKind::invalid_input, "corpus needs at least 3 documents to split");
  const auto sizes = split_sizes(corpus.size(), ratios);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto rng = make_rng(seed, 0x5e11);
  shuffle(order, rng);

  std::vector<Split> assigned(corpus.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    assigned[order[r]] = r < sizes[0] ? Split::train : r < sizes[0] + sizes[1] ? Split::validation : Split::test;
  }
  Corpus out;
  out.name = corpus.name;
  out.scheme = corpus.scheme;
  out.ratios = ratios;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Document d = corpus[i];
    d.split = assigned[i];
    d.labels_hidden = assigned[i] == Split::train;
    out.add(std::move(d));
  }
  return out;
}

}  // namespace sstgen
