// Corpus ingestion, the LLM gateway, vectorization, prompt templates and the
// mock endpoint.

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <mutex>
#include <set>

#include "sstgen/corpus.hpp"
#include "sstgen/http_transport.hpp"
#include "sstgen/llmgate.hpp"
#include "sstgen/mock_llm.hpp"
#include "sstgen/mock_server.hpp"
#include "sstgen/prompts.hpp"
#include "sstgen/vectorize.hpp"
#include "support/tempdir.hpp"

using namespace sstgen;
using testsupport::TempDir;

namespace {

template <typename Fn>
ErrorKind error_kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected sstgen::Error";
  return ErrorKind::internal;
}

std::string chat_body(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

// Replays a fixed list of responses and records every request.
class ScriptedTransport : public Transport {
 public:
  explicit ScriptedTransport(std::vector<HttpResult> script) : script_(std::move(script)) {}
  HttpResult post(const std::string& path, const std::string& body) override {
    std::lock_guard lock(mu_);
    paths.push_back(path);
    bodies.push_back(body);
    if (next_ >= script_.size()) return {500, "script exhausted", {}};
    return script_[next_++];
  }
  std::vector<std::string> paths, bodies;

 private:
  std::mutex mu_;
  std::vector<HttpResult> script_;
  std::size_t next_ = 0;
};

class ThrowingTransport : public Transport {
 public:
  HttpResult post(const std::string&, const std::string&) override {
    ADD_FAILURE() << "transport must not be reached";
    return {0, "", "unreachable"};
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// corpus

TEST(Corpus, LoadsJsonlAndNormalizes) {
  TempDir dir("corpus");
  write_file(dir / "c.jsonl",
             "{\"id\":\"a\",\"text\":\"  Oil   prices\\nrise \",\"labels\":[\"Crude\",\" NAT-GAS \"]}\n"
             "\n"
             "{\"id\":7,\"text\":\"Wheat harvest\",\"labels\":[\"wheat\"],\"split\":\"train\"}\n");
  auto c = load_corpus(dir / "c.jsonl", CorpusFormat::jsonl);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.name, "c");
  EXPECT_EQ(c[0].text, "Oil prices rise");
  EXPECT_EQ(c[0].gold_labels, (std::vector<std::string>{"crude", "nat-gas"}));
  EXPECT_FALSE(c[0].split.has_value());
  EXPECT_EQ(c[1].id, "7");
  EXPECT_TRUE(c[1].labels_hidden);
  EXPECT_TRUE(c.visible_labels(1).empty());
  EXPECT_EQ(c.visible_labels(1, true), (std::vector<std::string>{"wheat"}));
}

TEST(Corpus, JsonlErrorsCarryLocation) {
  TempDir dir("corpus");
  write_file(dir / "bad.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\"}\n");
  try {
    load_corpus(dir / "bad.jsonl", CorpusFormat::jsonl);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:2"), std::string::npos);
  }
  write_file(dir / "dup.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
  EXPECT_EQ(error_kind_of([&] { load_corpus(dir / "dup.jsonl", CorpusFormat::jsonl); }), ErrorKind::invalid_input);
  write_file(dir / "empty.jsonl", "{\"id\":\"a\",\"text\":\"   \"}\n");
  EXPECT_EQ(error_kind_of([&] { load_corpus(dir / "empty.jsonl", CorpusFormat::jsonl); }), ErrorKind::invalid_input);
}

TEST(Corpus, LoadsQuotedCsv) {
  TempDir dir("corpus");
  write_file(dir / "c.csv",
             "id,text,labels,split\r\n"
             "d1,\"He said \"\"hi\"\", then\nleft\",earn;acq,test\r\n"
             "d2,plain text,,\n");
  auto c = load_corpus(dir / "c.csv", corpus_format_for(dir / "c.csv"));
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].text, "He said \"hi\", then left");
  EXPECT_EQ(c[0].gold_labels, (std::vector<std::string>{"earn", "acq"}));
  EXPECT_EQ(c[0].split, Split::test);
  EXPECT_TRUE(c[1].gold_labels.empty());
  EXPECT_FALSE(c[1].split.has_value());

  write_file(dir / "open.csv", "id,text\nd1,\"never closed\n");
  EXPECT_EQ(error_kind_of([&] { load_corpus(dir / "open.csv", CorpusFormat::csv); }), ErrorKind::parse);
  write_file(dir / "ragged.csv", "id,text\nd1,a,b\n");
  EXPECT_EQ(error_kind_of([&] { load_corpus(dir / "ragged.csv", CorpusFormat::csv); }), ErrorKind::parse);
}

TEST(Corpus, SplitSizesWorkedExamples) {
  EXPECT_EQ(split_sizes(10, {}), (std::array<std::size_t, 3>{5, 3, 2}));
  // 3.5 / 2.1 / 1.4: the leftover document goes to the largest remainder.
  EXPECT_EQ(split_sizes(7, {}), (std::array<std::size_t, 3>{4, 2, 1}));
  EXPECT_EQ(split_sizes(200, {}), (std::array<std::size_t, 3>{100, 60, 40}));
}

TEST(Corpus, SplitSizesWithinOneOfExact) {
  std::mt19937 gen(3);
  for (int t = 0; t < 500; ++t) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    double a = u(gen), b = u(gen), c = u(gen), s = a + b + c;
    SplitRatios r{a / s, b / s, 1.0 - a / s - b / s};
    std::size_t n = 3 + gen() % 500;
    auto sizes = split_sizes(n, r);
    EXPECT_EQ(sizes[0] + sizes[1] + sizes[2], n);
    const double exact[3] = {r.train * n, r.validation * n, r.test * n};
    for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(static_cast<double>(sizes[i]) - exact[i]), 1.0);
  }
}

TEST(Corpus, SplitIsSeededAndHidesTrainLabels) {
  std::vector<Document> docs;
  for (int i = 0; i < 50; ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    d.text = "text " + std::to_string(i);
    d.gold_labels = {"earn"};
    docs.push_back(d);
  }
  Corpus c("x", docs);
  auto a = split_corpus(c, {}, 1), b = split_corpus(c, {}, 1), other = split_corpus(c, {}, 2);
  EXPECT_EQ(a.indices_in(Split::train).size(), 25u);
  EXPECT_EQ(a.indices_in(Split::validation).size(), 15u);
  EXPECT_EQ(a.indices_in(Split::test).size(), 10u);
  bool differs = false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(a[i].split, b[i].split);
    differs |= a[i].split != other[i].split;
    EXPECT_EQ(a[i].labels_hidden, a[i].split == Split::train);
    EXPECT_EQ(a[i].gold_labels, c[i].gold_labels);
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.subset(Split::test).size(), 10u);
  EXPECT_EQ(error_kind_of([&] { split_corpus(c, {0.5, 0.5, 0.5}, 1); }), ErrorKind::invalid_input);
}

TEST(Corpus, WriteAndReloadRoundTrip) {
  TempDir dir("corpus");
  std::vector<Document> docs;
  for (int i = 0; i < 9; ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    d.text = "body \"" + std::to_string(i) + "\"";
    d.gold_labels = {"grain", "wheat"};
    docs.push_back(d);
  }
  auto c = split_corpus(Corpus("x", docs), {}, 5);
  write_corpus_jsonl(c, dir / "out.jsonl");
  auto back = load_corpus(dir / "out.jsonl", CorpusFormat::jsonl);
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back[i].id, c[i].id);
    EXPECT_EQ(back[i].text, c[i].text);
    EXPECT_EQ(back[i].gold_labels, c[i].gold_labels);
    EXPECT_EQ(back[i].split, c[i].split);
    EXPECT_EQ(back[i].labels_hidden, c[i].labels_hidden);
  }
}

TEST(Catalog, ReutersAndWos) {
  auto r = LabelCatalog::reuters();
  EXPECT_EQ(r.size(), 90u);
  EXPECT_FALSE(r.hierarchical());
  EXPECT_TRUE(r.contains("Earn"));
  EXPECT_TRUE(r.contains("nat-gas"));
  EXPECT_FALSE(r.contains("made-up-tag"));
  EXPECT_EQ(r.prompt_listing().find("\n"), std::string::npos);

  auto w = LabelCatalog::wos();
  EXPECT_TRUE(w.hierarchical());
  EXPECT_EQ(w.domains().size(), 7u);
  std::size_t areas = 0;
  for (const auto& d : w.domains()) areas += w.areas_of(d).size();
  // The appendix listing has 145 areas even though the dataset is usually
  // described as having 134.
  EXPECT_EQ(areas, 145u);
  EXPECT_TRUE(w.is_domain("cs"));
  EXPECT_EQ(w.display("cs"), "CS");
  EXPECT_TRUE(w.is_area_of("CS", w.areas_of("cs").front()));
  EXPECT_FALSE(w.is_area_of("Medical", w.areas_of("cs").front()));
  EXPECT_EQ(w.prompt_listing().rfind("Domain: CS\nArea: ", 0), 0u);
}

TEST(Catalog, JsonRoundTripAndUnknownLabels) {
  auto w = LabelCatalog::wos();
  auto back = LabelCatalog::from_json(w.to_json());
  EXPECT_EQ(back.labels(), w.labels());
  EXPECT_EQ(back.domains(), w.domains());
  EXPECT_EQ(back.prompt_listing(), w.prompt_listing());

  std::vector<Document> docs(2);
  docs[0].id = "a", docs[0].text = "t", docs[0].gold_labels = {"earn"};
  docs[1].id = "b", docs[1].text = "t", docs[1].gold_labels = {"zzz", "acq"};
  EXPECT_EQ(Corpus("x", docs).unknown_labels(LabelCatalog::reuters()), (std::vector<std::string>{"zzz"}));
}

// ---------------------------------------------------------------------------
// llmgate

TEST(LlmGate, WireRoundTripAndHashStability) {
  auto req = user_request("m", "hello", 0.7, 11);
  req.stop = std::vector<std::string>{"\n\n"};
  req.max_tokens = 64;
  auto back = chat_request_from_wire(to_wire(req));
  EXPECT_EQ(request_hash(back), request_hash(req));
  auto other_seed = req;
  other_seed.seed = 12;
  auto other_temp = req;
  other_temp.temperature = 0.3;
  EXPECT_NE(request_hash(other_seed), request_hash(req));
  EXPECT_NE(request_hash(other_temp), request_hash(req));
  EXPECT_EQ(request_hash(req).size(), 64u);
  EXPECT_NE(embed_request_hash("m", {"a", "b"}), embed_request_hash("m", {"b", "a"}));

  auto wire = to_wire(req);
  EXPECT_EQ(wire["messages"][0]["role"], "user");
  EXPECT_EQ(wire["seed"], 11);
}

TEST(LlmGate, ValidationRejectsMalformedRequests) {
  ChatRequest empty;
  empty.model = "m";
  EXPECT_EQ(error_kind_of([&] { validate(empty); }), ErrorKind::invalid_input);
  auto bad_temp = user_request("m", "x", -1.0);
  EXPECT_EQ(error_kind_of([&] { validate(bad_temp); }), ErrorKind::invalid_input);
}

TEST(LlmGate, StopTruncationKeepsStopString) {
  EXPECT_EQ(truncate_at_stop("Content: a]\nmore", {"]"}), "Content: a]");
  EXPECT_EQ(truncate_at_stop("abc END x STOP", {"STOP", "END"}), "abc END");
  EXPECT_EQ(truncate_at_stop("no stop here", {"zz"}), "no stop here");
}

TEST(LlmGate, RetriesTransientFailuresWithBackoff) {
  auto t = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{
      {503, "busy", {}}, {0, "", "connection refused"}, {429, "slow down", {}}, {200, chat_body("ok"), {}}});
  Gateway g({}, t);
  std::vector<long long> sleeps;
  g.set_sleeper([&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
  EXPECT_EQ(g.chat(user_request("m", "p", 0.0)), "ok");
  EXPECT_EQ(sleeps, (std::vector<long long>{250, 500, 1000}));
  EXPECT_EQ(g.stats().attempts, 4u);
  EXPECT_EQ(g.stats().requests, 1u);
  EXPECT_EQ(t->paths.front(), "/v1/chat/completions");
}

TEST(LlmGate, ClientErrorsAreNotRetried) {
  auto t = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{{400, "bad", {}}, {200, chat_body("x"), {}}});
  Gateway g({}, t);
  g.set_sleeper([](auto) {});
  EXPECT_EQ(error_kind_of([&] { g.chat(user_request("m", "p", 0.0)); }), ErrorKind::gateway);
  EXPECT_EQ(t->paths.size(), 1u);
}

TEST(LlmGate, GivesUpAfterMaxAttempts) {
  auto t = std::make_shared<ScriptedTransport>(std::vector<HttpResult>(10, HttpResult{502, "", {}}));
  GatewayConfig cfg;
  cfg.max_attempts = 3;
  Gateway g(cfg, t);
  int sleeps = 0;
  g.set_sleeper([&](auto) { ++sleeps; });
  EXPECT_EQ(error_kind_of([&] { g.chat(user_request("m", "p", 0.0)); }), ErrorKind::gateway);
  EXPECT_EQ(t->paths.size(), 3u);
  EXPECT_EQ(sleeps, 2);
}

TEST(LlmGate, MalformedResponseIsGatewayError) {
  auto t = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{{200, "{\"choices\":[]}", {}}});
  Gateway g({}, t);
  EXPECT_EQ(error_kind_of([&] { g.chat(user_request("m", "p", 0.0)); }), ErrorKind::gateway);
}

TEST(LlmGate, RecordThenReplayWithoutNetwork) {
  TempDir dir("transcripts");
  auto req = user_request("m", "prompt text", 0.5, 3);
  req.stop = std::vector<std::string>{"]"};
  {
    GatewayConfig cfg;
    cfg.mode = GatewayMode::record;
    cfg.transcript_dir = dir.path();
    auto t = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{
        {200, chat_body("Label: [earn] trailing"), {}},
        {200, R"({"data":[{"index":1,"embedding":[0,1]},{"index":0,"embedding":[1,0]}]})", {}}});
    Gateway g(cfg, t);
    EXPECT_EQ(g.chat(req), "Label: [earn]");
    EXPECT_EQ(g.embed({"a", "b"}), (std::vector<std::vector<double>>{{1, 0}, {0, 1}}));
    // Recording the same request again is served from disk.
    EXPECT_EQ(g.chat(req), "Label: [earn]");
    EXPECT_EQ(t->paths.size(), 2u);
  }
  TranscriptStore store(dir.path());
  auto saved = store.find(request_hash(req));
  ASSERT_TRUE(saved.has_value());
  EXPECT_EQ(saved->request, to_wire(req));

  GatewayConfig cfg;
  cfg.mode = GatewayMode::replay;
  cfg.transcript_dir = dir.path();
  Gateway g(cfg, std::make_shared<ThrowingTransport>());
  EXPECT_EQ(g.chat(req), "Label: [earn]");
  EXPECT_EQ(g.embed({"a", "b"}), (std::vector<std::vector<double>>{{1, 0}, {0, 1}}));
  EXPECT_EQ(g.stats().replayed, 2u);
  EXPECT_EQ(error_kind_of([&] { g.chat(user_request("m", "never recorded", 0.0)); }), ErrorKind::gateway);
}

TEST(LlmGate, ReplayWithoutTranscriptDirIsConfigError) {
  GatewayConfig cfg;
  cfg.mode = GatewayMode::replay;
  EXPECT_EQ(error_kind_of([&] { Gateway g(cfg, std::make_shared<ThrowingTransport>()); }), ErrorKind::config);
}

TEST(LlmGate, ChatManyKeepsRequestOrder) {
  auto llm = std::make_shared<MockLlm>(MockLlmConfig{});
  auto t = std::make_shared<MockTransport>(llm);
  GatewayConfig cfg;
  cfg.max_inflight = 4;
  Gateway g(cfg, t);
  std::vector<ChatRequest> reqs;
  for (int i = 0; i < 40; ++i) reqs.push_back(user_request("m", "echo " + std::to_string(i), 0.0));
  auto out = g.chat_many(reqs);
  ASSERT_EQ(out.size(), reqs.size());
  for (int i = 0; i < 40; ++i) {
    EXPECT_TRUE(out[i].ok);
    EXPECT_EQ(out[i].text, "echo " + std::to_string(i));
  }
}

TEST(LlmGate, EmbeddingsAreBatchedInOrder) {
  auto llm = std::make_shared<MockLlm>(MockLlmConfig{});
  auto t = std::make_shared<MockTransport>(llm);
  GatewayConfig cfg;
  cfg.embed_batch = 2;
  Gateway g(cfg, t);
  std::vector<std::string> texts{"oil price", "wheat crop", "gold mine", "bank rate", "ship cargo"};
  auto vecs = g.embed(texts);
  EXPECT_EQ(t->calls(), 3u);
  ASSERT_EQ(vecs.size(), texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(vecs[i], llm->embed_one(texts[i]));

  GatewayConfig tiny;
  tiny.embed_token_limit = 2;
  Gateway limited(tiny, t);
  EXPECT_EQ(error_kind_of([&] { limited.embed({"a text that is far too long"}); }), ErrorKind::invalid_input);
}

TEST(Common, ParallelForRethrowsAndVisitsAll) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) fail(ErrorKind::internal, "boom");
                            }),
               Error);
}

// ---------------------------------------------------------------------------
// vectorize

TEST(Tfidf, MatchesHandComputedWeights) {
  const std::vector<std::string> texts{"oil oil gas", "gas price", "wheat price price"};
  auto m = TfidfModel::fit(texts, {100, 2});
  EXPECT_EQ(m.terms, (std::vector<std::string>{"gas", "oil", "price", "wheat"}));
  // Oracle: smooth idf ln((1+n)/(1+df)) + 1 with n = 3.
  std::map<std::string, double> idf{{"oil", std::log(4.0 / 2.0) + 1},
                                    {"gas", std::log(4.0 / 3.0) + 1},
                                    {"price", std::log(4.0 / 3.0) + 1},
                                    {"wheat", std::log(4.0 / 2.0) + 1}};
  for (std::size_t j = 0; j < m.terms.size(); ++j) EXPECT_NEAR(m.idf[j], idf[m.terms[j]], 1e-12);

  std::map<std::string, double> raw{{"oil", 2 * idf["oil"]}, {"gas", idf["gas"]}};
  double norm = std::sqrt(raw["oil"] * raw["oil"] + raw["gas"] * raw["gas"]);
  auto row = m.transform("OIL, oil and gas!");
  EXPECT_NEAR(row[*m.column("oil")], raw["oil"] / norm, 1e-12);
  EXPECT_NEAR(row[*m.column("gas")], raw["gas"] / norm, 1e-12);
  EXPECT_EQ(row[*m.column("wheat")], 0.0);

  auto zero = m.transform("nothing known here");
  for (double x : zero) EXPECT_EQ(x, 0.0);
}

TEST(Tfidf, MaxFeaturesKeepsMostFrequentWithLexicographicTies) {
  auto m = TfidfModel::fit({"bb aa cc cc dd dd dd", "aa bb"}, {2, 2});
  // Counts: dd 3, aa 2, bb 2, cc 2; the tie among aa/bb/cc resolves to aa.
  EXPECT_EQ(m.terms, (std::vector<std::string>{"aa", "dd"}));
  EXPECT_EQ(error_kind_of([] { TfidfModel::fit({"a b c"}, {10, 2}); }), ErrorKind::invalid_input);
}

TEST(Vectorize, DistancesAndJsonRoundTrip) {
  std::vector<double> a{1, 0}, b{0, 2};
  EXPECT_NEAR(euclidean(a, b), std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(cosine_similarity(a, b), 0.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(b, b), 1.0, 1e-15);

  auto m = FeatureMatrix::from_rows({{1, 2}, {3, 4}, {5, 6}}, FeatureKind::embedding, {"x", "y", "z"});
  auto back = FeatureMatrix::from_json(m.to_json());
  EXPECT_EQ(back.doc_ids, m.doc_ids);
  EXPECT_EQ(back.kind, FeatureKind::embedding);
  EXPECT_EQ(back.rows(), 3u);
  EXPECT_EQ(back.row(2)[1], 6.0);
  auto sub = m.subset({2, 0});
  EXPECT_EQ(sub.doc_ids, (std::vector<std::string>{"z", "x"}));
  EXPECT_EQ(sub.row(1)[0], 1.0);
}

TEST(Vectorize, EmbedCorpusUsesCache) {
  TempDir dir("embed");
  std::vector<Document> docs(5);
  for (int i = 0; i < 5; ++i) docs[i].id = "doc/" + std::to_string(i), docs[i].text = "text number " + std::to_string(i);
  Corpus c("x", docs);
  auto llm = std::make_shared<MockLlm>(MockLlmConfig{});
  auto t = std::make_shared<MockTransport>(llm);
  Gateway g({}, t);
  auto first = embed_corpus(c, g, dir.path());
  EXPECT_EQ(t->calls(), 1u);
  EXPECT_TRUE(std::filesystem::exists(embedding_cache_path(dir.path(), "embedder", "doc/3")));
  auto second = embed_corpus(c, g, dir.path());
  EXPECT_EQ(t->calls(), 1u);
  ASSERT_EQ(second.rows(), 5u);
  EXPECT_EQ(second.doc_ids, first.doc_ids);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < first.dim(); ++j) EXPECT_EQ(second.row(i)[j], first.row(i)[j]);
  }
}

// ---------------------------------------------------------------------------
// prompts

TEST(Prompts, LabelPromptAndBracket) {
  EXPECT_EQ(prompts::label_prompt("News", "Oil rose."),
            "Assign tags for the following News Document:\n\nOil rose.\n\nAnswer:");
  EXPECT_EQ(prompts::bracket({"grain", "wheat"}), "[grain, wheat]");
  EXPECT_EQ(prompts::bracket({}), "[]");
}

TEST(Prompts, ChooseLandmarkNumbersFromOne) {
  auto p = prompts::choose_landmark({"first doc", "second doc"});
  EXPECT_NE(p.find("Documents in the cluster:\n\n1-. first doc\n\n2-. second doc\n\n"), std::string::npos);
  EXPECT_EQ(p.find("0-. "), std::string::npos);
  EXPECT_TRUE(p.size() > 8 && p.substr(p.size() - 8) == "Answer:\n");
}

TEST(Prompts, RagSectionsAppearInOrder) {
  auto p = prompts::rag_augment("earn, acq", {{"labeled one", {"earn"}}}, {"unlabeled one"}, "primary doc");
  auto labeled = p.find(prompts::kRagLabeledMarker);
  auto unlabeled = p.find(prompts::kRagUnlabeledMarker);
  auto primary = p.find(prompts::kRagPrimaryMarker);
  ASSERT_NE(labeled, std::string::npos);
  EXPECT_LT(labeled, unlabeled);
  EXPECT_LT(unlabeled, primary);
  EXPECT_NE(p.find("*List of  Available Labels:\nearn, acq\n\n"), std::string::npos);
  EXPECT_NE(p.find("Content: labeled one\nLabel: [earn]"), std::string::npos);
  EXPECT_NE(p.find("Content: unlabeled one"), std::string::npos);
  EXPECT_TRUE(p.size() > 20 && p.substr(p.size() - 20) == "*Generated Example:\n");
}

TEST(Prompts, RewriteAndCot) {
  auto r = prompts::rewrite("Some text.");
  EXPECT_EQ(r.rfind("*Task Description: Rewrite the following text in English", 0), 0u);
  EXPECT_NE(r.find("*Original Text:\nSome text.\n\nRewritten Text:"), std::string::npos);
  auto c = prompts::cot_label("earn", {{"ref", {"earn"}}}, "target");
  EXPECT_NE(c.find(prompts::kCotTargetMarker), std::string::npos);
  EXPECT_NE(c.find("Thought: [Your thoughts]\nLabel: [Your assigned label]"), std::string::npos);
}

// ---------------------------------------------------------------------------
// mock endpoint

TEST(Mock, EmbeddingsAreDeterministicUnitVectors) {
  MockLlm a(MockLlmConfig{}), b(MockLlmConfig{});
  auto v = a.embed_one("crude oil prices");
  EXPECT_EQ(v.size(), 32u);
  EXPECT_EQ(v, b.embed_one("crude oil prices"));
  double n = 0;
  for (double x : v) n += x * x;
  EXPECT_NEAR(n, 1.0, 1e-12);
  MockLlmConfig seeded;
  seeded.seed = 9;
  EXPECT_NE(MockLlm(seeded).embed_one("crude oil prices"), v);
  // Shared vocabulary means higher similarity.
  EXPECT_GT(cosine_similarity(v, a.embed_one("crude oil output")), cosine_similarity(v, a.embed_one("wheat harvest")));
}

TEST(Mock, EchoRuleRewritesToSource) {
  MockLlmConfig cfg;
  cfg.rewrite_rule = "echo";
  MockLlm llm(cfg);
  const std::string doc = "Shipping rates climbed on strong grain demand.";
  EXPECT_EQ(llm.chat_content(user_request("m", prompts::rewrite(doc), 0.3, 1)), doc);
  MockLlm perturb(MockLlmConfig{});
  auto a = perturb.chat_content(user_request("m", prompts::rewrite(doc), 0.3, 1));
  EXPECT_EQ(a, perturb.chat_content(user_request("m", prompts::rewrite(doc), 0.3, 1)));
  EXPECT_NE(a, perturb.chat_content(user_request("m", prompts::rewrite(doc), 0.3, 2)));
}

TEST(Mock, ChoosesAnIndexInRange) {
  MockLlm llm(MockLlmConfig{});
  for (int n = 1; n <= 7; ++n) {
    std::vector<std::string> docs;
    for (int i = 0; i < n; ++i) docs.push_back("doc " + std::to_string(i));
    auto out = llm.chat_content(user_request("m", prompts::choose_landmark(docs), 0.0));
    auto open = out.find('['), close = out.find(']');
    ASSERT_NE(open, std::string::npos);
    int k = std::stoi(out.substr(open + 1, close - open - 1));
    EXPECT_GE(k, 1);
    EXPECT_LE(k, n);
  }
}

TEST(Mock, ServerSpeaksWireProtocolOverHttp) {
  auto llm = std::make_shared<MockLlm>(MockLlmConfig{});
  MockServer server(llm);
  int port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  auto transport = std::make_shared<HttpTransport>(server.base_url(), "");
  Gateway g({}, transport);
  EXPECT_EQ(g.chat(user_request("m", "plain echo", 0.0)), "plain echo");
  auto vecs = g.embed({"oil", "gold"});
  ASSERT_EQ(vecs.size(), 2u);
  EXPECT_EQ(vecs[1], llm->embed_one("gold"));
  auto missing = transport->post("/v1/unknown", "{}");
  EXPECT_EQ(missing.status, 404);
  auto garbage = transport->post("/v1/chat/completions", "not json");
  EXPECT_EQ(garbage.status, 400);

  MockServer clash(llm);
  EXPECT_THROW(clash.start("127.0.0.1", port), Error);
  transport.reset();  // close pooled keep-alive connections so stop() returns promptly
  server.stop();
}
