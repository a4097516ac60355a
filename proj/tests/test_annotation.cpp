#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "httplib.h"
#include "plotkit/annotation.hpp"
#include "plotkit/annotation_server.hpp"
#include "plotkit/errors.hpp"
#include "support.hpp"

using namespace plotkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string words(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " w" : "w") + std::to_string(i);
  return out;
}

std::vector<PreferencePair> make_pairs_n(int n) {
  std::vector<PreferencePair> out;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "p%03d", i);
    out.push_back({id, "Premise " + std::to_string(i) + ".", {"gen-alpha", "A text " + std::to_string(i)},
                   {"gen-beta", "B text " + std::to_string(i)}});
  }
  return out;
}

ChoiceSet all_choices(Choice c) {
  ChoiceSet s;
  for (Question q : kChoiceQuestions) s[q] = c;
  return s;
}

AnnotationResponse response(std::string pair, std::string who, Choice c = Choice::PLOT_A) {
  return {std::move(pair), std::move(who), all_choices(c), words(25), ""};
}

std::shared_ptr<Clock> fixed_clock() {
  auto clock = std::make_shared<FakeClock>();
  clock->advance(std::chrono::seconds(1700000000));
  return clock;
}

class TempFile {
 public:
  TempFile() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("plotkit_store_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".jsonl");
    fs::remove(path_);
  }
  ~TempFile() { fs::remove(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(Validation, ExplanationNeedsTwentyFiveWords) {
  AnnotationService svc(make_pairs_n(2), std::make_shared<AnnotationStore>(), fixed_clock());
  auto r = response("p000", "ann");
  r.q2_explanation = words(24);
  auto issues = svc.validate(r);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].code, ValidationCode::WORD_COUNT);
  EXPECT_EQ(issues[0].field, "Q2");
  try {
    svc.submit(r);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_TRUE(e.has(ValidationCode::WORD_COUNT));
  }
  EXPECT_EQ(svc.store().size(), 0u);
  r.q2_explanation = "  " + words(25) + "\n";
  EXPECT_TRUE(svc.validate(r).empty());
  AnnotationResponse stored = svc.submit(r);
  EXPECT_EQ(stored.submitted_at, "2023-11-14T22:13:20Z");
}

TEST(Validation, ReportsEveryProblem) {
  AnnotationService svc(make_pairs_n(1), std::make_shared<AnnotationStore>());
  AnnotationResponse r{"nope", " ", {{Question::Q1, Choice::BOTH}}, "short", ""};
  try {
    svc.submit(r);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_TRUE(e.has(ValidationCode::UNKNOWN_PAIR));
    EXPECT_TRUE(e.has(ValidationCode::MISSING_ANNOTATOR));
    EXPECT_TRUE(e.has(ValidationCode::WORD_COUNT));
    int missing = 0;
    for (const auto& i : e.issues()) missing += i.code == ValidationCode::MISSING_CHOICE;
    EXPECT_EQ(missing, 4);
  }
}

TEST(Validation, DuplicateSubmissionRejected) {
  AnnotationService svc(make_pairs_n(2), std::make_shared<AnnotationStore>());
  svc.submit(response("p001", "ann"));
  EXPECT_THROW(svc.submit(response("p001", "ann", Choice::PLOT_B)), DuplicateError);
  EXPECT_NO_THROW(svc.submit(response("p001", "other")));
  EXPECT_EQ(svc.store().size(), 2u);
}

TEST(ResponseJson, ChoicesRoundTrip) {
  auto r = response("p", "a", Choice::NEITHER);
  r.submitted_at = "x";
  json j = r;
  EXPECT_EQ(j["choices"]["Q4"], "NEITHER");
  EXPECT_EQ(j["annotator"], "a");
  EXPECT_EQ(j.get<AnnotationResponse>(), r);
  j["choices"]["Q2"] = "PLOT_A";
  EXPECT_THROW(j.get<AnnotationResponse>(), FormatError);
  j["choices"].erase("Q2");
  j["choices"]["Q1"] = "MAYBE";
  EXPECT_THROW(j.get<AnnotationResponse>(), FormatError);
}

TEST(Store, SurvivesRestart) {
  TempFile tmp;
  {
    auto store = std::make_shared<AnnotationStore>(tmp.path());
    AnnotationService svc(make_pairs_n(3), store, fixed_clock());
    svc.submit(response("p000", "a"));
    svc.submit(response("p001", "a", Choice::PLOT_B));
  }
  auto store = std::make_shared<AnnotationStore>(tmp.path());
  EXPECT_EQ(store->size(), 2u);
  EXPECT_TRUE(store->contains("p001", "a"));
  AnnotationService svc(make_pairs_n(3), store, fixed_clock());
  EXPECT_THROW(svc.submit(response("p000", "a")), DuplicateError);
  EXPECT_EQ(svc.next_task("a")->pair_id, "p002");
}

TEST(Store, TornFinalLineIsSkippedAndTerminated) {
  TempFile tmp;
  {
    AnnotationStore store(tmp.path());
    store.append(response("p000", "a"));
  }
  {
    std::ofstream out(tmp.path(), std::ios::app | std::ios::binary);
    out << R"({"pair_id": "p001", "annot)";
  }
  {
    AnnotationStore store(tmp.path());
    EXPECT_EQ(store.size(), 1u);
    EXPECT_EQ(store.skipped_lines(), 1u);
    store.append(response("p002", "a"));
  }
  AnnotationStore store(tmp.path());
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.skipped_lines(), 1u);
  EXPECT_TRUE(store.contains("p002", "a"));
}

TEST(Tasks, LeastLabeledFirstThenSmallestId) {
  AnnotationService svc(make_pairs_n(3), std::make_shared<AnnotationStore>());
  auto t = svc.next_task("x");
  ASSERT_TRUE(t);
  EXPECT_EQ(t->pair_id, "p000");
  EXPECT_EQ(t->questions.size(), 6u);
  EXPECT_EQ(t->questions[1].id, Question::Q2);
  EXPECT_EQ(t->plot_a_text, "A text 0");
  svc.submit(response("p000", "x"));
  svc.submit(response("p001", "y"));
  EXPECT_EQ(svc.next_task("z")->pair_id, "p002");
  EXPECT_EQ(svc.next_task("x")->pair_id, "p002");
  svc.submit(response("p002", "x"));
  EXPECT_EQ(svc.next_task("x")->pair_id, "p001");
  svc.submit(response("p001", "x"));
  EXPECT_FALSE(svc.next_task("x"));
  json j = *svc.next_task("q");
  EXPECT_FALSE(j.contains("plot_a"));
  EXPECT_EQ(j.dump().find("gen-alpha"), std::string::npos);
  EXPECT_EQ(j.dump().find("gen-beta"), std::string::npos);
}

TEST(Export, MatchesBruteForceFilter) {
  const auto pairs = make_pairs_n(50);
  AnnotationService svc(pairs, std::make_shared<AnnotationStore>());
  std::mt19937_64 rng(11);
  std::vector<AnnotationResponse> submitted;
  for (int i = 0; i < 1000; ++i) {
    AnnotationResponse r{pairs[static_cast<std::size_t>(i % 50)].pair_id, "ann" + std::to_string(i / 50), {},
                         words(25 + rng() % 10), ""};
    for (Question q : kChoiceQuestions) r.choices[q] = kAllChoices[rng() % 4];
    submitted.push_back(svc.submit(r));
  }
  for (Question q : kChoiceQuestions) {
    json want = json::array();
    for (const auto& r : submitted) {
      const Choice c = r.choices.at(q);
      if (c != Choice::PLOT_A && c != Choice::PLOT_B) continue;
      const auto& p = *std::find_if(pairs.begin(), pairs.end(), [&](const auto& x) { return x.pair_id == r.pair_id; });
      json line{{"pair_id", p.pair_id},
                {"premise", p.premise},
                {"chosen_text", c == Choice::PLOT_A ? p.plot_a.text : p.plot_b.text},
                {"rejected_text", c == Choice::PLOT_A ? p.plot_b.text : p.plot_a.text},
                {"annotator", r.annotator_id},
                {"q2_explanation", r.q2_explanation}};
      want.push_back(line);
    }
    json got = json::array();
    for (const auto& l : svc.export_preferences(q, true)) got.push_back(l);
    EXPECT_EQ(got, want) << to_string(q);
    for (const auto& l : svc.export_preferences(q)) EXPECT_FALSE(json(l).contains("q2_explanation"));
  }
  EXPECT_THROW(svc.export_preferences(Question::Q2), PreconditionError);
}

TEST(Stats, ReproducesReferenceDistribution) {
  // Per-mille counts whose half-up percentages give the reference rows.
  const std::map<Question, std::array<int, 4>> dist = {{Question::Q1, {320, 420, 115, 145}},
                                                       {Question::Q3, {310, 410, 140, 140}},
                                                       {Question::Q4, {290, 380, 130, 200}},
                                                       {Question::Q5, {300, 390, 140, 170}},
                                                       {Question::Q6, {300, 370, 90, 240}}};
  std::mt19937_64 rng(5);
  std::map<Question, std::vector<Choice>> columns;
  for (const auto& [q, counts] : dist) {
    for (int c = 0; c < 4; ++c) columns[q].insert(columns[q].end(), counts[c], kAllChoices[c]);
    std::shuffle(columns[q].begin(), columns[q].end(), rng);
  }
  const auto pairs = make_pairs_n(100);
  AnnotationService svc(pairs, std::make_shared<AnnotationStore>());
  for (std::size_t i = 0; i < 1000; ++i) {
    AnnotationResponse r{pairs[i % 100].pair_id, "ann" + std::to_string(i / 100), {}, words(30), ""};
    for (Question q : kChoiceQuestions) r.choices[q] = columns[q][i];
    svc.submit(r);
  }
  const LabelTable t = svc.label_stats();
  const std::map<Question, std::array<int, 4>> reference = {{Question::Q1, {32, 42, 12, 15}},
                                                            {Question::Q3, {31, 41, 14, 14}},
                                                            {Question::Q4, {29, 38, 13, 20}},
                                                            {Question::Q5, {30, 39, 14, 17}},
                                                            {Question::Q6, {30, 37, 9, 24}}};
  for (const auto& [q, row] : reference) {
    EXPECT_EQ(t.total(q), 1000);
    for (int c = 0; c < 4; ++c) EXPECT_EQ(t.percent(q, kAllChoices[c]), row[c]) << to_string(q);
  }
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    service = std::make_shared<AnnotationService>(make_pairs_n(2), std::make_shared<AnnotationStore>(), fixed_clock());
    server = std::make_unique<AnnotationServer>(service, ServerOptions{"127.0.0.1", 0, std::nullopt});
    port = server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  void TearDown() override { server->stop(); }

  httplib::Result post(const json& body) { return client->Post("/api/annotations", body.dump(), "application/json"); }

  std::shared_ptr<AnnotationService> service;
  std::unique_ptr<AnnotationServer> server;
  std::unique_ptr<httplib::Client> client;
  int port = 0;
};

TEST_F(ServerTest, TaskEndpoint) {
  auto res = client->Get("/api/tasks/next?annotator=a");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  auto task = json::parse(res->body);
  EXPECT_EQ(task["pair_id"], "p000");
  EXPECT_EQ(task["questions"].size(), 6u);
  res = client->Get("/api/tasks/next");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(ServerTest, SubmissionStatusCodes) {
  auto res = client->Post("/api/annotations", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  json body = response("p000", "a");
  body["q2_explanation"] = words(24);
  res = post(body);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  auto err = json::parse(res->body);
  EXPECT_EQ(err["issues"][0]["code"], "WORD_COUNT");

  body["q2_explanation"] = words(25);
  res = post(body);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  EXPECT_EQ(json::parse(res->body)["submitted_at"], "2023-11-14T22:13:20Z");

  res = post(body);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 409);

  body["pair_id"] = "p001";
  body["choices"]["Q4"] = "PLOT_B";
  res = post(body);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  res = client->Get("/api/tasks/next?annotator=a");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
}

TEST_F(ServerTest, StatsAndExport) {
  ASSERT_EQ(post(response("p000", "a", Choice::PLOT_A))->status, 201);
  ASSERT_EQ(post(response("p001", "a", Choice::BOTH))->status, 201);
  auto res = client->Get("/api/stats");
  ASSERT_TRUE(res);
  auto stats = json::parse(res->body);
  EXPECT_EQ(stats["responses"], 2);
  EXPECT_EQ(stats["questions"]["Q4"]["counts"]["PLOT_A"], 1);
  EXPECT_EQ(stats["questions"]["Q4"]["counts"]["BOTH"], 1);

  res = client->Get("/api/export?question=Q4");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  auto line = json::parse(res->body.substr(0, res->body.find('\n')));
  EXPECT_EQ(res->body.find('\n'), res->body.size() - 1);
  EXPECT_EQ(line["chosen_text"], "A text 0");
  EXPECT_EQ(line["rejected_text"], "B text 0");
  res = client->Get("/api/export?question=Q2");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}
