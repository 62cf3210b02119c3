#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "fitb/cli.hpp"
#include "fitb/embedding_store.hpp"
#include "fitb/model.hpp"
#include "fitb/rng.hpp"
#include "test_support.hpp"

using fitb::testing::slurp;
using fitb::testing::spit;
using fitb::testing::TempDir;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = fitb::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json first_json_line(const std::string& text) { return nlohmann::json::parse(text.substr(0, text.find('\n'))); }

/// gen-synthetic + split into `dir`; returns the directory path.
std::string make_fixture(const TempDir& dir, const std::string& noise, const std::string& distractors = "outfit") {
  const std::string root = dir.path().string();
  auto gen = run_cli({"gen-synthetic", "--clusters", "4", "--products-per-cluster", "10", "--outfits-per-cluster", "20",
                      "--dim-img", "8", "--dim-txt", "8", "--noise", noise, "--seed", "3", "--out", root});
  REQUIRE_MESSAGE(gen.code == 0, gen.err);
  auto split = run_cli({"split", "--outfits", root + "/outfits.jsonl", "--candidates", "5", "--seed", "7",
                        "--test-fraction", "0.25", "--distractors", distractors, "--out", root});
  REQUIRE_MESSAGE(split.code == 0, split.err);
  return root;
}

}  // namespace

TEST_CASE("split is deterministic in its seed") {
  TempDir dir;
  const auto root = make_fixture(dir, "0.05");
  const auto first = slurp(root + "/queries.jsonl");
  CHECK_FALSE(first.empty());
  REQUIRE(run_cli({"split", "--outfits", root + "/outfits.jsonl", "--candidates", "5", "--seed", "7",
                   "--test-fraction", "0.25", "--out", root, "--queries", root + "/again.jsonl"})
              .code == 0);
  CHECK(slurp(root + "/again.jsonl") == first);
  REQUIRE(run_cli({"split", "--outfits", root + "/outfits.jsonl", "--candidates", "5", "--seed", "8",
                   "--test-fraction", "0.25", "--out", root, "--queries", root + "/other.jsonl"})
              .code == 0);
  CHECK(slurp(root + "/other.jsonl") != first);
}

TEST_CASE("gen-synthetic is deterministic and ingest summarizes it") {
  TempDir a, b;
  make_fixture(a, "0.05");
  make_fixture(b, "0.05");
  CHECK(slurp(a.file("image.femb")) == slurp(b.file("image.femb")));
  CHECK(slurp(a.file("outfits.jsonl")) == slurp(b.file("outfits.jsonl")));

  const auto ingest = run_cli({"ingest", "--image-emb", a.file("image.femb"), "--text-emb",
                               a.file("text.femb"), "--outfits", a.file("outfits.jsonl"),
                               "--queries", a.file("queries.jsonl")});
  REQUIRE_MESSAGE(ingest.code == 0, ingest.err);
  const auto summary = first_json_line(ingest.out);
  CHECK(summary["image"]["count"] == 40);
  CHECK(summary["text"]["dim"] == 8);
}

TEST_CASE("eval with the zero-shot scorer reports finite metrics") {
  TempDir dir;
  const auto root = make_fixture(dir, "0.05");
  const auto result = run_cli({"eval", "--scorer", "zeroshot", "--mode", "image", "--queries", root + "/queries.jsonl",
                               "--image-emb", root + "/image.femb"});
  REQUIRE_MESSAGE(result.code == 0, result.err);
  const auto report = first_json_line(result.out);
  CHECK(report["n_queries"].get<int>() > 0);
  CHECK(report["mode"] == "image");
  CHECK(report["accuracy"].get<double>() >= 0.0);
  CHECK(report["mrr"].get<double>() <= 1.0);
  CHECK(result.out.find("accuracy") != std::string::npos);  // the table follows the JSON line
}

TEST_CASE("trained head beats zero-shot on shuffled embeddings") {
  TempDir dir;
  const auto root = make_fixture(dir, "0", "non-cooccurring");
  const auto trained = run_cli({"train", "--outfits", root + "/train.jsonl", "--image-emb", root + "/image.femb",
                                "--text-emb", root + "/text.femb", "--layers", "32,16", "--epochs", "5", "--seed",
                                "42", "--checkpoint", root + "/head.fckp"});
  REQUIRE_MESSAGE(trained.code == 0, trained.err);
  const auto eval = run_cli({"eval", "--queries", root + "/queries.jsonl", "--image-emb", root + "/image.femb",
                             "--text-emb", root + "/text.femb", "--checkpoint", root + "/head.fckp"});
  REQUIRE_MESSAGE(eval.code == 0, eval.err);
  const double head_mrr = first_json_line(eval.out)["mrr"];

  // control: vectors reassigned to random products, destroying any signal
  fitb::Rng rng(5);
  for (const char* name : {"image", "text"}) {
    const auto table = fitb::load_embeddings(root + "/" + name + ".femb",
                                             std::string(name) == "image" ? fitb::Modality::Image : fitb::Modality::Text);
    auto ids = table.ids();
    rng.shuffle(ids);
    fitb::EmbeddingTable shuffled(table.dim());
    for (std::size_t r = 0; r < table.size(); ++r) shuffled.add(ids[r], table.row(r));
    fitb::write_embeddings(shuffled, std::string(name) == "image" ? fitb::Modality::Image : fitb::Modality::Text,
                           root + "/shuffled_" + name + ".femb");
  }
  const auto control = run_cli({"eval", "--scorer", "zeroshot", "--queries", root + "/queries.jsonl", "--image-emb",
                                root + "/shuffled_image.femb", "--text-emb", root + "/shuffled_text.femb"});
  REQUIRE_MESSAGE(control.code == 0, control.err);
  const double control_mrr = first_json_line(control.out)["mrr"];
  CHECK(head_mrr > control_mrr);

  const auto predict = run_cli({"predict", "--queries", root + "/queries.jsonl", "--image-emb", root + "/image.femb",
                                "--text-emb", root + "/text.femb", "--checkpoint", root + "/head.fckp", "--out",
                                root + "/pred.jsonl"});
  REQUIRE_MESSAGE(predict.code == 0, predict.err);
  const auto first = first_json_line(slurp(root + "/pred.jsonl"));
  CHECK(first["ranking"].size() == 5);
  CHECK(first["scores"].size() == 5);
}

TEST_CASE("exit codes") {
  TempDir dir;
  const auto root = make_fixture(dir, "0.05");
  CHECK(run_cli({}).code == fitb::cli::kUsage);
  CHECK(run_cli({"--help"}).code == fitb::cli::kOk);
  CHECK(run_cli({"bogus"}).code == fitb::cli::kUsage);
  CHECK(run_cli({"split", "--outfits", root + "/outfits.jsonl", "--frobnicate", "1"}).code == fitb::cli::kUsage);
  CHECK(run_cli({"split"}).code == fitb::cli::kUsage);
  CHECK(run_cli({"split", "--outfits", root + "/outfits.jsonl", "--candidates", "five", "--out", root}).code ==
        fitb::cli::kUsage);

  const auto no_checkpoint = run_cli({"eval", "--queries", root + "/queries.jsonl", "--image-emb",
                                      root + "/image.femb", "--text-emb", root + "/text.femb"});
  CHECK(no_checkpoint.code == fitb::cli::kUsage);
  CHECK(no_checkpoint.err.find("checkpoint") != std::string::npos);

  const auto missing_file = run_cli({"split", "--outfits", root + "/nope.jsonl", "--out", root});
  CHECK(missing_file.code == fitb::cli::kDataError);

  spit(root + "/bad.jsonl", "{\"outfit_id\": \"o1\", \"items\": [\"a\", \"a\"]}\n");
  CHECK(run_cli({"split", "--outfits", root + "/bad.jsonl", "--out", root}).code == fitb::cli::kDataError);

  spit(root + "/broken.fckp", "FCKP");
  CHECK(run_cli({"eval", "--queries", root + "/queries.jsonl", "--image-emb", root + "/image.femb", "--text-emb",
                 root + "/text.femb", "--checkpoint", root + "/broken.fckp"})
            .code == fitb::cli::kDataError);

  // a checkpoint trained on one mode cannot score another
  const auto head = fitb::init_head({8, {4}}, 1, fitb::RepresentationMode::TextOnly);
  fitb::save_checkpoint(head, root + "/text.fckp");
  CHECK(run_cli({"eval", "--mode", "image", "--queries", root + "/queries.jsonl", "--image-emb", root + "/image.femb",
                 "--checkpoint", root + "/text.fckp"})
            .code == fitb::cli::kUsage);
}

TEST_CASE("config precedence is flag over file over default, per key") {
  TempDir dir;
  const auto root = make_fixture(dir, "0.05");
  spit(root + "/train.cfg",
       "# training settings\n"
       "epochs = 2\n"
       "batch_size = 16\n"
       "layers = 8,4\n");
  const auto result = run_cli({"train", "--config", root + "/train.cfg", "--outfits", root + "/train.jsonl",
                               "--image-emb", root + "/image.femb", "--text-emb", root + "/text.femb", "--epochs", "1",
                               "--checkpoint", root + "/c.fckp"});
  REQUIRE_MESSAGE(result.code == 0, result.err);
  CHECK(result.err.find("effective config:") != std::string::npos);
  CHECK(result.err.find("epochs=1 (flag)") != std::string::npos);
  CHECK(result.err.find("batch-size=16 (config)") != std::string::npos);
  CHECK(result.err.find("layers=8,4 (config)") != std::string::npos);
  CHECK(result.err.find("margin=1 (default)") != std::string::npos);
  CHECK(result.err.find("seed=42 (default)") != std::string::npos);

  const auto summary = first_json_line(result.out);
  CHECK(summary["epoch_losses"].size() == 1);
  const auto head = fitb::load_checkpoint(root + "/c.fckp");
  CHECK(head.output_dim() == 4);
  CHECK(head.layers().front().out == 8);

  spit(root + "/typo.cfg", "epochz = 2\n");
  CHECK(run_cli({"train", "--config", root + "/typo.cfg", "--outfits", root + "/train.jsonl", "--image-emb",
                 root + "/image.femb", "--text-emb", root + "/text.femb", "--checkpoint", root + "/c.fckp"})
            .code == fitb::cli::kUsage);
}

TEST_CASE("FITB_LOG controls verbosity") {
  TempDir dir;
  const auto root = make_fixture(dir, "0.05");
  const std::vector<std::string> args{"split", "--outfits", root + "/outfits.jsonl", "--out", root};
  ::setenv("FITB_LOG", "error", 1);
  const auto quiet = run_cli(args);
  ::unsetenv("FITB_LOG");
  const auto normal = run_cli(args);
  CHECK(quiet.code == 0);
  CHECK(quiet.err.empty());
  CHECK(normal.err.find("effective config:") != std::string::npos);
}
