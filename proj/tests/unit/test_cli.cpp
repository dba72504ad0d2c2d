#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "support.hpp"

#ifdef ICD_CLI_PATH

namespace icd {
namespace {

struct Outcome {
  int exit_code = -1;
  std::string output;
};

// Runs the tool with stderr folded into the captured output.
Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ICD_CLI_PATH + "\" " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {};
  Outcome out;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.output.append(buf.data(), got);
  const int status = ::pclose(pipe);
  out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

nlohmann::json last_json_line(const std::string& text) {
  std::size_t end = text.find_last_not_of('\n');
  const std::size_t start = text.rfind('\n', end);
  return nlohmann::json::parse(text.substr(start == std::string::npos ? 0 : start + 1, end + 1));
}

TEST(Cli, BaselineEvalWritesArtifacts) {
  const auto dir = test::scratch_dir("cli_ok");
  const Outcome r = run_cli("baseline-eval --out " + dir.string() + " --seed 3 --set baseline.prompts=20");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "baselines.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  std::ifstream f(dir / "config.resolved.json");
  const auto cfg = nlohmann::json::parse(f);
  EXPECT_EQ(cfg["seeds"], nlohmann::json::array({3}));
}

TEST(Cli, BadConfigValueIsAStructuredError) {
  const auto dir = test::scratch_dir("cli_bad");
  const Outcome r = run_cli("train --out " + (dir / "x").string() + " --set train.batch_size=0");
  EXPECT_EQ(r.exit_code, 2);
  const auto j = last_json_line(r.output);
  EXPECT_EQ(j["error"], "config");
  EXPECT_EQ(j["field"], "train.batch_size");
  EXPECT_FALSE(std::filesystem::exists(dir / "x"));
}

TEST(Cli, UnknownKeyAndMissingFile) {
  Outcome r = run_cli("rates --set rates.nonsense=1");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(last_json_line(r.output)["field"], "rates.nonsense");
  r = run_cli("rates --config /nonexistent/cfg.json");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(last_json_line(r.output)["field"], "--config");
  r = run_cli("rates --seed 1,x");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(last_json_line(r.output)["field"], "--seed");
}

TEST(Cli, UsageErrors) {
  Outcome r = run_cli("");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(last_json_line(r.output)["error"], "usage");
  r = run_cli("frobnicate");
  EXPECT_EQ(r.exit_code, 2);
  r = run_cli("train --help");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.output.find("--set"), std::string::npos);
}

}  // namespace
}  // namespace icd

#endif
