#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "bbwm/encoder.hpp"
#include "bbwm/remote_sampler.hpp"
#include "support.hpp"

using namespace bbwm;

namespace {

std::string script_command(const std::string& args) {
  return std::string(BBWM_PYTHON) + " " + BBWM_TEST_DATA_DIR + "/echo_sampler.py " + args;
}

// In-process HTTP black box on an ephemeral port.
class EchoServer {
 public:
  EchoServer() {
    server_.Post("/sample", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      if (fail_first_ > 0) {
        --fail_first_;
        res.status = 503;
        return;
      }
      if (bad_request_) {
        res.status = 400;
        res.set_content("nope", "text/plain");
        return;
      }
      const auto j = nlohmann::json::parse(req.body);
      std::vector<Token> prompt = j.at("prompt").get<std::vector<Token>>();
      const auto k = j.at("max_tokens").get<std::size_t>();
      if (prompt.size() > k) prompt.resize(k);
      if (prompt.empty()) prompt.push_back(0);
      res.set_content(nlohmann::json{{"tokens", prompt}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EchoServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/sample"; }

  std::atomic<int> hits_{0};
  std::atomic<int> fail_first_{0};
  std::atomic<bool> bad_request_{false};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_SUITE("remote") {

TEST_CASE("wire format") {
  const TokenSeq prompt{1, 2, 4294967295u};
  CHECK(encode_sample_request(prompt, 20) == R"({"max_tokens":20,"prompt":[1,2,4294967295]})");
  CHECK(decode_sample_response(R"({"tokens":[7,8,9]})") == TokenSeq{7, 8, 9});
  CHECK_THROWS_AS(decode_sample_response("not json"), SamplerError);
  CHECK_THROWS_AS(decode_sample_response(R"({"tokens":[-1]})"), SamplerError);
  CHECK_THROWS_AS(decode_sample_response(R"({"tokens":[4294967296]})"), SamplerError);
  CHECK_THROWS_AS(decode_sample_response(R"({"error":"x"})"), SamplerError);
  CHECK_THROWS_AS(decode_sample_response(R"({"tokens":"abc"})"), SamplerError);
}

TEST_CASE("subprocess echo round trip keeps ids and order") {
  SubprocessSampler sampler(script_command("echo"));
  const TokenSeq prompt{5, 4294967295u, 0, 17, 3};
  CHECK(sampler.sample(prompt, 10) == prompt);
  CHECK(sampler.sample(prompt, 3) == TokenSeq{5, 4294967295u, 0});
  CHECK(sampler.sample({}, 3) == TokenSeq{0});
}

TEST_CASE("subprocess restart after a crash") {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("bbwm_flaky_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  SubprocessSampler sampler(script_command("flaky " + dir.string()), RetryPolicy{3, 1});
  const TokenSeq prompt{9, 8, 7};
  CHECK(sampler.sample(prompt, 5) == prompt);
  CHECK(std::filesystem::exists(dir / "crashed"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("subprocess failures") {
  SubprocessSampler reporting(script_command("error"), RetryPolicy{3, 1});
  try {
    reporting.sample(TokenSeq{1}, 1);
    FAIL("expected an error");
  } catch (const SamplerError& e) {
    CHECK_FALSE(e.retryable());
  }
  SubprocessSampler missing("exit 1", RetryPolicy{3, 1});
  try {
    missing.sample(TokenSeq{1}, 1);
    FAIL("expected an error");
  } catch (const SamplerError& e) {
    CHECK(std::string(e.what()).find("after 3") != std::string::npos);
  }
}

TEST_CASE("http echo round trip") {
  EchoServer server;
  HttpSampler sampler(server.url(), 4, RetryPolicy{3, 1});
  const TokenSeq prompt{3, 1, 4, 1, 5, 9, 2, 6};
  CHECK(sampler.sample(prompt, 100) == prompt);
  CHECK(sampler.sample(prompt, 2) == TokenSeq{3, 1});
}

TEST_CASE("http retries transient failures then gives up") {
  EchoServer server;
  HttpSampler sampler(server.url(), 4, RetryPolicy{3, 1});
  server.fail_first_ = 2;
  CHECK(sampler.sample(TokenSeq{1, 2}, 5) == TokenSeq{1, 2});
  CHECK(server.hits_ == 3);

  server.hits_ = 0;
  server.fail_first_ = 5;
  CHECK_THROWS_AS(sampler.sample(TokenSeq{1}, 1), SamplerError);
  CHECK(server.hits_ == 3);

  server.fail_first_ = 0;
  server.bad_request_ = true;
  server.hits_ = 0;
  CHECK_THROWS_AS(sampler.sample(TokenSeq{1}, 1), SamplerError);
  CHECK(server.hits_ == 1);
}

TEST_CASE("http connection refused is retryable") {
  HttpSampler sampler("http://127.0.0.1:1/none", 1, RetryPolicy{2, 1});
  try {
    sampler.sample(TokenSeq{1}, 1);
    FAIL("expected an error");
  } catch (const SamplerError& e) {
    CHECK(std::string(e.what()).find("after 2") != std::string::npos);
  }
  CHECK_THROWS_AS(HttpSampler("ftp://x/y"), std::invalid_argument);
}

TEST_CASE("watermarking through a remote black box with concurrent calls") {
  EchoServer server;
  SamplerSpec spec;
  spec.backend = Backend::Http;
  spec.url = server.url();
  auto sampler = make_sampler(spec);
  WatermarkConfig config;
  config.m = 8;
  config.k = 4;
  config.max_len = 8;
  config.sampling_threads = 4;
  Watermarker marker(config);
  const TokenSeq prompt{10, 20, 30, 40, 50};
  const auto out = marker.generate(prompt, *sampler);
  CHECK(out == TokenSeq{10, 20, 30, 40, 10, 20, 30, 40});
  CHECK(server.hits_ == 16);
}

}  // TEST_SUITE
