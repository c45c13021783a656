#pragma once

#include <cstdio>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>

#include "bbwm/sampler.hpp"

namespace bbwm {

// Wire format shared by the HTTP and subprocess adapters. One JSON object
// per request and per response:
//
//   request   {"prompt":[1,2,3],"max_tokens":20}
//   response  {"tokens":[7,8,9]}
//
// Token ids are JSON integers in [0, 2^32). A response carrying an "error"
// string is a backend-reported failure.
std::string encode_sample_request(std::span<const Token> prompt, std::size_t max_tokens);
TokenSeq decode_sample_response(std::string_view body);

struct RetryPolicy {
  int attempts = 3;
  int backoff_ms = 50;  // doubled after every failed attempt

  static RetryPolicy from(const SamplerSpec& spec) {
    return {spec.retry_attempts, spec.retry_backoff_ms};
  }
};

// Speaks the wire format over a child process's stdin/stdout, one line per
// message. The child is started lazily with `/bin/sh -c command` and
// restarted after a transport failure. Calls are serialized.
class SubprocessSampler final : public Sampler {
 public:
  SubprocessSampler(std::string command, RetryPolicy retry = {});
  ~SubprocessSampler() override;

  SubprocessSampler(const SubprocessSampler&) = delete;
  SubprocessSampler& operator=(const SubprocessSampler&) = delete;

  TokenSeq sample(std::span<const Token> prompt, std::size_t max_tokens) override;

 private:
  void start();
  void stop();
  std::string round_trip(const std::string& line);

  std::string command_;
  RetryPolicy retry_;
  std::mutex mutex_;
  int pid_ = -1;
  int to_child_ = -1;
  std::FILE* from_child_ = nullptr;
};

// POSTs the request JSON to `url` (http://host[:port]/path) and reads one
// sequence back. At most `max_in_flight` requests are outstanding at once.
class HttpSampler final : public Sampler {
 public:
  HttpSampler(std::string url, std::size_t max_in_flight = 8, RetryPolicy retry = {});

  TokenSeq sample(std::span<const Token> prompt, std::size_t max_tokens) override;

 private:
  std::string host_;  // scheme://host:port
  std::string path_;
  RetryPolicy retry_;
  std::counting_semaphore<1024> in_flight_;
};

}  // namespace bbwm
