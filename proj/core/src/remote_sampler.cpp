#include "bbwm/remote_sampler.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace bbwm {

using nlohmann::json;

std::string encode_sample_request(std::span<const Token> prompt, std::size_t max_tokens) {
  json j;
  j["prompt"] = std::vector<Token>(prompt.begin(), prompt.end());
  j["max_tokens"] = max_tokens;
  return j.dump();
}

TokenSeq decode_sample_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw SamplerError(std::string("malformed sampler response: ") + e.what(), false);
  }
  if (!j.is_object()) throw SamplerError("sampler response is not a JSON object", false);
  if (auto it = j.find("error"); it != j.end()) {
    throw SamplerError("backend error: " + it->dump(), false);
  }
  const auto it = j.find("tokens");
  if (it == j.end() || !it->is_array()) {
    throw SamplerError("sampler response lacks a \"tokens\" array", false);
  }
  TokenSeq out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0 ||
        v.get<std::uint64_t>() > 0xFFFFFFFFULL) {
      throw SamplerError("sampler response token is not a 32-bit unsigned id: " + v.dump(), false);
    }
    out.push_back(v.get<Token>());
  }
  return out;
}

namespace {

template <typename Fn>
TokenSeq with_retry(const RetryPolicy& policy, Fn&& fn) {
  const int attempts = std::max(1, policy.attempts);
  int backoff = std::max(0, policy.backoff_ms);
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const SamplerError& e) {
      if (!e.retryable()) throw;
      if (attempt >= attempts) {
        throw SamplerError("sampler failed after " + std::to_string(attempts) +
                               " attempts: " + e.what(),
                           false);
      }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    backoff *= 2;
  }
}

}  // namespace

SubprocessSampler::SubprocessSampler(std::string command, RetryPolicy retry)
    : command_(std::move(command)), retry_(retry) {
  if (command_.empty()) throw std::invalid_argument("subprocess sampler: empty command");
  // A dead child must surface as EPIPE, not terminate us.
  ::signal(SIGPIPE, SIG_IGN);
}

SubprocessSampler::~SubprocessSampler() { stop(); }

void SubprocessSampler::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw SamplerError("pipe() failed", true);
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw SamplerError("pipe() failed", true);
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw SamplerError("fork() failed", true);
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = ::fdopen(out_pipe[0], "r");
}

void SubprocessSampler::stop() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ != nullptr) std::fclose(from_child_);
  if (pid_ > 0) {
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == 0) {
      ::kill(pid_, SIGTERM);
      ::waitpid(pid_, &status, 0);
    }
  }
  to_child_ = -1;
  from_child_ = nullptr;
  pid_ = -1;
}

std::string SubprocessSampler::round_trip(const std::string& line) {
  if (pid_ < 0) start();
  std::string msg = line + "\n";
  const char* p = msg.data();
  std::size_t left = msg.size();
  while (left > 0) {
    const ssize_t n = ::write(to_child_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      stop();
      throw SamplerError(std::string("write to sampler process failed: ") + std::strerror(errno),
                         true);
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  std::string reply;
  for (int c; (c = std::fgetc(from_child_)) != EOF;) {
    if (c == '\n') return reply;
    reply.push_back(static_cast<char>(c));
  }
  stop();
  throw SamplerError("sampler process closed its output", true);
}

TokenSeq SubprocessSampler::sample(std::span<const Token> prompt, std::size_t max_tokens) {
  if (max_tokens == 0) throw std::invalid_argument("sample: max_tokens must be >= 1");
  const std::string request = encode_sample_request(prompt, max_tokens);
  std::lock_guard lock(mutex_);
  return with_retry(retry_, [&] { return decode_sample_response(round_trip(request)); });
}

HttpSampler::HttpSampler(std::string url, std::size_t max_in_flight, RetryPolicy retry)
    : retry_(retry),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024))) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
    throw std::invalid_argument("http sampler: url must look like http://host[:port]/path");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  host_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

TokenSeq HttpSampler::sample(std::span<const Token> prompt, std::size_t max_tokens) {
  if (max_tokens == 0) throw std::invalid_argument("sample: max_tokens must be >= 1");
  const std::string request = encode_sample_request(prompt, max_tokens);
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  return with_retry(retry_, [&] {
    httplib::Client client(host_);
    client.set_connection_timeout(5);
    client.set_read_timeout(60);
    auto res = client.Post(path_, request, "application/json");
    if (!res) {
      throw SamplerError("http request failed: " + httplib::to_string(res.error()), true);
    }
    if (res->status >= 500 || res->status == 429) {
      throw SamplerError("http status " + std::to_string(res->status), true);
    }
    if (res->status != 200) {
      throw SamplerError("http status " + std::to_string(res->status) + ": " + res->body, false);
    }
    return decode_sample_response(res->body);
  });
}

}  // namespace bbwm
