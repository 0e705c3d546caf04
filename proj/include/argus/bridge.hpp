// Copyright 2026 The argus-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Client side of the model-bridge wire protocol: newline-delimited JSON
// requests {id, op, payload} answered by {id, status, payload, reason}.

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "argus/embedding.hpp"
#include "argus/error.hpp"
#include "argus/io.hpp"
#include "argus/remedy.hpp"

#include <httplib.h>
// <resolv.h> defines _res, which collides with Eigen parameter names.
#ifdef _res
#undef _res
#endif

extern char** environ;

namespace argus::bridge {

inline constexpr const char* kEndpointEnv = "ARGUS_BRIDGE_ENDPOINT";

// ---------------------------------------------------------------------------
// Envelope

struct Request {
  std::string id;
  std::string op;  // embed | ner | synthesize
  io::json payload = io::json::object();
  bool operator==(const Request&) const = default;
};

struct Response {
  std::string id;
  std::string status;  // ok | error
  io::json payload = io::json::object();
  std::string reason;
  bool ok() const { return status == "ok"; }
  bool operator==(const Response&) const = default;
};

inline io::json to_json(const Request& r) { return {{"id", r.id}, {"op", r.op}, {"payload", r.payload}}; }

inline io::json to_json(const Response& r) {
  io::json j{{"id", r.id}, {"status", r.status}, {"payload", r.payload}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

inline std::string encode_line(const io::json& j) { return j.dump() + "\n"; }

inline io::json parse_line(std::string_view line, std::string_view what) {
  try {
    return io::json::parse(line);
  } catch (const io::json::parse_error& e) {
    fail(ErrorKind::protocol, "malformed " + std::string(what) + " line: " + e.what());
  }
}

inline Request request_from_json(const io::json& j) {
  if (!j.is_object()) fail(ErrorKind::protocol, "request is not an object");
  if (!j.contains("id") || !j["id"].is_string()) fail(ErrorKind::protocol, "request lacks string id");
  if (!j.contains("op") || !j["op"].is_string()) fail(ErrorKind::protocol, "request lacks op");
  return {j["id"].get<std::string>(), j["op"].get<std::string>(), j.value("payload", io::json::object())};
}

inline Response response_from_json(const io::json& j) {
  if (!j.is_object()) fail(ErrorKind::protocol, "response is not an object");
  if (!j.contains("id") || !j["id"].is_string()) fail(ErrorKind::protocol, "response lacks string id");
  if (!j.contains("status") || !j["status"].is_string()) fail(ErrorKind::protocol, "response lacks status");
  Response r{j["id"].get<std::string>(), j["status"].get<std::string>(), j.value("payload", io::json::object()),
             j.value("reason", std::string{})};
  if (r.status != "ok" && r.status != "error") fail(ErrorKind::protocol, "unknown status '" + r.status + "'");
  if (r.status == "error" && r.reason.empty()) fail(ErrorKind::protocol, "error response without reason");
  return r;
}

// ---------------------------------------------------------------------------
// Typed payloads

struct EmbedPayload {
  std::string text;
  std::optional<Span> span;
  bool operator==(const EmbedPayload&) const = default;
};

inline io::json to_json(const EmbedPayload& p) {
  io::json j{{"text", p.text}};
  if (p.span) j["span"] = {p.span->start, p.span->end};
  return j;
}

inline EmbedPayload embed_payload_from_json(const io::json& j) {
  EmbedPayload p{j.at("text").get<std::string>(), std::nullopt};
  if (j.contains("span")) p.span = Span{j["span"].at(0).get<std::size_t>(), j["span"].at(1).get<std::size_t>()};
  return p;
}

struct EmbedResult {
  std::size_t dim = 0;
  Granularity granularity = Granularity::token;
  std::vector<std::vector<double>> vectors;
  std::vector<Span> spans;
  bool operator==(const EmbedResult&) const = default;
};

inline io::json to_json(const EmbedResult& r) {
  io::json spans = io::json::array();
  for (const auto& s : r.spans) spans.push_back({s.start, s.end});
  return {{"dim", r.dim},
          {"granularity", std::string(to_string(r.granularity))},
          {"tokens", r.vectors.size()},
          {"vectors", r.vectors},
          {"spans", spans}};
}

/// Checks the declared shape against the payload itself.
inline EmbedResult embed_result_from_json(const io::json& j) {
  EmbedResult r;
  r.dim = j.at("dim").get<std::size_t>();
  r.granularity = parse_granularity(j.at("granularity").get<std::string>());
  const auto tokens = j.at("tokens").get<std::size_t>();
  r.vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
  for (const auto& s : j.at("spans")) r.spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  if (tokens == 0 || r.vectors.size() != tokens)
    fail(ErrorKind::protocol, "embed response declares " + std::to_string(tokens) + " tokens but carries " +
                                  std::to_string(r.vectors.size()) + " vectors");
  if (r.spans.size() != tokens)
    fail(ErrorKind::protocol, "embed response carries " + std::to_string(r.spans.size()) + " spans for " +
                                  std::to_string(tokens) + " tokens");
  for (std::size_t i = 0; i < r.vectors.size(); ++i)
    if (r.vectors[i].size() != r.dim)
      fail(ErrorKind::protocol, "embed response declares dim " + std::to_string(r.dim) + " but vector " +
                                    std::to_string(i) + " has " + std::to_string(r.vectors[i].size()));
  return r;
}

struct NerEntity {
  std::string surface;
  Span span;
  bool operator==(const NerEntity&) const = default;
};

inline io::json to_json(const std::vector<NerEntity>& es) {
  io::json arr = io::json::array();
  for (const auto& e : es) arr.push_back({{"surface", e.surface}, {"span", {e.span.start, e.span.end}}});
  return {{"entities", arr}};
}

inline std::vector<NerEntity> ner_result_from_json(const io::json& j, std::size_t text_length) {
  std::vector<NerEntity> out;
  for (const auto& e : j.at("entities")) {
    NerEntity n{e.at("surface").get<std::string>(),
                {e.at("span").at(0).get<std::size_t>(), e.at("span").at(1).get<std::size_t>()}};
    if (n.span.empty() || n.span.end > text_length)
      fail(ErrorKind::protocol, "ner span [" + std::to_string(n.span.start) + "," + std::to_string(n.span.end) +
                                    ") outside text of length " + std::to_string(text_length));
    out.push_back(std::move(n));
  }
  return out;
}

inline io::json to_json(const SynthesisRequest& s) {
  io::json ctx = io::json::array();
  for (const auto& c : s.contexts) ctx.push_back({{"surface", c.surface}, {"passages", c.passages}});
  return {{"document", s.document}, {"contexts", ctx}, {"prompt_template", s.prompt_template}};
}

inline SynthesisRequest synthesis_request_from_json(const io::json& j) {
  SynthesisRequest s{j.at("document").get<std::string>(), {}, j.at("prompt_template").get<std::string>()};
  for (const auto& c : j.at("contexts"))
    s.contexts.push_back({c.at("surface").get<std::string>(), c.at("passages").get<std::vector<std::string>>()});
  return s;
}

// ---------------------------------------------------------------------------
// Transports

class Transport {
 public:
  virtual ~Transport() = default;
  /// Sends one request line and returns one response line (no newline).
  virtual std::string exchange(const std::string& line) = 0;
};

/// Launches the bridge as a child process through /bin/sh and talks over a
/// socket pair bound to its stdin and stdout.
class StdioTransport final : public Transport {
 public:
  explicit StdioTransport(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
      fail(ErrorKind::transport, std::string("socketpair: ") + std::strerror(errno));
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    posix_spawn_file_actions_addclose(&actions, fds[1]);
    std::string shell = "/bin/sh", flag = "-c", cmd = "exec " + command;
    char* argv[] = {shell.data(), flag.data(), cmd.data(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) {
      ::close(fds[0]);
      fail(ErrorKind::transport, "cannot launch bridge '" + command + "': " + std::strerror(rc));
    }
    fd_ = fds[0];
  }

  StdioTransport(const StdioTransport&) = delete;
  StdioTransport& operator=(const StdioTransport&) = delete;

  ~StdioTransport() override {
    if (fd_ >= 0) ::close(fd_);
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  std::string exchange(const std::string& line) override {
    std::lock_guard lock(mu_);
    std::string out = line;
    if (out.empty() || out.back() != '\n') out.push_back('\n');
    std::size_t sent = 0;
    while (sent < out.size()) {
      const auto n = ::send(fd_, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorKind::transport, std::string("bridge write failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        auto reply = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return reply;
      }
      char chunk[65536];
      const auto n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorKind::transport, std::string("bridge read failed: ") + std::strerror(errno));
      }
      if (n == 0) fail(ErrorKind::transport, "bridge closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  pid_t pid_ = -1;
  std::string buffer_;
  std::mutex mu_;
};

/// One POST per request; the body is the request line.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(const std::string& url) {
    constexpr std::string_view scheme = "http://";
    if (url.rfind(scheme, 0) != 0) fail(ErrorKind::validation, "bridge URL must start with http://");
    const auto rest = url.substr(scheme.size());
    const auto slash = rest.find('/');
    host_port_ = rest.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  }

  std::string exchange(const std::string& line) override {
    std::lock_guard lock(mu_);
    httplib::Client cli("http://" + host_port_);
    cli.set_read_timeout(600, 0);
    auto res = cli.Post(path_, line, "application/json");
    if (!res) fail(ErrorKind::transport, "bridge HTTP request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) fail(ErrorKind::transport, "bridge HTTP status " + std::to_string(res->status));
    auto body = res->body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    return body;
  }

 private:
  std::string host_port_;
  std::string path_;
  std::mutex mu_;
};

/// The environment variable wins over the configured endpoint.
inline std::string resolve_endpoint(const std::string& configured) {
  if (const char* env = std::getenv(kEndpointEnv); env && *env) return env;
  return configured;
}

/// "stdio:<command>" or "http://host:port/path".
inline std::shared_ptr<Transport> make_transport(const std::string& endpoint) {
  if (endpoint.rfind("stdio:", 0) == 0) return std::make_shared<StdioTransport>(endpoint.substr(6));
  if (endpoint.rfind("http://", 0) == 0) return std::make_shared<HttpTransport>(endpoint);
  if (endpoint.empty()) fail(ErrorKind::dependency, std::string("no bridge endpoint configured; set ") + kEndpointEnv);
  fail(ErrorKind::validation, "unrecognized bridge endpoint '" + endpoint + "'");
}

// ---------------------------------------------------------------------------
// Client

class Client {
 public:
  explicit Client(std::shared_ptr<Transport> transport) : transport_(std::move(transport)) {}

  Request make_request(std::string op, io::json payload) {
    std::lock_guard lock(mu_);
    return {"r" + std::to_string(++next_id_), std::move(op), std::move(payload)};
  }

  /// Returns the ok payload; error responses raise protocol errors.
  io::json call(const std::string& op, io::json payload) {
    const auto req = make_request(op, std::move(payload));
    const auto line = transport_->exchange(to_json(req).dump());
    const auto resp = response_from_json(parse_line(line, "response"));
    if (resp.id != req.id) fail(ErrorKind::protocol, "response id '" + resp.id + "' does not echo '" + req.id + "'");
    if (!resp.ok()) fail(ErrorKind::protocol, "bridge rejected " + op + ": " + resp.reason);
    return resp.payload;
  }

  EmbedResult embed(const EmbedPayload& p) { return embed_result_from_json(call("embed", to_json(p))); }

  std::vector<NerEntity> ner(std::string_view text) {
    return ner_result_from_json(call("ner", {{"text", std::string(text)}}), text.size());
  }

  std::string synthesize(const SynthesisRequest& s) {
    return call("synthesize", to_json(s)).at("text").get<std::string>();
  }

 private:
  std::shared_ptr<Transport> transport_;
  std::mutex mu_;
  std::uint64_t next_id_ = 0;
};

class BridgeEncoder final : public TokenEncoder {
 public:
  explicit BridgeEncoder(std::shared_ptr<Client> client) : client_(std::move(client)) {}

  TokenMatrix encode(std::string_view text) const override {
    auto r = client_->embed({std::string(text), std::nullopt});
    TokenMatrix m;
    m.text_length = text.size();
    for (auto& v : r.vectors) m.rows.emplace_back(std::move(v));
    m.token_spans = std::move(r.spans);
    return m;
  }

 private:
  std::shared_ptr<Client> client_;
};

/// Provider over the bridge. The descriptor is fixed up front and every
/// response is checked against it.
inline std::shared_ptr<EmbeddingProvider> make_bridge_provider(std::shared_ptr<Client> client, std::size_t dim,
                                                               Granularity granularity) {
  return std::make_shared<EncoderProvider>(std::make_shared<BridgeEncoder>(std::move(client)),
                                           ProviderDescriptor{ProviderKind::bridge, dim, granularity});
}

class BridgeNer final : public NerProvider {
 public:
  explicit BridgeNer(std::shared_ptr<Client> client) : client_(std::move(client)) {}

  std::vector<MentionOccurrence> extract(std::string_view text) const override {
    std::vector<MentionOccurrence> out;
    for (auto& e : client_->ner(text)) out.push_back({std::move(e.surface), e.span});
    return out;
  }

 private:
  std::shared_ptr<Client> client_;
};

class BridgeGenerator final : public Generator {
 public:
  explicit BridgeGenerator(std::shared_ptr<Client> client) : client_(std::move(client)) {}

  std::string generate(const SynthesisRequest& req) const override { return client_->synthesize(req); }

 private:
  std::shared_ptr<Client> client_;
};

}  // namespace argus::bridge
