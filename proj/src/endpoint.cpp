#include "asiv/endpoint.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <httplib.h>
#include <json.hpp>

#include "asiv/error.hpp"

extern char** environ;

namespace asiv {

using json = nlohmann::json;

SubprocessTransport::SubprocessTransport(std::string command) : command_(std::move(command)) {
    ::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) throw TransportError("pipe() failed: " + std::string(std::strerror(errno)));
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw TransportError("pipe() failed: " + std::string(std::strerror(errno)));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
    posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

    const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr,
                                 const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        throw TransportError("cannot spawn \"" + command_ + "\": " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

SubprocessTransport::~SubprocessTransport() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        // Closing stdin is the shutdown signal; give the adapter a moment, then kill it.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
            ::usleep(10000);
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
    }
}

std::string SubprocessTransport::read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        if (auto nl = pending_.find('\n'); nl != std::string::npos) {
            std::string line = pending_.substr(0, nl);
            pending_.erase(0, nl + 1);
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0)
            throw TransportError("timed out waiting for reply from " + describe(), pending_);
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw TransportError("poll() failed: " + std::string(std::strerror(errno)), pending_);
        }
        if (ready == 0) continue;
        char buf[4096];
        const ssize_t got = ::read(from_child_, buf, sizeof buf);
        if (got < 0) {
            if (errno == EINTR) continue;
            throw TransportError("read failed: " + std::string(std::strerror(errno)), pending_);
        }
        if (got == 0) throw TransportError("endpoint " + describe() + " closed its output", pending_);
        pending_.append(buf, static_cast<std::size_t>(got));
    }
}

std::string SubprocessTransport::roundtrip(const std::string& line,
                                           std::chrono::milliseconds timeout) {
    std::string out = line;
    out.push_back('\n');
    std::size_t sent = 0;
    while (sent < out.size()) {
        const ssize_t n = ::write(to_child_, out.data() + sent, out.size() - sent);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError("write to " + describe() + " failed: " + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
    return read_line(timeout);
}

HttpTransport::HttpTransport(std::string url) : url_(std::move(url)) {
    constexpr std::string_view scheme = "http://";
    if (url_.rfind(scheme, 0) != 0) throw DomainError("unsupported endpoint URL: " + url_);
    std::string rest = url_.substr(scheme.size());
    const auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    if (const auto colon = authority.rfind(':'); colon != std::string::npos) {
        host_ = authority.substr(0, colon);
        try {
            port_ = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw DomainError("bad port in endpoint URL: " + url_);
        }
    } else {
        host_ = authority;
    }
    if (host_.empty()) throw DomainError("missing host in endpoint URL: " + url_);
}

std::string HttpTransport::roundtrip(const std::string& line, std::chrono::milliseconds timeout) {
    httplib::Client client(host_, port_);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(path_, line + "\n", "application/x-ndjson");
    if (!res) throw TransportError("HTTP request to " + url_ + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + url_, res->body);
    std::string body = res->body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    return body;
}

std::unique_ptr<Transport> open_transport(const std::string& endpoint) {
    if (endpoint.rfind("exec:", 0) == 0) return std::make_unique<SubprocessTransport>(endpoint.substr(5));
    if (endpoint.rfind("http://", 0) == 0) return std::make_unique<HttpTransport>(endpoint);
    throw DomainError("endpoint must be exec:<command> or http://host:port/path, got \"" + endpoint + "\"");
}

EndpointClient::EndpointClient(std::unique_ptr<Transport> transport, std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {}

namespace {

json parse_reply(const std::string& raw) {
    json reply;
    try {
        reply = json::parse(raw);
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed reply: ") + e.what(), raw);
    }
    if (!reply.is_object() || !reply.contains("type") || !reply["type"].is_string())
        throw TransportError("reply has no \"type\" field", raw);
    if (reply["type"] == "error")
        throw TransportError("endpoint error: " + reply.value("message", std::string("(no message)")), raw);
    return reply;
}

void expect_type(const json& reply, const char* type, const std::string& raw) {
    if (reply["type"] != type)
        throw TransportError(std::string("expected reply type \"") + type + "\"", raw);
}

}  // namespace

std::string EndpointClient::exchange(const std::string& line) {
    std::lock_guard lock(mutex_);
    return transport_->roundtrip(line, timeout_);
}

int EndpointClient::handshake() {
    const json hello = {{"type", "hello"}, {"version", kProtocolVersion}};
    const std::string raw = exchange(hello.dump());
    const json reply = parse_reply(raw);
    expect_type(reply, "hello", raw);
    if (!reply.contains("version") || !reply["version"].is_number_integer())
        throw TransportError("hello reply lacks an integer version", raw);
    if (reply["version"].get<int>() != kProtocolVersion)
        throw ProtocolVersionError("endpoint speaks protocol version " +
                                       std::to_string(reply["version"].get<int>()) +
                                       ", engine speaks " + std::to_string(kProtocolVersion),
                                   raw);
    if (!reply.contains("classes") || !reply["classes"].is_number_integer() ||
        reply["classes"].get<int>() < 1)
        throw TransportError("hello reply lacks a positive class count", raw);
    classes_ = reply["classes"].get<int>();
    return classes_;
}

std::vector<double> EndpointClient::predict(std::span<const TokenSequence> sequences,
                                            int explained_class) {
    json seqs = json::array();
    for (const auto& s : sequences) seqs.push_back(s);
    const json request = {{"type", "predict"}, {"class", explained_class}, {"sequences", seqs}};
    const std::string raw = exchange(request.dump());
    const json reply = parse_reply(raw);
    expect_type(reply, "probs", raw);
    if (!reply.contains("values") || !reply["values"].is_array())
        throw TransportError("probs reply lacks a values array", raw);
    const auto& values = reply["values"];
    if (values.size() != sequences.size())
        throw TransportError("endpoint returned " + std::to_string(values.size()) +
                                 " probabilities for a batch of " + std::to_string(sequences.size()),
                             raw);
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& v : values) {
        if (!v.is_number()) throw TransportError("non-numeric probability in reply", raw);
        const double p = v.get<double>();
        if (!std::isfinite(p) || p < 0.0 || p > 1.0)
            throw TransportError("probability outside [0,1] in reply", raw);
        out.push_back(p);
    }
    return out;
}

TokenSequence EndpointClient::fill(const TokenSequence& tokens, std::span<const std::size_t> keep,
                                   const std::string& mode, std::uint64_t seed) {
    const json request = {{"type", "fill"},
                          {"tokens", tokens},
                          {"keep", std::vector<std::size_t>(keep.begin(), keep.end())},
                          {"mode", mode},
                          {"seed", seed}};
    const std::string raw = exchange(request.dump());
    const json reply = parse_reply(raw);
    expect_type(reply, "filled", raw);
    if (!reply.contains("tokens") || !reply["tokens"].is_array())
        throw TransportError("filled reply lacks a tokens array", raw);
    TokenSequence out;
    for (const auto& t : reply["tokens"]) {
        if (!t.is_string()) throw TransportError("non-string token in filled reply", raw);
        out.push_back(t.get<std::string>());
    }
    if (out.size() != tokens.size())
        throw TransportError("filled reply changed the sequence length", raw);
    for (auto i : keep) {
        if (out[i] != tokens[i]) throw TransportError("filled reply altered a kept position", raw);
    }
    return out;
}

ExternalPredictor::ExternalPredictor(std::shared_ptr<EndpointClient> client)
    : client_(std::move(client)) {}

std::vector<double> ExternalPredictor::do_predict(std::span<const TokenSequence> sequences,
                                                  int explained_class) const {
    return client_->predict(sequences, explained_class);
}

std::shared_ptr<const ExternalPredictor> open_external_predictor(const std::string& endpoint,
                                                                 std::chrono::milliseconds timeout) {
    auto client = std::make_shared<EndpointClient>(open_transport(endpoint), timeout);
    client->handshake();
    return std::make_shared<ExternalPredictor>(std::move(client));
}

}  // namespace asiv
