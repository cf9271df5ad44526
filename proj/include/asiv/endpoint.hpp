#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "asiv/predictor.hpp"

namespace asiv {

inline constexpr int kProtocolVersion = 1;

/// One request line out, one reply line back.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string roundtrip(const std::string& line, std::chrono::milliseconds timeout) = 0;
    virtual std::string describe() const = 0;
};

/// Runs `command` under /bin/sh and talks over its stdin/stdout.
class SubprocessTransport : public Transport {
public:
    explicit SubprocessTransport(std::string command);
    ~SubprocessTransport() override;

    SubprocessTransport(const SubprocessTransport&) = delete;
    SubprocessTransport& operator=(const SubprocessTransport&) = delete;

    std::string roundtrip(const std::string& line, std::chrono::milliseconds timeout) override;
    std::string describe() const override { return "exec:" + command_; }

private:
    std::string read_line(std::chrono::milliseconds timeout);

    std::string command_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string pending_;
};

/// POSTs each line to an http:// URL and reads the reply from the body.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(std::string url);
    std::string roundtrip(const std::string& line, std::chrono::milliseconds timeout) override;
    std::string describe() const override { return url_; }

private:
    std::string url_;
    std::string host_;
    int port_ = 80;
    std::string path_;
};

/// Opens a transport from an endpoint spec: "exec:<command>" or "http://host:port/path".
std::unique_ptr<Transport> open_transport(const std::string& endpoint);

/// Serialized client for one endpoint. All requests funnel through a single
/// mutex so the endpoint sees them strictly in order.
class EndpointClient {
public:
    explicit EndpointClient(std::unique_ptr<Transport> transport,
                            std::chrono::milliseconds timeout = std::chrono::seconds(30));

    /// Sends hello and checks the version. Returns the advertised class count.
    int handshake();

    std::vector<double> predict(std::span<const TokenSequence> sequences, int explained_class);

    TokenSequence fill(const TokenSequence& tokens, std::span<const std::size_t> keep,
                       const std::string& mode, std::uint64_t seed);

    int classes() const { return classes_; }
    std::string describe() const { return transport_->describe(); }

private:
    std::string exchange(const std::string& line);

    std::unique_ptr<Transport> transport_;
    std::chrono::milliseconds timeout_;
    std::mutex mutex_;
    int classes_ = 0;
};

class ExternalPredictor : public Predictor {
public:
    explicit ExternalPredictor(std::shared_ptr<EndpointClient> client);

    std::string name() const override { return client_->describe(); }
    int classes() const override { return client_->classes(); }
    const std::shared_ptr<EndpointClient>& client() const { return client_; }

protected:
    std::vector<double> do_predict(std::span<const TokenSequence> sequences,
                                   int explained_class) const override;

private:
    std::shared_ptr<EndpointClient> client_;
};

/// Connects, handshakes and wraps the endpoint as a Predictor.
std::shared_ptr<const ExternalPredictor> open_external_predictor(
    const std::string& endpoint,
    std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace asiv
