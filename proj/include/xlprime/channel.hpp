#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xlprime {

/// Transport-level failure (connection refused, peer exited, timeout).
/// Retried by the gateway; never escapes it.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A bidirectional line-framed connection: one request line out, one
/// response line back, in order.
class LineChannel {
public:
    virtual ~LineChannel() = default;

    /// Sends `line` (no trailing newline) and returns the next response line.
    virtual std::string exchange(std::string_view line) = 0;
};

using LineHandler = std::function<std::string(std::string_view)>;
using ChannelFactory = std::function<std::unique_ptr<LineChannel>()>;

/// Child process speaking the protocol on its stdin/stdout. The command runs
/// under /bin/sh -c.
class ProcessChannel : public LineChannel {
public:
    explicit ProcessChannel(const std::string& command, std::chrono::milliseconds timeout = std::chrono::minutes(5));
    ~ProcessChannel() override;

    ProcessChannel(const ProcessChannel&) = delete;
    ProcessChannel& operator=(const ProcessChannel&) = delete;

    std::string exchange(std::string_view line) override;

    /// First line the child writes without being asked (used by helpers that
    /// announce a port).
    std::string read_line();

private:
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::chrono::milliseconds timeout_;
    std::string buffer_;
};

class TcpChannel : public LineChannel {
public:
    TcpChannel(const std::string& host, int port, std::chrono::milliseconds timeout = std::chrono::minutes(5));
    ~TcpChannel() override;

    TcpChannel(const TcpChannel&) = delete;
    TcpChannel& operator=(const TcpChannel&) = delete;

    std::string exchange(std::string_view line) override;

private:
    int fd_ = -1;
    std::chrono::milliseconds timeout_;
    std::string buffer_;
};

/// Calls a handler directly; used for the built-in mock scorers so that they
/// still travel through request/response encoding.
class InProcessChannel : public LineChannel {
public:
    explicit InProcessChannel(LineHandler handler) : handler_(std::move(handler)) {}

    std::string exchange(std::string_view line) override { return handler_(line); }

private:
    LineHandler handler_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
};

/// Lazily (re)opens channels from a factory and retries transport failures
/// with exponential backoff. Exhausting the attempts rethrows the last
/// TransportError.
class RetryingChannel {
public:
    RetryingChannel(ChannelFactory factory, RetryPolicy policy) : factory_(std::move(factory)), policy_(policy) {}

    std::string exchange(std::string_view line);

    /// Number of channels opened so far (1 + reconnects).
    int connections() const noexcept { return connections_; }

private:
    ChannelFactory factory_;
    RetryPolicy policy_;
    std::unique_ptr<LineChannel> channel_;
    int connections_ = 0;
};

struct Endpoint {
    enum class Kind { Spawn, Tcp, Mock };
    Kind kind = Kind::Mock;
    std::string spec;     // as given
    std::string argument; // command, mock spec, or host
    int port = 0;
};

/// Parses `spawn:<cmd>`, `tcp:<host>:<port>` or `mock:<spec>`.
Endpoint parse_endpoint(std::string_view spec);

ChannelFactory make_channel_factory(const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::minutes(5));

} // namespace xlprime
