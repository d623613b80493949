#include "xlprime/channel.hpp"
#include "xlprime/error.hpp"
#include "xlprime/identifier.hpp"
#include "xlprime/mock.hpp"
#include "xlprime/text.hpp"

#include <charconv>
#include <thread>

namespace xlprime {

std::string RetryingChannel::exchange(std::string_view line)
{
    auto backoff = policy_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            if (!channel_) {
                channel_ = factory_();
                ++connections_;
            }
            return channel_->exchange(line);
        } catch (const TransportError&) {
            channel_.reset();
            if (attempt >= policy_.attempts)
                throw;
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

Endpoint parse_endpoint(std::string_view spec)
{
    Endpoint e;
    e.spec = std::string(spec);
    if (starts_with(spec, "spawn:") && spec.size() > 6) {
        e.kind = Endpoint::Kind::Spawn;
        e.argument = std::string(spec.substr(6));
        return e;
    }
    if (starts_with(spec, "mock:") && spec.size() > 5) {
        e.kind = Endpoint::Kind::Mock;
        e.argument = std::string(spec.substr(5));
        return e;
    }
    if (starts_with(spec, "tcp:")) {
        const auto rest = spec.substr(4);
        const size_t colon = rest.rfind(':');
        if (colon != std::string_view::npos && colon > 0) {
            const auto port_text = rest.substr(colon + 1);
            int port = 0;
            const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
            if (ec == std::errc{} && ptr == port_text.data() + port_text.size() && port > 0 && port < 65536) {
                e.kind = Endpoint::Kind::Tcp;
                e.argument = std::string(rest.substr(0, colon));
                e.port = port;
                return e;
            }
        }
    }
    throw Error(ErrorCode::Usage, "endpoint must be spawn:<cmd>, tcp:<host>:<port> or mock:<spec>, got '" + std::string(spec) + "'");
}

ChannelFactory make_channel_factory(const Endpoint& endpoint, std::chrono::milliseconds timeout)
{
    switch (endpoint.kind) {
    case Endpoint::Kind::Spawn:
        return [command = endpoint.argument, timeout] { return std::make_unique<ProcessChannel>(command, timeout); };
    case Endpoint::Kind::Tcp:
        return [host = endpoint.argument, port = endpoint.port, timeout] { return std::make_unique<TcpChannel>(host, port, timeout); };
    case Endpoint::Kind::Mock: {
        std::shared_ptr<const mock::MockServer> server = mock::make_server(endpoint.argument);
        return [server] {
            return std::make_unique<InProcessChannel>([server](std::string_view line) { return server->handle(line); });
        };
    }
    }
    throw Error(ErrorCode::Usage, "unsupported endpoint");
}

ProtocolIdentifier::ProtocolIdentifier(ChannelFactory factory, RetryPolicy policy) : channel_(std::move(factory), policy) {}

LidResult ProtocolIdentifier::identify(std::string_view text) const
{
    std::string reply;
    try {
        reply = channel_.exchange(encode_lid_request(text));
    } catch (const TransportError& e) {
        throw Error(ErrorCode::ClassifierUnreachable, e.what());
    }
    return decode_lid_response(reply);
}

} // namespace xlprime
