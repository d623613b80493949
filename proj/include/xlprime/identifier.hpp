#pragma once

#include "xlprime/channel.hpp"
#include "xlprime/protocol.hpp"

#include <string_view>

namespace xlprime {

class LanguageIdentifier {
public:
    virtual ~LanguageIdentifier() = default;
    /// Top language and its confidence in [0,1].
    virtual LidResult identify(std::string_view text) const = 0;
};

/// Language identification over the wire protocol (`lid` op). Transport
/// failures surface as Error(ClassifierUnreachable); error frames as
/// Error(ProtocolError).
class ProtocolIdentifier : public LanguageIdentifier {
public:
    ProtocolIdentifier(ChannelFactory factory, RetryPolicy policy = {});

    LidResult identify(std::string_view text) const override;

private:
    mutable RetryingChannel channel_;
};

} // namespace xlprime
