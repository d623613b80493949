// Stand-alone protocol server around the built-in mock scorers and language
// identifier. Used to exercise the spawn: and tcp: transports, and as a
// reference peer when developing a real model bridge.

#include "xlprime/mock.hpp"

#include <CLI11.hpp>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

namespace {

struct Options {
    std::string mock = "uniform";
    int tcp_port = -1;
    int crash_after = -1;
    bool garbage = false;
};

std::string respond(const xlprime::mock::MockServer& server, const Options& options, const std::string& line)
{
    if (options.garbage)
        return "{\"v\":1,\"total\":";
    return server.handle(line);
}

int serve_stdio(const xlprime::mock::MockServer& server, const Options& options)
{
    std::string line;
    int handled = 0;
    while (std::getline(std::cin, line)) {
        if (options.crash_after >= 0 && handled >= options.crash_after)
            std::_Exit(3);
        std::cout << respond(server, options, line) << '\n' << std::flush;
        ++handled;
    }
    return 0;
}

void serve_connection(int fd, const xlprime::mock::MockServer& server, const Options& options)
{
    std::string buffer;
    char chunk[65536];
    while (true) {
        const ssize_t n = ::read(fd, chunk, sizeof chunk);
        if (n <= 0)
            break;
        buffer.append(chunk, static_cast<size_t>(n));
        size_t nl;
        while ((nl = buffer.find('\n')) != std::string::npos) {
            std::string reply = respond(server, options, buffer.substr(0, nl)) + "\n";
            buffer.erase(0, nl + 1);
            if (::send(fd, reply.data(), reply.size(), MSG_NOSIGNAL) < 0)
                break;
        }
    }
    ::close(fd);
}

int serve_tcp(const xlprime::mock::MockServer& server, const Options& options)
{
    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    const int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(options.tcp_port));
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 16) != 0) {
        std::perror("mock_bridge: bind/listen");
        return 1;
    }
    socklen_t len = sizeof addr;
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
    std::cout << "port " << ntohs(addr.sin_port) << '\n' << std::flush;

    // Exit when the parent closes our stdin.
    std::thread([] {
        std::string ignored;
        while (std::getline(std::cin, ignored)) {
        }
        std::_Exit(0);
    }).detach();

    while (true) {
        const int fd = ::accept(listener, nullptr, nullptr);
        if (fd < 0)
            continue;
        std::thread(serve_connection, fd, std::cref(server), std::cref(options)).detach();
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mock scorer / language-ID bridge speaking the xlprime line protocol"};
    Options options;
    app.add_option("--mock", options.mock, "uniform[:V] | hash[:salt[:bonus]] | table:<file> | lexicon[:sharpness]");
    app.add_option("--tcp", options.tcp_port, "listen on 127.0.0.1:<port> (0 picks a free port) instead of stdio");
    app.add_option("--crash-after", options.crash_after, "exit abruptly after answering this many requests");
    app.add_flag("--garbage", options.garbage, "answer every request with a malformed frame");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto server = xlprime::mock::make_server(options.mock);
        return options.tcp_port >= 0 ? serve_tcp(*server, options) : serve_stdio(*server, options);
    } catch (const std::exception& e) {
        std::cerr << "mock_bridge: " << e.what() << '\n';
        return 1;
    }
}
