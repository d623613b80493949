#include "xlprime/channel.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

namespace xlprime {

namespace {

void ignore_sigpipe()
{
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void write_all(int fd, std::string_view bytes)
{
    while (!bytes.empty()) {
        const ssize_t n = ::write(fd, bytes.data(), bytes.size());
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw TransportError(errno_text("write"));
        }
        bytes.remove_prefix(static_cast<size_t>(n));
    }
}

std::string read_line(int fd, std::string& buffer, std::chrono::milliseconds timeout)
{
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        if (const size_t nl = buffer.find('\n'); nl != std::string::npos) {
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0)
            throw TransportError("timed out waiting for a response line");
        pollfd p{fd, POLLIN, 0};
        const int ready = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
        if (ready < 0) {
            if (errno == EINTR)
                continue;
            throw TransportError(errno_text("poll"));
        }
        if (ready == 0)
            continue;
        char chunk[65536];
        const ssize_t n = ::read(fd, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw TransportError(errno_text("read"));
        }
        if (n == 0)
            throw TransportError("peer closed the connection");
        buffer.append(chunk, static_cast<size_t>(n));
    }
}

} // namespace

ProcessChannel::ProcessChannel(const std::string& command, std::chrono::milliseconds timeout) : timeout_(timeout)
{
    ignore_sigpipe();
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0)
        throw TransportError(errno_text("pipe"));
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw TransportError(errno_text("pipe"));
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]})
            ::close(fd);
        throw TransportError(errno_text("fork"));
    }
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]})
            ::close(fd);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

ProcessChannel::~ProcessChannel()
{
    if (to_child_ >= 0)
        ::close(to_child_);
    if (from_child_ >= 0)
        ::close(from_child_);
    if (pid_ > 0) {
        // Closing stdin asks the child to exit; give it a moment, then insist.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) != 0)
                return;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
    }
}

std::string ProcessChannel::exchange(std::string_view line)
{
    std::string framed(line);
    framed += '\n';
    write_all(to_child_, framed);
    return xlprime::read_line(from_child_, buffer_, timeout_);
}

std::string ProcessChannel::read_line() { return xlprime::read_line(from_child_, buffer_, timeout_); }

TcpChannel::TcpChannel(const std::string& host, int port, std::chrono::milliseconds timeout) : timeout_(timeout)
{
    ignore_sigpipe();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const std::string service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0)
        throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    std::string last_error = "no addresses";
    for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
        const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) {
            last_error = errno_text("socket");
            continue;
        }
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
            fd_ = fd;
            break;
        }
        last_error = errno_text("connect");
        ::close(fd);
    }
    ::freeaddrinfo(found);
    if (fd_ < 0)
        throw TransportError(host + ":" + service + ": " + last_error);
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpChannel::~TcpChannel()
{
    if (fd_ >= 0)
        ::close(fd_);
}

std::string TcpChannel::exchange(std::string_view line)
{
    std::string framed(line);
    framed += '\n';
    std::string_view rest = framed;
    while (!rest.empty()) {
        const ssize_t n = ::send(fd_, rest.data(), rest.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw TransportError(errno_text("send"));
        }
        rest.remove_prefix(static_cast<size_t>(n));
    }
    return xlprime::read_line(fd_, buffer_, timeout_);
}

} // namespace xlprime
