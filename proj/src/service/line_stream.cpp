#include "chorus/service/line_stream.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <system_error>

namespace chorus {

FdLineStream::FdLineStream(int fd, std::size_t max_line) : fd_(fd), max_line_(max_line) {}

FdLineStream::~FdLineStream() {
    if (fd_ >= 0) ::close(fd_);
}

std::optional<std::string> FdLineStream::read_line() {
    bool oversized = false;
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (oversized || line.size() > max_line_) return kOversized;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        if (buffer_.size() > max_line_) {
            oversized = true;
            buffer_.clear();
        }
        if (eof_) {
            if (buffer_.empty() && !oversized) return std::nullopt;
            std::string rest = std::move(buffer_);
            buffer_.clear();
            if (oversized) return kOversized;
            return rest;
        }
        char chunk[4096];
        const auto n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            eof_ = true;
            continue;
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

bool FdLineStream::write_line(std::string_view line) {
    std::string out(line);
    out += '\n';
    std::size_t sent = 0;
    while (sent < out.size()) {
        const auto n = ::send(fd_, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

void FdLineStream::close() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

std::pair<std::unique_ptr<FdLineStream>, std::unique_ptr<FdLineStream>> make_stream_pair() {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) throw std::system_error(errno, std::generic_category(), "socketpair");
    return {std::make_unique<FdLineStream>(fds[0]), std::make_unique<FdLineStream>(fds[1])};
}

std::unique_ptr<FdLineStream> connect_tcp(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const auto service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
        throw std::system_error(EHOSTUNREACH, std::generic_category(), std::string("resolve ") + host + ": " + gai_strerror(rc));
    }
    int err = ECONNREFUSED;
    for (auto* a = found; a; a = a->ai_next) {
        const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) {
            err = errno;
            continue;
        }
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
            ::freeaddrinfo(found);
            return std::make_unique<FdLineStream>(fd);
        }
        err = errno;
        ::close(fd);
    }
    ::freeaddrinfo(found);
    throw std::system_error(err, std::generic_category(), "connect " + host + ":" + service);
}

}  // namespace chorus
