#include "arcade/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "arcade/errors.hpp"

namespace arcade {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw TransportError(what + ": " + std::strerror(errno));
}

}  // namespace

TcpStream::TcpStream(int fd) : fd_(fd) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpStream::~TcpStream() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpStream::connect(const std::string& host, int port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw TransportError("bad address: " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd);
        throw_errno("connect " + host + ":" + std::to_string(port));
    }
    return std::unique_ptr<TcpStream>(new TcpStream(fd));
}

void TcpStream::write_all(const char* data, std::size_t n) {
    std::size_t done = 0;
    while (done < n) {
        const ssize_t w = ::send(fd_, data + done, n - done, MSG_NOSIGNAL);
        if (w <= 0) throw_errno("send");
        done += static_cast<std::size_t>(w);
    }
}

void TcpStream::read_exact(char* data, std::size_t n) {
    std::size_t done = 0;
    while (done < n) {
        const ssize_t r = ::recv(fd_, data + done, n - done, 0);
        if (r == 0) throw TransportError("connection closed mid-read");
        if (r < 0) throw_errno("recv");
        done += static_cast<std::size_t>(r);
    }
}

void TcpStream::shutdown_write() { ::shutdown(fd_, SHUT_WR); }

TcpListener::TcpListener(int port) : fd_(-1), port_(port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw_errno("socket");
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw_errno("bind port " + std::to_string(port));
    if (::listen(fd_, 16) != 0) throw_errno("listen");
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) == 0)
        port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<TcpStream> TcpListener::accept() {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw_errno("accept");
    return std::unique_ptr<TcpStream>(new TcpStream(fd));
}

void TcpListener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

struct InMemoryStream::Channel {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<char> buf;
    bool closed = false;
};

std::pair<std::unique_ptr<InMemoryStream>, std::unique_ptr<InMemoryStream>> make_pipe() {
    auto a_to_b = std::make_shared<InMemoryStream::Channel>();
    auto b_to_a = std::make_shared<InMemoryStream::Channel>();
    std::unique_ptr<InMemoryStream> a(new InMemoryStream());
    std::unique_ptr<InMemoryStream> b(new InMemoryStream());
    a->out_ = a_to_b;
    a->in_ = b_to_a;
    b->out_ = b_to_a;
    b->in_ = a_to_b;
    return {std::move(a), std::move(b)};
}

InMemoryStream::~InMemoryStream() { close(); }

void InMemoryStream::write_all(const char* data, std::size_t n) {
    if (fail_writes_ > 0) {
        --fail_writes_;  // message dropped on the floor
        throw TransportError("injected transport failure");
    }
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw TransportError("pipe closed");
    out_->buf.insert(out_->buf.end(), data, data + n);
    out_->cv.notify_all();
}

void InMemoryStream::read_exact(char* data, std::size_t n) {
    std::unique_lock lock(in_->mu);
    for (std::size_t done = 0; done < n;) {
        in_->cv.wait(lock, [&] { return !in_->buf.empty() || in_->closed; });
        if (in_->buf.empty() && in_->closed)
            throw TransportError("pipe closed mid-read");
        while (done < n && !in_->buf.empty()) {
            data[done++] = in_->buf.front();
            in_->buf.pop_front();
        }
    }
}

void InMemoryStream::close() {
    for (auto& ch : {out_, in_}) {
        if (!ch) continue;
        std::lock_guard lock(ch->mu);
        ch->closed = true;
        ch->cv.notify_all();
    }
}

void InMemoryStream::inject_write_failures(int count) { fail_writes_ = count; }

}  // namespace arcade
