#include "agentnet/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "agentnet/error.hpp"

namespace agentnet::net {

Address parse_address(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon + 1 >= text.size())
        throw Error(ErrorCode::ScenarioInvalid, "address must be host:port, got '" + std::string(text) + "'");
    Address a;
    a.host = std::string(text.substr(0, colon));
    if (a.host.empty()) a.host = "127.0.0.1";
    auto port_text = text.substr(colon + 1);
    unsigned port = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535)
        throw Error(ErrorCode::ScenarioInvalid, "bad port in '" + std::string(text) + "'");
    a.port = static_cast<std::uint16_t>(port);
    return a;
}

std::string to_string(const Address& a) { return a.host + ":" + std::to_string(a.port); }

Socket::~Socket() {
    if (fd_ >= 0) ::close(fd_);
}

Socket& Socket::operator=(Socket&& o) noexcept {
    if (this != &o) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = o.release();
    }
    return *this;
}

void Socket::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

std::optional<std::string> LineStream::read_line() {
    for (;;) {
        auto nl = buffer_.find('\n', scan_from_);
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl + 1);
            buffer_.erase(0, nl + 1);
            scan_from_ = 0;
            return line;
        }
        scan_from_ = buffer_.size();
        if (buffer_.size() > kMaxLine) return std::nullopt;
        char chunk[8192];
        ssize_t n = ::recv(socket_.fd(), chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return std::nullopt;
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

bool LineStream::write(std::string_view line) {
    std::lock_guard lock(write_mu_);
    std::size_t off = 0;
    while (off < line.size()) {
        ssize_t n = ::send(socket_.fd(), line.data() + off, line.size() - off, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

namespace {

sockaddr_in resolve(const Address& address) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(address.port);
    std::string host = address.host == "localhost" ? "127.0.0.1" : address.host;
    if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1) return sa;

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
        throw Error(ErrorCode::ServerUnreachable, "cannot resolve " + host);
    sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return sa;
}

} // namespace

TcpListener::TcpListener(const Address& address) {
    socket_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!socket_.valid()) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    auto sa = resolve(address);
    if (::bind(socket_.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
        throw Error(ErrorCode::Io, "bind " + to_string(address) + ": " + std::strerror(errno));
    if (::listen(socket_.fd(), 64) != 0) throw Error(ErrorCode::Io, std::string("listen: ") + std::strerror(errno));
    socklen_t len = sizeof sa;
    ::getsockname(socket_.fd(), reinterpret_cast<sockaddr*>(&sa), &len);
    port_ = ntohs(sa.sin_port);
}

std::optional<Socket> TcpListener::accept() {
    for (;;) {
        int fd = ::accept(socket_.fd(), nullptr, nullptr);
        if (fd >= 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return Socket(fd);
        }
        if (errno == EINTR || errno == ECONNABORTED) continue;
        return std::nullopt;
    }
}

Socket connect_tcp(const Address& address) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw Error(ErrorCode::ServerUnreachable, std::string("socket: ") + std::strerror(errno));
    auto sa = resolve(address);
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
        throw Error(ErrorCode::ServerUnreachable, "connect " + to_string(address) + ": " + std::strerror(errno));
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
}

} // namespace agentnet::net
