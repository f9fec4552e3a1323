#pragma once

// Minimal blocking TCP with newline framing.

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace agentnet::net {

struct Address {
    std::string host;
    std::uint16_t port = 0;
};

/// "host:port"; throws Error(ScenarioInvalid) on bad input.
Address parse_address(std::string_view text);
std::string to_string(const Address& a);

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket();
    Socket(Socket&& o) noexcept : fd_(o.release()) {}
    Socket& operator=(Socket&& o) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    int release() {
        int f = fd_;
        fd_ = -1;
        return f;
    }
    /// Unblocks readers and writers on both ends; the fd stays open.
    void shutdown();

private:
    int fd_ = -1;
};

/// Newline-delimited reads and mutex-serialized writes over one socket.
class LineStream {
public:
    static constexpr std::size_t kMaxLine = 16u << 20;

    explicit LineStream(Socket socket) : socket_(std::move(socket)) {}

    /// Next line including its '\n'; nullopt on EOF or error.
    std::optional<std::string> read_line();
    /// Writes a complete line; false if the peer is gone.
    bool write(std::string_view line);
    void shutdown() { socket_.shutdown(); }

private:
    Socket socket_;
    std::string buffer_;
    std::size_t scan_from_ = 0;
    std::mutex write_mu_;
};

class TcpListener {
public:
    /// Binds and listens; port 0 picks an ephemeral port.
    explicit TcpListener(const Address& address);

    std::uint16_t port() const { return port_; }
    /// Blocks until a connection arrives; nullopt after shutdown().
    std::optional<Socket> accept();
    void shutdown() { socket_.shutdown(); }

private:
    Socket socket_;
    std::uint16_t port_ = 0;
};

/// Throws Error(ServerUnreachable).
Socket connect_tcp(const Address& address);

} // namespace agentnet::net
