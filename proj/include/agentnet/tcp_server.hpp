#pragma once

#include <atomic>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

#include "agentnet/net.hpp"
#include "agentnet/server.hpp"

namespace agentnet {

/// Serves a Hub over TCP, one thread per connection.
///
/// The first line of every connection must be a connect envelope:
///   {"op":"connect","agent_name":..,"auth_token":..,"profile":{..}?}
/// "profile" registers the agent first when it is not yet known. Without
/// "agent_name" the connection is query-only (search, get_profile).
class TcpFrontend {
public:
    TcpFrontend(Hub& hub, const net::Address& listen);
    ~TcpFrontend();

    TcpFrontend(const TcpFrontend&) = delete;
    TcpFrontend& operator=(const TcpFrontend&) = delete;

    std::uint16_t port() const { return listener_.port(); }
    net::Address address() const;

    void start();
    /// Closes the listener and every connection, then joins all threads.
    void stop();

private:
    struct Connection;

    void accept_loop();
    void serve(std::shared_ptr<Connection> conn);

    Hub& hub_;
    net::Address bind_;
    net::TcpListener listener_;
    std::thread accept_thread_;
    std::atomic<bool> stopping_{false};
    std::mutex conns_mu_;
    std::list<std::shared_ptr<Connection>> conns_;
};

} // namespace agentnet
