#pragma once

// Client-side view of the server: discovery, group setup and frame routing,
// either in-process or over TCP.

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "agentnet/net.hpp"
#include "agentnet/registry.hpp"
#include "agentnet/server.hpp"

namespace agentnet {

/// Receives every inbound line (frames and control envelopes) in arrival order.
using LineHandler = std::function<void(std::string_view line)>;
using CloseHandler = std::function<void()>;

class ServerLink {
public:
    virtual ~ServerLink() = default;

    virtual std::vector<SearchHit> search(const SearchQuery& query) = 0;
    virtual std::string setup_group(const GroupSpec& spec) = 0;
    virtual DeliveryReport send(const AgentMessage& msg) = 0;
    virtual AgentProfile get_profile(const std::string& agent_name) = 0;
    virtual std::vector<std::string> transcript(const std::string& comm_id, std::uint64_t from_seq) = 0;
};

/// Connects straight to a Hub living in the same process.
class InProcessLink : public ServerLink {
public:
    InProcessLink(Hub& hub, std::string agent_name, const std::string& auth_token, LineHandler on_line);
    ~InProcessLink() override;

    std::vector<SearchHit> search(const SearchQuery& query) override { return hub_.search(query); }
    std::string setup_group(const GroupSpec& spec) override;
    DeliveryReport send(const AgentMessage& msg) override;
    AgentProfile get_profile(const std::string& agent_name) override { return hub_.registry().get_profile(agent_name); }
    std::vector<std::string> transcript(const std::string& comm_id, std::uint64_t from_seq) override {
        return hub_.transcript(comm_id, from_seq);
    }

    /// Drops the session (the hub queues frames until reconnect()).
    void disconnect();
    void reconnect(const std::string& auth_token);

private:
    Hub& hub_;
    std::string agent_;
    LineHandler on_line_;
    bool connected_ = false;
};

/// NDJSON over one TCP connection. A reader thread demultiplexes replies
/// from deliveries; requests are serialized.
class TcpLink : public ServerLink {
public:
    /// Empty agent_name opens a query-only session.
    TcpLink(const net::Address& address, const std::string& agent_name, const std::string& auth_token,
            std::optional<AgentProfile> profile, LineHandler on_line, CloseHandler on_close = {});
    ~TcpLink() override;

    std::vector<SearchHit> search(const SearchQuery& query) override;
    std::string setup_group(const GroupSpec& spec) override;
    DeliveryReport send(const AgentMessage& msg) override;
    AgentProfile get_profile(const std::string& agent_name) override;
    std::vector<std::string> transcript(const std::string& comm_id, std::uint64_t from_seq) override;

    void close();

private:
    nlohmann::json request(const std::string& line);
    void read_loop();

    std::shared_ptr<net::LineStream> stream_;
    LineHandler on_line_;
    CloseHandler on_close_;
    std::mutex request_mu_;
    std::mutex reply_mu_;
    std::condition_variable reply_cv_;
    std::deque<nlohmann::json> replies_;
    bool closed_ = false;
    std::thread reader_;
};

} // namespace agentnet
