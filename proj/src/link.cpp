#include "agentnet/link.hpp"

#include "agentnet/error.hpp"
#include "agentnet/wire.hpp"

namespace agentnet {

using nlohmann::json;

namespace {

class HandlerChannel : public Channel {
public:
    explicit HandlerChannel(LineHandler h) : handler_(std::move(h)) {}
    void push(std::string_view line) override { handler_(line); }

private:
    LineHandler handler_;
};

} // namespace

InProcessLink::InProcessLink(Hub& hub, std::string agent_name, const std::string& auth_token, LineHandler on_line)
    : hub_(hub), agent_(std::move(agent_name)), on_line_(std::move(on_line)) {
    reconnect(auth_token);
}

InProcessLink::~InProcessLink() {
    if (connected_) {
        try {
            hub_.disconnect(agent_);
        } catch (const Error&) {
        }
    }
}

void InProcessLink::disconnect() {
    hub_.disconnect(agent_);
    connected_ = false;
}

void InProcessLink::reconnect(const std::string& auth_token) {
    hub_.connect(agent_, auth_token, std::make_shared<HandlerChannel>(on_line_));
    connected_ = true;
}

std::string InProcessLink::setup_group(const GroupSpec& spec) {
    if (spec.initiator != agent_) throw Error(ErrorCode::SenderMismatch, "initiator must be the session agent");
    return hub_.setup_group(spec);
}

DeliveryReport InProcessLink::send(const AgentMessage& msg) {
    if (msg.header.sender != agent_) throw Error(ErrorCode::SenderMismatch, msg.header.sender);
    return hub_.route(msg);
}

TcpLink::TcpLink(const net::Address& address, const std::string& agent_name, const std::string& auth_token,
                 std::optional<AgentProfile> profile, LineHandler on_line, CloseHandler on_close)
    : stream_(std::make_shared<net::LineStream>(net::connect_tcp(address))),
      on_line_(std::move(on_line)),
      on_close_(std::move(on_close)) {
    reader_ = std::thread([this] { read_loop(); });
    json hello = {{"op", wire::kConnect}, {"auth_token", auth_token}};
    if (!agent_name.empty()) hello["agent_name"] = agent_name;
    if (profile) hello["profile"] = to_json(*profile);
    try {
        request(wire::to_line(hello));
    } catch (...) {
        close();
        throw;
    }
}

TcpLink::~TcpLink() { close(); }

void TcpLink::close() {
    stream_->shutdown();
    if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id()) reader_.join();
}

void TcpLink::read_loop() {
    while (auto line = stream_->read_line()) {
        json j;
        try {
            j = json::parse(*line);
        } catch (const json::exception&) {
            continue;
        }
        if (wire::is_control(j) && j.at("op") == wire::kReply) {
            std::lock_guard lock(reply_mu_);
            replies_.push_back(std::move(j));
            reply_cv_.notify_all();
            continue;
        }
        if (on_line_) on_line_(*line);
    }
    {
        std::lock_guard lock(reply_mu_);
        closed_ = true;
        reply_cv_.notify_all();
    }
    if (on_close_) on_close_();
}

json TcpLink::request(const std::string& line) {
    std::lock_guard req(request_mu_);
    if (!stream_->write(line)) throw Error(ErrorCode::ServerUnreachable, "connection closed");
    std::unique_lock lock(reply_mu_);
    reply_cv_.wait(lock, [&] { return !replies_.empty() || closed_; });
    if (replies_.empty()) throw Error(ErrorCode::ServerUnreachable, "connection closed");
    auto reply = std::move(replies_.front());
    replies_.pop_front();
    lock.unlock();
    return wire::unwrap_reply(reply);
}

std::vector<SearchHit> TcpLink::search(const SearchQuery& query) {
    auto result = request(wire::to_line({{"op", wire::kSearch}, {"characteristics", query.characteristics}, {"limit", query.limit}}));
    std::vector<SearchHit> hits;
    for (const auto& h : result.at("hits")) hits.push_back({profile_from_json(h.at("profile")), h.at("score").get<double>()});
    return hits;
}

std::string TcpLink::setup_group(const GroupSpec& spec) {
    auto env = to_json(spec);
    env["op"] = wire::kSetupGroup;
    return request(wire::to_line(env)).at("comm_id").get<std::string>();
}

DeliveryReport TcpLink::send(const AgentMessage& msg) {
    return delivery_report_from_json(request(encode_message(msg)));
}

AgentProfile TcpLink::get_profile(const std::string& agent_name) {
    return profile_from_json(request(wire::to_line({{"op", wire::kGetProfile}, {"agent_name", agent_name}})));
}

std::vector<std::string> TcpLink::transcript(const std::string& comm_id, std::uint64_t from_seq) {
    auto result = request(wire::to_line({{"op", wire::kTranscript}, {"comm_id", comm_id}, {"from_seq", from_seq}}));
    return result.at("frames").get<std::vector<std::string>>();
}

} // namespace agentnet
