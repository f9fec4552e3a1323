#include "agentnet/tcp_server.hpp"

#include "agentnet/error.hpp"
#include "agentnet/wire.hpp"

namespace agentnet {

using nlohmann::json;

namespace {

class StreamChannel : public Channel {
public:
    explicit StreamChannel(std::shared_ptr<net::LineStream> stream) : stream_(std::move(stream)) {}
    void push(std::string_view line) override { stream_->write(line); }

private:
    std::shared_ptr<net::LineStream> stream_;
};

json hits_to_json(const std::vector<SearchHit>& hits) {
    json arr = json::array();
    for (const auto& h : hits) arr.push_back({{"profile", to_json(h.profile)}, {"score", h.score}});
    return {{"hits", std::move(arr)}};
}

} // namespace

struct TcpFrontend::Connection {
    std::shared_ptr<net::LineStream> stream;
    std::thread thread;
    std::atomic<bool> done{false};
};

TcpFrontend::TcpFrontend(Hub& hub, const net::Address& listen) : hub_(hub), bind_(listen), listener_(listen) {}

TcpFrontend::~TcpFrontend() { stop(); }

net::Address TcpFrontend::address() const { return {bind_.host, port()}; }

void TcpFrontend::start() { accept_thread_ = std::thread([this] { accept_loop(); }); }

void TcpFrontend::stop() {
    if (stopping_.exchange(true)) return;
    listener_.shutdown();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::list<std::shared_ptr<Connection>> conns;
    {
        std::lock_guard lock(conns_mu_);
        conns.swap(conns_);
    }
    for (auto& c : conns) c->stream->shutdown();
    for (auto& c : conns) {
        if (c->thread.joinable()) c->thread.join();
    }
}

void TcpFrontend::accept_loop() {
    while (!stopping_) {
        auto sock = listener_.accept();
        if (!sock) break;
        auto conn = std::make_shared<Connection>();
        conn->stream = std::make_shared<net::LineStream>(std::move(*sock));
        std::lock_guard lock(conns_mu_);
        if (stopping_) {
            conn->stream->shutdown();
            break;
        }
        // Reap finished connections so long-running servers do not accumulate threads.
        for (auto it = conns_.begin(); it != conns_.end();) {
            if ((*it)->done) {
                (*it)->thread.join();
                it = conns_.erase(it);
            } else {
                ++it;
            }
        }
        conn->thread = std::thread([this, conn] { serve(conn); });
        conns_.push_back(conn);
    }
}

void TcpFrontend::serve(std::shared_ptr<Connection> conn) {
    auto& stream = *conn->stream;
    std::string agent;
    bool authenticated = false;

    auto reply = [&](const json& envelope) { stream.write(wire::to_line(envelope)); };

    while (auto line = stream.read_line()) {
        try {
            json j;
            try {
                j = json::parse(*line);
            } catch (const json::exception& e) {
                throw Error(ErrorCode::MalformedFrame, e.what());
            }

            if (!authenticated) {
                if (!wire::is_control(j) || j.at("op") != wire::kConnect)
                    throw Error(ErrorCode::AuthFailed, "first frame must be a connect envelope");
                auto token = j.value("auth_token", std::string{});
                auto name = j.value("agent_name", std::string{});
                if (name.empty()) {
                    if (token != hub_.config().auth_token) throw Error(ErrorCode::AuthFailed, "bad auth token");
                } else {
                    if (j.contains("profile") && token == hub_.config().auth_token) {
                        auto profile = profile_from_json(j.at("profile"));
                        if (profile.agent_name != name) throw Error(ErrorCode::InvalidProfile, "profile name mismatch");
                        if (!hub_.registry().contains(name)) {
                            hub_.registry().register_agent(profile);
                        } else if (hub_.registry().get_profile(name) != profile) {
                            throw Error(ErrorCode::DuplicateName, name);
                        }
                    }
                    hub_.connect(name, token, std::make_shared<StreamChannel>(conn->stream));
                    agent = name;
                }
                authenticated = true;
                reply(wire::reply_ok());
                continue;
            }

            if (!wire::is_control(j)) {
                if (agent.empty()) throw Error(ErrorCode::NotConnected, "query-only sessions cannot send frames");
                auto msg = decode_message(*line);
                if (msg.header.sender != agent)
                    throw Error(ErrorCode::SenderMismatch, "frame sender " + msg.header.sender + " on " + agent + "'s session");
                reply(wire::reply_ok(to_json(hub_.route(msg))));
                continue;
            }

            const auto op = j.at("op").get<std::string>();
            if (op == wire::kSearch) {
                SearchQuery q;
                q.characteristics = j.value("characteristics", std::vector<std::string>{});
                q.limit = j.value("limit", std::size_t{10});
                reply(wire::reply_ok(hits_to_json(hub_.search(q))));
            } else if (op == wire::kGetProfile) {
                reply(wire::reply_ok(to_json(hub_.registry().get_profile(j.value("agent_name", std::string{})))));
            } else if (op == wire::kSetupGroup) {
                if (agent.empty()) throw Error(ErrorCode::NotConnected, "query-only sessions cannot set up groups");
                auto spec = group_spec_from_json(j);
                if (spec.initiator != agent) throw Error(ErrorCode::SenderMismatch, "initiator must be the session agent");
                reply(wire::reply_ok({{"comm_id", hub_.setup_group(spec)}}));
            } else if (op == wire::kTranscript) {
                auto frames = hub_.transcript(j.value("comm_id", std::string{}), j.value("from_seq", std::uint64_t{0}));
                reply(wire::reply_ok({{"frames", frames}}));
            } else {
                throw Error(ErrorCode::SchemaViolation, "unknown op '" + op + "'");
            }
        } catch (const Error& e) {
            reply(wire::reply_error(e));
            if (!authenticated) break;
        } catch (const std::exception& e) {
            reply(wire::reply_error(Error(ErrorCode::SchemaViolation, e.what())));
            if (!authenticated) break;
        }
    }

    if (!agent.empty()) {
        try {
            hub_.disconnect(agent);
        } catch (const Error&) {
        }
    }
    conn->stream->shutdown();
    conn->done = true;
}

} // namespace agentnet
