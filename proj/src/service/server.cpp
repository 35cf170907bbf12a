#include "chorus/service/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <future>
#include <sstream>
#include <system_error>

#include <spdlog/spdlog.h>

#include "chorus/service/wire.hpp"

namespace chorus {

std::vector<RoomSpec> rooms_from_json(const Json& j) {
    const Json* list = &j;
    if (j.is_object()) {
        if (!j.contains("rooms") || j.size() != 1) throw std::invalid_argument("rooms file: expected {\"rooms\": [...]}");
        list = &j.at("rooms");
    }
    if (!list->is_array()) throw std::invalid_argument("rooms file: expected an array");
    std::vector<RoomSpec> out;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const auto& item = (*list)[i];
        const auto where = "rooms[" + std::to_string(i) + "]";
        RoomSpec spec;
        if (item.is_string()) {
            spec.id = item.get<std::string>();
        } else if (item.is_object()) {
            for (const auto& [key, _] : item.items()) {
                if (key != "id" && key != "settings") throw std::invalid_argument(where + "." + key + ": unknown field");
            }
            if (!item.contains("id") || !item["id"].is_string()) throw std::invalid_argument(where + ".id: expected string");
            spec.id = item["id"].get<std::string>();
            if (item.contains("settings")) {
                spec.settings_patch = item["settings"];
                apply_patch(AgentSettings{}, spec.settings_patch);
            }
        } else {
            throw std::invalid_argument(where + ": expected string or object");
        }
        if (!is_valid_name(spec.id)) throw std::invalid_argument(where + ": invalid room id " + spec.id);
        for (const auto& other : out) {
            if (other.id == spec.id) throw std::invalid_argument(where + ": duplicate room " + spec.id);
        }
        out.push_back(std::move(spec));
    }
    return out;
}

std::vector<RoomSpec> load_rooms(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read rooms file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto j = Json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument(path.string() + ": not valid JSON");
    return rooms_from_json(j);
}

// One connected client. The room thread and the reader thread enqueue lines;
// a dedicated writer drains them so a slow client never stalls its room.
class Session {
public:
    Session(std::uint64_t id, std::unique_ptr<LineStream> stream) : id_(id), stream_(std::move(stream)) {
        writer_ = std::thread([this] { write_loop(); });
    }

    ~Session() { finish(); }

    std::uint64_t id() const { return id_; }
    LineStream& stream() { return *stream_; }

    std::string name;

    void send(std::string line) {
        {
            std::lock_guard lock(mutex_);
            if (closing_) return;
            outbox_.push_back(std::move(line));
        }
        cv_.notify_one();
    }

    // Flushes queued lines, then closes the stream.
    void finish() {
        {
            std::lock_guard lock(mutex_);
            closing_ = true;
        }
        cv_.notify_one();
        if (writer_.joinable() && writer_.get_id() != std::this_thread::get_id()) writer_.join();
    }

    // Immediate close from another thread (server shutdown).
    void abort() { stream_->close(); }

private:
    void write_loop() {
        for (;;) {
            std::string line;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return closing_ || !outbox_.empty(); });
                if (outbox_.empty()) break;
                line = std::move(outbox_.front());
                outbox_.pop_front();
            }
            if (!stream_->write_line(line)) {
                std::lock_guard lock(mutex_);
                outbox_.clear();
                closing_ = true;
                break;
            }
        }
        stream_->close();
    }

    std::uint64_t id_;
    std::unique_ptr<LineStream> stream_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::string> outbox_;
    bool closing_ = false;
    std::thread writer_;
};

// Serialized event loop for one room. Everything touching the engine runs on
// the room thread; provider calls run on a separate worker and post their
// results back through the mailbox.
class Room {
public:
    Room(std::string id, const ServerConfig& config, AgentSettings settings, std::shared_ptr<Backend> backend)
        : id_(std::move(id)), config_(config), backend_(std::move(backend)) {
        if (config_.transcript_dir.empty()) {
            transcript_ = std::make_unique<Transcript>(id_);
        } else {
            std::filesystem::create_directories(config_.transcript_dir);
            transcript_ = Transcript::open(id_, config_.transcript_dir / (id_ + ".jsonl"));
            decisions_.open(config_.transcript_dir / (id_ + ".decisions.jsonl"), std::ios::app | std::ios::binary);
        }
        engine_ = std::make_unique<RoomEngine>(
            *transcript_, config_.engine, SettingsAuthority(config_.engine.agent_name, settings, config_.presets),
            config_.prompt);
        engine_->restore(transcript_->snapshot());
        thread_ = std::thread([this] { loop(); });
        provider_thread_ = std::thread([this] { provider_loop(); });
    }

    ~Room() { stop(); }

    const Transcript& transcript() const { return *transcript_; }

    std::future<bool> join(std::shared_ptr<Session> session) {
        auto promise = std::make_shared<std::promise<bool>>();
        auto result = promise->get_future();
        if (!post([this, session, promise] { promise->set_value(do_join(session)); })) promise->set_value(false);
        return result;
    }

    void leave(std::shared_ptr<Session> session) {
        post([this, session] { do_leave(session); });
    }

    void frame(std::shared_ptr<Session> session, wire::ClientFrame frame) {
        post([this, session, frame = std::move(frame)] { do_frame(session, frame); });
    }

    template <typename F>
    auto query(F fn) -> decltype(fn(std::declval<RoomEngine&>())) {
        using R = decltype(fn(std::declval<RoomEngine&>()));
        auto promise = std::make_shared<std::promise<R>>();
        auto result = promise->get_future();
        if (!post([this, fn, promise] { promise->set_value(fn(*engine_)); })) {
            throw std::runtime_error("room " + id_ + " is stopped");
        }
        return result.get();
    }

    void stop() {
        {
            std::lock_guard lock(mutex_);
            if (stopping_) return;
            stopping_ = true;
        }
        cv_.notify_all();
        provider_cv_.notify_all();
        if (thread_.joinable()) thread_.join();
        if (provider_thread_.joinable()) provider_thread_.join();
    }

private:
    Millis now() const {
        if (config_.clock) return config_.clock();
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }

    bool post(std::function<void()> task) {
        {
            std::lock_guard lock(mutex_);
            if (stopping_) return false;
            tasks_.push_back(std::move(task));
        }
        cv_.notify_one();
        return true;
    }

    void loop() {
        for (;;) {
            const auto deadline = engine_->next_deadline();
            std::deque<std::function<void()>> batch;
            {
                std::unique_lock lock(mutex_);
                const auto ready = [&] { return stopping_ || !tasks_.empty(); };
                if (deadline) {
                    const auto wait = std::max<Millis>(0, *deadline - now());
                    cv_.wait_for(lock, std::chrono::milliseconds(wait), ready);
                } else {
                    cv_.wait(lock, ready);
                }
                if (stopping_) return;
                batch.swap(tasks_);
            }
            for (auto& task : batch) run_guarded(task);
            if (const auto d = engine_->next_deadline(); d && *d <= now()) {
                run_guarded([this] { apply(engine_->tick(now())); });
            }
        }
    }

    void run_guarded(const std::function<void()>& task) {
        try {
            task();
        } catch (const std::exception& e) {
            spdlog::error("room {}: {}", id_, e.what());
        }
    }

    void provider_loop() {
        for (;;) {
            ProviderRequest request;
            {
                std::unique_lock lock(mutex_);
                provider_cv_.wait(lock, [&] { return stopping_ || !provider_queue_.empty(); });
                if (stopping_) return;
                request = std::move(provider_queue_.front());
                provider_queue_.pop_front();
            }
            auto result = backend_->generate(request.prompt, request.trigger, request.params);
            post([this, id = request.id, result = std::move(result)] { apply(engine_->provider_result(id, result, now())); });
        }
    }

    void broadcast(const std::string& line) {
        for (const auto& [_, s] : sessions_) s->send(line);
    }

    void apply(Effects fx) {
        for (const auto& e : fx.events) {
            broadcast(wire::encode_event(e));
            if (e.kind == EventKind::settings_change && e.payload && e.payload->value("stage", "") == "applied") {
                broadcast(wire::encode_settings_state(id_, engine_->settings()));
            }
        }
        if (fx.change && fx.change->proposal) {
            if (const auto* p = engine_->authority().find_proposal(fx.change->proposal->id)) {
                broadcast(wire::encode_proposal_state(id_, *p));
            }
        }
        if (fx.vote) broadcast(wire::encode_proposal_state(id_, fx.vote->proposal));
        if (decisions_.is_open()) {
            for (const auto& r : fx.resolved) decisions_ << to_jsonl(r) << '\n';
            decisions_.flush();
        }
        if (!fx.requests.empty()) {
            {
                std::lock_guard lock(mutex_);
                for (auto& r : fx.requests) provider_queue_.push_back(std::move(r));
            }
            provider_cv_.notify_one();
        }
    }

    bool do_join(const std::shared_ptr<Session>& session) {
        const bool taken = session->name == config_.engine.agent_name ||
                           std::any_of(sessions_.begin(), sessions_.end(),
                                       [&](const auto& kv) { return kv.second->name == session->name; });
        if (taken) {
            session->send(wire::encode_error(wire::code::name_taken, session->name + " is already in room " + id_));
            return false;
        }
        const auto history = config_.full_history ? transcript_->snapshot() : transcript_->tail(config_.backlog);
        for (const auto& e : history) session->send(wire::encode_event(e));
        session->send(wire::encode_settings_state(id_, engine_->settings()));
        if (const auto* p = engine_->authority().open_proposal()) session->send(wire::encode_proposal_state(id_, *p));
        sessions_[session->id()] = session;

        ChatEvent join;
        join.author = session->name;
        join.kind = EventKind::join;
        apply(engine_->submit(std::move(join), now()));
        return true;
    }

    void do_leave(const std::shared_ptr<Session>& session) {
        if (sessions_.erase(session->id()) == 0) return;
        ChatEvent leave;
        leave.author = session->name;
        leave.kind = EventKind::leave;
        apply(engine_->submit(std::move(leave), now()));
    }

    void do_frame(const std::shared_ptr<Session>& session, const wire::ClientFrame& frame) {
        if (!sessions_.count(session->id())) {
            session->send(wire::encode_error(wire::code::not_joined, "not a member of room " + id_));
            return;
        }
        const auto& name = session->name;
        if (wire::frame_name(frame) != name) {
            session->send(wire::encode_error(wire::code::name_mismatch, "frame name does not match hello"));
            return;
        }
        try {
            std::visit([&](const auto& f) { handle(session, f); }, frame);
        } catch (const GovernanceError& e) {
            session->send(wire::encode_error(to_string(e.code()), e.what()));
        } catch (const InvalidEvent& e) {
            session->send(wire::encode_error(wire::code::bad_frame, e.what()));
        } catch (const SettingsError& e) {
            session->send(wire::encode_error(wire::code::bad_frame, e.what()));
        }
    }

    void handle(const std::shared_ptr<Session>&, const wire::Hello&) {}

    void handle(const std::shared_ptr<Session>& s, const wire::Post& f) {
        ChatEvent e;
        e.author = s->name;
        e.kind = EventKind::message;
        e.text = f.text;
        e.thread_of = f.thread_of;
        apply(engine_->submit(std::move(e), now()));
    }

    void handle(const std::shared_ptr<Session>& s, const wire::React& f) {
        ChatEvent e;
        e.author = s->name;
        e.kind = EventKind::reaction;
        e.emoji = f.emoji;
        e.thread_of = f.thread_of;
        apply(engine_->submit(std::move(e), now()));
    }

    void handle(const std::shared_ptr<Session>& s, const wire::Typing& f) {
        ChatEvent e;
        e.author = s->name;
        e.kind = f.active ? EventKind::typing_start : EventKind::typing_stop;
        apply(engine_->submit(std::move(e), now()));
    }

    void handle(const std::shared_ptr<Session>& s, const wire::SettingsGet&) {
        s->send(wire::encode_settings_state(id_, engine_->settings()));
        if (const auto* p = engine_->authority().open_proposal()) s->send(wire::encode_proposal_state(id_, *p));
    }

    void relay_change(const std::shared_ptr<Session>& s, Effects fx) {
        const bool denied = fx.change && fx.change->status == ChangeOutcome::Status::denied;
        const auto reason = denied ? fx.change->reason : std::string();
        apply(std::move(fx));
        if (denied) s->send(wire::encode_error(wire::code::denied, reason));
    }

    void handle(const std::shared_ptr<Session>& s, const wire::SettingsSet& f) {
        relay_change(s, engine_->request_change(s->name, f.patch, now()));
    }

    void handle(const std::shared_ptr<Session>& s, const wire::PresetApply& f) {
        relay_change(s, engine_->apply_preset(s->name, f.preset, now()));
    }

    void handle(const std::shared_ptr<Session>& s, const wire::Vote& f) {
        apply(engine_->cast_vote(f.proposal_id, s->name, f.ballot, now()));
    }

    std::string id_;
    const ServerConfig& config_;
    std::shared_ptr<Backend> backend_;
    std::unique_ptr<Transcript> transcript_;
    std::unique_ptr<RoomEngine> engine_;
    std::ofstream decisions_;
    std::map<std::uint64_t, std::shared_ptr<Session>> sessions_;

    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable provider_cv_;
    std::deque<std::function<void()>> tasks_;
    std::deque<ProviderRequest> provider_queue_;
    bool stopping_ = false;
    std::thread thread_;
    std::thread provider_thread_;
};

ChatServer::ChatServer(ServerConfig config, std::shared_ptr<Backend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
    if (!backend_) throw std::invalid_argument("server needs a provider backend");
    for (const auto& spec : config_.rooms) room_for(spec.id, true);
}

ChatServer::~ChatServer() { stop(); }

std::shared_ptr<Room> ChatServer::room_for(const std::string& id, bool create) {
    std::lock_guard lock(rooms_mutex_);
    if (const auto it = rooms_.find(id); it != rooms_.end()) return it->second;
    if (!create || stopped_) return nullptr;

    AgentSettings settings = config_.settings;
    if (!config_.rooms.empty()) {
        const auto spec = std::find_if(config_.rooms.begin(), config_.rooms.end(), [&](const RoomSpec& r) { return r.id == id; });
        if (spec == config_.rooms.end()) return nullptr;
        settings = apply_patch(settings, spec->settings_patch);
    } else if (!is_valid_name(id)) {
        return nullptr;
    }
    auto room = std::make_shared<Room>(id, config_, settings, backend_);
    rooms_.emplace(id, room);
    return room;
}

void ChatServer::serve_connection(std::unique_ptr<LineStream> stream) {
    auto session = std::make_shared<Session>(next_session_id_++, std::move(stream));
    {
        std::lock_guard lock(sessions_mutex_);
        if (stopped_) return;
        sessions_.remove_if([](const std::weak_ptr<Session>& w) { return w.expired(); });
        sessions_.push_back(session);
    }

    std::shared_ptr<Room> room;
    while (auto line = session->stream().read_line()) {
        if (*line == kOversized) {
            session->send(wire::encode_error(wire::code::bad_frame, "frame too long"));
            continue;
        }
        if (line->find_first_not_of(" \t\r") == std::string::npos) continue;

        auto parsed = wire::parse_client_frame(*line);
        if (const auto* err = std::get_if<wire::FrameError>(&parsed)) {
            session->send(wire::encode_error(err->code, err->message));
            continue;
        }
        auto& frame = std::get<wire::ClientFrame>(parsed);
        const auto* hello = std::get_if<wire::Hello>(&frame);
        if (room) {
            if (hello) {
                session->send(wire::encode_error(wire::code::bad_frame, "already joined"));
            } else {
                room->frame(session, std::move(frame));
            }
            continue;
        }
        if (!hello) {
            session->send(wire::encode_error(wire::code::not_joined, "the first frame must be hello"));
            continue;
        }
        if (!is_valid_name(hello->name)) {
            session->send(wire::encode_error(wire::code::bad_frame, "invalid name"));
            continue;
        }
        auto target = room_for(hello->room, config_.rooms.empty());
        if (!target) {
            session->send(wire::encode_error(wire::code::unknown_room, "unknown room " + hello->room));
            continue;
        }
        session->name = hello->name;
        auto joined = target->join(session);
        if (joined.wait_for(std::chrono::seconds(30)) != std::future_status::ready || !joined.get()) break;
        room = std::move(target);
    }
    if (room) room->leave(session);
    session->finish();
}

void ChatServer::reap_connections() {
    std::lock_guard lock(connections_mutex_);
    for (auto it = connections_.begin(); it != connections_.end();) {
        if (*it->done) {
            it->thread.join();
            it = connections_.erase(it);
        } else {
            ++it;
        }
    }
}

void ChatServer::attach(std::unique_ptr<LineStream> stream) {
    reap_connections();
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(connections_mutex_);
    if (stopped_) return;
    connections_.push_back(Connection{std::thread([this, done, s = std::move(stream)]() mutable {
                                          try {
                                              serve_connection(std::move(s));
                                          } catch (const std::exception& e) {
                                              spdlog::error("connection: {}", e.what());
                                          }
                                          *done = true;
                                      }),
                                      done});
}

int ChatServer::listen(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* found = nullptr;
    const auto service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &found); rc != 0) {
        throw std::system_error(EINVAL, std::generic_category(), std::string("resolve ") + host + ": " + gai_strerror(rc));
    }
    int fd = -1;
    int err = EADDRNOTAVAIL;
    for (auto* a = found; a && fd < 0; a = a->ai_next) {
        fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) {
            err = errno;
            continue;
        }
        const int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, a->ai_addr, a->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
            err = errno;
            ::close(fd);
            fd = -1;
        }
    }
    ::freeaddrinfo(found);
    if (fd < 0) throw std::system_error(err, std::generic_category(), "listen on " + host + ":" + service);

    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    const int bound = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                                 : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    listen_fd_ = fd;
    accept_thread_ = std::thread([this, fd] {
        for (;;) {
            const int client = ::accept(fd, nullptr, nullptr);
            if (client < 0) {
                if (errno == EINTR) continue;
                return;
            }
            attach(std::make_unique<FdLineStream>(client));
        }
    });
    return bound;
}

void ChatServer::stop() {
    if (stopped_.exchange(true)) return;
    if (const int fd = listen_fd_.exchange(-1); fd >= 0) {
        ::shutdown(fd, SHUT_RDWR);
        ::close(fd);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        std::lock_guard lock(sessions_mutex_);
        for (auto& weak : sessions_) {
            if (auto s = weak.lock()) s->abort();
        }
        sessions_.clear();
    }
    {
        std::lock_guard lock(connections_mutex_);
        for (auto& c : connections_) {
            if (c.thread.joinable()) c.thread.join();
        }
        connections_.clear();
    }
    std::lock_guard lock(rooms_mutex_);
    for (auto& [_, room] : rooms_) room->stop();
}

bool ChatServer::has_room(const std::string& room) const {
    std::lock_guard lock(rooms_mutex_);
    return rooms_.count(room) > 0;
}

std::vector<ChatEvent> ChatServer::transcript(const std::string& room) {
    auto r = room_for(room, false);
    if (!r) throw UnknownRoom(room);
    return r->transcript().snapshot();
}

std::vector<DecisionRecord> ChatServer::decisions(const std::string& room) {
    auto r = room_for(room, false);
    if (!r) throw UnknownRoom(room);
    return r->query([](RoomEngine& e) { return e.log().records(); });
}

AgentSettings ChatServer::settings(const std::string& room) {
    auto r = room_for(room, false);
    if (!r) throw UnknownRoom(room);
    return r->query([](RoomEngine& e) { return e.settings(); });
}

}  // namespace chorus
