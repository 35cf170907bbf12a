#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "chorus/gating/room_engine.hpp"
#include "chorus/governance/presets.hpp"
#include "chorus/provider/backend.hpp"
#include "chorus/service/line_stream.hpp"

namespace chorus {

struct RoomSpec {
    std::string id;
    Json settings_patch = Json::object();  // overlaid on the server-wide settings
};

// Accepts ["r1", "r2"] or [{"id": "r1", "settings": {...}}, ...], optionally
// wrapped as {"rooms": [...]}.
std::vector<RoomSpec> rooms_from_json(const Json& j);
std::vector<RoomSpec> load_rooms(const std::filesystem::path& path);

struct ServerConfig {
    std::vector<RoomSpec> rooms;  // empty: rooms are created on first hello
    AgentSettings settings;
    PresetCatalog presets = PresetCatalog::builtin();
    EngineConfig engine;
    PromptConfig prompt = PromptConfig::builtin();
    std::filesystem::path transcript_dir;  // empty: nothing is persisted
    std::size_t backlog = 100;
    bool full_history = false;
    std::function<Millis()> clock;  // wall-clock milliseconds when unset
};

class Room;
class Session;

class ChatServer {
public:
    ChatServer(ServerConfig config, std::shared_ptr<Backend> backend);
    ~ChatServer();

    ChatServer(const ChatServer&) = delete;
    ChatServer& operator=(const ChatServer&) = delete;

    // Runs one connection to completion on the calling thread.
    void serve_connection(std::unique_ptr<LineStream> stream);

    // Runs a connection on its own thread.
    void attach(std::unique_ptr<LineStream> stream);

    // Binds and starts accepting on a background thread. Returns the bound
    // port (useful with port 0). Throws std::system_error.
    int listen(const std::string& host, int port);

    // Closes the listener and every session, then stops the rooms.
    void stop();

    bool has_room(const std::string& room) const;
    std::vector<ChatEvent> transcript(const std::string& room);
    std::vector<DecisionRecord> decisions(const std::string& room);
    AgentSettings settings(const std::string& room);

private:
    std::shared_ptr<Room> room_for(const std::string& id, bool create);
    void reap_connections();

    ServerConfig config_;
    std::shared_ptr<Backend> backend_;

    mutable std::mutex rooms_mutex_;
    std::map<std::string, std::shared_ptr<Room>> rooms_;

    std::mutex sessions_mutex_;
    std::list<std::weak_ptr<Session>> sessions_;
    std::atomic<std::uint64_t> next_session_id_{1};

    struct Connection {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };
    std::mutex connections_mutex_;
    std::list<Connection> connections_;

    std::atomic<int> listen_fd_{-1};
    std::thread accept_thread_;
    std::atomic<bool> stopped_{false};
};

}  // namespace chorus
