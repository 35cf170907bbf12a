#include <gtest/gtest.h>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <mutex>
#include <random>
#include <thread>

#include "chorus/provider/decision_parser.hpp"
#include "chorus/service/server.hpp"
#include "chorus/service/wire.hpp"
#include "test_support.hpp"

using namespace chorus;
using namespace std::chrono_literals;
using chorus::testing::block;

namespace {

class FnBackend final : public Backend {
public:
    explicit FnBackend(std::function<std::string(const ChatEvent&)> fn) : fn_(std::move(fn)) {}
    GenerationResult generate(const std::string&, const ChatEvent& trigger, const GenParams&) override {
        return GenerationResult{fn_(trigger), std::nullopt};
    }

private:
    std::function<std::string(const ChatEvent&)> fn_;
};

std::shared_ptr<Backend> answering(const std::string& reply) {
    return std::make_shared<FnBackend>([reply](const ChatEvent& t) {
        return block(t.author, 95, Verdict::SUBMIT, reply);
    });
}

std::shared_ptr<Backend> passing() {
    return std::make_shared<FnBackend>([](const ChatEvent& t) { return synthetic_pass_block(t.author); });
}

// Test-side end of a connection. A reader thread collects frames so tests can
// wait for a specific one without blocking forever.
class Client {
public:
    explicit Client(std::unique_ptr<LineStream> stream) : stream_(std::move(stream)) {
        reader_ = std::thread([this] {
            while (auto line = stream_->read_line()) {
                std::lock_guard lock(mutex_);
                frames_.push_back(Json::parse(*line));
                cv_.notify_all();
            }
            std::lock_guard lock(mutex_);
            closed_ = true;
            cv_.notify_all();
        });
    }

    ~Client() {
        stream_->close();
        reader_.join();
    }

    void send(const Json& frame) { stream_->write_line(frame.dump()); }
    void send_raw(const std::string& line) { stream_->write_line(line); }

    // First unconsumed frame satisfying `pred`; frames before it are consumed too.
    std::optional<Json> wait_for(const std::function<bool(const Json&)>& pred, std::chrono::milliseconds timeout = 5s) {
        std::unique_lock lock(mutex_);
        std::optional<Json> found;
        cv_.wait_for(lock, timeout, [&] {
            while (cursor_ < frames_.size()) {
                const auto& f = frames_[cursor_++];
                if (pred(f)) {
                    found = f;
                    return true;
                }
            }
            return closed_;
        });
        return found;
    }

    std::optional<Json> wait_type(const std::string& type, std::chrono::milliseconds timeout = 5s) {
        return wait_for([&](const Json& f) { return f["type"] == type; }, timeout);
    }

    std::optional<Json> wait_error(const std::string& code) {
        return wait_for([&](const Json& f) { return f["type"] == "error" && f["code"] == code; });
    }

    std::optional<Json> wait_event(const std::function<bool(const ChatEvent&)>& pred,
                                   std::chrono::milliseconds timeout = 5s) {
        return wait_for([&](const Json& f) { return f["type"] == "event" && pred(wire::event_from_frame(f)); }, timeout);
    }

    bool wait_closed(std::chrono::milliseconds timeout = 5s) {
        std::unique_lock lock(mutex_);
        return cv_.wait_for(lock, timeout, [&] { return closed_; });
    }

    std::vector<Json> all() {
        std::lock_guard lock(mutex_);
        return {frames_.begin(), frames_.end()};
    }

private:
    std::unique_ptr<LineStream> stream_;
    std::thread reader_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Json> frames_;
    std::size_t cursor_ = 0;
    bool closed_ = false;
};

ServerConfig fast_config() {
    ServerConfig config;
    config.settings.rate.initial_delay_ms = 20;
    return config;
}

std::unique_ptr<Client> connect(ChatServer& server) {
    auto [server_end, client_end] = make_stream_pair();
    server.attach(std::move(server_end));
    return std::make_unique<Client>(std::move(client_end));
}

Json hello(const std::string& room, const std::string& name) { return Json{{"type", "hello"}, {"room", room}, {"name", name}}; }
Json post(const std::string& name, const std::string& text) { return Json{{"type", "post"}, {"name", name}, {"text", text}}; }

std::unique_ptr<Client> joined(ChatServer& server, const std::string& room, const std::string& name) {
    auto c = connect(server);
    c->send(hello(room, name));
    EXPECT_TRUE(c->wait_event([&](const ChatEvent& e) { return e.kind == EventKind::join && e.author == name; }))
        << name << " did not see its own join";
    return c;
}

bool is_text(const ChatEvent& e, const std::string& author, const std::string& text) {
    return e.kind == EventKind::message && e.author == author && e.text == text;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("chorus_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

// ---- wire codec ----

TEST(Wire, ClientFramesRoundTrip) {
    const std::vector<wire::ClientFrame> frames = {
        wire::Hello{"lab", "Ana"},
        wire::Post{"Ana", "hello", std::nullopt},
        wire::Post{"Ana", "in thread", Seq{4}},
        wire::React{"Ana", 3, "+1"},
        wire::Typing{"Ana", true},
        wire::Typing{"Ana", false},
        wire::SettingsGet{"Ana"},
        wire::SettingsSet{"Ana", Json{{"threshold", "low"}}},
        wire::PresetApply{"Ana", "summarizer"},
        wire::Vote{"Ana", 2, Ballot::no},
    };
    for (const auto& f : frames) {
        const auto line = wire::encode(f);
        const auto parsed = wire::parse_client_frame(line);
        ASSERT_TRUE(std::holds_alternative<wire::ClientFrame>(parsed)) << line;
        EXPECT_EQ(wire::encode(std::get<wire::ClientFrame>(parsed)), line);
        EXPECT_EQ(wire::frame_name(f), "Ana");
    }
    EXPECT_EQ(wire::encode(wire::Typing{"Ana", false}), R"({"type":"typing","name":"Ana","state":"stop"})");
}

TEST(Wire, StrictParsing) {
    const std::vector<std::pair<std::string, std::string>> cases = {
        {"not json", "frame is not valid JSON"},
        {"[1,2]", "frame must be a JSON object"},
        {R"({"name":"Ana"})", "missing field type"},
        {R"({"type":"shout","name":"Ana"})", "unknown frame type shout"},
        {R"({"type":"post","name":"Ana","text":"x","extra":1})", "unknown field extra"},
        {R"({"type":"post","name":"Ana"})", "missing field text"},
        {R"({"type":"post","name":"Ana","text":""})", "text must not be empty"},
        {R"({"type":"post","name":"Ana","text":"x","thread_of":0})", "thread_of must be a positive integer"},
        {R"({"type":"post","name":5,"text":"x"})", "name must be a string"},
        {R"({"type":"typing","name":"Ana","state":"paused"})", "state must be start or stop"},
        {R"({"type":"settings_set","name":"Ana","patch":[]})", "patch must be an object"},
        {R"({"type":"vote","name":"Ana","proposal_id":1,"ballot":"maybe"})", "ballot must be yes or no"},
        {R"({"type":"react","name":"Ana","thread_of":"3","emoji":"+1"})", "thread_of must be a positive integer"},
    };
    for (const auto& [line, message] : cases) {
        const auto parsed = wire::parse_client_frame(line);
        ASSERT_TRUE(std::holds_alternative<wire::FrameError>(parsed)) << line;
        EXPECT_EQ(std::get<wire::FrameError>(parsed).code, "bad_frame");
        EXPECT_EQ(std::get<wire::FrameError>(parsed).message, message) << line;
    }
}

TEST(Wire, ServerFrames) {
    ChatEvent e;
    e.seq = 3;
    e.ts_ms = 99;
    e.room = "lab";
    e.author = "Koala";
    e.kind = EventKind::message;
    e.text = "hi";
    e.thread_of = 2;
    const auto line = wire::encode_event(e);
    EXPECT_EQ(line.rfind(R"({"type":"event","seq":3,)", 0), 0u);
    EXPECT_EQ(to_json(wire::event_from_frame(Json::parse(line))), to_json(e));

    EXPECT_EQ(wire::encode_error("denied", "no"), R"({"type":"error","code":"denied","message":"no"})");
    const auto state = Json::parse(wire::encode_settings_state("lab", AgentSettings{}));
    EXPECT_EQ(state["settings"], to_json(AgentSettings{}));
}

TEST(Rooms, FromJson) {
    auto rooms = rooms_from_json(Json::parse(R"(["a", "b"])"));
    ASSERT_EQ(rooms.size(), 2u);
    EXPECT_EQ(rooms[1].id, "b");
    rooms = rooms_from_json(Json::parse(R"({"rooms": [{"id": "quiet", "settings": {"mode": "reactive"}}]})"));
    EXPECT_EQ(rooms[0].settings_patch, (Json{{"mode", "reactive"}}));
    EXPECT_THROW(rooms_from_json(Json::parse(R"(["a", "a"])")), std::invalid_argument);
    EXPECT_THROW(rooms_from_json(Json::parse(R"([{"id": "a", "color": "red"}])")), std::invalid_argument);
    EXPECT_THROW(rooms_from_json(Json::parse(R"([{"id": "a", "settings": {"mode": "loud"}}])")), std::exception);
    EXPECT_THROW(rooms_from_json(Json::parse(R"({"list": []})")), std::invalid_argument);
    EXPECT_THROW(rooms_from_json(Json::parse("[3]")), std::invalid_argument);
}

// ---- sessions ----

TEST(Server, HelloGetsBacklogThenJoin) {
    ChatServer server(fast_config(), passing());
    auto ana = joined(server, "lab", "Ana");
    ana->send(post("Ana", "first"));
    ASSERT_TRUE(ana->wait_event([](const ChatEvent& e) { return is_text(e, "Ana", "first"); }));

    auto ben = connect(server);
    ben->send(hello("lab", "Ben"));
    ASSERT_TRUE(ben->wait_event([](const ChatEvent& e) { return e.kind == EventKind::join && e.author == "Ben"; }));
    const auto frames = ben->all();
    ASSERT_GE(frames.size(), 4u);
    EXPECT_EQ(wire::event_from_frame(frames[0]).author, "Ana");  // Ana's join
    EXPECT_EQ(wire::event_from_frame(frames[1]).text, "first");
    EXPECT_EQ(frames[2]["type"], "settings_state");
    EXPECT_EQ(frames[2]["room"], "lab");
    EXPECT_TRUE(ana->wait_event([](const ChatEvent& e) { return e.kind == EventKind::join && e.author == "Ben"; }));
}

TEST(Server, NameTakenClosesTheConnection) {
    ChatServer server(fast_config(), passing());
    auto ana = joined(server, "lab", "Ana");
    auto twin = connect(server);
    twin->send(hello("lab", "Ana"));
    EXPECT_TRUE(twin->wait_error("name_taken"));
    EXPECT_TRUE(twin->wait_closed());

    auto agent = connect(server);
    agent->send(hello("lab", "Koala"));
    EXPECT_TRUE(agent->wait_error("name_taken"));
}

TEST(Server, ErrorsKeepTheSessionOpen) {
    ChatServer server(fast_config(), passing());
    auto ana = connect(server);
    ana->send(post("Ana", "too early"));
    EXPECT_TRUE(ana->wait_error("not_joined"));
    ana->send(hello("lab", "Ana"));
    ASSERT_TRUE(ana->wait_event([](const ChatEvent& e) { return e.kind == EventKind::join; }));
    ana->send_raw("{broken");
    EXPECT_TRUE(ana->wait_error("bad_frame"));
    ana->send(post("Ben", "spoofed"));
    EXPECT_TRUE(ana->wait_error("name_mismatch"));
    ana->send(hello("lab", "Ana"));
    EXPECT_TRUE(ana->wait_error("bad_frame"));
    ana->send(Json{{"type", "react"}, {"name", "Ana"}, {"thread_of", 999}, {"emoji", "+1"}});
    EXPECT_TRUE(ana->wait_error("bad_frame"));
    ana->send(post("Ana", "still here"));
    EXPECT_TRUE(ana->wait_event([](const ChatEvent& e) { return is_text(e, "Ana", "still here"); }));
    EXPECT_EQ(server.transcript("lab").size(), 2u);
}

TEST(Server, OversizedFrameIsRejected) {
    ChatServer server(fast_config(), passing());
    auto ana = joined(server, "lab", "Ana");
    ana->send(post("Ana", std::string(70'000, 'x')));
    EXPECT_TRUE(ana->wait_error("bad_frame"));
    ana->send(post("Ana", "after"));
    EXPECT_TRUE(ana->wait_event([](const ChatEvent& e) { return is_text(e, "Ana", "after"); }));
}

TEST(Server, ConfiguredRoomsOnly) {
    auto config = fast_config();
    config.rooms = rooms_from_json(Json::parse(R"([{"id": "quiet", "settings": {"mode": "reactive"}}])"));
    ChatServer server(config, passing());
    EXPECT_TRUE(server.has_room("quiet"));
    auto ana = connect(server);
    ana->send(hello("loud", "Ana"));
    EXPECT_TRUE(ana->wait_error("unknown_room"));
    ana->send(hello("quiet", "Ana"));
    const auto state = ana->wait_type("settings_state");
    ASSERT_TRUE(state);
    EXPECT_EQ((*state)["settings"]["mode"], "reactive");
    EXPECT_EQ(server.settings("quiet").mode, Mode::reactive);
    EXPECT_THROW(server.transcript("loud"), UnknownRoom);
}

TEST(Server, AddressedPostGetsAReply) {
    ChatServer server(fast_config(), answering("Hello from the agent"));
    auto ana = joined(server, "lab", "Ana");
    auto ben = joined(server, "lab", "Ben");
    ana->send(post("Ana", "Koala, are you there?"));
    const auto reply = ben->wait_event([](const ChatEvent& e) { return is_text(e, "Koala", "Hello from the agent"); });
    ASSERT_TRUE(reply);
    EXPECT_EQ((*reply)["payload"]["trigger_seqs"], Json::array({3}));
    const auto records = server.decisions("lab");
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].override_kind, "forced_reply");
}

TEST(Server, TypingHoldsTheReply) {
    ChatServer server(fast_config(), answering("done waiting"));
    auto ana = joined(server, "lab", "Ana");
    auto ben = joined(server, "lab", "Ben");
    ben->send(Json{{"type", "typing"}, {"name", "Ben"}, {"state", "start"}});
    ASSERT_TRUE(ana->wait_event([](const ChatEvent& e) { return e.kind == EventKind::typing_start; }));
    ana->send(post("Ana", "Koala?"));
    EXPECT_FALSE(ana->wait_event([](const ChatEvent& e) { return e.author == "Koala"; }, 300ms));
    ben->send(Json{{"type", "typing"}, {"name", "Ben"}, {"state", "stop"}});
    EXPECT_TRUE(ana->wait_event([](const ChatEvent& e) { return is_text(e, "Koala", "done waiting"); }));
}

TEST(Server, OpenPolicySettingsChange) {
    ChatServer server(fast_config(), passing());
    auto ana = joined(server, "lab", "Ana");
    auto ben = joined(server, "lab", "Ben");
    ana->send(Json{{"type", "settings_set"}, {"name", "Ana"}, {"patch", {{"threshold", "high"}}}});
    const auto notice = ben->wait_event([](const ChatEvent& e) { return e.kind == EventKind::settings_change; });
    ASSERT_TRUE(notice);
    EXPECT_EQ((*notice)["text"], "Settings changed by Ana: threshold: medium -> high");
    const auto state = ben->wait_type("settings_state");
    ASSERT_TRUE(state);
    EXPECT_EQ((*state)["settings"]["threshold"], "high");
    ana->send(Json{{"type", "settings_set"}, {"name", "Ana"}, {"patch", {{"threshold", "loud"}}}});
    EXPECT_TRUE(ana->wait_error("invalid_patch"));
}

TEST(Server, AdminPolicyDenies) {
    auto config = fast_config();
    config.settings.governance.policy = GovernancePolicy::admin;
    config.settings.governance.admins = {"Ana"};
    ChatServer server(config, passing());
    auto ana = joined(server, "lab", "Ana");
    auto ben = joined(server, "lab", "Ben");
    ben->send(Json{{"type", "settings_set"}, {"name", "Ben"}, {"patch", {{"mode", "reactive"}}}});
    EXPECT_TRUE(ben->wait_error("denied"));
    EXPECT_EQ(server.settings("lab").mode, Mode::proactive);
    ana->send(Json{{"type", "preset_apply"}, {"name", "Ana"}, {"preset", "summarizer"}});
    EXPECT_TRUE(ben->wait_type("settings_state"));
    EXPECT_EQ(server.settings("lab").preset, "summarizer");
}

TEST(Server, VoteOverTheWire) {
    auto config = fast_config();
    config.settings.governance.policy = GovernancePolicy::vote;
    ChatServer server(config, passing());
    auto ana = joined(server, "lab", "Ana");
    auto ben = joined(server, "lab", "Ben");
    auto cy = joined(server, "lab", "Cy");
    ana->send(Json{{"type", "settings_set"}, {"name", "Ana"}, {"patch", {{"mode", "reactive"}}}});
    const auto opened = cy->wait_type("proposal_state");
    ASSERT_TRUE(opened);
    EXPECT_EQ((*opened)["proposal"]["state"], "open");
    EXPECT_EQ((*opened)["tally"], (Json{{"yes", 1}, {"no", 0}, {"eligible", 3}}));
    const int id = (*opened)["proposal"]["id"];

    cy->send(Json{{"type", "vote"}, {"name", "Cy"}, {"proposal_id", id + 1}, {"ballot", "yes"}});
    EXPECT_TRUE(cy->wait_error("unknown_proposal"));
    ben->send(Json{{"type", "vote"}, {"name", "Ben"}, {"proposal_id", id}, {"ballot", "yes"}});
    const auto state = cy->wait_type("settings_state");
    ASSERT_TRUE(state);
    EXPECT_EQ((*state)["settings"]["mode"], "reactive");
    const auto applied = cy->wait_type("proposal_state");
    ASSERT_TRUE(applied);
    EXPECT_EQ((*applied)["proposal"]["state"], "applied");
}

TEST(Server, EverySessionSeesTheSameOrder) {
    ChatServer server(fast_config(), passing());
    auto ana = joined(server, "lab", "Ana");
    auto ben = joined(server, "lab", "Ben");
    std::thread a([&] {
        for (int i = 0; i < 20; ++i) ana->send(post("Ana", "a" + std::to_string(i)));
    });
    std::thread b([&] {
        for (int i = 0; i < 20; ++i) ben->send(post("Ben", "b" + std::to_string(i)));
    });
    a.join();
    b.join();
    const auto last = [](const ChatEvent& e) { return e.text == "a19" || e.text == "b19"; };
    for (auto* c : {ana.get(), ben.get()}) {
        ASSERT_TRUE(c->wait_event(last));
        ASSERT_TRUE(c->wait_event(last));
    }
    const auto seqs = [](Client& c) {
        std::vector<std::pair<Seq, std::string>> out;
        for (const auto& f : c.all()) {
            if (f["type"] != "event") continue;
            const auto e = wire::event_from_frame(f);
            if (e.kind == EventKind::message) out.emplace_back(e.seq, *e.text);
        }
        return out;
    };
    const auto from_ana = seqs(*ana);
    EXPECT_EQ(from_ana.size(), 40u);
    EXPECT_EQ(from_ana, seqs(*ben));
    EXPECT_TRUE(std::is_sorted(from_ana.begin(), from_ana.end()));
}

TEST(Server, TcpLoopback) {
    ChatServer server(fast_config(), answering("over tcp"));
    const int port = server.listen("127.0.0.1", 0);
    ASSERT_GT(port, 0);
    Client ana(connect_tcp("127.0.0.1", port));
    ana.send(hello("lab", "Ana"));
    ASSERT_TRUE(ana.wait_event([](const ChatEvent& e) { return e.kind == EventKind::join; }));
    ana.send(post("Ana", "Koala, ping"));
    EXPECT_TRUE(ana.wait_event([](const ChatEvent& e) { return is_text(e, "Koala", "over tcp"); }));
    EXPECT_THROW(connect_tcp("127.0.0.1", 1), std::system_error);
}

TEST(Server, GarbageFromOneClientDoesNotHurtOthers) {
    ChatServer server(fast_config(), passing());
    auto ana = joined(server, "lab", "Ana");
    auto mallory = joined(server, "lab", "Mallory");
    std::mt19937_64 rng(42);
    const std::string alphabet = "{}[]\":,0123456789abcdefghijklmnopqrstuvwxyz \\\x01\xff";
    const std::vector<std::string> seeds = {
        R"({"type":"post","name":"Mallory","text":"x"})",
        R"({"type":"vote","name":"Mallory","proposal_id":1,"ballot":"yes"})",
        R"({"type":"settings_set","name":"Mallory","patch":{"rate":{"initial_delay_ms":-1}}})",
    };
    for (int i = 0; i < 500; ++i) {
        std::string line = seeds[rng() % seeds.size()];
        const int edits = 1 + static_cast<int>(rng() % 4);
        for (int k = 0; k < edits && !line.empty(); ++k) line[rng() % line.size()] = alphabet[rng() % alphabet.size()];
        mallory->send_raw(line);
    }
    mallory->send(post("Mallory", "done fuzzing"));
    ASSERT_TRUE(ana->wait_event([](const ChatEvent& e) { return is_text(e, "Mallory", "done fuzzing"); }, 20s));
    ana->send(post("Ana", "still fine"));
    EXPECT_TRUE(ana->wait_event([](const ChatEvent& e) { return is_text(e, "Ana", "still fine"); }));
    for (const auto& e : server.transcript("lab")) EXPECT_NO_THROW(validate_event_shape(e)) << to_jsonl(e);
}

TEST(Server, PersistsAcrossRestart) {
    const auto dir = scratch_dir("persist");
    auto config = fast_config();
    config.transcript_dir = dir;
    {
        ChatServer server(config, answering("remembered"));
        auto ana = joined(server, "lab", "Ana");
        ana->send(Json{{"type", "settings_set"}, {"name", "Ana"}, {"patch", {{"threshold", "low"}}}});
        ASSERT_TRUE(ana->wait_type("settings_state"));
        ana->send(post("Ana", "Koala, note this"));
        ASSERT_TRUE(ana->wait_event([](const ChatEvent& e) { return is_text(e, "Koala", "remembered"); }));
    }
    ASSERT_TRUE(std::filesystem::exists(dir / "lab.jsonl"));
    ASSERT_TRUE(std::filesystem::exists(dir / "lab.decisions.jsonl"));
    {
        ChatServer server(config, passing());
        auto ben = connect(server);
        ben->send(hello("lab", "Ben"));
        ASSERT_TRUE(ben->wait_event([](const ChatEvent& e) { return is_text(e, "Koala", "remembered"); }));
        const auto state = ben->wait_type("settings_state");
        ASSERT_TRUE(state);
        EXPECT_EQ((*state)["settings"]["threshold"], "low");
        ASSERT_TRUE(ben->wait_event([](const ChatEvent& e) { return e.kind == EventKind::join && e.author == "Ben"; }));
        const auto events = server.transcript("lab");
        for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i].seq, static_cast<Seq>(i + 1));
    }
    std::filesystem::remove_all(dir);
}

TEST(Server, BacklogLimit) {
    auto config = fast_config();
    config.backlog = 2;
    ChatServer server(config, passing());
    auto ana = joined(server, "lab", "Ana");
    for (int i = 0; i < 5; ++i) ana->send(post("Ana", "m" + std::to_string(i)));
    ASSERT_TRUE(ana->wait_event([](const ChatEvent& e) { return e.text == "m4"; }));
    auto ben = connect(server);
    ben->send(hello("lab", "Ben"));
    ASSERT_TRUE(ben->wait_type("settings_state"));
    const auto frames = ben->all();
    ASSERT_GE(frames.size(), 3u);
    EXPECT_EQ(frames[2]["type"], "settings_state");
    EXPECT_EQ(frames[0]["text"], "m3");
    EXPECT_EQ(frames[1]["text"], "m4");
}
