#include "chorus/core/transcript.hpp"

#include <sstream>

namespace chorus {

Transcript::Transcript(std::string room) : room_(std::move(room)) {}

std::unique_ptr<Transcript> Transcript::open(std::string room, const std::filesystem::path& path) {
    auto t = std::make_unique<Transcript>(std::move(room));
    if (std::filesystem::exists(path)) {
        for (auto& e : read_jsonl_events(path)) {
            if (e.room != t->room_) throw InvalidEvent("transcript " + path.string() + " holds room " + e.room);
            if (e.seq != t->last_seq() + 1) {
                throw InvalidEvent("transcript " + path.string() + " has a seq gap at " + std::to_string(e.seq));
            }
            t->check_references(e);
            t->events_.push_back(std::move(e));
        }
    }
    t->sink_.emplace(path, std::ios::app);
    if (!*t->sink_) throw std::runtime_error("cannot open transcript file " + path.string());
    return t;
}

void Transcript::check_references(const ChatEvent& event) const {
    if (!event.thread_of) return;
    const auto parent = *event.thread_of;
    if (parent < 1 || parent > static_cast<Seq>(events_.size()) ||
        events_[static_cast<std::size_t>(parent - 1)].kind != EventKind::message) {
        throw InvalidEvent("unknown parent " + std::to_string(parent));
    }
}

ChatEvent Transcript::append(ChatEvent draft) {
    if (draft.room.empty()) draft.room = room_;
    if (draft.room != room_) throw InvalidEvent("event room " + draft.room + " does not match " + room_);
    draft.seq = 0;
    validate_event_shape(draft);

    std::unique_lock lock(mutex_);
    check_references(draft);
    draft.seq = static_cast<Seq>(events_.size()) + 1;
    if (sink_) {
        *sink_ << to_jsonl(draft) << '\n';
        sink_->flush();
    }
    events_.push_back(draft);
    return draft;
}

std::vector<ChatEvent> Transcript::context_window(std::size_t max_events, std::optional<Seq> upto) const {
    if (max_events == 0) throw std::invalid_argument("context window must hold at least one event");
    std::shared_lock lock(mutex_);
    std::vector<ChatEvent> out;
    if (upto && *upto <= 0) return {};
    auto start = events_.rbegin();
    if (upto && *upto < static_cast<Seq>(events_.size())) start += static_cast<std::ptrdiff_t>(events_.size()) - *upto;
    for (auto it = start; it != events_.rend() && out.size() < max_events; ++it) {
        if (it->kind == EventKind::message || it->kind == EventKind::reaction) out.push_back(*it);
    }
    return {out.rbegin(), out.rend()};
}

std::vector<ChatEvent> Transcript::snapshot() const {
    std::shared_lock lock(mutex_);
    return events_;
}

std::vector<ChatEvent> Transcript::tail(std::size_t count) const {
    std::shared_lock lock(mutex_);
    const auto start = events_.size() > count ? events_.size() - count : 0;
    return {events_.begin() + static_cast<std::ptrdiff_t>(start), events_.end()};
}

std::optional<ChatEvent> Transcript::find(Seq seq) const {
    std::shared_lock lock(mutex_);
    if (seq < 1 || seq > static_cast<Seq>(events_.size())) return std::nullopt;
    return events_[static_cast<std::size_t>(seq - 1)];
}

Seq Transcript::last_seq() const {
    std::shared_lock lock(mutex_);
    return static_cast<Seq>(events_.size());
}

std::size_t Transcript::size() const {
    std::shared_lock lock(mutex_);
    return events_.size();
}

TranscriptStore::TranscriptStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

Transcript& TranscriptStore::create_room(const std::string& room) {
    std::lock_guard lock(mutex_);
    auto& slot = rooms_[room];
    if (!slot) {
        slot = dir_.empty() ? std::make_unique<Transcript>(room) : Transcript::open(room, dir_ / (room + ".jsonl"));
    }
    return *slot;
}

Transcript& TranscriptStore::get(const std::string& room) {
    std::lock_guard lock(mutex_);
    const auto it = rooms_.find(room);
    if (it == rooms_.end()) throw UnknownRoom(room);
    return *it->second;
}

bool TranscriptStore::has_room(const std::string& room) const {
    std::lock_guard lock(mutex_);
    return rooms_.contains(room);
}

ChatEvent TranscriptStore::append_event(const std::string& room, ChatEvent draft) {
    return get(room).append(std::move(draft));
}

std::vector<ChatEvent> TranscriptStore::context_window(const std::string& room, std::size_t max_events) {
    return get(room).context_window(max_events);
}

std::vector<ChatEvent> parse_jsonl_events(std::string_view text) {
    std::vector<ChatEvent> events;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        try {
            events.push_back(event_from_jsonl(line));
        } catch (const InvalidEvent& e) {
            throw InvalidEvent("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return events;
}

std::vector<ChatEvent> read_jsonl_events(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_jsonl_events(buf.str());
    } catch (const InvalidEvent& e) {
        throw InvalidEvent(path.string() + ": " + e.what());
    }
}

std::string to_jsonl(const std::vector<ChatEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        out += to_jsonl(e);
        out += '\n';
    }
    return out;
}

void write_jsonl_events(const std::filesystem::path& path, const std::vector<ChatEvent>& events) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_jsonl(events);
}

}  // namespace chorus
