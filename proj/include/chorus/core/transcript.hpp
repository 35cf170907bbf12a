#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "chorus/core/types.hpp"

namespace chorus {

// Append-only event log for one room. Seqs are 1..N with no gaps.
//
// One logical writer per room; snapshot() and context_window() may be called
// from other threads while the owner appends.
class Transcript {
public:
    explicit Transcript(std::string room);

    // Binds the transcript to a JSONL file. Existing lines are loaded first,
    // later appends are written through.
    static std::unique_ptr<Transcript> open(std::string room, const std::filesystem::path& path);

    const std::string& room() const { return room_; }

    // Assigns the next seq and persists. The draft's seq is ignored; an empty
    // room field is filled in. Throws InvalidEvent and leaves the log unchanged
    // on any invariant violation.
    ChatEvent append(ChatEvent draft);

    // Last `max_events` message/reaction events in seq order, optionally
    // ignoring everything after `upto`.
    std::vector<ChatEvent> context_window(std::size_t max_events, std::optional<Seq> upto = std::nullopt) const;

    std::vector<ChatEvent> snapshot() const;
    std::vector<ChatEvent> tail(std::size_t count) const;
    std::optional<ChatEvent> find(Seq seq) const;
    Seq last_seq() const;
    std::size_t size() const;

private:
    void check_references(const ChatEvent& event) const;

    std::string room_;
    std::vector<ChatEvent> events_;
    std::optional<std::ofstream> sink_;
    mutable std::shared_mutex mutex_;
};

// Room id -> transcript. Cross-room operations are independent.
class TranscriptStore {
public:
    // Memory-only when `dir` is empty; otherwise each room lives at dir/<room>.jsonl.
    explicit TranscriptStore(std::filesystem::path dir = {});

    Transcript& create_room(const std::string& room);
    Transcript& get(const std::string& room);
    bool has_room(const std::string& room) const;

    ChatEvent append_event(const std::string& room, ChatEvent draft);
    std::vector<ChatEvent> context_window(const std::string& room, std::size_t max_events);

private:
    std::filesystem::path dir_;
    std::map<std::string, std::unique_ptr<Transcript>> rooms_;
    mutable std::mutex mutex_;
};

// Reads a JSONL transcript. Errors carry the 1-based line number.
std::vector<ChatEvent> read_jsonl_events(const std::filesystem::path& path);
std::vector<ChatEvent> parse_jsonl_events(std::string_view text);
void write_jsonl_events(const std::filesystem::path& path, const std::vector<ChatEvent>& events);
std::string to_jsonl(const std::vector<ChatEvent>& events);

}  // namespace chorus
